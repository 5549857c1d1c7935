use rand::Rng;

use super::{init_uniform, init_zeros};
use crate::autodiff::{Graph, ParameterStore, Tensor, Value};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hidden and cell state for a batch of sequences, `[batch, hidden]` each.
#[derive(Clone, Copy, Debug)]
pub struct LstmState<'g, T: Scalar> {
    pub h: Value<'g, T>,
    pub c: Value<'g, T>,
}

impl<'g, T: Scalar> LstmState<'g, T> {
    pub fn zeros(g: &'g Graph<T>, batch: usize, hidden: usize) -> Self {
        LstmState {
            h: g.constant(Tensor::zeros(vec![batch, hidden])),
            c: g.constant(Tensor::zeros(vec![batch, hidden])),
        }
    }
}

/// Standard LSTM cell. Gate columns are ordered input, forget, candidate, output.
#[derive(Clone, Debug)]
pub struct Lstm {
    prefix: String,
    input_dim: usize,
    hidden_dim: usize,
}

impl Lstm {
    pub fn new(prefix: impl Into<String>, input_dim: usize, hidden_dim: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Config("lstm dimensions must be positive".into()));
        }
        Ok(Lstm {
            prefix: prefix.into(),
            input_dim,
            hidden_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn param_names(&self) -> [String; 3] {
        [
            format!("{}.w_ih", self.prefix),
            format!("{}.w_hh", self.prefix),
            format!("{}.b", self.prefix),
        ]
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        let [w_ih, w_hh, b] = self.param_names();
        let bound = 1.0 / (self.hidden_dim as f64).sqrt();
        let gates = 4 * self.hidden_dim;
        init_uniform(store, w_ih, vec![self.input_dim, gates], bound, rng)?;
        init_uniform(store, w_hh, vec![self.hidden_dim, gates], bound, rng)?;
        init_zeros(store, b, vec![gates])
    }

    /// One timestep for a batch `x: [batch, input_dim]`.
    pub fn step<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        x: Value<'g, T>,
        state: LstmState<'g, T>,
    ) -> Result<LstmState<'g, T>> {
        let shape = x.shape();
        if shape.len() != 2 || shape[1] != self.input_dim {
            return Err(Error::dim("lstm", &shape, &[self.input_dim]));
        }
        let [w_ih, w_hh, b] = self.param_names();
        let pre = x
            .matmul(g.param(store, &w_ih)?)?
            .add(state.h.matmul(g.param(store, &w_hh)?)?)?
            .add(g.param(store, &b)?)?;
        let h = self.hidden_dim;
        let input = pre.slice(1, 0, h)?.sigmoid()?;
        let forget = pre.slice(1, h, 2 * h)?.sigmoid()?;
        let candidate = pre.slice(1, 2 * h, 3 * h)?.tanh()?;
        let output = pre.slice(1, 3 * h, 4 * h)?.sigmoid()?;
        let c = forget.mul(state.c)?.add(input.mul(candidate)?)?;
        let h = output.mul(c.tanh()?)?;
        Ok(LstmState { h, c })
    }

    /// Runs the cell over `inputs`, returning every hidden output and the final state.
    pub fn forward<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        inputs: &[Value<'g, T>],
        initial: LstmState<'g, T>,
    ) -> Result<(Vec<Value<'g, T>>, LstmState<'g, T>)> {
        if inputs.is_empty() {
            return Err(Error::contract("lstm over an empty sequence"));
        }
        let mut state = initial;
        let mut outputs = Vec::with_capacity(inputs.len());
        for &x in inputs {
            state = self.step(g, store, x, state)?;
            outputs.push(state.h);
        }
        Ok((outputs, state))
    }
}
