use rand::Rng;

use super::{glorot, init_uniform};
use crate::autodiff::{Graph, ParameterStore, Value};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GatLayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Negative slope of the leaky ReLU on attention logits, in (0, 1).
    pub slope: f64,
}

impl GatLayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, slope: f64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config("gat dimensions must be positive".into()));
        }
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::Config(format!("gat leaky slope {slope} outside (0, 1)")));
        }
        Ok(GatLayerSpec { in_dim, out_dim, slope })
    }
}

/// Single-head graph attention over a fully connected node set, self edges included.
///
/// With `h = V W`, logits are `e_ij = leaky_relu(a . [h_i || h_j])`, weights are
/// a row softmax of `e`, and row `i` of the output is `sum_j alpha_ij h_j`. The
/// sums over neighbours run in value order, so permuting the nodes permutes the
/// output rows bit for bit.
#[derive(Clone, Debug)]
pub struct GatLayer {
    prefix: String,
    spec: GatLayerSpec,
}

impl GatLayer {
    pub fn new(prefix: impl Into<String>, spec: GatLayerSpec) -> Self {
        GatLayer {
            prefix: prefix.into(),
            spec,
        }
    }

    pub fn spec(&self) -> GatLayerSpec {
        self.spec
    }

    pub fn weight_name(&self) -> String {
        format!("{}.w", self.prefix)
    }

    pub fn attention_name(&self) -> String {
        format!("{}.a", self.prefix)
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        let GatLayerSpec { in_dim, out_dim, .. } = self.spec;
        init_uniform(store, self.weight_name(), vec![in_dim, out_dim], glorot(in_dim, out_dim), rng)?;
        init_uniform(store, self.attention_name(), vec![2 * out_dim], glorot(2 * out_dim, 1), rng)
    }

    /// Attention matrix `[N, N]` and transformed features `[N, out]`.
    pub fn attention<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        nodes: Value<'g, T>,
    ) -> Result<(Value<'g, T>, Value<'g, T>)> {
        let shape = nodes.shape();
        if shape.len() != 2 || shape[1] != self.spec.in_dim || shape[0] == 0 {
            return Err(Error::dim("gat", &shape, &[self.spec.in_dim]));
        }
        let n = shape[0];
        let out = self.spec.out_dim;
        let h = nodes.matmul(g.param(store, &self.weight_name())?)?;
        let a = g.param(store, &self.attention_name())?;
        let a_src = a.slice(0, 0, out)?.reshape(&[out, 1])?;
        let a_dst = a.slice(0, out, 2 * out)?.reshape(&[out, 1])?;
        let src = h.matmul(a_src)?.reshape(&[n])?;
        let dst = h.matmul(a_dst)?.reshape(&[n])?;
        // logits[i][j] = src[i] + dst[j]
        let logits = src.broadcast(n)?.transpose()?.add(dst.broadcast(n)?)?;
        let alpha = logits.leaky_relu(T::lit(self.spec.slope))?.softmax(1)?;
        Ok((alpha, h))
    }

    pub fn forward<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        nodes: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        let (alpha, h) = self.attention(g, store, nodes)?;
        alpha.matmul_canonical(h)
    }
}

/// Stacked GAT layers with ELU between layers and nothing after the last.
#[derive(Clone, Debug)]
pub struct GatStack {
    layers: Vec<GatLayer>,
}

impl GatStack {
    pub fn new(layers: Vec<GatLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("gat stack needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].spec.out_dim != pair[1].spec.in_dim {
                return Err(Error::dim(
                    "gat_stack",
                    &[pair[0].spec.out_dim],
                    &[pair[1].spec.in_dim],
                ));
            }
        }
        Ok(GatStack { layers })
    }

    /// `depth` layers of equal width under `{prefix}.{k}`.
    pub fn uniform(prefix: &str, in_dim: usize, width: usize, depth: usize, slope: f64) -> Result<Self> {
        let mut layers = Vec::with_capacity(depth);
        for k in 0..depth {
            let d_in = if k == 0 { in_dim } else { width };
            layers.push(GatLayer::new(format!("{prefix}.{k}"), GatLayerSpec::new(d_in, width, slope)?));
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[GatLayer] {
        &self.layers
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().spec.out_dim
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        self.layers.iter().try_for_each(|l| l.init(store, rng))
    }

    pub fn forward<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        nodes: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        let mut x = nodes;
        for (k, layer) in self.layers.iter().enumerate() {
            if k > 0 {
                x = x.elu()?;
            }
            x = layer.forward(g, store, x)?;
        }
        Ok(x)
    }
}
