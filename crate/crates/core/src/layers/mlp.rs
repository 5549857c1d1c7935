use rand::Rng;

use super::{glorot, init_uniform, init_zeros};
use crate::autodiff::{Graph, ParameterStore, Value};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

impl Activation {
    pub fn apply<'g, T: Scalar>(self, x: Value<'g, T>) -> Result<Value<'g, T>> {
        match self {
            Activation::Relu => x.relu(),
            Activation::Tanh => x.tanh(),
            Activation::None => Ok(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    /// Input width followed by the width of every layer.
    pub widths: Vec<usize>,
    /// Applied between layers.
    pub activation: Activation,
    /// Applied after the last layer.
    pub final_activation: Activation,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, final_activation: Activation) -> Self {
        MlpSpec {
            widths,
            activation,
            final_activation,
        }
    }
}

/// Fully connected stack acting on the last axis of a vector or a batch of rows.
///
/// Weights are stored as `{prefix}.w{k}` with shape `[in, out]` and biases as
/// `{prefix}.b{k}`.
#[derive(Clone, Debug)]
pub struct Mlp {
    prefix: String,
    spec: MlpSpec,
}

impl Mlp {
    pub fn new(prefix: impl Into<String>, spec: MlpSpec) -> Result<Self> {
        if spec.widths.len() < 2 || spec.widths.contains(&0) {
            return Err(Error::Config(format!(
                "mlp needs at least two positive widths, got {:?}",
                spec.widths
            )));
        }
        Ok(Mlp {
            prefix: prefix.into(),
            spec,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.prefix)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.prefix)
    }

    pub fn layers(&self) -> usize {
        self.spec.widths.len() - 1
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        for (k, pair) in self.spec.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            init_uniform(store, self.weight_name(k), vec![fan_in, fan_out], glorot(fan_in, fan_out), rng)?;
            init_zeros(store, self.bias_name(k), vec![fan_out])?;
        }
        Ok(())
    }

    pub fn forward<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        input: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        let shape = input.shape();
        if shape.last() != Some(&self.input_dim()) || shape.len() > 2 {
            return Err(Error::dim("mlp", &shape, &[self.input_dim()]));
        }
        let mut x = if shape.len() == 1 {
            input.reshape(&[1, shape[0]])?
        } else {
            input
        };
        for k in 0..self.layers() {
            let w = g.param(store, &self.weight_name(k))?;
            let b = g.param(store, &self.bias_name(k))?;
            x = x.matmul(w)?.add(b)?;
            let act = if k + 1 == self.layers() {
                self.spec.final_activation
            } else {
                self.spec.activation
            };
            x = act.apply(x)?;
        }
        if shape.len() == 1 {
            x = x.reshape(&[self.output_dim()])?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_store(mlp: &Mlp) -> ParameterStore<f64> {
        let mut store = ParameterStore::new();
        mlp.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let names: Vec<String> = store.names().map(str::to_string).collect();
        for n in names {
            let shape = store.value(&n).unwrap().shape().to_vec();
            store.set_value(&n, Tensor::zeros(shape)).unwrap();
        }
        store
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mlp = Mlp::new("m", MlpSpec::new(vec![2, 4], Activation::Relu, Activation::None)).unwrap();
        let store = zero_store(&mlp);
        let g = Graph::new();
        let x = g.constant(Tensor::vector(vec![3.0, -7.0]));
        assert_eq!(mlp.forward(&g, &store, x).unwrap().to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn hand_set_weights_match_hand_evaluation() {
        // widths [2, 3, 1], relu between, no final activation.
        let mlp = Mlp::new("m", MlpSpec::new(vec![2, 3, 1], Activation::Relu, Activation::None)).unwrap();
        let mut store = zero_store(&mlp);
        store
            .set_value("m.w0", Tensor::new(vec![2, 3], vec![1.0, 0.0, -1.0, 0.0, 1.0, 1.0]).unwrap())
            .unwrap();
        store.set_value("m.b0", Tensor::vector(vec![0.5, 0.0, 0.0])).unwrap();
        store
            .set_value("m.w1", Tensor::new(vec![3, 1], vec![1.0, 2.0, 3.0]).unwrap())
            .unwrap();
        store.set_value("m.b1", Tensor::vector(vec![-1.0])).unwrap();
        let g = Graph::new();
        let x = g.constant(Tensor::vector(vec![2.0, -1.0]));
        // hidden = relu([2 + 0.5, -1, -2 - 1]) = [2.5, 0, 0]; out = 2.5 - 1
        assert_eq!(mlp.forward(&g, &store, x).unwrap().to_vec(), vec![1.5]);
    }

    #[test]
    fn batch_shape() {
        let mlp = Mlp::new("m", MlpSpec::new(vec![2, 4], Activation::Tanh, Activation::Tanh)).unwrap();
        let mut store = ParameterStore::<f64>::new();
        mlp.init(&mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let g = Graph::new();
        let x = g.constant(Tensor::zeros(vec![5, 2]));
        assert_eq!(mlp.forward(&g, &store, x).unwrap().shape(), vec![5, 4]);
    }

    #[test]
    fn width_mismatch_is_dimension_error() {
        let mlp = Mlp::new("m", MlpSpec::new(vec![3, 4], Activation::Tanh, Activation::None)).unwrap();
        let mut store = ParameterStore::<f64>::new();
        mlp.init(&mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let g = Graph::new();
        let x = g.constant(Tensor::zeros(vec![2]));
        assert!(matches!(mlp.forward(&g, &store, x), Err(Error::Dimension { .. })));
        assert!(Mlp::new("m", MlpSpec::new(vec![3], Activation::Tanh, Activation::None)).is_err());
    }
}
