//! Differentiable building blocks shared by every network in the model.

mod attention;
mod cnn;
mod gat;
mod grid;
mod lstm;
mod mlp;

pub use attention::PhysicalAttention;
pub use cnn::{ConvSpec, GridCnn};
pub use gat::{GatLayer, GatLayerSpec, GatStack};
pub use grid::FeatureGrid;
pub use lstm::{Lstm, LstmState};
pub use mlp::{Activation, Mlp, MlpSpec};

use rand::Rng;

use crate::autodiff::{ParameterStore, Tensor};
use crate::error::Result;
use crate::scalar::Scalar;

/// Registers `name` with entries drawn uniformly from `[-bound, bound]`.
pub(crate) fn init_uniform<T: Scalar, R: Rng + ?Sized>(
    store: &mut ParameterStore<T>,
    name: String,
    shape: Vec<usize>,
    bound: f64,
    rng: &mut R,
) -> Result<()> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.gen_range(-bound..=bound))).collect();
    store.insert(name, Tensor::new(shape, data)?)
}

pub(crate) fn init_zeros<T: Scalar>(store: &mut ParameterStore<T>, name: String, shape: Vec<usize>) -> Result<()> {
    store.insert(name, Tensor::zeros(shape))
}

/// Glorot-uniform bound for a `fan_in x fan_out` weight.
pub(crate) fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
