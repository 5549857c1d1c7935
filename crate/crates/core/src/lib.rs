//! Multimodal pedestrian trajectory forecasting.
//!
//! A generator built from an LSTM social encoder, graph attention over all
//! pedestrians in a scene, soft attention over a rasterized scene grid and an
//! LSTM decoder is trained against a local and a global discriminator. A latent
//! encoder maps observed futures back to the noise space so that the
//! noise-to-trajectory mapping stays invertible and distinct codes give
//! distinct behaviours.
//!
//! The numerical core is generic over [`Scalar`] (`f32`, `f64`); the aliases
//! below fix it to `f64`, which is what training and evaluation use.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod layers;
pub mod model;
mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type Graph64 = autodiff::Graph<f64>;
pub type Graph32 = autodiff::Graph<f32>;
pub type ParameterStore64 = autodiff::ParameterStore<f64>;
pub type ParameterStore32 = autodiff::ParameterStore<f32>;
pub type Value64<'g> = autodiff::Value<'g, f64>;
