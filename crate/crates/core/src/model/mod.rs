//! The four networks: generator, local and global discriminators, latent encoder.
//!
//! Parameter prefixes: `gen.`, `disc.local.`, `disc.global.`, `enc.`. No weights
//! are shared between networks.

mod networks;
pub mod scene;

pub use networks::{
    future_steps, reparameterize, Generator, GlobalDiscriminator, LatentEncoder, LocalDiscriminator, Rollout,
    SocialEncoder, FULL_LEN,
};
pub use scene::{
    displacements, reconstruct, LatentCode, LatentDistribution, Point, PredictedScene, SceneSample, TrajectoryWindow,
    OBS_LEN, PRED_LEN, TIMESTEP,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParameterStore, Tensor};
use crate::error::Result;
use crate::scalar::Scalar;

pub const GENERATOR_PREFIX: &str = "gen.";
pub const ENCODER_PREFIX: &str = "enc.";
pub const DISCRIMINATOR_PREFIX: &str = "disc.";

/// Network widths. Defaults are the smallest sizes that keep every
/// concatenation non-trivial.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub encoder_hidden: usize,
    pub gat_dim: usize,
    pub gat_layers: usize,
    pub leaky_slope: f64,
    pub cnn_channels: Vec<usize>,
    pub cnn_kernel: usize,
    pub cnn_stride: usize,
    pub grid_channels: usize,
    pub attention_hidden: usize,
    pub latent_dim: usize,
    pub decoder_hidden: usize,
    pub discriminator_hidden: usize,
    pub latent_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 16,
            encoder_hidden: 32,
            gat_dim: 32,
            gat_layers: 2,
            leaky_slope: 0.2,
            cnn_channels: vec![8, 16],
            cnn_kernel: 3,
            cnn_stride: 2,
            grid_channels: 1,
            attention_hidden: 32,
            latent_dim: 8,
            decoder_hidden: 64,
            discriminator_hidden: 32,
            latent_hidden: 32,
        }
    }
}

impl ModelConfig {
    /// Narrow configuration for gradient checks and quick tests.
    pub fn tiny() -> Self {
        ModelConfig {
            embed_dim: 4,
            encoder_hidden: 5,
            gat_dim: 4,
            gat_layers: 2,
            leaky_slope: 0.2,
            cnn_channels: vec![2, 3],
            cnn_kernel: 3,
            cnn_stride: 2,
            grid_channels: 1,
            attention_hidden: 4,
            latent_dim: 3,
            decoder_hidden: 6,
            discriminator_hidden: 4,
            latent_hidden: 4,
        }
    }
}

/// All four networks of the model.
#[derive(Clone, Debug)]
pub struct SocialBiGat {
    pub config: ModelConfig,
    pub generator: Generator,
    pub local: LocalDiscriminator,
    pub global: GlobalDiscriminator,
    pub encoder: LatentEncoder,
}

impl SocialBiGat {
    pub fn new(config: ModelConfig) -> Result<Self> {
        Ok(SocialBiGat {
            generator: Generator::new(&config)?,
            local: LocalDiscriminator::new(&config)?,
            global: GlobalDiscriminator::new(&config)?,
            encoder: LatentEncoder::new(&config)?,
            config,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Fresh parameters drawn from a seeded generator.
    pub fn init_params<T: Scalar>(&self, seed: u64) -> Result<ParameterStore<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        self.generator.init(&mut store, &mut rng)?;
        self.local.init(&mut store, &mut rng)?;
        self.global.init(&mut store, &mut rng)?;
        self.encoder.init(&mut store, &mut rng)?;
        Ok(store)
    }

    /// Forward-only generator pass returning positions in meters.
    pub fn predict<T: Scalar>(&self, store: &ParameterStore<T>, scene: &SceneSample, z: &LatentCode) -> Result<PredictedScene> {
        let g = Graph::new();
        let zv = g.constant(Tensor::from_f64(vec![z.dim()], &z.0)?);
        let rollout = self.generator.forward(&g, store, scene, zv)?;
        Ok(PredictedScene {
            futures: scene::tensor_to_futures(&rollout.positions.to_f64_vec()),
            latent: z.clone(),
        })
    }

    /// Local and global discriminator probabilities for candidate futures.
    pub fn discriminate<T: Scalar>(
        &self,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        futures: &[[Point; PRED_LEN]],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = Graph::new();
        let f = g.constant(scene::futures_to_tensor(futures.iter()));
        let local = self.local.scores(&g, store, scene, f)?.to_f64_vec();
        let global = self.global.scores(&g, store, scene, f)?.to_f64_vec();
        Ok((local, global))
    }

    /// Scene posterior from the given futures.
    pub fn encode_latent<T: Scalar>(
        &self,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        futures: &[[Point; PRED_LEN]],
    ) -> Result<LatentDistribution> {
        let g = Graph::new();
        let f = g.constant(scene::futures_to_tensor(futures.iter()));
        let (mean, log_var) = self.encoder.encode(&g, store, scene, f)?;
        Ok(LatentDistribution {
            mean: mean.to_f64_vec(),
            log_var: log_var.to_f64_vec(),
        })
    }
}
