use rand::Rng;

use super::scene::{SceneSample, OBS_LEN, PRED_LEN};
use super::ModelConfig;
use crate::autodiff::{Graph, ParameterStore, Tensor, Value};
use crate::error::{Error, Result};
use crate::layers::{Activation, ConvSpec, FeatureGrid, GatStack, GridCnn, Lstm, LstmState, Mlp, MlpSpec, PhysicalAttention};
use crate::scalar::Scalar;

/// Displacement embedding followed by an LSTM; the final hidden state is the
/// per-pedestrian encoding.
#[derive(Clone, Debug)]
pub struct SocialEncoder {
    embed: Mlp,
    lstm: Lstm,
}

impl SocialEncoder {
    pub fn new(prefix: &str, embed_dim: usize, hidden: usize) -> Result<Self> {
        Ok(SocialEncoder {
            embed: Mlp::new(
                format!("{prefix}.emb"),
                MlpSpec::new(vec![2, embed_dim], Activation::Tanh, Activation::Tanh),
            )?,
            lstm: Lstm::new(format!("{prefix}.lstm_en"), embed_dim, hidden)?,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim()
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        self.embed.init(store, rng)?;
        self.lstm.init(store, rng)
    }

    /// Encodes displacement steps, each `[N, 2]`, into `[N, hidden]`.
    pub fn encode<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        steps: &[Value<'g, T>],
    ) -> Result<Value<'g, T>> {
        let n = steps
            .first()
            .ok_or_else(|| Error::contract("social encoder over an empty sequence"))?
            .shape()[0];
        let embedded = steps
            .iter()
            .map(|&s| self.embed.forward(g, store, s))
            .collect::<Result<Vec<_>>>()?;
        let (_, state) = self
            .lstm
            .forward(g, store, &embedded, LstmState::zeros(g, n, self.hidden_dim()))?;
        Ok(state.h)
    }
}

/// Per-step displacements `[N, 2]` of future positions `[N, 2 * PRED_LEN]`,
/// measured from the last observed positions `[N, 2]`.
pub fn future_steps<'g, T: Scalar>(last_observed: Value<'g, T>, future: Value<'g, T>) -> Result<Vec<Value<'g, T>>> {
    let shape = future.shape();
    if shape.len() != 2 || shape[1] != 2 * PRED_LEN || last_observed.shape() != [shape[0], 2] {
        return Err(Error::contract(format!(
            "candidate futures must be [N, {}] matching the scene, got {shape:?}",
            2 * PRED_LEN
        )));
    }
    let mut prev = last_observed;
    let mut steps = Vec::with_capacity(PRED_LEN);
    for t in 0..PRED_LEN {
        let p = future.slice(1, 2 * t, 2 * t + 2)?;
        steps.push(p.sub(prev)?);
        prev = p;
    }
    Ok(steps)
}

fn observed_steps<'g, T: Scalar>(g: &'g Graph<T>, scene: &SceneSample) -> Vec<Value<'g, T>> {
    scene.observed_steps().into_iter().map(|t| g.constant(t)).collect()
}

/// Observed then future displacement steps.
fn full_steps<'g, T: Scalar>(g: &'g Graph<T>, scene: &SceneSample, future: Value<'g, T>) -> Result<Vec<Value<'g, T>>> {
    let mut steps = observed_steps(g, scene);
    steps.extend(future_steps(g.constant(scene.last_observed()), future)?);
    Ok(steps)
}

/// Scene grid, or a zero grid of the CNN's receptive field when the scene has none.
fn scene_grid(scene: &SceneSample, cnn: &GridCnn) -> FeatureGrid {
    scene.grid.clone().unwrap_or_else(|| {
        let side = cnn.receptive_field();
        FeatureGrid::zeros(side, side, cnn.in_channels())
    })
}

fn build_cnn(prefix: &str, cfg: &ModelConfig) -> Result<GridCnn> {
    GridCnn::new(
        format!("{prefix}.cnn"),
        cfg.grid_channels,
        cfg.cnn_channels
            .iter()
            .map(|&c| ConvSpec {
                out_channels: c,
                kernel: cfg.cnn_kernel,
                stride: cfg.cnn_stride,
            })
            .collect(),
    )
}

/// Output of one generator pass.
#[derive(Clone, Debug)]
pub struct Rollout<'g, T: Scalar> {
    /// Emitted displacement per predicted step, each `[N, 2]`.
    pub displacements: Vec<Value<'g, T>>,
    /// Predicted positions `[N, 2 * PRED_LEN]`.
    pub positions: Value<'g, T>,
}

/// Encoders, social and physical attention, and the decoder LSTM.
#[derive(Clone, Debug)]
pub struct Generator {
    pub encoder: SocialEncoder,
    pub gat: GatStack,
    pub cnn: GridCnn,
    pub physical: PhysicalAttention,
    pub decoder_init: Mlp,
    pub decoder_embed: Mlp,
    pub decoder: Lstm,
    pub head: Mlp,
    latent_dim: usize,
}

impl Generator {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let p = "gen";
        let encoder = SocialEncoder::new(p, cfg.embed_dim, cfg.encoder_hidden)?;
        let gat = GatStack::uniform(&format!("{p}.gat"), cfg.encoder_hidden, cfg.gat_dim, cfg.gat_layers, cfg.leaky_slope)?;
        let cnn = build_cnn(p, cfg)?;
        let physical = PhysicalAttention::new(&format!("{p}.att_p"), cnn.output_channels(), cfg.encoder_hidden, cfg.attention_hidden)?;
        let context = cfg.encoder_hidden + gat.output_dim() + cnn.output_channels() + cfg.latent_dim;
        Ok(Generator {
            decoder_init: Mlp::new(
                format!("{p}.dec_init"),
                MlpSpec::new(vec![context, cfg.decoder_hidden], Activation::Tanh, Activation::Tanh),
            )?,
            decoder_embed: Mlp::new(
                format!("{p}.dec_emb"),
                MlpSpec::new(vec![2, cfg.embed_dim], Activation::Tanh, Activation::Tanh),
            )?,
            decoder: Lstm::new(format!("{p}.lstm_dec"), cfg.embed_dim, cfg.decoder_hidden)?,
            head: Mlp::new(
                format!("{p}.mlp_d"),
                MlpSpec::new(vec![cfg.decoder_hidden, 2], Activation::None, Activation::None),
            )?,
            encoder,
            gat,
            cnn,
            physical,
            latent_dim: cfg.latent_dim,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        self.encoder.init(store, rng)?;
        self.gat.init(store, rng)?;
        self.cnn.init(store, rng)?;
        self.physical.init(store, rng)?;
        self.decoder_init.init(store, rng)?;
        self.decoder_embed.init(store, rng)?;
        self.decoder.init(store, rng)?;
        self.head.init(store, rng)
    }

    /// Social encodings `[N, hidden]` of the observed past.
    pub fn encode_social<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
    ) -> Result<Value<'g, T>> {
        self.encoder.encode(g, store, &observed_steps(g, scene))
    }

    /// Concatenated decoder context `[V_s, C_s, C_p, z]`, shape `[N, context]`.
    pub fn context<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        z: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        if z.shape() != [self.latent_dim] {
            return Err(Error::dim("generator", &z.shape(), &[self.latent_dim]));
        }
        let social = self.encode_social(g, store, scene)?;
        let interaction = self.gat.forward(g, store, social)?;
        let cells = self.cnn.forward(g, store, &scene_grid(scene, &self.cnn))?;
        let physical = self.physical.forward(g, store, cells, social)?;
        Value::concat(&[social, interaction, physical, z.broadcast(scene.len())?], 1)
    }

    pub fn forward<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        z: Value<'g, T>,
    ) -> Result<Rollout<'g, T>> {
        let n = scene.len();
        let context = self.context(g, store, scene, z)?;
        let mut state = LstmState {
            h: self.decoder_init.forward(g, store, context)?,
            c: g.constant(Tensor::zeros(vec![n, self.decoder.hidden_dim()])),
        };
        let mut prev = g.constant(scene.last_observed_displacement());
        let mut position = g.constant(scene.last_observed());
        let mut displacements = Vec::with_capacity(PRED_LEN);
        let mut positions = Vec::with_capacity(PRED_LEN);
        for _ in 0..PRED_LEN {
            let input = self.decoder_embed.forward(g, store, prev)?;
            state = self.decoder.step(g, store, input, state)?;
            let d = self.head.forward(g, store, state.h)?;
            position = position.add(d)?;
            displacements.push(d);
            positions.push(position);
            prev = d;
        }
        Ok(Rollout {
            displacements,
            positions: Value::concat(&positions, 1)?,
        })
    }
}

/// Classifies each pedestrian's concatenated past and candidate future.
#[derive(Clone, Debug)]
pub struct LocalDiscriminator {
    pub encoder: SocialEncoder,
    pub classifier: Mlp,
}

impl LocalDiscriminator {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let p = "disc.local";
        Ok(LocalDiscriminator {
            encoder: SocialEncoder::new(p, cfg.embed_dim, cfg.encoder_hidden)?,
            classifier: Mlp::new(
                format!("{p}.clf"),
                MlpSpec::new(vec![cfg.encoder_hidden, cfg.discriminator_hidden, 1], Activation::Tanh, Activation::None),
            )?,
        })
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        self.encoder.init(store, rng)?;
        self.classifier.init(store, rng)
    }

    /// Pre-sigmoid scores `[N]` for candidate futures `[N, 2 * PRED_LEN]`.
    pub fn logits<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        future: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        let encoded = self.encoder.encode(g, store, &full_steps(g, scene, future)?)?;
        self.classifier.forward(g, store, encoded)?.reshape(&[scene.len()])
    }

    /// Probability `[N]` that each candidate is real.
    pub fn scores<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        future: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        self.logits(g, store, scene, future)?.sigmoid()
    }
}

/// Classifies each pedestrian's global context: its encoding of past and
/// candidate future, its social attention features, and its physical context.
#[derive(Clone, Debug)]
pub struct GlobalDiscriminator {
    pub encoder: SocialEncoder,
    pub gat: GatStack,
    pub cnn: GridCnn,
    pub physical: PhysicalAttention,
    pub classifier: Mlp,
}

impl GlobalDiscriminator {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let p = "disc.global";
        let encoder = SocialEncoder::new(p, cfg.embed_dim, cfg.encoder_hidden)?;
        let gat = GatStack::uniform(&format!("{p}.gat"), cfg.encoder_hidden, cfg.gat_dim, cfg.gat_layers, cfg.leaky_slope)?;
        let cnn = build_cnn(p, cfg)?;
        let physical = PhysicalAttention::new(&format!("{p}.att_p"), cnn.output_channels(), cfg.encoder_hidden, cfg.attention_hidden)?;
        let width = cfg.encoder_hidden + gat.output_dim() + cnn.output_channels();
        Ok(GlobalDiscriminator {
            classifier: Mlp::new(
                format!("{p}.clf"),
                MlpSpec::new(vec![width, cfg.discriminator_hidden, 1], Activation::Tanh, Activation::None),
            )?,
            encoder,
            gat,
            cnn,
            physical,
        })
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        self.encoder.init(store, rng)?;
        self.gat.init(store, rng)?;
        self.cnn.init(store, rng)?;
        self.physical.init(store, rng)?;
        self.classifier.init(store, rng)
    }

    pub fn logits<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        future: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        let social = self.encoder.encode(g, store, &full_steps(g, scene, future)?)?;
        let interaction = self.gat.forward(g, store, social)?;
        let cells = self.cnn.forward(g, store, &scene_grid(scene, &self.cnn))?;
        let physical = self.physical.forward(g, store, cells, social)?;
        let joint = Value::concat(&[social, interaction, physical], 1)?;
        self.classifier.forward(g, store, joint)?.reshape(&[scene.len()])
    }

    pub fn scores<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        future: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        self.logits(g, store, scene, future)?.sigmoid()
    }
}

/// Maps a scene's futures to one Gaussian over the latent code: per-pedestrian
/// heads for mean and log variance, max-pooled over pedestrians.
#[derive(Clone, Debug)]
pub struct LatentEncoder {
    pub encoder: SocialEncoder,
    pub trunk: Mlp,
    pub mean_head: Mlp,
    pub log_var_head: Mlp,
}

impl LatentEncoder {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let p = "enc";
        Ok(LatentEncoder {
            encoder: SocialEncoder::new(p, cfg.embed_dim, cfg.encoder_hidden)?,
            trunk: Mlp::new(
                format!("{p}.mlp_l"),
                MlpSpec::new(vec![cfg.encoder_hidden, cfg.latent_hidden], Activation::Tanh, Activation::Tanh),
            )?,
            mean_head: Mlp::new(
                format!("{p}.mlp_mu"),
                MlpSpec::new(vec![cfg.latent_hidden, cfg.latent_dim], Activation::None, Activation::None),
            )?,
            log_var_head: Mlp::new(
                format!("{p}.mlp_sigma"),
                MlpSpec::new(vec![cfg.latent_hidden, cfg.latent_dim], Activation::None, Activation::None),
            )?,
        })
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        self.encoder.init(store, rng)?;
        self.trunk.init(store, rng)?;
        self.mean_head.init(store, rng)?;
        self.log_var_head.init(store, rng)
    }

    /// Per-pedestrian `(mean, log_var)`, each `[N, latent]`, before pooling.
    pub fn heads<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        future: Value<'g, T>,
    ) -> Result<(Value<'g, T>, Value<'g, T>)> {
        if scene.is_empty() {
            return Err(Error::contract("latent encoder needs at least one pedestrian"));
        }
        let steps = future_steps(g.constant(scene.last_observed()), future)?;
        let trunk = self.trunk.forward(g, store, self.encoder.encode(g, store, &steps)?)?;
        Ok((
            self.mean_head.forward(g, store, trunk)?,
            self.log_var_head.forward(g, store, trunk)?,
        ))
    }

    /// Pooled `(mean, log_var)`, each `[latent]`.
    pub fn encode<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        scene: &SceneSample,
        future: Value<'g, T>,
    ) -> Result<(Value<'g, T>, Value<'g, T>)> {
        let (mean, log_var) = self.heads(g, store, scene, future)?;
        Ok((mean.max(0)?, log_var.max(0)?))
    }
}

/// Differentiable sample `mean + exp(log_var / 2) * eps`.
pub fn reparameterize<'g, T: Scalar>(mean: Value<'g, T>, log_var: Value<'g, T>, eps: &[f64]) -> Result<Value<'g, T>> {
    let eps = mean.graph().constant(Tensor::from_f64(vec![eps.len()], eps)?);
    mean.add(log_var.scale(T::lit(0.5))?.exp()?.mul(eps)?)
}

/// Length of the concatenated observed-plus-future sequence seen by discriminators.
pub const FULL_LEN: usize = OBS_LEN + PRED_LEN;
