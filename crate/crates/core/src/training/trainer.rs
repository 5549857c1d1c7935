use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adam::{adam_step, OptimizerConfig};
use super::losses::{
    discriminator_losses, l1_distance, loss_path_noise, loss_path_trajectory, variety_loss, without_discriminators,
    LossReport, LossWeights,
};
use crate::autodiff::{Graph, ParameterStore, Tensor, Value};
use crate::error::{Error, Result};
use crate::model::{reparameterize, SceneSample, SocialBiGat, DISCRIMINATOR_PREFIX, ENCODER_PREFIX, GENERATOR_PREFIX};
use crate::scalar::Scalar;

/// Everything that controls a training step besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
    /// Whether `L_z` also updates the latent encoder (the literal joint
    /// objective) or only the generator.
    pub encoder_learns_z: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
            encoder_learns_z: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.optimizer.validate()
    }
}

/// Standard normal vector of length `dim`.
pub fn draw_normal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random draws a scene needs for one step.
#[derive(Clone, Debug)]
struct Draws {
    z: Vec<f64>,
    eps: Vec<f64>,
    variety: Vec<Vec<f64>>,
}

fn draws<R: Rng + ?Sized>(rng: &mut R, dim: usize, config: &TrainConfig) -> Draws {
    let z = draw_normal(rng, dim);
    let eps = draw_normal(rng, dim);
    let variety = if config.weights.lambda_variety > 0.0 {
        (0..config.optimizer.variety_k).map(|_| draw_normal(rng, dim)).collect()
    } else {
        Vec::new()
    };
    Draws { z, eps, variety }
}

/// Weighted generator objective of one scene plus the individual terms.
fn generator_objective<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    d: &Draws,
    config: &TrainConfig,
) -> Result<(Value<'g, T>, LossReport)> {
    without_discriminators(g, || {
        let w = &config.weights;
        let noise = loss_path_noise(model, g, store, scene, &d.z, config.encoder_learns_z)?;
        let traj = loss_path_trajectory(model, g, store, scene, &d.eps)?;
        let mut total = noise
            .gan
            .add(noise.z.scale(T::lit(w.lambda_z))?)?
            .add(traj.gan)?
            .add(traj.traj.scale(T::lit(w.lambda_traj))?)?
            .add(traj.kl.scale(T::lit(w.lambda_kl))?)?;
        let mut variety = 0.0;
        if !d.variety.is_empty() {
            let v = variety_loss(model, g, store, scene, &d.variety)?;
            variety = v.item().as_f64();
            total = total.add(v.scale(T::lit(w.lambda_variety))?)?;
        }
        let report = LossReport {
            gan1: noise.gan.item().as_f64(),
            z: noise.z.item().as_f64(),
            gan2: traj.gan.item().as_f64(),
            traj: traj.traj.item().as_f64(),
            kl: traj.kl.item().as_f64(),
            variety,
            total: total.item().as_f64(),
            ..LossReport::default()
        };
        Ok((total, report))
    })
}

/// Discriminator objective of one scene, with generator and encoder frozen.
fn discriminator_objective<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    d: &Draws,
) -> Result<(Value<'g, T>, f64, f64)> {
    let fakes = g.with_frozen(GENERATOR_PREFIX, || {
        g.with_frozen(ENCODER_PREFIX, || -> Result<Vec<Value<'g, T>>> {
            let z = g.constant(Tensor::from_f64(vec![d.z.len()], &d.z)?);
            let from_noise = model.generator.forward(g, store, scene, z)?.positions;
            let (mean, log_var) = model.encoder.encode(g, store, scene, g.constant(scene.future_tensor()))?;
            let z2 = reparameterize(mean, log_var, &d.eps)?;
            let from_truth = model.generator.forward(g, store, scene, z2)?.positions;
            Ok(vec![from_noise, from_truth])
        })
    })?;
    let (local, global) = discriminator_losses(model, g, store, scene, &fakes)?;
    Ok((local.add(global)?, local.item().as_f64(), global.item().as_f64()))
}

/// One alternating update on `batch`: both discriminators first, then the
/// generator and latent encoder jointly. Returns losses averaged over scenes.
pub fn train_step<T: Scalar, R: Rng + ?Sized>(
    model: &SocialBiGat,
    store: &mut ParameterStore<T>,
    batch: &[SceneSample],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(Error::contract("training batch is empty"));
    }
    let all: Vec<Draws> = batch.iter().map(|_| draws(rng, model.latent_dim(), config)).collect();
    let scale = 1.0 / batch.len() as f64;
    let mut report = LossReport::default();

    store.clear_grads();
    for (scene, d) in batch.iter().zip(&all) {
        let g = Graph::new();
        let (loss, local, global) = discriminator_objective(model, &g, store, scene, d)?;
        g.backward(loss)?;
        g.accumulate_param_grads(store, T::lit(scale))?;
        report.disc_local += scale * local;
        report.disc_global += scale * global;
    }
    adam_step(store, &config.optimizer, config.optimizer.lr_discriminator, &[DISCRIMINATOR_PREFIX])?;

    store.clear_grads();
    for (scene, d) in batch.iter().zip(&all) {
        let g = Graph::new();
        let (loss, part) = generator_objective(model, &g, store, scene, d, config)?;
        g.backward(loss)?;
        g.accumulate_param_grads(store, T::lit(scale))?;
        report.add_scaled(&part, scale);
    }
    adam_step(
        store,
        &config.optimizer,
        config.optimizer.lr_generator,
        &[GENERATOR_PREFIX, ENCODER_PREFIX],
    )?;
    store.clear_grads();
    Ok(report)
}

/// Generator objective of one scene for fixed draws, exposed for gradient checks.
pub fn generator_loss<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    z: &[f64],
    eps: &[f64],
    config: &TrainConfig,
) -> Result<Value<'g, T>> {
    let d = Draws {
        z: z.to_vec(),
        eps: eps.to_vec(),
        variety: Vec::new(),
    };
    Ok(generator_objective(model, g, store, scene, &d, config)?.0)
}

/// Mean over scenes of `|E(G(z)).mean - z|_1` for fresh codes: how well the
/// latent encoder recovers the noise that produced a sample.
pub fn latent_recovery_error<T: Scalar, R: Rng + ?Sized>(
    model: &SocialBiGat,
    store: &ParameterStore<T>,
    scenes: &[SceneSample],
    draws_per_scene: usize,
    rng: &mut R,
) -> Result<f64> {
    if scenes.is_empty() || draws_per_scene == 0 {
        return Err(Error::contract("latent recovery needs scenes and draws"));
    }
    let mut sum = 0.0;
    for scene in scenes {
        for _ in 0..draws_per_scene {
            let z = draw_normal(rng, model.latent_dim());
            let g = Graph::new();
            let zv = g.constant(Tensor::from_f64(vec![z.len()], &z)?);
            let fake = model.generator.forward(&g, store, scene, zv)?.positions;
            let (mean, _) = model.encoder.encode(&g, store, scene, fake)?;
            sum += l1_distance(mean, zv)?.item().as_f64();
        }
    }
    Ok(sum / (scenes.len() * draws_per_scene) as f64)
}

/// Runs training steps over shuffled batches, reshuffling each epoch.
pub struct Trainer {
    pub model: SocialBiGat,
    pub config: TrainConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    steps_done: usize,
}

impl Trainer {
    pub fn new(model: SocialBiGat, config: TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            model,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: Vec::new(),
            cursor: 0,
            steps_done: 0,
        })
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    fn next_batch(&mut self, scenes: &[SceneSample]) -> Vec<SceneSample> {
        let size = self.config.optimizer.batch_scenes.min(scenes.len());
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor >= self.order.len() || self.order.len() != scenes.len() {
                self.order = (0..scenes.len()).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(scenes[self.order[self.cursor]].clone());
            self.cursor += 1;
        }
        batch
    }

    /// Runs `steps` steps; `on_step` sees the 1-based step number, its report
    /// and the updated store.
    pub fn run<T: Scalar>(
        &mut self,
        store: &mut ParameterStore<T>,
        scenes: &[SceneSample],
        steps: usize,
        mut on_step: impl FnMut(usize, &LossReport, &ParameterStore<T>) -> Result<()>,
    ) -> Result<Vec<LossReport>> {
        if scenes.is_empty() {
            return Err(Error::contract("no training scenes"));
        }
        let mut reports = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch = self.next_batch(scenes);
            let report = train_step(&self.model, store, &batch, &self.config, &mut self.rng)?;
            self.steps_done += 1;
            on_step(self.steps_done, &report, store)?;
            reports.push(report);
        }
        Ok(reports)
    }
}
