use crate::autodiff::{Graph, ParameterStore, Tensor, Value};
use crate::error::{Error, Result};
use crate::model::{reparameterize, SceneSample, SocialBiGat, DISCRIMINATOR_PREFIX, ENCODER_PREFIX};
use crate::scalar::Scalar;

/// Weights of the combined generator objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_z: f64,
    pub lambda_traj: f64,
    pub lambda_kl: f64,
    /// Weight of the optional best-of-k term; zero disables it.
    pub lambda_variety: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_z: 0.5,
            lambda_traj: 10.0,
            lambda_kl: 0.01,
            lambda_variety: 0.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_z, self.lambda_traj, self.lambda_kl, self.lambda_variety];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!("loss weights must be finite and nonnegative: {self:?}")));
        }
        Ok(())
    }
}

/// Scalar loss values of one step, averaged over the scenes of the batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub gan1: f64,
    pub z: f64,
    pub gan2: f64,
    pub traj: f64,
    pub kl: f64,
    pub variety: f64,
    pub total: f64,
    pub disc_local: f64,
    pub disc_global: f64,
}

impl LossReport {
    /// Weighted generator objective from the individual terms.
    pub fn combine(&self, w: &LossWeights) -> f64 {
        self.gan1 + w.lambda_z * self.z + self.gan2 + w.lambda_traj * self.traj + w.lambda_kl * self.kl
            + w.lambda_variety * self.variety
    }

    /// One comma-separated log line.
    pub fn csv_row(&self, step: usize) -> String {
        format!(
            "{step},{},{},{},{},{},{},{},{},{}",
            self.gan1, self.z, self.gan2, self.traj, self.kl, self.variety, self.disc_local, self.disc_global, self.total
        )
    }

    pub const CSV_HEADER: &'static str = "step,L_gan1,L_z,L_gan2,L_traj,L_kl,L_variety,D_local,D_global,total";

    pub(crate) fn add_scaled(&mut self, other: &LossReport, s: f64) {
        self.gan1 += s * other.gan1;
        self.z += s * other.z;
        self.gan2 += s * other.gan2;
        self.traj += s * other.traj;
        self.kl += s * other.kl;
        self.variety += s * other.variety;
        self.total += s * other.total;
        self.disc_local += s * other.disc_local;
        self.disc_global += s * other.disc_global;
    }
}

/// Mean binary cross-entropy of `sigmoid(logits)` against a constant label,
/// computed through softplus so saturated logits stay finite.
pub fn bce_with_logits<'g, T: Scalar>(logits: Value<'g, T>, real: bool) -> Result<Value<'g, T>> {
    let signed = if real { logits.neg()? } else { logits };
    signed.softplus()?.mean_all()
}

/// Closed-form `KL(N(mean, exp(log_var)) || N(0, I))`.
pub fn kl_divergence<'g, T: Scalar>(mean: Value<'g, T>, log_var: Value<'g, T>) -> Result<Value<'g, T>> {
    mean.square()?
        .add(log_var.exp()?)?
        .sub(log_var)?
        .offset(-T::one())?
        .sum_all()?
        .scale(T::lit(0.5))
}

/// `|a - b|_1` over all entries.
pub fn l1_distance<'g, T: Scalar>(a: Value<'g, T>, b: Value<'g, T>) -> Result<Value<'g, T>> {
    let d = a.sub(b)?;
    let n = d.shape().iter().product();
    d.reshape(&[1, n])?.l1_norm(1)?.sum_all()
}

/// Mean over pedestrians of the Euclidean norm of each whole predicted path
/// error; both inputs are `[N, 2 * PRED_LEN]`.
pub fn trajectory_l2<'g, T: Scalar>(pred: Value<'g, T>, truth: Value<'g, T>) -> Result<Value<'g, T>> {
    pred.sub(truth)?.l2_norm(1)?.mean_all()
}

/// Sum of the two discriminators' BCE for candidates labelled real.
fn fool_both<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    fake: Value<'g, T>,
) -> Result<Value<'g, T>> {
    let local = model.local.logits(g, store, scene, fake)?;
    let global = model.global.logits(g, store, scene, fake)?;
    bce_with_logits(local, true)?.add(bce_with_logits(global, true)?)
}

/// Terms of the noise path: `(L_gan1, L_z, Ŷ)`.
pub struct NoisePath<'g, T: Scalar> {
    pub gan: Value<'g, T>,
    pub z: Value<'g, T>,
    pub fake: Value<'g, T>,
}

/// Generator driven by a drawn code `z`; the latent encoder must recover `z`
/// from the result. With `encoder_learns_z` false the encoder weights are
/// constants inside `L_z`, so only the generator learns from it.
pub fn loss_path_noise<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    z: &[f64],
    encoder_learns_z: bool,
) -> Result<NoisePath<'g, T>> {
    let zv = g.constant(Tensor::from_f64(vec![z.len()], z)?);
    let fake = model.generator.forward(g, store, scene, zv)?.positions;
    let gan = fool_both(model, g, store, scene, fake)?;
    let recover = || -> Result<Value<'g, T>> {
        let (mean, _) = model.encoder.encode(g, store, scene, fake)?;
        l1_distance(mean, zv)
    };
    let z = if encoder_learns_z {
        recover()?
    } else {
        g.with_frozen(ENCODER_PREFIX, recover)?
    };
    Ok(NoisePath { gan, z, fake })
}

/// Terms of the trajectory path.
pub struct TrajectoryPath<'g, T: Scalar> {
    pub gan: Value<'g, T>,
    pub traj: Value<'g, T>,
    pub kl: Value<'g, T>,
    pub fake: Value<'g, T>,
}

/// Ground truth encoded to a posterior, sampled with `eps`, decoded again.
pub fn loss_path_trajectory<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    eps: &[f64],
) -> Result<TrajectoryPath<'g, T>> {
    let truth = g.constant(scene.future_tensor());
    let (mean, log_var) = model.encoder.encode(g, store, scene, truth)?;
    let z = reparameterize(mean, log_var, eps)?;
    let fake = model.generator.forward(g, store, scene, z)?.positions;
    Ok(TrajectoryPath {
        gan: fool_both(model, g, store, scene, fake)?,
        traj: trajectory_l2(fake, truth)?,
        kl: kl_divergence(mean, log_var)?,
        fake,
    })
}

/// Discriminator objectives `(local, global)`: half the sum of the real-label
/// BCE on ground truth and the fake-label BCE averaged over `fakes`. Fakes are
/// detached, so no gradient reaches the generator.
pub fn discriminator_losses<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    fakes: &[Value<'g, T>],
) -> Result<(Value<'g, T>, Value<'g, T>)> {
    if fakes.is_empty() {
        return Err(Error::contract("discriminator loss needs at least one generated sample"));
    }
    let truth = g.constant(scene.future_tensor());
    let half = T::lit(0.5);
    let per_fake = T::lit(1.0 / fakes.len() as f64);
    let mut out = Vec::with_capacity(2);
    for local in [true, false] {
        let logits = |f: Value<'g, T>| {
            if local {
                model.local.logits(g, store, scene, f)
            } else {
                model.global.logits(g, store, scene, f)
            }
        };
        let real = bce_with_logits(logits(truth)?, true)?;
        let mut fake = bce_with_logits(logits(fakes[0].detach())?, false)?;
        for f in &fakes[1..] {
            fake = fake.add(bce_with_logits(logits(f.detach())?, false)?)?;
        }
        out.push(real.add(fake.scale(per_fake)?)?.scale(half)?);
    }
    Ok((out[0], out[1]))
}

/// Minimum over the given codes of the trajectory error against ground truth.
pub fn variety_loss<'g, T: Scalar>(
    model: &SocialBiGat,
    g: &'g Graph<T>,
    store: &ParameterStore<T>,
    scene: &SceneSample,
    codes: &[Vec<f64>],
) -> Result<Value<'g, T>> {
    if codes.is_empty() {
        return Err(Error::contract("variety loss needs k >= 1"));
    }
    let truth = g.constant(scene.future_tensor());
    let errors = codes
        .iter()
        .map(|z| {
            let zv = g.constant(Tensor::from_f64(vec![z.len()], z)?);
            trajectory_l2(model.generator.forward(g, store, scene, zv)?.positions, truth)?.reshape(&[1])
        })
        .collect::<Result<Vec<_>>>()?;
    Value::concat(&errors, 0)?.min(0)?.reshape(&[])
}

/// Keeps discriminator weights constant while `f` runs.
pub(crate) fn without_discriminators<'g, T: Scalar, R>(g: &'g Graph<T>, f: impl FnOnce() -> R) -> R {
    g.with_frozen(DISCRIMINATOR_PREFIX, f)
}
