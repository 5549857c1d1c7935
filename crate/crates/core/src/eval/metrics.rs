use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::ParameterStore;
use crate::error::{Error, Result};
use crate::model::{LatentCode, Point, SceneSample, SocialBiGat, PRED_LEN};
use crate::scalar::Scalar;
use crate::training::draw_normal;

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn check_lengths(pred: &[Point], truth: &[Point]) -> Result<()> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::contract(format!(
            "prediction has {} steps, ground truth {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Mean Euclidean distance over timesteps.
pub fn ade(pred: &[Point], truth: &[Point]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| dist(*p, *t)).sum::<f64>() / pred.len() as f64)
}

/// Euclidean distance at the last timestep.
pub fn fde(pred: &[Point], truth: &[Point]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(dist(pred[pred.len() - 1], truth[truth.len() - 1]))
}

/// How the best of several samples is chosen per pedestrian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pairing {
    /// FDE is reported from the sample with the lowest ADE.
    #[default]
    MinAde,
    /// ADE and FDE are minimized separately.
    Independent,
}

/// Best-of-`samples` `(ade, fde)` for one scene, averaged over pedestrians.
/// `samples[s][i]` is sample `s` for pedestrian `i`.
pub fn scene_best_of(samples: &[Vec<[Point; PRED_LEN]>], scene: &SceneSample, pairing: Pairing) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::contract("best-of-k needs k >= 1"));
    }
    let n = scene.len();
    let (mut sum_ade, mut sum_fde) = (0.0, 0.0);
    for (i, ped) in scene.pedestrians.iter().enumerate() {
        let mut best: Option<(f64, f64)> = None;
        let mut best_fde = f64::INFINITY;
        for s in samples {
            let pred = s
                .get(i)
                .ok_or_else(|| Error::contract(format!("sample covers {} of {n} pedestrians", s.len())))?;
            let a = ade(pred, &ped.future)?;
            let f = fde(pred, &ped.future)?;
            if best.map_or(true, |(ba, _)| a < ba) {
                best = Some((a, f));
            }
            best_fde = best_fde.min(f);
        }
        let (a, f) = best.expect("nonempty samples");
        sum_ade += a;
        sum_fde += match pairing {
            Pairing::MinAde => f,
            Pairing::Independent => best_fde,
        };
    }
    Ok((sum_ade / n as f64, sum_fde / n as f64))
}

/// Aggregate metrics of one scene set.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricResult {
    pub scene: String,
    pub k: usize,
    pub ade: f64,
    pub fde: f64,
    pub n_pedestrians: usize,
}

pub const METRICS_CSV_HEADER: &str = "scene,k,ade,fde,n_pedestrians";

/// Evaluates a sampler over `scenes`: per scene the best of `k` samples,
/// averaged over pedestrians, then over scenes.
pub fn evaluate_with(
    name: &str,
    scenes: &[SceneSample],
    k: usize,
    pairing: Pairing,
    mut sample: impl FnMut(usize, &SceneSample) -> Result<Vec<Vec<[Point; PRED_LEN]>>>,
) -> Result<MetricResult> {
    if k == 0 {
        return Err(Error::contract("best-of-k needs k >= 1"));
    }
    if scenes.is_empty() {
        return Err(Error::contract(format!("no scenes to evaluate in `{name}`")));
    }
    let (mut ade_sum, mut fde_sum, mut peds) = (0.0, 0.0, 0);
    for (idx, scene) in scenes.iter().enumerate() {
        let samples = sample(idx, scene)?;
        let (a, f) = scene_best_of(&samples, scene, pairing)?;
        ade_sum += a;
        fde_sum += f;
        peds += scene.len();
    }
    Ok(MetricResult {
        scene: name.to_string(),
        k,
        ade: ade_sum / scenes.len() as f64,
        fde: fde_sum / scenes.len() as f64,
        n_pedestrians: peds,
    })
}

/// Latent codes for scene `scene_index`: drawn sequentially from a stream
/// seeded by `(seed, scene_index)`, so the first `k` codes do not depend on
/// how many are requested.
pub fn latent_draws(seed: u64, scene_index: usize, k: usize, dim: usize) -> Vec<LatentCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scene_index as u64);
    (0..k).map(|_| LatentCode(draw_normal(&mut rng, dim))).collect()
}

/// Generator samples for every scene with nested latent draws.
pub fn evaluate_best_of_k<T: Scalar>(
    model: &SocialBiGat,
    store: &ParameterStore<T>,
    name: &str,
    scenes: &[SceneSample],
    k: usize,
    seed: u64,
    pairing: Pairing,
) -> Result<MetricResult> {
    evaluate_with(name, scenes, k, pairing, |idx, scene| {
        latent_draws(seed, idx, k, model.latent_dim())
            .iter()
            .map(|z| Ok(model.predict(store, scene, z)?.futures))
            .collect()
    })
}

/// Unweighted mean of several scene-set results.
pub fn macro_average(name: &str, results: &[MetricResult]) -> Result<MetricResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::contract("nothing to average"))?;
    let n = results.len() as f64;
    Ok(MetricResult {
        scene: name.to_string(),
        k: first.k,
        ade: results.iter().map(|r| r.ade).sum::<f64>() / n,
        fde: results.iter().map(|r| r.fde).sum::<f64>() / n,
        n_pedestrians: results.iter().map(|r| r.n_pedestrians).sum(),
    })
}

pub fn metrics_csv(results: &[MetricResult]) -> String {
    let mut s = format!("{METRICS_CSV_HEADER}\n");
    for r in results {
        writeln!(s, "{},{},{},{},{}", r.scene, r.k, r.ade, r.fde, r.n_pedestrians).expect("write to string");
    }
    s
}
