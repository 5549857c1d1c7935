use crate::model::{LatentCode, Point, PredictedScene, SceneSample, TrajectoryWindow, OBS_LEN, PRED_LEN};

/// Least-squares line through the observed positions, one per coordinate,
/// extrapolated over the prediction horizon.
pub fn linear_extrapolation(window: &TrajectoryWindow) -> [Point; PRED_LEN] {
    // Fit offsets from the last observation so a stationary track is exact.
    let origin = window.last_observed();
    let t_mean = (OBS_LEN - 1) as f64 / 2.0;
    let sxx: f64 = (0..OBS_LEN).map(|t| (t as f64 - t_mean).powi(2)).sum();
    let mut coef = [(0.0, 0.0); 2];
    for (c, slot) in coef.iter_mut().enumerate() {
        let ys: Vec<f64> = window.observed.iter().map(|p| p[c] - origin[c]).collect();
        let y_mean = ys.iter().sum::<f64>() / OBS_LEN as f64;
        let sxy: f64 = ys.iter().enumerate().map(|(t, y)| (t as f64 - t_mean) * (y - y_mean)).sum();
        let slope = sxy / sxx;
        *slot = (y_mean - slope * t_mean, slope);
    }
    let mut out = [[0.0; 2]; PRED_LEN];
    for (k, p) in out.iter_mut().enumerate() {
        let t = (OBS_LEN + k) as f64;
        for c in 0..2 {
            p[c] = origin[c] + coef[c].0 + coef[c].1 * t;
        }
    }
    out
}

/// Linear baseline for every pedestrian of a scene.
pub fn linear_baseline(scene: &SceneSample) -> PredictedScene {
    PredictedScene {
        futures: scene.pedestrians.iter().map(linear_extrapolation).collect(),
        latent: LatentCode(Vec::new()),
    }
}
