use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::layers::FeatureGrid;
use crate::scalar::Scalar;

/// Observed steps per window.
pub const OBS_LEN: usize = 8;
/// Predicted steps per window.
pub const PRED_LEN: usize = 12;
/// Seconds between consecutive positions.
pub const TIMESTEP: f64 = 0.4;

/// Position in meters.
pub type Point = [f64; 2];

/// One pedestrian's observed and future positions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryWindow {
    pub pedestrian_id: i64,
    pub observed: [Point; OBS_LEN],
    pub future: [Point; PRED_LEN],
}

impl TrajectoryWindow {
    pub fn new(pedestrian_id: i64, observed: [Point; OBS_LEN], future: [Point; PRED_LEN]) -> Result<Self> {
        let w = TrajectoryWindow {
            pedestrian_id,
            observed,
            future,
        };
        if w.positions().iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::contract(format!("pedestrian {pedestrian_id} has non-finite coordinates")));
        }
        Ok(w)
    }

    /// From exactly `OBS_LEN + PRED_LEN` consecutive positions.
    pub fn from_positions(pedestrian_id: i64, positions: &[Point]) -> Result<Self> {
        if positions.len() != OBS_LEN + PRED_LEN {
            return Err(Error::contract(format!(
                "window needs {} positions, got {}",
                OBS_LEN + PRED_LEN,
                positions.len()
            )));
        }
        let mut observed = [[0.0; 2]; OBS_LEN];
        let mut future = [[0.0; 2]; PRED_LEN];
        observed.copy_from_slice(&positions[..OBS_LEN]);
        future.copy_from_slice(&positions[OBS_LEN..]);
        Self::new(pedestrian_id, observed, future)
    }

    pub fn positions(&self) -> Vec<Point> {
        self.observed.iter().chain(&self.future).copied().collect()
    }

    pub fn last_observed(&self) -> Point {
        self.observed[OBS_LEN - 1]
    }

    /// Displacement between the last two observed positions.
    pub fn last_observed_displacement(&self) -> Point {
        let [a, b] = [self.observed[OBS_LEN - 2], self.observed[OBS_LEN - 1]];
        [b[0] - a[0], b[1] - a[1]]
    }
}

/// Per-step displacements of a position sequence; the first entry is zero.
pub fn displacements(positions: &[Point]) -> Vec<Point> {
    let mut out = Vec::with_capacity(positions.len());
    let mut prev = positions.first().copied().unwrap_or([0.0; 2]);
    for p in positions {
        out.push([p[0] - prev[0], p[1] - prev[1]]);
        prev = *p;
    }
    out
}

/// Inverse of [`displacements`]: cumulative sum starting at `origin`.
pub fn reconstruct(origin: Point, displacements: &[Point]) -> Vec<Point> {
    let mut p = origin;
    displacements
        .iter()
        .map(|d| {
            p = [p[0] + d[0], p[1] + d[1]];
            p
        })
        .collect()
}

/// All pedestrians visible together over one window, plus optional scene grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSample {
    pub scene_id: String,
    pub pedestrians: Vec<TrajectoryWindow>,
    pub grid: Option<FeatureGrid>,
}

impl SceneSample {
    pub fn new(scene_id: impl Into<String>, pedestrians: Vec<TrajectoryWindow>, grid: Option<FeatureGrid>) -> Result<Self> {
        if pedestrians.is_empty() {
            return Err(Error::contract("scene needs at least one pedestrian"));
        }
        Ok(SceneSample {
            scene_id: scene_id.into(),
            pedestrians,
            grid,
        })
    }

    pub fn len(&self) -> usize {
        self.pedestrians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pedestrians.is_empty()
    }

    /// Reordered copy: pedestrian `k` of the result is pedestrian `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        SceneSample {
            scene_id: self.scene_id.clone(),
            pedestrians: order.iter().map(|&i| self.pedestrians[i].clone()).collect(),
            grid: self.grid.clone(),
        }
    }

    /// Observed displacements as `OBS_LEN` tensors of shape `[N, 2]`.
    pub fn observed_steps<T: Scalar>(&self) -> Vec<Tensor<T>> {
        let per_ped: Vec<Vec<Point>> = self.pedestrians.iter().map(|p| displacements(&p.observed)).collect();
        (0..OBS_LEN)
            .map(|t| {
                let flat: Vec<f64> = per_ped.iter().flat_map(|d| d[t]).collect();
                Tensor::from_f64(vec![self.len(), 2], &flat).expect("step shape")
            })
            .collect()
    }

    pub fn last_observed<T: Scalar>(&self) -> Tensor<T> {
        let flat: Vec<f64> = self.pedestrians.iter().flat_map(|p| p.last_observed()).collect();
        Tensor::from_f64(vec![self.len(), 2], &flat).expect("shape")
    }

    pub fn last_observed_displacement<T: Scalar>(&self) -> Tensor<T> {
        let flat: Vec<f64> = self
            .pedestrians
            .iter()
            .flat_map(|p| p.last_observed_displacement())
            .collect();
        Tensor::from_f64(vec![self.len(), 2], &flat).expect("shape")
    }

    /// Ground-truth futures as `[N, 2 * PRED_LEN]`, x and y interleaved.
    pub fn future_tensor<T: Scalar>(&self) -> Tensor<T> {
        futures_to_tensor(self.pedestrians.iter().map(|p| &p.future))
    }
}

pub fn futures_to_tensor<'a, T: Scalar>(futures: impl Iterator<Item = &'a [Point; PRED_LEN]>) -> Tensor<T> {
    let flat: Vec<f64> = futures.flat_map(|f| f.iter().flatten().copied()).collect();
    let n = flat.len() / (2 * PRED_LEN);
    Tensor::from_f64(vec![n, 2 * PRED_LEN], &flat).expect("future shape")
}

/// Inverse of [`futures_to_tensor`].
pub fn tensor_to_futures(t: &[f64]) -> Vec<[Point; PRED_LEN]> {
    t.chunks(2 * PRED_LEN)
        .map(|row| {
            let mut f = [[0.0; 2]; PRED_LEN];
            for (k, p) in f.iter_mut().enumerate() {
                *p = [row[2 * k], row[2 * k + 1]];
            }
            f
        })
        .collect()
}

/// Scene-level noise vector shared by every pedestrian.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Gaussian posterior over the latent code: mean and log variance.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDistribution {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl LatentDistribution {
    /// `mean + exp(log_var / 2) * eps`.
    pub fn reparameterize(&self, eps: &[f64]) -> Result<LatentCode> {
        if eps.len() != self.mean.len() {
            return Err(Error::dim("reparameterize", &[self.mean.len()], &[eps.len()]));
        }
        Ok(LatentCode(
            self.mean
                .iter()
                .zip(&self.log_var)
                .zip(eps)
                .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
                .collect(),
        ))
    }
}

/// Generator output for a scene, in the same pedestrian order.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedScene {
    pub futures: Vec<[Point; PRED_LEN]>,
    pub latent: LatentCode,
}
