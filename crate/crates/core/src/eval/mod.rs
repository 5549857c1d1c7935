//! Displacement metrics, best-of-K evaluation, the linear baseline and latent sweeps.

mod baseline;
mod metrics;
mod sweep;

pub use baseline::{linear_baseline, linear_extrapolation};
pub use metrics::{
    ade, evaluate_best_of_k, evaluate_with, fde, latent_draws, macro_average, metrics_csv, scene_best_of,
    MetricResult, Pairing, METRICS_CSV_HEADER,
};
pub use sweep::{axis_grid, latent_sweep, passing_sides, sweep_svg, trajectory_csv, SweepRow, TRAJECTORY_CSV_HEADER};
