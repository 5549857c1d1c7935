//! Adversarial training with the noise and trajectory paths, their five loss
//! terms, and an adaptive-moment optimizer.

mod adam;
mod losses;
mod suite;
mod trainer;

pub use adam::{adam_step, OptimizerConfig};
pub use losses::{
    bce_with_logits, discriminator_losses, kl_divergence, l1_distance, loss_path_noise, loss_path_trajectory,
    trajectory_l2, variety_loss, LossReport, LossWeights, NoisePath, TrajectoryPath,
};
pub use trainer::{draw_normal, generator_loss, latent_recovery_error, train_step, TrainConfig, Trainer};
pub use suite::{gradient_suite, toy_scene, SuiteCheck, OBJECTIVE_FLOOR, SUITE_STEP, SUITE_TOLERANCE};
