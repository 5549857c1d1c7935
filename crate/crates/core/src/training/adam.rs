use crate::autodiff::ParameterStore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Optimizer and batching settings.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_scenes: usize,
    /// Samples per scene for the optional variety term.
    pub variety_k: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_scenes: 8,
            variety_k: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = self.lr_generator > 0.0 && self.lr_discriminator > 0.0;
        let betas_ok = [self.beta1, self.beta2].iter().all(|b| *b > 0.0 && *b < 1.0);
        if !rates_ok || !betas_ok || !(self.epsilon > 0.0) || self.batch_scenes == 0 || self.variety_k == 0 {
            return Err(Error::Config(format!("invalid optimizer settings: {self:?}")));
        }
        Ok(())
    }
}

/// One adaptive-moment update of every parameter whose name starts with one of
/// `scope`, using rate `lr`. Gradients of updated parameters are cleared.
pub fn adam_step<T: Scalar>(
    store: &mut ParameterStore<T>,
    config: &OptimizerConfig,
    lr: f64,
    scope: &[&str],
) -> Result<()> {
    let in_scope = |name: &str| scope.iter().any(|p| name.starts_with(p));
    if let Some(name) = store
        .iter()
        .find(|(n, p)| in_scope(n) && p.grad.is_none())
        .map(|(n, _)| n.to_string())
    {
        return Err(Error::contract(format!("parameter `{name}` has no gradient to apply")));
    }
    let (b1, b2) = (T::lit(config.beta1), T::lit(config.beta2));
    let (lr, eps) = (T::lit(lr), T::lit(config.epsilon));
    for (name, p) in store.iter_mut() {
        if !in_scope(name) {
            continue;
        }
        let grad = p.grad.take().expect("checked above");
        p.steps += 1;
        let t = p.steps as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for (((w, g), m), v) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(p.first_moment.data_mut())
            .zip(p.second_moment.data_mut())
        {
            *m = b1 * *m + (T::one() - b1) * *g;
            *v = b2 * *v + (T::one() - b2) * *g * *g;
            *w = *w - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
    Ok(())
}
