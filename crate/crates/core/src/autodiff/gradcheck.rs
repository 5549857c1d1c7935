//! Central finite-difference checks of analytic gradients.
//!
//! The per-coordinate error is `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
//! The floor keeps coordinates whose true gradient is essentially zero from
//! turning rounding noise into huge relative errors.

use super::graph::{Graph, Value};
use super::params::ParameterStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Denominator floor used by the checks in this crate.
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Location of the worst coordinate: parameter name (empty for a plain
    /// input) and flat index.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }

    fn record(&mut self, name: &str, index: usize, analytic: f64, numeric: f64, floor: f64) {
        let denom = analytic.abs().max(numeric.abs()).max(floor);
        let err = (analytic - numeric).abs() / denom;
        self.coordinates += 1;
        if err > self.max_relative_error || self.worst.is_none() {
            self.max_relative_error = err;
            self.worst = Some((name.to_string(), index));
        }
    }

    fn new(tolerance: f64) -> Self {
        GradCheckReport {
            max_relative_error: 0.0,
            worst: None,
            coordinates: 0,
            tolerance,
        }
    }
}

fn eval_scalar<T: Scalar>(value: Result<Value<'_, T>>) -> Result<T> {
    let v = value?;
    if v.shape().iter().product::<usize>() != 1 {
        return Err(Error::contract("gradient check needs a scalar-valued function"));
    }
    Ok(v.item())
}

/// Checks `f` at `point` coordinate by coordinate.
pub fn gradient_check<T, F>(f: F, point: &Tensor<T>, step: T, tolerance: f64) -> Result<GradCheckReport>
where
    T: Scalar,
    F: for<'g> Fn(&'g Graph<T>, Value<'g, T>) -> Result<Value<'g, T>>,
{
    if step <= T::zero() {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let eval = |p: &Tensor<T>| -> Result<T> {
        let g = Graph::new();
        let x = g.variable(p.clone());
        eval_scalar(f(&g, x))
    };

    let first = eval(point)?;
    let second = eval(point)?;
    if first.as_f64().to_bits() != second.as_f64().to_bits() {
        return Err(Error::NonDeterministic {
            first: first.as_f64(),
            second: second.as_f64(),
        });
    }

    let g = Graph::new();
    let x = g.variable(point.clone());
    let y = f(&g, x)?;
    g.backward(y)?;
    let analytic = x.grad().unwrap_or_else(|| Tensor::zeros(point.shape().to_vec()));

    let mut report = GradCheckReport::new(tolerance);
    let two = T::lit(2.0);
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] = plus.data()[i] + step;
        let mut minus = point.clone();
        minus.data_mut()[i] = minus.data()[i] - step;
        let numeric = (eval(&plus)? - eval(&minus)?) / (two * step);
        report.record("", i, analytic.data()[i].as_f64(), numeric.as_f64(), DEFAULT_FLOOR);
    }
    Ok(report)
}

/// Which parameter coordinates [`check_parameters`] perturbs.
#[derive(Clone, Debug)]
pub struct ParamCheckOptions {
    /// Only parameters whose names start with one of these; empty means all.
    pub prefixes: Vec<String>,
    /// At most this many evenly spaced coordinates per parameter.
    pub max_per_parameter: usize,
    pub step: f64,
    pub tolerance: f64,
    pub floor: f64,
}

impl Default for ParamCheckOptions {
    fn default() -> Self {
        ParamCheckOptions {
            prefixes: Vec::new(),
            max_per_parameter: 6,
            step: 1e-4,
            tolerance: 1e-4,
            floor: DEFAULT_FLOOR,
        }
    }
}

/// Checks the gradient of a scalar loss with respect to stored parameters.
/// The store is restored to its original values before returning.
pub fn check_parameters<T, F>(
    store: &mut ParameterStore<T>,
    f: F,
    options: &ParamCheckOptions,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: for<'g> Fn(&'g Graph<T>, &ParameterStore<T>) -> Result<Value<'g, T>>,
{
    let eval = |s: &ParameterStore<T>| -> Result<T> {
        let g = Graph::new();
        eval_scalar(f(&g, s))
    };
    let first = eval(store)?;
    let second = eval(store)?;
    if first.as_f64().to_bits() != second.as_f64().to_bits() {
        return Err(Error::NonDeterministic {
            first: first.as_f64(),
            second: second.as_f64(),
        });
    }

    let mut analytic = store.clone();
    analytic.clear_grads();
    {
        let g = Graph::new();
        let y = f(&g, store)?;
        g.backward(y)?;
        g.accumulate_param_grads(&mut analytic, T::one())?;
    }

    let selected: Vec<String> = store
        .names()
        .filter(|n| options.prefixes.is_empty() || options.prefixes.iter().any(|p| n.starts_with(p.as_str())))
        .map(str::to_string)
        .collect();

    let step = T::lit(options.step);
    let two = T::lit(2.0);
    let mut report = GradCheckReport::new(options.tolerance);
    for name in selected {
        let n = store.value(&name)?.numel();
        let grad = analytic.grad(&name)?.cloned();
        let count = options.max_per_parameter.min(n).max(1);
        for k in 0..count {
            let idx = if count == n { k } else { k * n / count + (n / count) / 2 };
            let original = store.value(&name)?.data()[idx];
            let set = |store: &mut ParameterStore<T>, v: T| -> Result<()> {
                let mut t = store.value(&name)?.clone();
                t.data_mut()[idx] = v;
                store.set_value(&name, t)
            };
            set(store, original + step)?;
            let up = eval(store);
            set(store, original - step)?;
            let down = eval(store);
            set(store, original)?;
            let numeric = (up? - down?) / (two * step);
            let a = grad.as_ref().map_or(T::zero(), |g| g.data()[idx]);
            report.record(&name, idx, a.as_f64(), numeric.as_f64(), options.floor);
        }
    }
    Ok(report)
}
