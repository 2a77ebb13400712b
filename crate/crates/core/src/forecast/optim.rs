use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

struct Objective<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let v = (self.0)(p);
        // the simplex needs a total order; infeasible points get a huge cost
        Ok(if v.is_finite() { v } else { f64::MAX })
    }
}

/// Nelder-Mead from `x0` with an axis-aligned initial simplex of size `step`.
/// Returns the best point and its cost.
pub(crate) fn minimize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: Vec<f64>,
    step: f64,
    tolerance: f64,
    max_iters: u64,
) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![x0.clone()];
    for i in 0..x0.len() {
        let mut v = x0.clone();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(tolerance)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let res = Executor::new(Objective(f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(|e| Error::Fit(e.to_string()))?;
    let state = res.state();
    let best = state.best_param.clone().ok_or_else(|| Error::Fit("optimizer returned no point".into()))?;
    Ok((best, state.best_cost))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, c) = minimize(f, vec![-1.2, 1.0], 0.5, 1e-14, 5000).unwrap();
        assert!(c < 1e-8, "{c}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::INFINITY } else { (x[0] - 2.0).powi(2) };
        let (x, _) = minimize(f, vec![0.5], 1.0, 1e-12, 500).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-4);
    }
}
