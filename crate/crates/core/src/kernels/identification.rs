use serde::{Deserialize, Serialize};

use super::{check_loss_bound, neg, pos, Forecast, FunctionalKind, RiskFunctional};
use crate::error::{Error, Result};

/// Ratio kernels divide by the forecast and live on nonnegative losses;
/// bounded kernels are differences and need the support bound `M`.
///
/// Only the mean and the expectile have two variants. For the other kinds
/// the form only decides whether `|x| <= M` is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentificationForm {
    Ratio,
    Bounded,
}

/// `DecreasingInR` evaluates `V`, used against underestimation. `IncreasingInR`
/// evaluates `-V'`, the mirrored kernel whose e-factor `1 + lambda * (-V')`
/// tests overestimation; it exists for one-dimensional functionals only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    DecreasingInR,
    IncreasingInR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentificationKernel {
    pub functional: RiskFunctional,
    pub form: IdentificationForm,
    pub direction: Monotonicity,
}

impl IdentificationKernel {
    pub fn new(functional: RiskFunctional, form: IdentificationForm) -> Result<Self> {
        if form == IdentificationForm::Bounded {
            functional.require_bound()?;
        }
        Ok(Self { functional, form, direction: Monotonicity::DecreasingInR })
    }

    pub fn with_direction(mut self, direction: Monotonicity) -> Result<Self> {
        if direction == Monotonicity::IncreasingInR && self.functional.dimension() != 1 {
            return Err(Error::Unsupported(format!(
                "increasing identification kernel for two-dimensional {}",
                self.functional.kind
            )));
        }
        self.direction = direction;
        Ok(self)
    }

    /// The mirrored kernel for the upper half of a two-sided test.
    pub fn mirrored(&self) -> Result<Self> {
        let dir = match self.direction {
            Monotonicity::DecreasingInR => Monotonicity::IncreasingInR,
            Monotonicity::IncreasingInR => Monotonicity::DecreasingInR,
        };
        self.with_direction(dir)
    }

    fn p(&self) -> f64 {
        self.functional.level()
    }

    fn ratio_domain(&self) -> bool {
        self.form == IdentificationForm::Ratio
            && matches!(self.functional.kind, FunctionalKind::Mean | FunctionalKind::Expectile)
    }

    /// Endpoints of the loss domain the kernel is evaluated on.
    pub fn loss_domain(&self) -> (f64, f64) {
        let m = self.functional.support_bound();
        if self.ratio_domain() {
            (0.0, m.unwrap_or(f64::INFINITY))
        } else {
            match m {
                Some(m) => (-m, m),
                None => (f64::NEG_INFINITY, f64::INFINITY),
            }
        }
    }

    fn check_forecast(&self, f: Forecast) -> Result<(f64, f64)> {
        let kind = self.functional.kind;
        let a = f.r;
        if !a.is_finite() {
            return Err(Error::domain(format!("non-finite forecast {a}")));
        }
        let b = if kind.dimension() == 2 { f.require_z(kind)? } else { 0.0 };
        if !b.is_finite() {
            return Err(Error::domain(format!("non-finite forecast {b}")));
        }
        match kind {
            FunctionalKind::MeanVariance | FunctionalKind::ExpectileVariantile if a <= 0.0 => {
                Err(Error::domain(format!("{kind} needs a positive first coordinate, got {a}")))
            }
            FunctionalKind::EsVar if a <= b => {
                Err(Error::domain(format!("ES forecast {a} must exceed VaR forecast {b}")))
            }
            _ if self.ratio_domain() && a <= 0.0 => {
                Err(Error::domain(format!("ratio kernel needs a positive forecast, got {a}")))
            }
            _ => Ok((a, b)),
        }
    }

    fn check_loss(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::domain(format!("non-finite loss {x}")));
        }
        if self.ratio_domain() {
            if x < 0.0 {
                return Err(Error::domain(format!("ratio kernel needs a nonnegative loss, got {x}")));
            }
            if let Some(m) = self.functional.support_bound() {
                check_loss_bound(x, m)?;
            }
        } else if self.form == IdentificationForm::Bounded {
            check_loss_bound(x, self.functional.require_bound()?)?;
        }
        Ok(())
    }

    /// `V(x, a, b)` without any domain checks.
    fn v(&self, x: f64, a: f64, b: f64) -> f64 {
        let p = self.p();
        let ratio = self.form == IdentificationForm::Ratio;
        match self.functional.kind {
            FunctionalKind::Mean if ratio => x / a - 1.0,
            FunctionalKind::Mean => x - a,
            FunctionalKind::MeanVariance => (x - b).powi(2) / a - 1.0,
            FunctionalKind::VaR => indicator(x > a) / (1.0 - p) - 1.0,
            FunctionalKind::EsVar => pos(x - b) / ((1.0 - p) * (a - b)) - 1.0,
            FunctionalKind::Expectile => {
                let w = (1.0 - p - indicator(x > a)).abs();
                if ratio {
                    w * (x / a - 1.0)
                } else {
                    w * (x - a)
                }
            }
            FunctionalKind::ExpectileVariantile => {
                (p * pos(x - b).powi(2) + (1.0 - p) * neg(x - b).powi(2)) / a - 1.0
            }
        }
    }

    /// `V'` of the two-sided construction; only defined for `d = 1`.
    fn v_prime(&self, x: f64, a: f64) -> f64 {
        match self.functional.kind {
            FunctionalKind::VaR => 1.0 - indicator(x <= a) / self.p(),
            _ => self.v(x, a, 0.0),
        }
    }

    fn payoff(&self, x: f64, a: f64, b: f64) -> f64 {
        match self.direction {
            Monotonicity::DecreasingInR => self.v(x, a, b),
            Monotonicity::IncreasingInR => -self.v_prime(x, a),
        }
    }

    /// Evaluates the kernel at loss `x` under forecast `f`.
    pub fn eval(&self, x: f64, f: Forecast) -> Result<f64> {
        let (a, b) = self.check_forecast(f)?;
        self.check_loss(x)?;
        Ok(self.payoff(x, a, b))
    }

    /// Infimum of the kernel over the loss domain for a fixed forecast.
    ///
    /// Every one-dimensional kernel is nondecreasing in `x`, so the mirrored
    /// kernel is nonincreasing; the quadratic kernels attain their minimum at
    /// the second coordinate.
    pub fn infimum(&self, f: Forecast) -> Result<f64> {
        let (a, b) = self.check_forecast(f)?;
        let (lo, hi) = self.loss_domain();
        let kind = self.functional.kind;
        let inf = match self.direction {
            Monotonicity::DecreasingInR => match kind {
                FunctionalKind::MeanVariance | FunctionalKind::ExpectileVariantile => {
                    self.v(b.clamp(lo, hi), a, b)
                }
                _ if lo.is_finite() => self.v(lo, a, b),
                _ => -1.0,
            },
            Monotonicity::IncreasingInR => {
                if hi.is_finite() {
                    self.payoff(hi, a, b)
                } else {
                    match kind {
                        FunctionalKind::VaR => -1.0,
                        _ => f64::NEG_INFINITY,
                    }
                }
            }
        };
        Ok(inf)
    }
}

/// Free-function form of [`IdentificationKernel::eval`].
pub fn eval_identification(kernel: &IdentificationKernel, x: f64, r: f64, z: Option<f64>) -> Result<f64> {
    kernel.eval(x, Forecast { r, z })
}

#[inline]
fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kernel(f: RiskFunctional, form: IdentificationForm) -> IdentificationKernel {
        IdentificationKernel::new(f, form).unwrap()
    }

    #[test]
    fn direct_formulas() {
        let k = kernel(RiskFunctional::mean(), IdentificationForm::Ratio);
        assert_relative_eq!(eval_identification(&k, 2.0, 4.0, None).unwrap(), -0.5);

        let k = kernel(RiskFunctional::var(0.95).unwrap(), IdentificationForm::Ratio);
        assert_relative_eq!(eval_identification(&k, 3.0, 2.0, None).unwrap(), 19.0, epsilon = 1e-12);

        let k = kernel(RiskFunctional::es_var(0.875).unwrap(), IdentificationForm::Ratio);
        assert_relative_eq!(eval_identification(&k, 1.0, 1.0, Some(0.0)).unwrap(), 7.0, epsilon = 1e-12);

        let k = kernel(RiskFunctional::expectile(0.9).unwrap(), IdentificationForm::Ratio);
        assert_relative_eq!(eval_identification(&k, 2.0, 1.0, None).unwrap(), 0.9, epsilon = 1e-12);

        let k = kernel(RiskFunctional::mean_variance(), IdentificationForm::Ratio);
        assert_relative_eq!(eval_identification(&k, 3.0, 2.0, Some(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn domain_guards() {
        let k = kernel(RiskFunctional::es_var(0.9).unwrap(), IdentificationForm::Ratio);
        assert!(matches!(k.eval(0.0, Forecast::pair(1.0, 1.0)), Err(Error::Domain(_))));
        let k = kernel(RiskFunctional::mean(), IdentificationForm::Ratio);
        assert!(k.eval(1.0, Forecast::scalar(0.0)).is_err());
        assert!(k.eval(-1.0, Forecast::scalar(1.0)).is_err());
        let m = RiskFunctional::mean().with_support_bound(2.0).unwrap();
        let k = kernel(m, IdentificationForm::Bounded);
        assert!(k.eval(2.5, Forecast::scalar(0.0)).is_err());
        assert!(IdentificationKernel::new(RiskFunctional::mean(), IdentificationForm::Bounded).is_err());
        let k = kernel(RiskFunctional::es_var(0.9).unwrap(), IdentificationForm::Ratio);
        assert!(k.with_direction(Monotonicity::IncreasingInR).is_err());
    }

    #[test]
    fn infimum_is_at_least_minus_one_for_ratio_kernels() {
        let cases = [
            RiskFunctional::mean(),
            RiskFunctional::mean_variance(),
            RiskFunctional::var(0.99).unwrap(),
            RiskFunctional::es_var(0.975).unwrap(),
            RiskFunctional::expectile(0.8).unwrap(),
            RiskFunctional::expectile_variantile(0.7).unwrap(),
        ];
        for f in cases {
            let k = kernel(f, IdentificationForm::Ratio);
            let fc = if f.dimension() == 2 { Forecast::pair(2.0, 0.5) } else { Forecast::scalar(1.5) };
            let inf = k.infimum(fc).unwrap();
            assert!(inf >= -1.0 - 1e-12, "{:?}: {inf}", f.kind);
        }
    }

    #[test]
    fn mirrored_var_kernel() {
        let k = kernel(RiskFunctional::var(0.9).unwrap(), IdentificationForm::Ratio).mirrored().unwrap();
        // -V' = 1{x <= a}/p - 1
        assert_relative_eq!(k.eval(0.0, Forecast::scalar(1.0)).unwrap(), 1.0 / 0.9 - 1.0);
        assert_relative_eq!(k.eval(2.0, Forecast::scalar(1.0)).unwrap(), -1.0);
        assert_relative_eq!(k.infimum(Forecast::scalar(1.0)).unwrap(), -1.0);
    }

    #[test]
    fn bounded_infima() {
        let f = RiskFunctional::expectile(0.9).unwrap().with_support_bound(3.0).unwrap();
        let k = kernel(f, IdentificationForm::Bounded);
        let a = 0.5;
        let brute = (0..=6000)
            .map(|i| -3.0 + i as f64 * 1e-3)
            .map(|x| k.eval(x, Forecast::scalar(a)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(k.infimum(Forecast::scalar(a)).unwrap(), brute, epsilon = 1e-12);
        let up = k.mirrored().unwrap();
        let brute = (0..=6000)
            .map(|i| -3.0 + i as f64 * 1e-3)
            .map(|x| up.eval(x, Forecast::scalar(a)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(up.infimum(Forecast::scalar(a)).unwrap(), brute, epsilon = 1e-12);
    }
}
