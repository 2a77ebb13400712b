use serde::{Deserialize, Serialize};

use super::{check_loss_bound, Forecast, FunctionalKind, RiskFunctional};
use crate::error::{Error, Result};

/// Degree `m` with `S(theta x, theta a) = theta^m S(x, a)`.
///
/// The `H0` kernels are log scores: they are 0-homogeneous only up to an
/// additive `(1-p) log(theta)`, which cancels in every score difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Homogeneity {
    H0,
    HHalf,
    H1,
    H2,
}

impl Homogeneity {
    pub fn degree(self) -> f64 {
        match self {
            Homogeneity::H0 => 0.0,
            Homogeneity::HHalf => 0.5,
            Homogeneity::H1 => 1.0,
            Homogeneity::H2 => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringKernel {
    pub functional: RiskFunctional,
    pub homogeneity: Homogeneity,
    pub support_bound: f64,
}

impl ScoringKernel {
    pub fn new(functional: RiskFunctional, homogeneity: Homogeneity) -> Result<Self> {
        use FunctionalKind::*;
        use Homogeneity::*;
        let ok = matches!(
            (functional.kind, homogeneity),
            (Mean, H2) | (MeanVariance, H2) | (VaR, H1) | (VaR, H0) | (EsVar, HHalf) | (EsVar, H0) | (Expectile, H2) | (Expectile, H0)
        );
        if !ok {
            return Err(Error::Unsupported(format!(
                "no {homogeneity:?} scoring kernel for {}",
                functional.kind
            )));
        }
        let support_bound = functional.require_bound()?;
        Ok(Self { functional, homogeneity, support_bound })
    }

    /// The polynomial kernel of each functional (`H2`, `H1` or `HHalf`).
    pub fn standard(functional: RiskFunctional) -> Result<Self> {
        let h = match functional.kind {
            FunctionalKind::VaR => Homogeneity::H1,
            FunctionalKind::EsVar => Homogeneity::HHalf,
            _ => Homogeneity::H2,
        };
        Self::new(functional, h)
    }

    fn p(&self) -> f64 {
        self.functional.level()
    }

    fn check_forecast(&self, f: Forecast) -> Result<(f64, f64)> {
        let kind = self.functional.kind;
        let a = f.r;
        let b = if kind.dimension() == 2 { f.require_z(kind)? } else { 0.0 };
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!("non-finite forecast ({a}, {b})")));
        }
        let bad = match (kind, self.homogeneity) {
            (FunctionalKind::MeanVariance, _) => a < 0.0,
            (FunctionalKind::EsVar, Homogeneity::HHalf) => !(b > 0.0 && b <= a),
            (FunctionalKind::EsVar, _) => !(a > 0.0 && b <= a),
            (_, Homogeneity::H0) => a <= 0.0,
            _ => false,
        };
        if bad {
            return Err(Error::domain(format!(
                "forecast ({a}, {b}) outside the domain of the {:?} {} score",
                self.homogeneity, kind
            )));
        }
        Ok((a, b))
    }

    /// Score without domain checks.
    fn s(&self, x: f64, a: f64, b: f64) -> f64 {
        let p = self.p();
        let exceed = x > a;
        match (self.functional.kind, self.homogeneity) {
            (FunctionalKind::Mean, _) => (x - a).powi(2),
            (FunctionalKind::MeanVariance, _) => b * (b - 2.0 * x) + a * (a - 2.0 * x * x),
            (FunctionalKind::VaR, Homogeneity::H0) => {
                (1.0 - p) * a.ln() + if exceed { (x / a).ln() } else { 0.0 }
            }
            (FunctionalKind::VaR, _) => (1.0 - p) * a + if exceed { x - a } else { 0.0 },
            (FunctionalKind::EsVar, Homogeneity::H0) => {
                let tail = if x > b { (x - b) / a } else { 0.0 };
                tail + (1.0 - p) * (b / a - 1.0 + a.ln())
            }
            (FunctionalKind::EsVar, _) => {
                let sq = 2.0 * a.sqrt();
                let tail = if x > b { (x - b) / sq } else { 0.0 };
                tail + (1.0 - p) * (a + b) / sq
            }
            (FunctionalKind::Expectile, Homogeneity::H0) => {
                let u = x / a;
                let tail = if exceed { (1.0 - 2.0 * p) * (u.ln() + 1.0 - u) } else { 0.0 };
                tail + (1.0 - p) * (a.ln() - 1.0 + u)
            }
            (FunctionalKind::Expectile, _) => {
                let tail = if exceed { -(1.0 - 2.0 * p) * (x - a).powi(2) } else { 0.0 };
                tail + (1.0 - p) * a * (a - 2.0 * x)
            }
            (FunctionalKind::ExpectileVariantile, _) => unreachable!("rejected in ScoringKernel::new"),
        }
    }

    /// `S(x, f)`.
    pub fn eval(&self, x: f64, f: Forecast) -> Result<f64> {
        let (a, b) = self.check_forecast(f)?;
        check_loss_bound(x, self.support_bound)?;
        Ok(self.s(x, a, b))
    }

    /// `S(x, f) - S(x, f_star)`.
    pub fn gap(&self, x: f64, f: Forecast, f_star: Forecast) -> Result<f64> {
        let (a, b) = self.check_forecast(f)?;
        let (a2, b2) = self.check_forecast(f_star)?;
        check_loss_bound(x, self.support_bound)?;
        Ok(self.s(x, a, b) - self.s(x, a2, b2))
    }

    /// `inf_{x in [-M, M]} S(x, f) - S(x, f_star)`.
    pub fn gap_infimum(&self, f: Forecast, f_star: Forecast) -> Result<f64> {
        let (r, z) = self.check_forecast(f)?;
        let (rs, zs) = self.check_forecast(f_star)?;
        let m = self.support_bound;
        let p = self.p();
        let ind = |c: bool| if c { 1.0 } else { 0.0 };
        let v = match (self.functional.kind, self.homogeneity) {
            (FunctionalKind::Mean, _) => -2.0 * m * (r - rs).abs() + r * r - rs * rs,
            (FunctionalKind::MeanVariance, _) => {
                let base = r * r - rs * rs + z * z - zs * zs;
                let interior = rs > r && {
                    let vertex = (z - zs) / (2.0 * (rs - r));
                    (-m..=m).contains(&vertex)
                };
                if interior {
                    base + (z - zs).powi(2) / (2.0 * (r - rs))
                } else {
                    base - 2.0 * m * (m * (r - rs) + (z - zs).abs())
                }
            }
            (FunctionalKind::VaR, Homogeneity::H0) => {
                let cap = rs.max(m).min(r);
                (1.0 - p) * (r / rs).ln() - ind(r > rs) * (cap / rs).ln()
            }
            (FunctionalKind::VaR, _) => {
                (1.0 - p) * (r - rs)
                    - ind(r <= rs) * (r.min(-m) - rs.min(-m))
                    - ind(r > rs) * (r.min(m) - rs.min(m))
            }
            (FunctionalKind::EsVar, _) => self.piecewise_linear_infimum(r, z, rs, zs),
            (FunctionalKind::Expectile, Homogeneity::H0) => {
                ind(r <= rs) * (1.0 - p) * ((r / rs).ln() - m / r + m / rs)
                    - ind(rs < m && m < r) * (1.0 - 2.0 * p) * ((m / rs).ln() + 1.0 - m / rs)
                    + ind(r > rs) * (1.0 - p - ind(r <= m)).abs() * ((r / rs).ln() + m / r - m / rs)
            }
            (FunctionalKind::Expectile, _) => {
                let d = r * r - rs * rs;
                ind((rs <= r && r <= m) || (r < rs && rs < -m)) * p * (d - 2.0 * m * (r - rs).abs())
                    + ind(r >= rs && r > m)
                        * ((1.0 - p) * (d - 2.0 * m * (r - rs)) + (1.0 - 2.0 * p) * (m.max(rs) - rs).powi(2))
                    + ind(r < rs && rs >= -m)
                        * ((1.0 - p) * (d + 2.0 * m * (r - rs)) - (1.0 - 2.0 * p) * ((-m).max(r) - r).powi(2))
            }
            (FunctionalKind::ExpectileVariantile, _) => unreachable!("rejected in ScoringKernel::new"),
        };
        Ok(v)
    }

    /// The ES/VaR gaps are piecewise linear in `x` with kinks at the two VaR
    /// forecasts, so the minimum sits on one of at most four points.
    fn piecewise_linear_infimum(&self, r: f64, z: f64, rs: f64, zs: f64) -> f64 {
        let m = self.support_bound;
        [-m, m, z.clamp(-m, m), zs.clamp(-m, m)]
            .into_iter()
            .map(|x| self.s(x, r, z) - self.s(x, rs, zs))
            .fold(f64::INFINITY, f64::min)
    }

    /// `1 / ((-gamma) v 0)` with `1/0 = inf`.
    pub fn h_bound(&self, f: Forecast, f_star: Forecast) -> Result<f64> {
        let g = self.gap_infimum(f, f_star)?;
        Ok(if g >= 0.0 { f64::INFINITY } else { -1.0 / g })
    }
}

pub fn eval_score(kernel: &ScoringKernel, x: f64, r: f64, z: Option<f64>) -> Result<f64> {
    kernel.eval(x, Forecast { r, z })
}

pub fn score_gap_infimum(
    kernel: &ScoringKernel,
    r: f64,
    z: Option<f64>,
    r_star: f64,
    z_star: Option<f64>,
) -> Result<f64> {
    kernel.gap_infimum(Forecast { r, z }, Forecast { r: r_star, z: z_star })
}

pub fn h_bound(kernel: &ScoringKernel, r: f64, z: Option<f64>, r_star: f64, z_star: Option<f64>) -> Result<f64> {
    kernel.h_bound(Forecast { r, z }, Forecast { r: r_star, z: z_star })
}
