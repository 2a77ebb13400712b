//! Identification and scoring kernels for the supported risk functionals.
//!
//! Every functional is a pair `(r, z)`: `r` is the regulatory coordinate
//! (the mean, the variance, VaR, ES, the expectile or the variantile) and `z`
//! is the optional statistic coordinate that is forecast alongside it.
//!
//! | kind                   | r          | z         | d |
//! |------------------------|------------|-----------|---|
//! | `Mean`                 | mean       | -         | 1 |
//! | `MeanVariance`         | variance   | mean      | 2 |
//! | `VaR`                  | VaR_p      | -         | 1 |
//! | `EsVar`                | ES_p       | VaR_p     | 2 |
//! | `Expectile`            | ex_p       | -         | 1 |
//! | `ExpectileVariantile`  | var_p      | ex_p      | 2 |

mod bayes;
mod identification;
mod scoring;

pub use bayes::{bayes_estat, bayes_loss};
pub use identification::{eval_identification, IdentificationForm, IdentificationKernel, Monotonicity};
pub use scoring::{eval_score, h_bound, score_gap_infimum, Homogeneity, ScoringKernel};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which risk measure (or pair) is under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    Mean,
    MeanVariance,
    #[serde(rename = "var")]
    VaR,
    EsVar,
    Expectile,
    ExpectileVariantile,
}

impl FunctionalKind {
    pub const ALL: [FunctionalKind; 6] = [
        FunctionalKind::Mean,
        FunctionalKind::MeanVariance,
        FunctionalKind::VaR,
        FunctionalKind::EsVar,
        FunctionalKind::Expectile,
        FunctionalKind::ExpectileVariantile,
    ];

    pub fn dimension(self) -> usize {
        match self {
            FunctionalKind::MeanVariance | FunctionalKind::EsVar | FunctionalKind::ExpectileVariantile => 2,
            _ => 1,
        }
    }

    pub fn uses_level(self) -> bool {
        !matches!(self, FunctionalKind::Mean | FunctionalKind::MeanVariance)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionalKind::Mean => "mean",
            FunctionalKind::MeanVariance => "mean-variance",
            FunctionalKind::VaR => "var",
            FunctionalKind::EsVar => "es-var",
            FunctionalKind::Expectile => "expectile",
            FunctionalKind::ExpectileVariantile => "expectile-variantile",
        }
    }
}

impl fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionalKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown functional `{s}`")))
    }
}

/// A risk functional with its level `p` and optional loss support bound `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskFunctional {
    pub kind: FunctionalKind,
    level: f64,
    support_bound: Option<f64>,
}

impl RiskFunctional {
    /// `level` is ignored for the mean and the mean-variance pair.
    pub fn new(kind: FunctionalKind, level: f64) -> Result<Self> {
        let level = if kind.uses_level() { level } else { 0.5 };
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0,1), got {level}")));
        }
        if matches!(kind, FunctionalKind::Expectile | FunctionalKind::ExpectileVariantile) && level < 0.5 {
            return Err(Error::Config(format!("expectile level must be at least 1/2, got {level}")));
        }
        Ok(Self { kind, level, support_bound: None })
    }

    pub fn mean() -> Self {
        Self { kind: FunctionalKind::Mean, level: 0.5, support_bound: None }
    }

    pub fn mean_variance() -> Self {
        Self { kind: FunctionalKind::MeanVariance, level: 0.5, support_bound: None }
    }

    pub fn var(p: f64) -> Result<Self> {
        Self::new(FunctionalKind::VaR, p)
    }

    pub fn es_var(p: f64) -> Result<Self> {
        Self::new(FunctionalKind::EsVar, p)
    }

    pub fn expectile(p: f64) -> Result<Self> {
        Self::new(FunctionalKind::Expectile, p)
    }

    pub fn expectile_variantile(p: f64) -> Result<Self> {
        Self::new(FunctionalKind::ExpectileVariantile, p)
    }

    /// Losses are assumed to lie in `[-m, m]`.
    pub fn with_support_bound(mut self, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Config(format!("support bound must be positive and finite, got {m}")));
        }
        self.support_bound = Some(m);
        Ok(self)
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn support_bound(&self) -> Option<f64> {
        self.support_bound
    }

    pub(crate) fn require_bound(&self) -> Result<f64> {
        self.support_bound
            .ok_or_else(|| Error::Config(format!("{} kernel needs a support bound M", self.kind)))
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }
}

/// One day's forecast: the regulatory coordinate `r` and, for pairs, the
/// statistic `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub r: f64,
    pub z: Option<f64>,
}

impl Forecast {
    pub fn scalar(r: f64) -> Self {
        Self { r, z: None }
    }

    pub fn pair(r: f64, z: f64) -> Self {
        Self { r, z: Some(z) }
    }

    pub(crate) fn require_z(&self, kind: FunctionalKind) -> Result<f64> {
        self.z
            .ok_or_else(|| Error::domain(format!("{kind} needs a second forecast coordinate")))
    }
}

impl From<f64> for Forecast {
    fn from(r: f64) -> Self {
        Forecast::scalar(r)
    }
}

impl From<(f64, f64)> for Forecast {
    fn from((r, z): (f64, f64)) -> Self {
        Forecast::pair(r, z)
    }
}

#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `x_- = min(x, 0)`.
#[inline]
pub(crate) fn neg(x: f64) -> f64 {
    x.min(0.0)
}

pub(crate) fn check_loss_bound(x: f64, m: f64) -> Result<()> {
    if !x.is_finite() || x.abs() > m {
        return Err(Error::domain(format!("loss {x} outside [-{m}, {m}]")));
    }
    Ok(())
}
