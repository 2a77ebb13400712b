//! Standard and comparative backtests over aligned loss and forecast series.

mod comparative;
mod heatmap;
mod standard;
mod zone;

pub use comparative::{run_comparative, ComparativeOutcome, ComparativeReport, ThresholdHits};
pub use heatmap::{heatmap, Heatmap, HeatmapCell};
pub use standard::{run_standard, Sidedness, StandardOutcome, StandardTest};
pub use zone::{classify_zone, Dominance, Zone, ZoneVerdict};

use crate::betting::BettingConfig;
use crate::eprocess::RestartPolicy;
use crate::error::{Error, Result};
use crate::kernels::{Forecast, RiskFunctional};

/// Reporting thresholds used alongside the formal `1/alpha` rule.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [2.0, 5.0, 10.0];

/// Everything a backtest run needs. The forecast at index `t` predicts the
/// loss at index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestInput {
    pub losses: Vec<f64>,
    pub internal: Vec<Forecast>,
    pub standard: Option<Vec<Forecast>>,
    pub functional: RiskFunctional,
    pub alpha: f64,
    pub betting: BettingConfig,
    pub restart: RestartPolicy,
}

impl BacktestInput {
    pub fn new(losses: Vec<f64>, internal: Vec<Forecast>, functional: RiskFunctional) -> Self {
        Self {
            losses,
            internal,
            standard: None,
            functional,
            alpha: 0.1,
            betting: BettingConfig::default(),
            restart: RestartPolicy::None,
        }
    }

    pub fn with_standard(mut self, standard: Vec<Forecast>) -> Self {
        self.standard = Some(standard);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_betting(mut self, betting: BettingConfig) -> Self {
        self.betting = betting;
        self
    }

    pub fn with_restart(mut self, restart: RestartPolicy) -> Self {
        self.restart = restart;
        self
    }

    pub fn threshold(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.betting.validate()?;
        self.restart.validate()?;
        let n = self.losses.len();
        if self.internal.len() != n {
            return Err(Error::Alignment(format!(
                "{} losses but {} internal forecasts",
                n,
                self.internal.len()
            )));
        }
        if let Some(s) = &self.standard {
            if s.len() != n {
                return Err(Error::Alignment(format!("{} losses but {} standard forecasts", n, s.len())));
            }
        }
        let d2 = self.functional.dimension() == 2;
        let series = std::iter::once(&self.internal).chain(self.standard.as_ref());
        for fc in series {
            if let Some(t) = fc.iter().position(|f| f.z.is_some() != d2) {
                return Err(Error::Alignment(format!(
                    "forecast at t={} has the wrong number of coordinates for {}",
                    t + 1,
                    self.functional.kind
                )));
            }
        }
        if let Some(t) = self.losses.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite loss at t={}", t + 1)));
        }
        Ok(())
    }
}

/// Smallest `M` with every loss and forecast coordinate in `[-M, M]`.
pub fn support_bound_from_series(losses: &[f64], forecasts: &[&[Forecast]]) -> f64 {
    let coords = forecasts.iter().flat_map(|s| s.iter()).flat_map(|f| std::iter::once(f.r).chain(f.z));
    losses.iter().copied().chain(coords).fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn at_row(t: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Domain(m) => Error::Domain(format!("t={t}: {m}")),
        other => other,
    }
}
