use serde::{Deserialize, Serialize};

use super::{at_row, BacktestInput};
use crate::betting::{gamma_bound, HistoryMode};
use crate::eprocess::{
    apply_restart, hit_statistics, step_standard, step_two_sided_split, EProcessRun, EProcessState, HitStatistics,
    TwoSidedState,
};
use crate::error::{Error, Result};
use crate::kernels::{Forecast, IdentificationForm, IdentificationKernel, Monotonicity};

/// Which null a standard backtest targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    /// `R_t >= rho(L_t | F_{t-1})`: detects underestimation.
    Lower,
    /// `R_t <= rho(L_t | F_{t-1})`: detects overestimation (one-dimensional only).
    Upper,
    /// `R_t = rho(L_t | F_{t-1})` via the equal-weight mixture (one-dimensional only).
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardTest {
    pub form: IdentificationForm,
    pub sidedness: Sidedness,
    /// Hard cap on every bet.
    pub lambda_cap: f64,
}

impl Default for StandardTest {
    fn default() -> Self {
        Self { form: IdentificationForm::Ratio, sidedness: Sidedness::Lower, lambda_cap: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardOutcome {
    pub run: EProcessRun,
    /// `sup_t M_t >= 1/alpha`.
    pub rejected: bool,
    pub first_hit: Option<usize>,
    pub stats: HitStatistics,
}

/// One side of a standard test: its kernel plus the realized factors kept
/// for the cached history mode.
struct Side {
    kernel: IdentificationKernel,
    cached: Vec<f64>,
    buf: Vec<f64>,
}

impl Side {
    fn new(kernel: IdentificationKernel) -> Self {
        Self { kernel, cached: Vec::new(), buf: Vec::new() }
    }

    fn lambda(&mut self, input: &BacktestInput, test: &StandardTest, t: usize, seg_start: usize, f: Forecast) -> Result<f64> {
        if t <= input.betting.warmup {
            return Ok(0.0);
        }
        let i = t - 1;
        let gamma = gamma_bound(1.0 + self.kernel.infimum(f).map_err(at_row(t))?);
        self.buf.clear();
        match input.betting.history {
            HistoryMode::Reevaluate => {
                for s in seg_start..i {
                    self.buf.push(1.0 + self.kernel.eval(input.losses[s], f).map_err(at_row(s + 1))?);
                }
            }
            HistoryMode::Cached => self.buf.extend_from_slice(&self.cached[seg_start..i]),
        }
        Ok(input.betting.lambda(&self.buf, gamma, test.lambda_cap))
    }
}

/// Runs a standard e-backtest of `input.internal` against the losses.
pub fn run_standard(input: &BacktestInput, test: &StandardTest) -> Result<StandardOutcome> {
    input.validate()?;
    let base = IdentificationKernel::new(input.functional, test.form)?;
    let threshold = input.threshold();
    let run = match test.sidedness {
        Sidedness::Lower | Sidedness::Upper => {
            let kernel = if test.sidedness == Sidedness::Lower {
                base
            } else {
                base.with_direction(Monotonicity::IncreasingInR)?
            };
            let mut side = Side::new(kernel);
            let mut state = EProcessState::new();
            let mut seg_start = 0;
            for (i, (&x, &f)) in input.losses.iter().zip(&input.internal).enumerate() {
                let t = i + 1;
                if state.reset_pending() {
                    seg_start = i;
                }
                let lambda = side.lambda(input, test, t, seg_start, f)?;
                let payoff = kernel.eval(x, f).map_err(at_row(t))?;
                side.cached.push(1.0 + payoff);
                step_standard(&mut state, payoff, lambda)?;
                apply_restart(&mut state, &input.restart, t);
            }
            state.run
        }
        Sidedness::TwoSided => {
            if input.functional.dimension() != 1 {
                return Err(Error::Unsupported("two-sided standard tests need a one-dimensional functional".into()));
            }
            let mut lower = Side::new(base);
            let mut upper = Side::new(base.mirrored()?);
            let mut state = TwoSidedState::new();
            let mut seg_start = 0;
            for (i, (&x, &f)) in input.losses.iter().zip(&input.internal).enumerate() {
                let t = i + 1;
                if state.reset_pending() {
                    seg_start = i;
                }
                let l_lo = lower.lambda(input, test, t, seg_start, f)?;
                let l_up = upper.lambda(input, test, t, seg_start, f)?;
                let v = lower.kernel.eval(x, f).map_err(at_row(t))?;
                let w = upper.kernel.eval(x, f).map_err(at_row(t))?;
                lower.cached.push(1.0 + v);
                upper.cached.push(1.0 + w);
                step_two_sided_split(&mut state, v, -w, l_lo, l_up)?;
                apply_restart(&mut state, &input.restart, t);
            }
            state.run
        }
    };
    let stats = hit_statistics(&run, threshold);
    Ok(StandardOutcome { rejected: stats.sup >= threshold, first_hit: stats.first_hit, stats, run })
}
