//! Predictable betting fractions: GREL (empirical log-wealth maximization)
//! and its second-order Taylor approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the search interval when the feasibility bound is infinite.
pub const EXACT_SEARCH_CAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BettingMethod {
    GrelExact,
    GrelTaylor,
}

/// How past e-factors enter the bet on day `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistoryMode {
    /// Past losses are re-scored under the latest forecast.
    Reevaluate,
    /// Past losses keep the factor realized under their own forecast.
    Cached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BettingConfig {
    pub method: BettingMethod,
    /// Truncation `c` in `(0, 1]`.
    pub truncation: f64,
    /// `lambda_t = 0` for `t <= warmup`.
    pub warmup: usize,
    /// Points of the dense-grid fallback of the exact search.
    pub grid_size: usize,
    pub history: HistoryMode,
}

impl Default for BettingConfig {
    fn default() -> Self {
        Self {
            method: BettingMethod::GrelTaylor,
            truncation: 0.5,
            warmup: 1,
            grid_size: 1000,
            history: HistoryMode::Reevaluate,
        }
    }
}

impl BettingConfig {
    pub fn with_truncation(mut self, c: f64) -> Self {
        self.truncation = c;
        self
    }

    pub fn with_method(mut self, method: BettingMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_warmup(mut self, warmup: usize) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_history(mut self, history: HistoryMode) -> Self {
        self.history = history;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.truncation > 0.0 && self.truncation <= 1.0) {
            return Err(Error::Config(format!("truncation c must lie in (0, 1], got {}", self.truncation)));
        }
        if self.warmup < 1 {
            return Err(Error::Config("warmup must be at least 1".into()));
        }
        if self.method == BettingMethod::GrelExact && self.grid_size < 2 {
            return Err(Error::Config("grid_size must be at least 2".into()));
        }
        Ok(())
    }

    /// Bet for a day whose past e-factors are `history`, with feasibility
    /// bound `gamma_t` and an optional hard cap on `lambda`.
    pub fn lambda(&self, history: &[f64], gamma_t: f64, cap: f64) -> f64 {
        let gamma = gamma_t.min(cap / self.truncation);
        match self.method {
            BettingMethod::GrelTaylor => grel_taylor(history, gamma, self.truncation),
            BettingMethod::GrelExact => grel_exact_with_grid(history, gamma, self.truncation, self.grid_size),
        }
    }
}

/// `+inf` if `inf f >= 1`, else `-1 / (inf f - 1)`.
pub fn gamma_bound(history_free_inf: f64) -> f64 {
    if history_free_inf >= 1.0 {
        f64::INFINITY
    } else {
        -1.0 / (history_free_inf - 1.0)
    }
}

/// Running sums of `f - 1` and `(f - 1)^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaylorAccumulator {
    pub sum: f64,
    pub sum_sq: f64,
    pub n: usize,
}

impl TaylorAccumulator {
    pub fn push(&mut self, f: f64) {
        let g = f - 1.0;
        self.sum += g;
        self.sum_sq += g * g;
        self.n += 1;
    }

    pub fn lambda(&self, upper: f64) -> f64 {
        taylor_fraction(self.sum, self.sum_sq, upper)
    }
}

fn taylor_fraction(sum: f64, sum_sq: f64, upper: f64) -> f64 {
    if sum <= 0.0 || sum_sq <= 0.0 {
        return 0.0;
    }
    (sum / sum_sq).min(upper).max(0.0)
}

/// `0 v sum(f-1) / sum(f-1)^2 ^ c gamma`.
pub fn grel_taylor(evalue_history: &[f64], gamma_t: f64, c: f64) -> f64 {
    let mut acc = TaylorAccumulator::default();
    evalue_history.iter().for_each(|&f| acc.push(f));
    acc.lambda(c * gamma_t)
}

/// Maximizer of `sum log(1 + lambda (f - 1))` over `[0, min(c gamma, 1e3)]`.
pub fn grel_exact(evalue_history: &[f64], gamma_t: f64, c: f64) -> f64 {
    grel_exact_with_grid(evalue_history, gamma_t, c, 1000)
}

fn log_wealth(history: &[f64], lambda: f64) -> f64 {
    history.iter().map(|&f| (1.0 + lambda * (f - 1.0)).ln()).sum()
}

fn slope(history: &[f64], lambda: f64) -> f64 {
    history
        .iter()
        .map(|&f| {
            let g = f - 1.0;
            g / (1.0 + lambda * g)
        })
        .sum()
}

fn grel_exact_with_grid(history: &[f64], gamma_t: f64, c: f64, grid_size: usize) -> f64 {
    let upper = (c * gamma_t).min(EXACT_SEARCH_CAP);
    if history.is_empty() || !(upper > 0.0) || slope(history, 0.0) <= 0.0 {
        return 0.0;
    }
    // The objective is concave, so its slope is decreasing and bisection on
    // the slope finds the maximizer.
    let upper_slope = slope(history, upper);
    let candidate = if upper_slope >= 0.0 {
        upper
    } else {
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(history, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * upper.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let value = log_wealth(history, candidate);
    if value.is_finite() && value >= 0.0 {
        return candidate;
    }
    let n = grid_size.max(2);
    (0..n)
        .map(|i| upper * i as f64 / (n - 1) as f64)
        .map(|l| (l, log_wealth(history, l)))
        .filter(|(_, v)| v.is_finite())
        .fold((0.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}
