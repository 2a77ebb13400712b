//! Multiplicative e-processes kept in log space, with restart policies and
//! hitting-time statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RestartPolicy {
    #[default]
    None,
    /// Restart at `t_i + 1` for every listed `t_i`.
    AtFixedTimes { times: Vec<usize> },
    /// Restart at `t + 1` whenever `M_t >= threshold`.
    AtRejection { threshold: f64 },
}

impl RestartPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            RestartPolicy::None => Ok(()),
            RestartPolicy::AtFixedTimes { times } => {
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("restart times must be strictly increasing".into()));
                }
                if times.first() == Some(&0) {
                    return Err(Error::Config("restart times are 1-indexed".into()));
                }
                Ok(())
            }
            RestartPolicy::AtRejection { threshold } => {
                if !(*threshold > 1.0) {
                    return Err(Error::Config(format!("restart threshold must exceed 1, got {threshold}")));
                }
                Ok(())
            }
        }
    }

    /// Splits `[1, horizon]` into the segments induced by fixed times.
    pub fn fixed_partition(horizon: usize, segments: usize) -> RestartPolicy {
        let segments = segments.max(1);
        let times = (1..segments).map(|i| i * horizon / segments).filter(|&t| t > 0).collect();
        RestartPolicy::AtFixedTimes { times }
    }
}

/// Per-day record of a run. Index `i` holds day `t = i + 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EProcessRun {
    /// `log M_t`, `-inf` once the wealth hits zero.
    pub log_wealth: Vec<f64>,
    pub lambda: Vec<f64>,
    pub payoff: Vec<f64>,
    /// `V'` of a two-sided run; empty otherwise.
    pub payoff_prime: Vec<f64>,
    /// Bet on the `V'` product of a two-sided run; empty otherwise.
    pub lambda_prime: Vec<f64>,
    pub segment: Vec<usize>,
    /// First day of every segment.
    pub segment_starts: Vec<usize>,
    /// Days at which an at-rejection restart fired.
    pub rejections: Vec<usize>,
}

impl EProcessRun {
    pub fn len(&self) -> usize {
        self.log_wealth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_wealth.is_empty()
    }

    pub fn wealth(&self, t: usize) -> f64 {
        self.log_wealth[t - 1].exp()
    }

    pub fn wealth_path(&self) -> Vec<f64> {
        self.log_wealth.iter().map(|l| l.exp()).collect()
    }

    /// Recomputes `log M_t` from the stored bets and payoffs.
    pub fn replay(&self) -> Vec<f64> {
        let two_sided = !self.payoff_prime.is_empty();
        let mut out = Vec::with_capacity(self.len());
        let (mut lo, mut up) = (0.0, 0.0);
        for i in 0..self.len() {
            if i > 0 && self.segment[i] != self.segment[i - 1] {
                lo = 0.0;
                up = 0.0;
            }
            lo += log_factor(self.lambda[i], self.payoff[i]);
            if two_sided {
                up += log_factor(self.lambda_prime[i], -self.payoff_prime[i]);
                out.push(log_mixture(lo, up));
            } else {
                out.push(lo);
            }
        }
        out
    }
}

#[inline]
fn log_factor(lambda: f64, payoff: f64) -> f64 {
    let x = lambda * payoff;
    if x <= -1.0 {
        f64::NEG_INFINITY
    } else {
        x.ln_1p()
    }
}

/// `log(exp(a)/2 + exp(b)/2)`.
fn log_mixture(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (0.5 * (a - hi).exp() + 0.5 * (b - hi).exp()).ln()
}

fn check_factor(t: usize, lambda: f64, payoff: f64) -> Result<()> {
    let factor = 1.0 + lambda * payoff;
    if !(lambda >= 0.0) || !factor.is_finite() || factor < -1e-12 {
        return Err(Error::InvalidStep { t, factor });
    }
    Ok(())
}

/// Running state of a one-sided (or comparative) e-process.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EProcessState {
    log_wealth: f64,
    absorbed: bool,
    pending_reset: bool,
    pub run: EProcessRun,
}

impl EProcessState {
    pub fn new() -> Self {
        let mut s = Self::default();
        s.run.segment_starts.push(1);
        s
    }

    /// Number of completed days.
    pub fn t(&self) -> usize {
        self.run.len()
    }

    pub fn log_wealth(&self) -> f64 {
        if self.absorbed {
            f64::NEG_INFINITY
        } else {
            self.log_wealth
        }
    }

    pub fn wealth(&self) -> f64 {
        if self.absorbed {
            0.0
        } else {
            self.log_wealth.exp()
        }
    }

    pub fn is_absorbed(&self) -> bool {
        self.absorbed
    }

    /// True when the next step starts a fresh segment.
    pub fn reset_pending(&self) -> bool {
        self.pending_reset
    }

    fn begin_step(&mut self) -> usize {
        let t = self.t() + 1;
        if self.pending_reset {
            self.pending_reset = false;
            self.log_wealth = 0.0;
            self.absorbed = false;
            self.run.segment_starts.push(t);
        }
        t
    }

    /// `M_t = M_{t-1} (1 + lambda g_t)`.
    pub fn step(&mut self, payoff: f64, lambda: f64) -> Result<()> {
        check_factor(self.t() + 1, lambda, payoff)?;
        self.begin_step();
        let lf = log_factor(lambda, payoff);
        if lf == f64::NEG_INFINITY {
            self.absorbed = true;
        } else if !self.absorbed {
            self.log_wealth += lf;
        }
        self.run.log_wealth.push(self.log_wealth());
        self.run.lambda.push(lambda);
        self.run.payoff.push(payoff);
        self.run.segment.push(self.run.segment_starts.len() - 1);
        Ok(())
    }

    /// The next step starts from wealth one.
    pub fn schedule_reset(&mut self) {
        self.pending_reset = true;
    }

    pub fn record_rejection(&mut self, t: usize) {
        self.run.rejections.push(t);
    }
}

/// Standard-backtest step `M_t = M_{t-1} (1 + lambda V_t)`.
pub fn step_standard(state: &mut EProcessState, v: f64, lambda: f64) -> Result<()> {
    state.step(v, lambda)
}

/// Comparative step with `gap = S(L, R) - S(L, R*)`.
pub fn step_comparative(state: &mut EProcessState, score_gap: f64, lambda: f64) -> Result<()> {
    state.step(score_gap, lambda)
}

/// Equal-weight mixture of `prod(1 + lambda V)` and `prod(1 - lambda V')`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TwoSidedState {
    lower: f64,
    upper: f64,
    pending_reset: bool,
    pub run: EProcessRun,
}

impl TwoSidedState {
    pub fn new() -> Self {
        let mut s = Self::default();
        s.run.segment_starts.push(1);
        s
    }

    pub fn t(&self) -> usize {
        self.run.len()
    }

    pub fn log_wealth(&self) -> f64 {
        log_mixture(self.lower, self.upper)
    }

    pub fn wealth(&self) -> f64 {
        self.log_wealth().exp()
    }

    pub fn reset_pending(&self) -> bool {
        self.pending_reset
    }

    pub fn schedule_reset(&mut self) {
        self.pending_reset = true;
    }

    pub fn record_rejection(&mut self, t: usize) {
        self.run.rejections.push(t);
    }
}

pub fn step_two_sided(state: &mut TwoSidedState, v: f64, v_prime: f64, lambda: f64) -> Result<()> {
    step_two_sided_split(state, v, v_prime, lambda, lambda)
}

/// Two-sided step where each product carries its own predictable bet.
pub fn step_two_sided_split(
    state: &mut TwoSidedState,
    v: f64,
    v_prime: f64,
    lambda: f64,
    lambda_prime: f64,
) -> Result<()> {
    let t = state.t() + 1;
    check_factor(t, lambda, v)?;
    check_factor(t, lambda_prime, -v_prime)?;
    if state.pending_reset {
        state.pending_reset = false;
        state.lower = 0.0;
        state.upper = 0.0;
        state.run.segment_starts.push(t);
    }
    state.lower += log_factor(lambda, v);
    state.upper += log_factor(lambda_prime, -v_prime);
    let lw = state.log_wealth();
    state.run.log_wealth.push(lw);
    state.run.lambda.push(lambda);
    state.run.payoff.push(v);
    state.run.payoff_prime.push(v_prime);
    state.run.lambda_prime.push(lambda_prime);
    state.run.segment.push(state.run.segment_starts.len() - 1);
    Ok(())
}

/// Anything that can be restarted after day `t`.
pub trait Restartable {
    fn current_log_wealth(&self) -> f64;
    fn schedule_reset(&mut self);
    fn record_rejection(&mut self, t: usize);
}

impl Restartable for EProcessState {
    fn current_log_wealth(&self) -> f64 {
        self.log_wealth()
    }
    fn schedule_reset(&mut self) {
        EProcessState::schedule_reset(self)
    }
    fn record_rejection(&mut self, t: usize) {
        EProcessState::record_rejection(self, t)
    }
}

impl Restartable for TwoSidedState {
    fn current_log_wealth(&self) -> f64 {
        self.log_wealth()
    }
    fn schedule_reset(&mut self) {
        TwoSidedState::schedule_reset(self)
    }
    fn record_rejection(&mut self, t: usize) {
        TwoSidedState::record_rejection(self, t)
    }
}

/// Whether `policy` restarts the process after day `t` given `log M_t`.
/// Returns `Some(true)` for a rejection-triggered restart.
pub fn restart_due(policy: &RestartPolicy, t: usize, log_wealth: f64) -> Option<bool> {
    match policy {
        RestartPolicy::None => None,
        RestartPolicy::AtFixedTimes { times } => times.binary_search(&t).ok().map(|_| false),
        RestartPolicy::AtRejection { threshold } => (log_wealth >= threshold.ln()).then_some(true),
    }
}

/// Applies `policy` after day `t`: the reset takes effect at `t + 1`.
pub fn apply_restart<S: Restartable>(state: &mut S, policy: &RestartPolicy, t: usize) {
    match restart_due(policy, t, state.current_log_wealth()) {
        Some(true) => {
            state.record_rejection(t);
            state.schedule_reset();
        }
        Some(false) => state.schedule_reset(),
        None => {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitStatistics {
    /// `sup_t M_t` including `M_0 = 1`.
    pub sup: f64,
    pub segment_sups: Vec<f64>,
    /// First day with `M_t >= threshold`.
    pub first_hit: Option<usize>,
    /// Number of upcrossings of the threshold; a segment starting at or above
    /// it counts once.
    pub hit_count: usize,
    /// Segments whose supremum reaches the threshold.
    pub segments_rejected: usize,
}

pub fn hit_statistics(run: &EProcessRun, threshold: f64) -> HitStatistics {
    let log_th = threshold.ln();
    let n_seg = run.segment_starts.len().max(1);
    let mut segment_sups = vec![0.0f64; n_seg];
    let mut first_hit = None;
    let mut hit_count = 0;
    let mut above = false;
    for i in 0..run.len() {
        let seg = run.segment[i];
        if i == 0 || seg != run.segment[i - 1] {
            above = false;
        }
        let lw = run.log_wealth[i];
        segment_sups[seg] = segment_sups[seg].max(lw);
        let now = lw >= log_th;
        if now && !above {
            hit_count += 1;
            first_hit.get_or_insert(i + 1);
        }
        above = now;
    }
    let segment_sups: Vec<f64> = segment_sups.into_iter().map(f64::exp).collect();
    let sup = segment_sups.iter().copied().fold(1.0, f64::max);
    let segments_rejected = segment_sups.iter().filter(|&&s| s >= threshold).count();
    HitStatistics { sup, segment_sups, first_hit, hit_count, segments_rejected }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn run_path(payoffs: &[f64], lambda: f64, policy: &RestartPolicy) -> EProcessState {
        let mut s = EProcessState::new();
        for (i, &g) in payoffs.iter().enumerate() {
            step_standard(&mut s, g, lambda).unwrap();
            apply_restart(&mut s, policy, i + 1);
        }
        s
    }

    #[test]
    fn standard_steps() {
        let mut s = EProcessState::new();
        step_standard(&mut s, 19.0, 0.5).unwrap();
        assert_relative_eq!(s.wealth(), 10.5, epsilon = 1e-12);
        step_standard(&mut s, 3.0, 0.0).unwrap();
        assert_relative_eq!(s.wealth(), 10.5, epsilon = 1e-12);
        let mut s = EProcessState::new();
        step_standard(&mut s, 1.0, 1.0).unwrap();
        step_standard(&mut s, -1.0, 1.0).unwrap();
        assert_eq!(s.wealth(), 0.0);
        assert!(s.is_absorbed());
        step_standard(&mut s, 5.0, 1.0).unwrap();
        assert_eq!(s.wealth(), 0.0);
    }

    #[test]
    fn invalid_step_rejected() {
        let mut s = EProcessState::new();
        assert!(matches!(step_comparative(&mut s, -0.5, 3.0), Err(Error::InvalidStep { t: 1, .. })));
        step_comparative(&mut s, 0.99, 1.0).unwrap();
        assert_relative_eq!(s.wealth(), 1.99, epsilon = 1e-12);
        step_comparative(&mut s, 0.0, 1.0).unwrap();
        assert_relative_eq!(s.wealth(), 1.99, epsilon = 1e-12);
    }

    #[test]
    fn two_sided_examples() {
        let mut s = TwoSidedState::new();
        step_two_sided(&mut s, 1.0, -1.0, 0.5).unwrap();
        assert_relative_eq!(s.wealth(), 1.5, epsilon = 1e-12);
        let mut s = TwoSidedState::new();
        for _ in 0..5 {
            step_two_sided(&mut s, 0.0, 0.0, 0.7).unwrap();
        }
        assert_relative_eq!(s.wealth(), 1.0);
        assert!(step_two_sided(&mut s, 0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn rejection_restart() {
        let mut payoffs = vec![0.0; 36];
        payoffs.push(5.0);
        payoffs.extend(vec![0.0; 10]);
        let s = run_path(&payoffs, 1.0, &RestartPolicy::AtRejection { threshold: 5.0 });
        assert_eq!(s.run.rejections, vec![37]);
        assert_eq!(s.run.segment_starts, vec![1, 38]);
        assert_eq!(s.run.wealth(38), 1.0);
        assert_relative_eq!(s.run.wealth(37), 6.0);
    }

    #[test]
    fn fixed_restart_segments() {
        let policy = RestartPolicy::AtFixedTimes { times: vec![2000] };
        let s = run_path(&vec![0.01; 4000], 0.5, &policy);
        assert_eq!(s.run.segment_starts, vec![1, 2001]);
        assert_eq!(s.run.segment.iter().filter(|&&g| g == 0).count(), 2000);
        assert_eq!(s.run.segment.iter().filter(|&&g| g == 1).count(), 2000);
        let none = run_path(&[0.3, -0.2], 0.5, &RestartPolicy::None);
        assert_eq!(none.run.segment_starts, vec![1]);
        assert_eq!(RestartPolicy::fixed_partition(10, 2), RestartPolicy::AtFixedTimes { times: vec![5] });
        assert!(RestartPolicy::AtFixedTimes { times: vec![3, 3] }.validate().is_err());
        assert!(RestartPolicy::AtRejection { threshold: 1.0 }.validate().is_err());
    }

    #[test]
    fn hit_statistics_examples() {
        let s = run_path(&[0.0, 1.0, 1.0, 1.0], 1.0, &RestartPolicy::None);
        let h = hit_statistics(&s.run, 5.0);
        assert_relative_eq!(h.sup, 8.0, epsilon = 1e-12);
        assert_eq!(h.first_hit, Some(4));
        assert_eq!(h.hit_count, 1);

        let s = run_path(&[-0.5, 0.2], 1.0, &RestartPolicy::None);
        let h = hit_statistics(&s.run, 5.0);
        assert_eq!(h.first_hit, None);
        assert_eq!(h.sup, 1.0);

        let s = run_path(&[9.0, 0.0, 9.0, 0.0], 1.0, &RestartPolicy::AtRejection { threshold: 5.0 });
        let h = hit_statistics(&s.run, 5.0);
        assert_eq!(h.hit_count, 2);
        assert_eq!(h.segments_rejected, 2);
        assert_eq!(h.first_hit, Some(1));
    }

    #[test]
    fn log_representation_survives_overflow() {
        let s = run_path(&vec![1.0; 2000], 1.0, &RestartPolicy::None);
        assert_relative_eq!(s.log_wealth(), 2000.0 * 2f64.ln(), max_relative = 1e-12);
        let s = run_path(&vec![-0.5; 2000], 1.0, &RestartPolicy::None);
        assert_relative_eq!(s.log_wealth(), 2000.0 * 0.5f64.ln(), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn replay_is_exact(payoffs in prop::collection::vec(-1.0f64..3.0, 1..200), lambda in 0.0f64..1.0, th in 1.5f64..4.0) {
            let s = run_path(&payoffs, lambda, &RestartPolicy::AtRejection { threshold: th });
            let replay = s.run.replay();
            prop_assert_eq!(replay.len(), s.run.len());
            for (a, b) in replay.iter().zip(&s.run.log_wealth) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_infinite() && b.is_infinite()));
            }
            for (i, &lw) in s.run.log_wealth.iter().enumerate() {
                if lw.is_finite() && lw.abs() < 700.0 {
                    let w: f64 = s.run.wealth(i + 1);
                    prop_assert!((lw.exp() - w).abs() <= 1e-10 * w);
                }
            }
        }

        #[test]
        fn two_sided_replay(v in prop::collection::vec(-1.0f64..2.0, 1..100), lambda in 0.0f64..1.0) {
            let mut s = TwoSidedState::new();
            for (i, &x) in v.iter().enumerate() {
                step_two_sided(&mut s, x, -x.min(1.0), lambda).unwrap();
                apply_restart(&mut s, &RestartPolicy::AtFixedTimes { times: vec![50] }, i + 1);
            }
            let r = s.run.replay();
            for (a, b) in r.iter().zip(&s.run.log_wealth) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_infinite() && b.is_infinite()));
            }
        }
    }
}
