use serde::{Deserialize, Serialize};

use super::{at_row, classify_zone, BacktestInput, ZoneVerdict};
use crate::betting::{gamma_bound, HistoryMode};
use crate::eprocess::{hit_statistics, restart_due, step_comparative, EProcessRun, EProcessState, RestartPolicy};
use crate::error::{Error, Result};
use crate::kernels::ScoringKernel;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparativeOutcome {
    /// `M-`, testing that the internal forecast dominates.
    pub minus: EProcessRun,
    /// `M+`, testing that the standard forecast dominates.
    pub plus: EProcessRun,
    /// Verdict from the suprema over the whole horizon.
    pub verdict: ZoneVerdict,
    /// One verdict per restart segment.
    pub segments: Vec<ZoneVerdict>,
}

/// Runs `M-` and `M+` side by side.
///
/// Each process bets with its own GREL fraction and feasibility bound. With
/// an at-rejection policy a crossing by either process restarts both.
pub fn run_comparative(input: &BacktestInput, kernel: &ScoringKernel) -> Result<ComparativeOutcome> {
    input.validate()?;
    let standard = input
        .standard
        .as_ref()
        .ok_or_else(|| Error::Config("comparative backtest needs standard forecasts".into()))?;
    if kernel.functional.kind != input.functional.kind {
        return Err(Error::Config(format!(
            "scoring kernel for {} used on a {} backtest",
            kernel.functional.kind, input.functional.kind
        )));
    }
    let betting = &input.betting;
    let mut minus = EProcessState::new();
    let mut plus = EProcessState::new();
    let mut realized: Vec<f64> = Vec::with_capacity(input.losses.len());
    let mut buf_minus = Vec::new();
    let mut buf_plus = Vec::new();
    let mut seg_start = 0;

    for (i, &x) in input.losses.iter().enumerate() {
        let t = i + 1;
        let (f, fs) = (input.internal[i], standard[i]);
        if minus.reset_pending() {
            seg_start = i;
        }
        let (mut lm, mut lp) = (0.0, 0.0);
        if t > betting.warmup {
            let gm = gamma_bound(1.0 + kernel.gap_infimum(f, fs).map_err(at_row(t))?);
            let gp = gamma_bound(1.0 + kernel.gap_infimum(fs, f).map_err(at_row(t))?);
            buf_minus.clear();
            buf_plus.clear();
            for s in seg_start..i {
                let g = match betting.history {
                    HistoryMode::Reevaluate => kernel.gap(input.losses[s], f, fs).map_err(at_row(s + 1))?,
                    HistoryMode::Cached => realized[s],
                };
                buf_minus.push(1.0 + g);
                buf_plus.push(1.0 - g);
            }
            lm = betting.lambda(&buf_minus, gm, f64::INFINITY);
            lp = betting.lambda(&buf_plus, gp, f64::INFINITY);
        }
        let gap = kernel.gap(x, f, fs).map_err(at_row(t))?;
        realized.push(gap);
        step_comparative(&mut minus, gap, lm)?;
        step_comparative(&mut plus, -gap, lp)?;

        match &input.restart {
            RestartPolicy::None => {}
            RestartPolicy::AtFixedTimes { .. } => {
                if restart_due(&input.restart, t, 0.0).is_some() {
                    minus.schedule_reset();
                    plus.schedule_reset();
                }
            }
            RestartPolicy::AtRejection { .. } => {
                let hit_m = restart_due(&input.restart, t, minus.log_wealth()).is_some();
                let hit_p = restart_due(&input.restart, t, plus.log_wealth()).is_some();
                if hit_m {
                    minus.record_rejection(t);
                }
                if hit_p {
                    plus.record_rejection(t);
                }
                if hit_m || hit_p {
                    minus.schedule_reset();
                    plus.schedule_reset();
                }
            }
        }
    }

    let threshold = input.threshold();
    let sm = hit_statistics(&minus.run, threshold);
    let sp = hit_statistics(&plus.run, threshold);
    let verdict = classify_zone(sm.sup, sp.sup, sm.first_hit, sp.first_hit, input.alpha);
    let segments = segment_verdicts(&minus.run, &plus.run, threshold, input.alpha);
    Ok(ComparativeOutcome { minus: minus.run, plus: plus.run, verdict, segments })
}

fn segment_verdicts(minus: &EProcessRun, plus: &EProcessRun, threshold: f64, alpha: f64) -> Vec<ZoneVerdict> {
    let log_th = threshold.ln();
    let n_seg = minus.segment_starts.len();
    (0..n_seg)
        .map(|seg| {
            let mut sup = (0.0f64, 0.0f64);
            let mut tau = (None, None);
            for i in (0..minus.len()).filter(|&i| minus.segment[i] == seg) {
                let (a, b) = (minus.log_wealth[i], plus.log_wealth[i]);
                sup = (sup.0.max(a), sup.1.max(b));
                if a >= log_th && tau.0.is_none() {
                    tau.0 = Some(i + 1);
                }
                if b >= log_th && tau.1.is_none() {
                    tau.1 = Some(i + 1);
                }
            }
            classify_zone(sup.0.exp(), sup.1.exp(), tau.0, tau.1, alpha)
        })
        .collect()
}

/// First crossing of each reporting threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHits {
    pub threshold: f64,
    pub tau_minus: Option<usize>,
    pub tau_plus: Option<usize>,
}

/// Serializable verdict of one internal/standard pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparativeReport {
    pub internal: String,
    pub standard: String,
    pub functional: String,
    pub level: f64,
    pub zone: String,
    pub sup_minus: f64,
    pub sup_plus: f64,
    pub tau_minus: Option<usize>,
    pub tau_plus: Option<usize>,
    pub dominance_magnitude: super::Dominance,
    pub dominance_speed: super::Dominance,
    pub thresholds: Vec<ThresholdHits>,
    pub segments: Vec<ZoneVerdict>,
}

impl ComparativeReport {
    pub fn new(
        internal: &str,
        standard: &str,
        input: &BacktestInput,
        outcome: &ComparativeOutcome,
        thresholds: &[f64],
    ) -> Self {
        let v = &outcome.verdict;
        let thresholds = thresholds
            .iter()
            .map(|&th| ThresholdHits {
                threshold: th,
                tau_minus: hit_statistics(&outcome.minus, th).first_hit,
                tau_plus: hit_statistics(&outcome.plus, th).first_hit,
            })
            .collect();
        Self {
            internal: internal.to_string(),
            standard: standard.to_string(),
            functional: input.functional.kind.to_string(),
            level: input.functional.level(),
            zone: v.zone.as_str().to_string(),
            sup_minus: v.sup_minus,
            sup_plus: v.sup_plus,
            tau_minus: v.tau_minus,
            tau_plus: v.tau_plus,
            dominance_magnitude: v.dominance_magnitude,
            dominance_speed: v.dominance_speed,
            thresholds,
            segments: outcome.segments.clone(),
        }
    }
}
