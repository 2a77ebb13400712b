//! Monte Carlo rejection rates of the standard (ES, VaR) backtest on iid
//! normal losses with noisy and biased forecasts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtests::{run_standard, BacktestInput, StandardTest};
use crate::betting::BettingConfig;
use crate::error::Result;
use crate::kernels::RiskFunctional;
use crate::simulate::{gen_iid_scenario, IidScenario, Underestimation};

pub const IID_CASES: [(&str, Underestimation); 6] = [
    ("baseline", Underestimation { var_pct: 0.0, es_pct: 0.0 }),
    ("-5% VaR", Underestimation { var_pct: 0.05, es_pct: 0.0 }),
    ("-10% VaR", Underestimation { var_pct: 0.10, es_pct: 0.0 }),
    ("-5% ES", Underestimation { var_pct: 0.0, es_pct: 0.05 }),
    ("-10% ES", Underestimation { var_pct: 0.0, es_pct: 0.10 }),
    ("-5% both", Underestimation { var_pct: 0.05, es_pct: 0.05 }),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IidStudy {
    pub first_seed: u64,
    pub runs: usize,
    /// Training days; the betting rule sees them but does not bet on them.
    pub training: usize,
    pub n: usize,
    pub thresholds: Vec<f64>,
    pub independent_noise: bool,
}

impl Default for IidStudy {
    fn default() -> Self {
        Self { first_seed: 0, runs: 200, training: 10, n: 1000, thresholds: vec![2.0, 5.0, 10.0, 20.0], independent_noise: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub cases: Vec<String>,
    pub thresholds: Vec<f64>,
    /// `rates[i][j]`: share of runs whose e-process reached `thresholds[i]` in case `j`.
    pub rates: Vec<Vec<f64>>,
    pub runs: usize,
}

/// Supremum of the e-process for one simulated run.
pub fn iid_run_sup(study: &IidStudy, seed: u64, under: Underestimation) -> Result<f64> {
    let s = gen_iid_scenario(seed, study.training, study.n, under, study.independent_noise);
    let betting = BettingConfig::default().with_truncation(1.0).with_warmup(s.training);
    let input = BacktestInput::new(s.losses.clone(), s.es_var_forecasts(), RiskFunctional::es_var(IidScenario::LEVEL)?)
        .with_betting(betting);
    Ok(run_standard(&input, &StandardTest::default())?.stats.sup)
}

pub fn iid_rejection_rates(study: &IidStudy) -> Result<RejectionTable> {
    let seeds: Vec<u64> = (0..study.runs as u64).map(|i| study.first_seed + i).collect();
    let mut rates = vec![vec![0.0; IID_CASES.len()]; study.thresholds.len()];
    for (j, (_, under)) in IID_CASES.iter().enumerate() {
        let sups: Vec<f64> = seeds.par_iter().map(|&s| iid_run_sup(study, s, *under)).collect::<Result<_>>()?;
        for (i, &th) in study.thresholds.iter().enumerate() {
            rates[i][j] = sups.iter().filter(|&&m| m >= th).count() as f64 / study.runs.max(1) as f64;
        }
    }
    Ok(RejectionTable {
        cases: IID_CASES.iter().map(|c| c.0.to_string()).collect(),
        thresholds: study.thresholds.clone(),
        rates,
        runs: study.runs,
    })
}
