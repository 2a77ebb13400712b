use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_comparative, BacktestInput, ZoneVerdict};
use crate::error::Result;
use crate::kernels::{Forecast, ScoringKernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub internal: String,
    pub standard: String,
    #[serde(flatten)]
    pub verdict: ZoneVerdict,
}

/// `cells[row][col]`: the row is the standard model and the column the
/// internal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub models: Vec<String>,
    pub cells: Vec<Vec<HeatmapCell>>,
}

/// Pairwise comparative backtests over every ordered pair of the roster.
/// `template` supplies the functional, alpha, betting and restart settings;
/// its forecast series are ignored.
pub fn heatmap(
    losses: &[f64],
    roster: &[(String, Vec<Forecast>)],
    template: &BacktestInput,
    kernel: &ScoringKernel,
) -> Result<Heatmap> {
    let n = roster.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|row| (0..n).map(move |col| (row, col))).collect();
    let verdicts: Vec<ZoneVerdict> = pairs
        .par_iter()
        .map(|&(row, col)| {
            let input = BacktestInput {
                losses: losses.to_vec(),
                internal: roster[col].1.clone(),
                standard: Some(roster[row].1.clone()),
                ..template.clone()
            };
            run_comparative(&input, kernel).map(|o| o.verdict)
        })
        .collect::<Result<_>>()?;
    let mut it = verdicts.into_iter();
    let cells = (0..n)
        .map(|row| {
            (0..n)
                .map(|col| HeatmapCell {
                    internal: roster[col].0.clone(),
                    standard: roster[row].0.clone(),
                    verdict: it.next().expect("one verdict per pair"),
                })
                .collect()
        })
        .collect();
    Ok(Heatmap { models: roster.iter().map(|r| r.0.clone()).collect(), cells })
}
