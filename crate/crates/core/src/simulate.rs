//! Seeded generators for the iid, stationary and structural-change experiments.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::Innovation;
use crate::kernels::Forecast;

/// Steps simulated and discarded before anything is recorded.
pub const BURN_IN: usize = 1000;

/// Random stream ids; each purpose draws from its own ChaCha stream.
mod stream {
    pub const LOSSES: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const ES_NOISE: u64 = 3;
}

fn rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(purpose);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    IidNormalWithNoisyForecasts,
    StationarySkewedT,
    StructuralChangeVolatility,
    StructuralChangeTail,
}

/// Proportional downward bias of the iid forecasts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Underestimation {
    pub var_pct: f64,
    pub es_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    /// Training sample (iid) or rolling-window presample (time series).
    pub presample: usize,
    /// Evaluation days.
    pub n: usize,
    #[serde(default)]
    pub underestimation: Option<Underestimation>,
    /// Break point in evaluation days; structural scenarios only.
    #[serde(default)]
    pub b_star: Option<usize>,
    /// Draw the ES noise independently of the VaR noise.
    #[serde(default)]
    pub independent_noise: bool,
}

pub const DEFAULT_B_STAR: usize = 2000;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.presample == 0 {
            return Err(Error::Config("presample must be positive".into()));
        }
        if let Some(u) = self.underestimation {
            for (name, v) in [("var_pct", u.var_pct), ("es_pct", u.es_pct)] {
                if !(0.0..=0.5).contains(&v) {
                    return Err(Error::Config(format!("underestimation.{name} must lie in [0, 0.5], got {v}")));
                }
            }
            if self.kind != ScenarioKind::IidNormalWithNoisyForecasts {
                return Err(Error::Config("underestimation only applies to the iid scenario".into()));
            }
        }
        match self.kind {
            ScenarioKind::StructuralChangeVolatility | ScenarioKind::StructuralChangeTail => {
                let b = self.b_star.unwrap_or(DEFAULT_B_STAR);
                if b == 0 || b > self.n {
                    return Err(Error::Config(format!("b_star must lie in (0, n], got {b} with n = {}", self.n)));
                }
            }
            _ if self.b_star.is_some() => {
                return Err(Error::Config("b_star only applies to structural-change scenarios".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Simulated> {
        self.validate()?;
        Ok(match self.kind {
            ScenarioKind::IidNormalWithNoisyForecasts => Simulated::Iid(gen_iid_scenario(
                self.seed,
                self.presample,
                self.n,
                self.underestimation.unwrap_or_default(),
                self.independent_noise,
            )),
            ScenarioKind::StationarySkewedT => Simulated::Path(gen_stationary(self.seed, self.presample, self.n)),
            kind => Simulated::Path(gen_structural(
                self.seed,
                kind,
                self.b_star.unwrap_or(DEFAULT_B_STAR),
                self.presample,
                self.n,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Simulated {
    Iid(IidScenario),
    Path(SimulatedPath),
}

/// Standard normal losses with noisy VaR and ES forecasts at level 0.95.
/// The first `training` days form the training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct IidScenario {
    pub losses: Vec<f64>,
    pub var_forecasts: Vec<f64>,
    pub es_forecasts: Vec<f64>,
    pub training: usize,
}

impl IidScenario {
    pub const LEVEL: f64 = 0.95;

    /// `(ES, VaR)` forecast pairs.
    pub fn es_var_forecasts(&self) -> Vec<Forecast> {
        self.es_forecasts.iter().zip(&self.var_forecasts).map(|(&r, &z)| Forecast::pair(r, z)).collect()
    }
}

pub const NOISE_SUPPORT: [f64; 11] = [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

/// `l + n` iid N(0,1) losses; forecasts `(1 - var_pct)(1.64 + e_t)` and
/// `(1 - es_pct)(2.06 + e_t)` with `e_t` uniform on `{+-i/10}`.
pub fn gen_iid_scenario(seed: u64, l: usize, n: usize, under: Underestimation, independent_noise: bool) -> IidScenario {
    let total = l + n;
    let mut loss_rng = rng(seed, stream::LOSSES);
    let mut noise_rng = rng(seed, stream::NOISE);
    let mut es_rng = rng(seed, stream::ES_NOISE);
    let losses: Vec<f64> = (0..total).map(|_| StandardNormal.sample(&mut loss_rng)).collect();
    let mut var_forecasts = Vec::with_capacity(total);
    let mut es_forecasts = Vec::with_capacity(total);
    for _ in 0..total {
        let e = *NOISE_SUPPORT.choose(&mut noise_rng).expect("non-empty");
        let e_es = if independent_noise { *NOISE_SUPPORT.choose(&mut es_rng).expect("non-empty") } else { e };
        var_forecasts.push((1.0 - under.var_pct) * (1.64 + e));
        es_forecasts.push((1.0 - under.es_pct) * (2.06 + e_es));
    }
    IidScenario { losses, var_forecasts, es_forecasts, training: l }
}

/// A simulated AR(1)-GARCH(1,1) path with its generator state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub losses: Vec<f64>,
    /// True conditional mean of each loss.
    pub mu: Vec<f64>,
    /// True conditional volatility of each loss.
    pub sigma: Vec<f64>,
    /// Innovation law of each loss.
    pub laws: Vec<Innovation>,
    /// Number of leading presample days.
    pub presample: usize,
}

impl SimulatedPath {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}

/// Coefficients in force on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub phi0: f64,
    pub phi1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub innovation: Innovation,
}

/// Runs the recursion for `BURN_IN + len` steps and records the last `len`.
/// `coef(i)` gives the coefficients for recorded index `i`; the burn-in uses `coef(0)`.
pub fn simulate_ar_garch(seed: u64, len: usize, presample: usize, coef: impl Fn(usize) -> Coefficients) -> SimulatedPath {
    let mut r = rng(seed, stream::LOSSES);
    let c0 = coef(0);
    let mut prev = c0.phi0 / (1.0 - c0.phi1);
    let mut s2 = c0.alpha0 / (1.0 - c0.alpha1 - c0.beta1).max(1e-3);
    let mut eps = 0.0;
    let mut out = SimulatedPath {
        losses: Vec::with_capacity(len),
        mu: Vec::with_capacity(len),
        sigma: Vec::with_capacity(len),
        laws: Vec::with_capacity(len),
        presample,
    };
    for step in 0..BURN_IN + len {
        let c = if step < BURN_IN { c0 } else { coef(step - BURN_IN) };
        s2 = c.alpha0 + c.alpha1 * eps * eps + c.beta1 * s2;
        let mu = c.phi0 + c.phi1 * prev;
        let sd = s2.sqrt();
        eps = sd * c.innovation.sample(&mut r);
        prev = mu + eps;
        if step >= BURN_IN {
            out.losses.push(prev);
            out.mu.push(mu);
            out.sigma.push(sd);
            out.laws.push(c.innovation);
        }
    }
    out
}

pub const STATIONARY: Coefficients = Coefficients {
    phi0: -0.05,
    phi1: 0.3,
    alpha0: 0.01,
    alpha1: 0.1,
    beta1: 0.85,
    innovation: Innovation::SkewedT { nu: 5.0, skew: 1.5 },
};

pub fn gen_stationary(seed: u64, presample: usize, n: usize) -> SimulatedPath {
    simulate_ar_garch(seed, presample + n, presample, |_| STATIONARY)
}

/// Structural-change paths. The break hits evaluation days after `b_star`.
pub fn gen_structural(seed: u64, kind: ScenarioKind, b_star: usize, presample: usize, n: usize) -> Result<SimulatedPath> {
    let after = move |i: usize| i >= presample + b_star;
    match kind {
        ScenarioKind::StructuralChangeVolatility => Ok(simulate_ar_garch(seed, presample + n, presample, |i| Coefficients {
            phi0: -0.05,
            phi1: 0.1,
            alpha0: 0.3,
            alpha1: 0.01,
            beta1: if after(i) { 0.8 } else { 0.1 },
            innovation: Innovation::Normal,
        })),
        ScenarioKind::StructuralChangeTail => Ok(simulate_ar_garch(seed, presample + n, presample, |i| Coefficients {
            phi0: -0.05,
            phi1: 0.1,
            alpha0: 0.3,
            alpha1: 0.1,
            beta1: 0.5,
            innovation: Innovation::SkewedT { nu: if after(i) { 3.0 } else { 6.0 }, skew: 1.0 },
        })),
        other => Err(Error::Config(format!("{other:?} is not a structural-change scenario"))),
    }
}
