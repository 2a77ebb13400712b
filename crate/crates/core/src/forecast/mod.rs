//! AR(1)-GARCH(1,1) rolling forecasts with parametric, bootstrap and
//! extreme-value estimates of the innovation risk.

mod dist;
mod garch;
mod optim;

pub use dist::{expectile, law_risk, Empirical, EvtSpliced, Gpd, Innovation, InnovationLaw, Prepared};
pub use garch::{fit_garch, Filtered, GarchFit, GarchSpec, InnovationFamily, MIN_WINDOW};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Forecast, RiskFunctional};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailEstimator {
    /// Closed form under the fitted innovation law.
    Fp,
    /// Bootstrap of the standardized residuals.
    Fhs,
    /// Empirical body with a generalized Pareto tail.
    Evt,
    /// The data-generating law itself; simulated data only.
    Opt,
}

impl TailEstimator {
    pub fn as_str(self) -> &'static str {
        match self {
            TailEstimator::Fp => "FP",
            TailEstimator::Fhs => "FHS",
            TailEstimator::Evt => "EVT",
            TailEstimator::Opt => "opt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastMethod {
    pub innovation: InnovationFamily,
    pub tail: TailEstimator,
    pub window: usize,
    pub fhs_draws: usize,
    pub evt_threshold_quantile: f64,
    /// Re-estimate the GARCH parameters every this many days; the window is
    /// re-filtered daily with the latest estimate in between.
    pub refit_every: usize,
    pub seed: u64,
}

impl Default for ForecastMethod {
    fn default() -> Self {
        Self {
            innovation: InnovationFamily::Normal,
            tail: TailEstimator::Fp,
            window: 500,
            fhs_draws: 10_000,
            evt_threshold_quantile: 0.9,
            refit_every: 1,
            seed: 0,
        }
    }
}

impl ForecastMethod {
    pub fn new(innovation: InnovationFamily, tail: TailEstimator) -> Self {
        Self { innovation, tail, ..Self::default() }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn with_refit_every(mut self, days: usize) -> Self {
        self.refit_every = days;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Short label such as `n-FP` or `st-EVT`.
    pub fn name(&self) -> String {
        match self.tail {
            TailEstimator::Opt => "opt".into(),
            tail => format!("{}-{}", self.innovation.prefix(), tail.as_str()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < MIN_WINDOW {
            return Err(Error::Config(format!("window must be at least {MIN_WINDOW}, got {}", self.window)));
        }
        if !(self.evt_threshold_quantile > 0.8 && self.evt_threshold_quantile < 0.99) {
            return Err(Error::Config(format!(
                "EVT threshold quantile must lie in (0.8, 0.99), got {}",
                self.evt_threshold_quantile
            )));
        }
        if self.fhs_draws == 0 || self.refit_every == 0 {
            return Err(Error::Config("fhs_draws and refit_every must be positive".into()));
        }
        Ok(())
    }
}

impl FromStr for ForecastMethod {
    type Err = Error;

    /// Parses labels such as `n-FP`, `t-fhs`, `st-EVT` or `opt`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "opt" {
            return Ok(Self { tail: TailEstimator::Opt, ..Self::default() });
        }
        let (fam, tail) = lower.split_once('-').ok_or_else(|| Error::Config(format!("unknown method {s}")))?;
        let innovation = match fam {
            "n" => InnovationFamily::Normal,
            "t" => InnovationFamily::StudentT,
            "st" => InnovationFamily::SkewedT,
            _ => return Err(Error::Config(format!("unknown innovation family in {s}"))),
        };
        let tail = match tail {
            "fp" => TailEstimator::Fp,
            "fhs" => TailEstimator::Fhs,
            "evt" => TailEstimator::Evt,
            _ => return Err(Error::Config(format!("unknown tail estimator in {s}"))),
        };
        Ok(Self::new(innovation, tail))
    }
}

impl fmt::Display for ForecastMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn scale_forecast(rho: Forecast, mu: f64, sigma: f64) -> Forecast {
    Forecast { r: mu + sigma * rho.r, z: rho.z.map(|z| mu + sigma * z) }
}

/// Risk functional of the standardized innovation, estimated from the
/// window's residuals. `law` is the fitted innovation law used by FP;
/// `day` seeds the bootstrap stream.
pub fn innovation_risk(
    residuals: &[f64],
    law: &Innovation,
    method: &ForecastMethod,
    functional: RiskFunctional,
    day: u64,
) -> Result<Forecast> {
    match method.tail {
        TailEstimator::Fp => law_risk(&law.prepare()?, functional),
        TailEstimator::Fhs => {
            if residuals.is_empty() {
                return Err(Error::domain("no residuals to bootstrap"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(method.seed);
            rng.set_stream(day);
            let draws = (0..method.fhs_draws).map(|_| residuals[rng.random_range(0..residuals.len())]).collect();
            law_risk(&Empirical::new(draws)?, functional)
        }
        TailEstimator::Evt => law_risk(&EvtSpliced::fit(residuals.to_vec(), method.evt_threshold_quantile)?, functional),
        TailEstimator::Opt => Err(Error::Config("opt forecasts need the generator state".into())),
    }
}

/// Forecasts for `losses[window..]`, one per day.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingForecast {
    pub method: String,
    /// Index into the loss series of the first forecast day.
    pub start: usize,
    /// `None` where the fit or the tail estimate failed.
    pub values: Vec<Option<Forecast>>,
}

/// Largest tolerated share of failed days.
pub const MAX_MISSING: f64 = 0.01;

impl RollingForecast {
    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Fills failed days with the previous day's forecast.
    pub fn filled(&self) -> Result<Vec<Forecast>> {
        let mut last = None;
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                last = v.or(last);
                last.ok_or_else(|| Error::Fit(format!("no forecast for t={}", self.start + k + 1)))
            })
            .collect()
    }
}

/// Rolling one-step-ahead forecasts `mu_t + sigma_t rho(Z)`. The forecast
/// for `losses[k]` only uses `losses[k - window..k]`.
pub fn rolling_forecast(losses: &[f64], method: &ForecastMethod, functional: RiskFunctional) -> Result<RollingForecast> {
    Ok(rolling_forecasts(losses, std::slice::from_ref(method), functional)?.remove(0))
}

/// Like [`rolling_forecast`] for several methods at once; methods with the
/// same innovation family, window and refit cadence share one chain of fits.
pub fn rolling_forecasts(
    losses: &[f64],
    methods: &[ForecastMethod],
    functional: RiskFunctional,
) -> Result<Vec<RollingForecast>> {
    type Key = (InnovationFamily, usize, usize);
    let mut chains: Vec<(Key, Vec<Option<GarchSpec>>)> = Vec::new();
    let mut out = Vec::with_capacity(methods.len());
    for method in methods {
        method.validate()?;
        if method.tail == TailEstimator::Opt {
            return Err(Error::Config("opt forecasts need the generator state; use oracle_forecast".into()));
        }
        let key = (method.innovation, method.window, method.refit_every);
        let idx = match chains.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                chains.push((key, fit_chain(losses, method)));
                chains.len() - 1
            }
        };
        out.push(forecast_from_chain(losses, method, functional, &chains[idx].1)?);
    }
    Ok(out)
}

fn fit_chain(losses: &[f64], method: &ForecastMethod) -> Vec<Option<GarchSpec>> {
    let w = method.window;
    let mut current: Option<GarchSpec> = None;
    (w..losses.len())
        .enumerate()
        .map(|(j, k)| {
            if j % method.refit_every == 0 || current.is_none() {
                if let Ok(fit) = fit_garch(&losses[k - w..k], method.innovation, current.as_ref()) {
                    current = Some(fit.spec);
                }
            }
            current
        })
        .collect()
}

fn forecast_from_chain(
    losses: &[f64],
    method: &ForecastMethod,
    functional: RiskFunctional,
    specs: &[Option<GarchSpec>],
) -> Result<RollingForecast> {
    let w = method.window;
    let values: Vec<Option<Forecast>> = specs
        .par_iter()
        .enumerate()
        .map(|(j, spec)| {
            let k = w + j;
            let spec = spec.as_ref()?;
            let f = spec.filter(&losses[k - w..k]).ok()?;
            let rho = innovation_risk(&f.residuals, &spec.innovation, method, functional, k as u64).ok()?;
            Some(scale_forecast(rho, f.mu_next, f.sigma_next))
        })
        .collect();
    let out = RollingForecast { method: method.name(), start: w, values };
    if out.missing() as f64 > MAX_MISSING * out.values.len() as f64 {
        return Err(Error::Fit(format!("{} of {} forecast days failed for {}", out.missing(), out.values.len(), out.method)));
    }
    Ok(out)
}

/// Forecasts from the true conditional mean, volatility and innovation law.
pub fn oracle_forecast(mu: &[f64], sigma: &[f64], laws: &[Innovation], functional: RiskFunctional) -> Result<Vec<Forecast>> {
    if mu.len() != sigma.len() || mu.len() != laws.len() {
        return Err(Error::Alignment("generator state columns differ in length".into()));
    }
    let mut cache: Vec<(Innovation, Forecast)> = Vec::new();
    mu.iter()
        .zip(sigma)
        .zip(laws)
        .map(|((&m, &s), law)| {
            let rho = match cache.iter().find(|(l, _)| l == law) {
                Some((_, r)) => *r,
                None => {
                    let r = law_risk(&law.prepare()?, functional)?;
                    cache.push((*law, r));
                    r
                }
            };
            Ok(scale_forecast(rho, m, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_losses(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn method_labels() {
        let m: ForecastMethod = "st-EVT".parse().unwrap();
        assert_eq!(m.innovation, InnovationFamily::SkewedT);
        assert_eq!(m.tail, TailEstimator::Evt);
        assert_eq!(m.name(), "st-EVT");
        assert_eq!("opt".parse::<ForecastMethod>().unwrap().name(), "opt");
        assert!("x-FP".parse::<ForecastMethod>().is_err());
        assert!(ForecastMethod { window: 50, ..ForecastMethod::default() }.validate().is_err());
        assert!(ForecastMethod { evt_threshold_quantile: 0.5, ..ForecastMethod::default() }.validate().is_err());
    }

    #[test]
    fn window_equal_to_length_gives_nothing() {
        let x = normal_losses(200, 1);
        let m = ForecastMethod::default().with_window(200);
        assert!(rolling_forecast(&x, &m, RiskFunctional::var(0.95).unwrap()).unwrap().values.is_empty());
    }

    #[test]
    fn forecasts_are_predictable() {
        let mut x = normal_losses(230, 4);
        let f = RiskFunctional::es_var(0.95).unwrap();
        let m = ForecastMethod::new(InnovationFamily::Normal, TailEstimator::Fhs).with_window(200).with_refit_every(10);
        let base = rolling_forecast(&x, &m, f).unwrap().filled().unwrap();
        assert_eq!(base.len(), 30);
        assert!(base.iter().all(|v| v.z.is_some()));
        x[215] += 50.0;
        let spiked = rolling_forecast(&x, &m, f).unwrap().filled().unwrap();
        assert_eq!(base[..16], spiked[..16]);
        assert_ne!(base[16], spiked[16]);
    }

    #[test]
    fn fp_normal_is_location_scale_equivariant() {
        let x = normal_losses(300, 9);
        let (a, b) = (2.5, -1.0);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let m = ForecastMethod::default().with_window(299);
        for f in [RiskFunctional::var(0.95).unwrap(), RiskFunctional::expectile(0.9).unwrap()] {
            let fx = rolling_forecast(&x, &m, f).unwrap().filled().unwrap()[0].r;
            let fy = rolling_forecast(&y, &m, f).unwrap().filled().unwrap()[0].r;
            assert!((fy - (a * fx + b)).abs() < 1e-3 * a, "{fx} {fy}");
        }
    }

    #[test]
    fn estimators_agree_on_large_gaussian_samples() {
        let z = normal_losses(100_000, 12);
        let f = RiskFunctional::var(0.95).unwrap();
        let normal = Innovation::Normal;
        for tail in [TailEstimator::Fp, TailEstimator::Fhs, TailEstimator::Evt] {
            let m = ForecastMethod { tail, fhs_draws: 100_000, ..ForecastMethod::default() };
            let r = innovation_risk(&z, &normal, &m, f, 1).unwrap().r;
            assert!((r - 1.6449).abs() < 0.05, "{tail:?} {r}");
        }
    }

    #[test]
    fn shared_chains_match_single_runs() {
        let x = normal_losses(260, 8);
        let f = RiskFunctional::var(0.99).unwrap();
        let ms: Vec<ForecastMethod> = ["n-FP", "n-EVT", "t-FP"]
            .iter()
            .map(|s| s.parse::<ForecastMethod>().unwrap().with_window(200).with_refit_every(7))
            .collect();
        let many = rolling_forecasts(&x, &ms, f).unwrap();
        for (m, r) in ms.iter().zip(&many) {
            assert_eq!(*r, rolling_forecast(&x, m, f).unwrap());
        }
    }

    #[test]
    fn oracle_passes_state_through() {
        let laws = [Innovation::Normal, Innovation::Normal];
        let out = oracle_forecast(&[0.5, -1.0], &[2.0, 1.0], &laws, RiskFunctional::var(0.95).unwrap()).unwrap();
        assert!((out[0].r - (0.5 + 2.0 * 1.6448536)).abs() < 1e-6);
        assert!((out[1].r - (-1.0 + 1.6448536)).abs() < 1e-6);
        assert!(oracle_forecast(&[0.0], &[], &laws[..1], RiskFunctional::var(0.9).unwrap()).is_err());
    }
}
