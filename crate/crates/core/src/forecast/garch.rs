use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::Innovation;
use super::optim::minimize;
use crate::error::{Error, Result};

/// Innovation family assumed when fitting; its shape parameters are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationFamily {
    Normal,
    StudentT,
    SkewedT,
}

impl InnovationFamily {
    pub fn prefix(self) -> &'static str {
        match self {
            InnovationFamily::Normal => "n",
            InnovationFamily::StudentT => "t",
            InnovationFamily::SkewedT => "st",
        }
    }

    fn n_shape(self) -> usize {
        match self {
            InnovationFamily::Normal => 0,
            InnovationFamily::StudentT => 1,
            InnovationFamily::SkewedT => 2,
        }
    }
}

/// AR(1)-GARCH(1,1): `L_t = mu_t + sigma_t Z_t`, `mu_t = phi0 + phi1 L_{t-1}`,
/// `sigma_t^2 = alpha0 + alpha1 eps_{t-1}^2 + beta1 sigma_{t-1}^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchSpec {
    pub phi0: f64,
    pub phi1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub innovation: Innovation,
}

/// One-step-ahead state after filtering a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    /// Standardized residuals `(L_t - mu_t) / sigma_t` for every window day but the first.
    pub residuals: Vec<f64>,
    pub mu_next: f64,
    pub sigma_next: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchFit {
    pub spec: GarchSpec,
    pub log_likelihood: f64,
}

pub const MIN_WINDOW: usize = 100;
const RESTARTS: usize = 3;

impl GarchSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha0 > 0.0 && self.alpha1 >= 0.0 && self.beta1 >= 0.0 && self.alpha1 + self.beta1 < 1.0;
        if !ok || !self.phi0.is_finite() || !self.phi1.is_finite() {
            return Err(Error::Config(format!("GARCH coefficients violate positivity or stationarity: {self:?}")));
        }
        self.innovation.validate()
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.alpha1 - self.beta1)
    }

    /// Runs the recursion over `x`, starting the variance at the sample
    /// variance of `x` and the mean from the first observation.
    pub fn filter(&self, x: &[f64]) -> Result<Filtered> {
        let law = self.innovation.prepare()?;
        let v0 = sample_variance(x);
        if !(v0 > 1e-14) {
            return Err(Error::Fit("window has no variation".into()));
        }
        let floor = 1e-10 * v0;
        let mut s2 = v0;
        let mut residuals = Vec::with_capacity(x.len().saturating_sub(1));
        let mut ll = 0.0;
        let mut mu = self.phi0 + self.phi1 * x[0];
        for &xt in &x[1..] {
            let eps = xt - mu;
            let sd = s2.sqrt();
            let z = eps / sd;
            ll += law.log_pdf(z) - sd.ln();
            residuals.push(z);
            s2 = (self.alpha0 + self.alpha1 * eps * eps + self.beta1 * s2).max(floor);
            mu = self.phi0 + self.phi1 * xt;
        }
        Ok(Filtered { residuals, mu_next: mu, sigma_next: s2.sqrt(), log_likelihood: ll })
    }
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: `phi0`, `atanh(phi1/0.99)`, `ln alpha0`,
/// `logit` of persistence/0.999, `logit` of the ARCH share, then
/// `ln(nu - 2.1)` and `ln skew` as the family requires.
fn decode(th: &[f64], family: InnovationFamily) -> GarchSpec {
    let s = 0.999 * logistic(th[3]);
    let w = logistic(th[4]);
    let nu = || 2.1 + th[5].exp();
    let innovation = match family {
        InnovationFamily::Normal => Innovation::Normal,
        InnovationFamily::StudentT => Innovation::StudentT { nu: nu() },
        InnovationFamily::SkewedT => Innovation::SkewedT { nu: nu(), skew: th[6].exp() },
    };
    GarchSpec { phi0: th[0], phi1: 0.99 * th[1].tanh(), alpha0: th[2].exp(), alpha1: s * w, beta1: s * (1.0 - w), innovation }
}

fn encode(spec: &GarchSpec, family: InnovationFamily) -> Vec<f64> {
    let s = (spec.alpha1 + spec.beta1).clamp(1e-6, 0.999 - 1e-9);
    let w = (spec.alpha1 / s).clamp(1e-6, 1.0 - 1e-6);
    let mut th = vec![
        spec.phi0,
        (spec.phi1 / 0.99).clamp(-0.999999, 0.999999).atanh(),
        spec.alpha0.ln(),
        logit(s / 0.999),
        logit(w),
    ];
    let (nu, skew) = match spec.innovation {
        Innovation::Normal => (8.0, 1.0),
        Innovation::StudentT { nu } => (nu, 1.0),
        Innovation::SkewedT { nu, skew } => (nu, skew),
    };
    if family.n_shape() >= 1 {
        th.push((nu - 2.1).max(1e-6).ln());
    }
    if family.n_shape() >= 2 {
        th.push(skew.ln());
    }
    th
}

fn default_start(x: &[f64], family: InnovationFamily) -> GarchSpec {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let v = sample_variance(x);
    let innovation = match family {
        InnovationFamily::Normal => Innovation::Normal,
        InnovationFamily::StudentT => Innovation::StudentT { nu: 8.0 },
        InnovationFamily::SkewedT => Innovation::SkewedT { nu: 8.0, skew: 1.0 },
    };
    GarchSpec { phi0: m, phi1: 0.0, alpha0: 0.1 * v, alpha1: 0.05, beta1: 0.85, innovation }
}

/// Constant-volatility, no-autoregression model under the same innovation law.
fn fallback(x: &[f64], start: &GarchSpec) -> GarchSpec {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    GarchSpec { phi0: m, phi1: 0.0, alpha0: sample_variance(x), alpha1: 0.0, beta1: 0.0, innovation: start.innovation }
}

/// Maximum-likelihood fit over the window. `warm` starts a single simplex
/// run from a previous fit; otherwise the default start is refined by
/// three randomly perturbed restarts. The result never has lower likelihood
/// than the constant-volatility fallback.
pub fn fit_garch(x: &[f64], family: InnovationFamily, warm: Option<&GarchSpec>) -> Result<GarchFit> {
    if x.len() < MIN_WINDOW {
        return Err(Error::domain(format!("window of {} observations, need at least {MIN_WINDOW}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite loss in window"));
    }
    if !(sample_variance(x) > 1e-14) {
        return Err(Error::Fit("window has no variation".into()));
    }
    let scale = sample_variance(x).sqrt();
    let nll = |th: &[f64]| {
        let spec = decode(th, family);
        match spec.filter(x) {
            Ok(f) if f.log_likelihood.is_finite() => -f.log_likelihood,
            _ => f64::INFINITY,
        }
    };
    let run = |th0: Vec<f64>| minimize(nll, th0, 0.2, 1e-8, 3000);

    let (mut th, mut cost) = match warm {
        Some(spec) => run(encode(spec, family))?,
        None => run(encode(&default_start(x, family), family))?,
    };
    if warm.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(x.len() as u64);
        for _ in 0..RESTARTS {
            let mut start = th.clone();
            for (i, v) in start.iter_mut().enumerate() {
                let width = if i == 0 { 0.1 * scale } else { 0.5 };
                *v += rng.random_range(-width..width);
            }
            let (t2, c2) = run(start)?;
            if c2 < cost {
                (th, cost) = (t2, c2);
            }
        }
    }
    let spec = decode(&th, family);
    let base = fallback(x, &spec);
    let base_ll = base.filter(x)?.log_likelihood;
    if !cost.is_finite() || -cost < base_ll {
        if !base_ll.is_finite() {
            return Err(Error::Fit("no feasible parameters found".into()));
        }
        return Ok(GarchFit { spec: base, log_likelihood: base_ll });
    }
    Ok(GarchFit { spec, log_likelihood: -cost })
}
