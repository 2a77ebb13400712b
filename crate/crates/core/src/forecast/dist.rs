use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels::{Forecast, FunctionalKind, RiskFunctional};

/// Standardized innovation law with mean 0 and variance 1.
///
/// The skewed t follows Fernández and Steel: the positive half of a
/// Student t density is stretched by `skew` and the negative half squeezed
/// by `1/skew` before standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Innovation {
    Normal,
    StudentT { nu: f64 },
    SkewedT { nu: f64, skew: f64 },
}

/// Distribution of the standardized innovation as seen by a risk estimator.
pub trait InnovationLaw {
    fn mean(&self) -> f64;
    /// Lower quantile.
    fn quantile(&self, p: f64) -> f64;
    /// `E[(Z - a)+]`.
    fn upper_partial(&self, a: f64) -> f64;
}

fn t_log_norm(nu: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln()
}

/// `int_b^inf y f(y) dy` for the Student t density with `nu` degrees of freedom.
fn t_tail_moment(nu: f64, log_norm: f64, b: f64) -> f64 {
    let log_f = log_norm - 0.5 * (nu + 1.0) * (b * b / nu).ln_1p();
    log_f.exp() * (nu + b * b) / (nu - 1.0)
}

fn std_t(nu: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu).expect("nu checked on construction")
}

/// Precomputed constants of one innovation law.
#[derive(Debug, Clone, Copy)]
pub struct Prepared {
    law: Innovation,
    log_norm: f64,
    /// t: scale `sqrt((nu-2)/nu)`; skewed t: standard deviation of the raw law.
    scale: f64,
    /// Mean of the raw skewed law.
    shift: f64,
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Innovation::Normal => Ok(()),
            Innovation::StudentT { nu } => check_nu(nu),
            Innovation::SkewedT { nu, skew } => {
                check_nu(nu)?;
                if !(skew > 0.0 && skew.is_finite()) {
                    return Err(Error::Config(format!("skewness must be positive, got {skew}")));
                }
                Ok(())
            }
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        Ok(match *self {
            Innovation::Normal => Prepared { law: *self, log_norm: -0.5 * (2.0 * std::f64::consts::PI).ln(), scale: 1.0, shift: 0.0 },
            Innovation::StudentT { nu } => {
                Prepared { law: *self, log_norm: t_log_norm(nu), scale: ((nu - 2.0) / nu).sqrt(), shift: 0.0 }
            }
            Innovation::SkewedT { nu, skew } => {
                let log_norm = t_log_norm(nu);
                let m0 = t_tail_moment(nu, log_norm, 0.0);
                let mean = 2.0 * m0 * (skew - 1.0 / skew);
                let second = nu / (nu - 2.0) * (skew.powi(3) + skew.powi(-3)) / (skew + 1.0 / skew);
                Prepared { law: *self, log_norm, scale: (second - mean * mean).sqrt(), shift: mean }
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Innovation::Normal => rng.sample(StandardNormal),
            Innovation::StudentT { nu } => {
                let t: f64 = StudentT::new(nu).expect("nu > 2").sample(rng);
                t * ((nu - 2.0) / nu).sqrt()
            }
            Innovation::SkewedT { nu, skew } => {
                let p = self.prepare().expect("validated law");
                let t: f64 = StudentT::new(nu).expect("nu > 2").sample(rng);
                let up = rng.random::<f64>() < skew * skew / (1.0 + skew * skew);
                let x = if up { skew * t.abs() } else { -t.abs() / skew };
                (x - p.shift) / p.scale
            }
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 2.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("degrees of freedom must exceed 2, got {nu}")))
    }
}

impl Prepared {
    pub fn law(&self) -> Innovation {
        self.law
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        match self.law {
            Innovation::Normal => self.log_norm - 0.5 * z * z,
            Innovation::StudentT { nu } => {
                let y = z / self.scale;
                self.log_norm - 0.5 * (nu + 1.0) * (y * y / nu).ln_1p() - self.scale.ln()
            }
            Innovation::SkewedT { nu, skew } => {
                let x = self.shift + self.scale * z;
                let y = if x >= 0.0 { x / skew } else { x * skew };
                let c = 2.0 / (skew + 1.0 / skew);
                c.ln() + self.log_norm - 0.5 * (nu + 1.0) * (y * y / nu).ln_1p() + self.scale.ln()
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self.law {
            Innovation::Normal => Normal::standard().cdf(z),
            Innovation::StudentT { nu } => std_t(nu).cdf(z / self.scale),
            Innovation::SkewedT { nu, skew } => {
                let x = self.shift + self.scale * z;
                let t = std_t(nu);
                let g0 = 1.0 / (1.0 + skew * skew);
                if x < 0.0 {
                    2.0 * g0 * t.cdf(skew * x)
                } else {
                    g0 + 2.0 * skew * skew * g0 * (t.cdf(x / skew) - 0.5)
                }
            }
        }
    }
}

impl InnovationLaw for Prepared {
    fn mean(&self) -> f64 {
        0.0
    }

    fn quantile(&self, p: f64) -> f64 {
        match self.law {
            Innovation::Normal => Normal::standard().inverse_cdf(p),
            Innovation::StudentT { nu } => self.scale * std_t(nu).inverse_cdf(p),
            Innovation::SkewedT { nu, skew } => {
                let t = std_t(nu);
                let g0 = 1.0 / (1.0 + skew * skew);
                let x = if p < g0 {
                    t.inverse_cdf(p / (2.0 * g0)) / skew
                } else {
                    skew * t.inverse_cdf((p - g0) / (2.0 * skew * skew * g0) + 0.5)
                };
                (x - self.shift) / self.scale
            }
        }
    }

    fn upper_partial(&self, a: f64) -> f64 {
        match self.law {
            Innovation::Normal => {
                let n = Normal::standard();
                (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt() - a * n.sf(a)
            }
            Innovation::StudentT { nu } => {
                let b = a / self.scale;
                self.scale * (t_tail_moment(nu, self.log_norm, b) - b * std_t(nu).sf(b))
            }
            Innovation::SkewedT { nu, skew } => {
                let b = self.shift + self.scale * a;
                let t = std_t(nu);
                let c = 2.0 / (skew + 1.0 / skew);
                let m = |y: f64| t_tail_moment(nu, self.log_norm, y);
                let raw = if b >= 0.0 {
                    c * skew * skew * m(b / skew) - b * c * skew * t.sf(b / skew)
                } else {
                    let first = c * skew * skew * m(0.0) + c / (skew * skew) * (m(skew * b) - m(0.0));
                    first - b * (1.0 - c / skew * t.cdf(skew * b))
                };
                raw / self.scale
            }
        }
    }
}

/// Empirical distribution of a finite sample.
#[derive(Debug, Clone)]
pub struct Empirical {
    sorted: Vec<f64>,
    /// `suffix[k] = sum of sorted[k..]`.
    suffix: Vec<f64>,
}

impl Empirical {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::domain("empty sample"));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite value in sample"));
        }
        sample.sort_by(f64::total_cmp);
        let mut suffix = vec![0.0; sample.len() + 1];
        for k in (0..sample.len()).rev() {
            suffix[k] = suffix[k + 1] + sample[k];
        }
        Ok(Self { sorted: sample, suffix })
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

impl InnovationLaw for Empirical {
    fn mean(&self) -> f64 {
        self.suffix[0] / self.len() as f64
    }

    fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let k = ((n as f64 * p).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    fn upper_partial(&self, a: f64) -> f64 {
        let k = self.sorted.partition_point(|&x| x <= a);
        let n = self.len();
        (self.suffix[k] - (n - k) as f64 * a) / n as f64
    }
}

/// Generalized Pareto law for exceedances `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gpd {
    pub xi: f64,
    pub beta: f64,
}

impl Gpd {
    fn neg_log_lik(xi: f64, beta: f64, y: &[f64]) -> f64 {
        if !(beta > 0.0) {
            return f64::INFINITY;
        }
        let n = y.len() as f64;
        if xi.abs() < 1e-9 {
            return n * beta.ln() + y.iter().sum::<f64>() / beta;
        }
        let mut s = 0.0;
        for &v in y {
            let w = 1.0 + xi * v / beta;
            if w <= 0.0 {
                return f64::INFINITY;
            }
            s += w.ln();
        }
        n * beta.ln() + (1.0 + 1.0 / xi) * s
    }

    /// Probability-weighted-moment estimate.
    pub fn fit_pwm(y: &[f64]) -> Result<Self> {
        let mut s = y.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let a0 = s.iter().sum::<f64>() / n;
        let a1 = s.iter().enumerate().map(|(i, &v)| (1.0 - (i as f64 + 0.65) / n) * v).sum::<f64>() / n;
        let d = a0 - 2.0 * a1;
        if !(d > 0.0) {
            return Err(Error::Fit("probability-weighted moments are degenerate".into()));
        }
        Ok(Self { xi: 2.0 - a0 / d, beta: 2.0 * a0 * a1 / d })
    }

    /// Maximum likelihood, started from the PWM estimate. Falls back to the
    /// PWM estimate when the optimizer does not improve on it.
    pub fn fit(y: &[f64]) -> Result<Self> {
        let start = Self::fit_pwm(y).unwrap_or(Self { xi: 0.1, beta: y.iter().sum::<f64>() / y.len() as f64 });
        let cost = |th: &[f64]| Self::neg_log_lik(th[0], th[1].exp(), y);
        let x0 = vec![start.xi, start.beta.max(1e-8).ln()];
        let base = cost(&x0);
        let (th, best) = super::optim::minimize(cost, x0, 0.1, 1e-10, 1000)?;
        let fit = if best.is_finite() && best <= base { Self { xi: th[0], beta: th[1].exp() } } else { start };
        if !(fit.beta > 0.0 && fit.xi.is_finite()) {
            return Err(Error::Fit("generalized Pareto fit is not finite".into()));
        }
        Ok(fit)
    }
}

/// Empirical body spliced with a generalized Pareto tail above the
/// threshold `u`.
#[derive(Debug, Clone)]
pub struct EvtSpliced {
    body: Empirical,
    u: f64,
    /// Number of sample points above `u`.
    n_u: usize,
    pub gpd: Gpd,
}

impl EvtSpliced {
    pub const MIN_EXCEEDANCES: usize = 10;

    pub fn fit(sample: Vec<f64>, threshold_quantile: f64) -> Result<Self> {
        let body = Empirical::new(sample)?;
        let u = body.quantile(threshold_quantile);
        let y: Vec<f64> = body.sorted().iter().filter(|&&x| x > u).map(|&x| x - u).collect();
        if y.len() < Self::MIN_EXCEEDANCES {
            return Err(Error::domain(format!(
                "{} exceedances over the threshold, need at least {}",
                y.len(),
                Self::MIN_EXCEEDANCES
            )));
        }
        let gpd = Gpd::fit(&y)?;
        if gpd.xi >= 1.0 {
            return Err(Error::Fit(format!("tail index {} has no finite mean", gpd.xi)));
        }
        Ok(Self { n_u: y.len(), body, u, gpd })
    }

    pub fn threshold(&self) -> f64 {
        self.u
    }

    fn tail_fraction(&self) -> f64 {
        self.n_u as f64 / self.body.len() as f64
    }

    /// `P(Z > a)` for `a >= u`.
    fn tail_sf(&self, a: f64) -> f64 {
        let Gpd { xi, beta } = self.gpd;
        let y = a - self.u;
        let s = if xi.abs() < 1e-12 { (-y / beta).exp() } else { (1.0 + xi * y / beta).max(0.0).powf(-1.0 / xi) };
        self.tail_fraction() * s
    }
}

impl InnovationLaw for EvtSpliced {
    fn mean(&self) -> f64 {
        let n = self.body.len() as f64;
        let body: f64 = self.body.sorted().iter().filter(|&&x| x <= self.u).sum();
        body / n + self.tail_fraction() * (self.u + self.gpd.beta / (1.0 - self.gpd.xi))
    }

    fn quantile(&self, p: f64) -> f64 {
        let tail = self.tail_fraction();
        if p <= 1.0 - tail {
            return self.body.quantile(p);
        }
        let Gpd { xi, beta } = self.gpd;
        let r = (1.0 - p) / tail;
        if xi.abs() < 1e-12 {
            self.u - beta * r.ln()
        } else {
            self.u + beta / xi * (r.powf(-xi) - 1.0)
        }
    }

    fn upper_partial(&self, a: f64) -> f64 {
        let Gpd { xi, beta } = self.gpd;
        if a >= self.u {
            return self.tail_sf(a) * (beta + xi * (a - self.u)) / (1.0 - xi);
        }
        let n = self.body.len() as f64;
        let body: f64 = self.body.sorted().iter().filter(|&&x| x > a && x <= self.u).map(|&x| x - a).sum();
        body / n + self.tail_fraction() * (self.u - a + beta / (1.0 - xi))
    }
}

/// `p`-expectile: the root of `(2p - 1) E[(Z - a)+] = (1 - p)(a - E Z)`.
pub fn expectile<L: InnovationLaw + ?Sized>(law: &L, p: f64) -> f64 {
    let mu = law.mean();
    let g = |a: f64| (2.0 * p - 1.0) * law.upper_partial(a) - (1.0 - p) * (a - mu);
    let (mut lo, mut step) = (mu, 1.0);
    let mut hi = mu + step;
    while g(hi) > 0.0 && step < 1e12 {
        lo = hi;
        step *= 2.0;
        hi = mu + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Risk functional of a standardized law. ES comes paired with VaR.
pub fn law_risk<L: InnovationLaw + ?Sized>(law: &L, functional: RiskFunctional) -> Result<Forecast> {
    let p = functional.level();
    Ok(match functional.kind {
        FunctionalKind::Mean => Forecast::scalar(law.mean()),
        FunctionalKind::VaR => Forecast::scalar(law.quantile(p)),
        FunctionalKind::EsVar => {
            let q = law.quantile(p);
            Forecast::pair(q + law.upper_partial(q) / (1.0 - p), q)
        }
        FunctionalKind::Expectile => Forecast::scalar(expectile(law, p)),
        other => return Err(Error::Unsupported(format!("location-scale forecasts of {other}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAWS: [Innovation; 4] = [
        Innovation::Normal,
        Innovation::StudentT { nu: 5.0 },
        Innovation::SkewedT { nu: 5.0, skew: 1.5 },
        Innovation::SkewedT { nu: 3.5, skew: 0.7 },
    ];

    /// Trapezoid integral of `g(z) pdf(z)` over a wide grid.
    fn integrate(p: &Prepared, g: impl Fn(f64) -> f64) -> f64 {
        let (a, b, n) = (-80.0, 80.0, 400_000);
        let h = (b - a) / n as f64;
        (0..=n)
            .map(|i| {
                let z = a + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * g(z) * p.log_pdf(z).exp()
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn laws_are_standardized() {
        for law in LAWS {
            let p = law.prepare().unwrap();
            let tol = if matches!(law, Innovation::SkewedT { nu, .. } if nu < 4.0) { 2e-2 } else { 1e-4 };
            assert_abs_diff_eq!(integrate(&p, |_| 1.0), 1.0, epsilon = 1e-4);
            assert_abs_diff_eq!(integrate(&p, |z| z), 0.0, epsilon = 1e-4);
            assert_abs_diff_eq!(integrate(&p, |z| z * z), 1.0, epsilon = tol);
        }
    }

    #[test]
    fn cdf_quantile_and_partial_moments_agree_with_quadrature() {
        for law in LAWS {
            let p = law.prepare().unwrap();
            for a in [-2.0, -0.3, 0.0, 0.4, 1.7, 3.0] {
                assert_abs_diff_eq!(p.cdf(a), integrate(&p, |z| if z <= a { 1.0 } else { 0.0 }), epsilon = 1e-3);
                let up = integrate(&p, |z| (z - a).max(0.0));
                assert_abs_diff_eq!(p.upper_partial(a), up, epsilon = 1e-4);
            }
            for q in [0.01, 0.3, 0.5, 0.9, 0.99] {
                assert_abs_diff_eq!(p.cdf(p.quantile(q)), q, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn normal_closed_forms() {
        let p = Innovation::Normal.prepare().unwrap();
        let f = law_risk(&p, RiskFunctional::es_var(0.95).unwrap()).unwrap();
        assert_abs_diff_eq!(f.z.unwrap(), 1.6448536, epsilon = 1e-6);
        assert_abs_diff_eq!(f.r, 2.0627128, epsilon = 1e-6);
        let t = Innovation::StudentT { nu: 5.0 }.prepare().unwrap();
        assert_abs_diff_eq!(t.quantile(0.95), 2.0150484 * (0.6f64).sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn expectile_root_solves_identification() {
        for law in LAWS {
            let p = law.prepare().unwrap();
            for level in [0.5, 0.9, 0.99] {
                let a = expectile(&p, level);
                let id = level * p.upper_partial(a) - (1.0 - level) * (a - 0.0 + p.upper_partial(a));
                assert!(id.abs() < 1e-8, "{law:?} {level} {id}");
            }
            assert_abs_diff_eq!(expectile(&p, 0.5), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn samples_are_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for law in LAWS.into_iter().take(3) {
            let n = 400_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            assert!(m.abs() < 0.01, "{law:?} mean {m}");
            assert!((v - 1.0).abs() < 0.03, "{law:?} var {v}");
            let p = law.prepare().unwrap();
            let below = xs.iter().filter(|&&x| x <= 1.0).count() as f64 / n as f64;
            assert!((below - p.cdf(1.0)).abs() < 0.003);
        }
    }

    #[test]
    fn empirical_functionals() {
        let e = Empirical::new(vec![3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(e.quantile(0.5), 2.0);
        assert_eq!(e.quantile(0.51), 3.0);
        assert_eq!(e.quantile(1.0), 4.0);
        assert_eq!(e.mean(), 2.5);
        assert_abs_diff_eq!(e.upper_partial(2.5), 0.5, epsilon = 1e-15);
        let f = law_risk(&e, RiskFunctional::es_var(0.5).unwrap()).unwrap();
        assert_eq!(f.z, Some(2.0));
        assert_abs_diff_eq!(f.r, 3.5, epsilon = 1e-12);
        assert!(Empirical::new(vec![]).is_err());
    }

    #[test]
    fn gpd_recovers_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (xi, beta) = (0.25, 0.8);
        let y: Vec<f64> = (0..20_000)
            .map(|_| {
                let u: f64 = rng.random();
                beta / xi * ((1.0 - u).powf(-xi) - 1.0)
            })
            .collect();
        let g = Gpd::fit(&y).unwrap();
        assert_abs_diff_eq!(g.xi, xi, epsilon = 0.03);
        assert_abs_diff_eq!(g.beta, beta, epsilon = 0.03);
        let w = Gpd::fit_pwm(&y).unwrap();
        assert_abs_diff_eq!(w.xi, xi, epsilon = 0.05);
    }

    #[test]
    fn spliced_law_is_continuous_at_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..5000).map(|_| Innovation::StudentT { nu: 4.0 }.sample(&mut rng)).collect();
        let evt = EvtSpliced::fit(xs.clone(), 0.9).unwrap();
        let u = evt.threshold();
        assert_abs_diff_eq!(evt.upper_partial(u - 1e-9), evt.upper_partial(u), epsilon = 1e-6);
        assert!(evt.quantile(0.999) > u);
        assert!(EvtSpliced::fit(xs[..50].to_vec(), 0.9).is_err());
        let id = 0.99 * evt.upper_partial(expectile(&evt, 0.99))
            - 0.01 * (expectile(&evt, 0.99) - evt.mean() + evt.upper_partial(expectile(&evt, 0.99)));
        assert!(id.abs() < 1e-8);
    }
}
