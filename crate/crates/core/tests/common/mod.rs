#![allow(dead_code)]

use ebacktest::kernels::{Forecast, FunctionalKind, Homogeneity, RiskFunctional, ScoringKernel};
use rand::Rng;

/// Every scoring kernel, as `(kind, homogeneity)`.
pub const SCORING_KERNELS: [(FunctionalKind, Homogeneity); 8] = [
    (FunctionalKind::Mean, Homogeneity::H2),
    (FunctionalKind::MeanVariance, Homogeneity::H2),
    (FunctionalKind::VaR, Homogeneity::H1),
    (FunctionalKind::VaR, Homogeneity::H0),
    (FunctionalKind::EsVar, Homogeneity::HHalf),
    (FunctionalKind::EsVar, Homogeneity::H0),
    (FunctionalKind::Expectile, Homogeneity::H2),
    (FunctionalKind::Expectile, Homogeneity::H0),
];

pub fn random_level<R: Rng>(rng: &mut R, kind: FunctionalKind) -> f64 {
    match kind {
        FunctionalKind::Expectile | FunctionalKind::ExpectileVariantile => rng.random_range(0.5..0.995),
        _ => rng.random_range(0.01..0.995),
    }
}

pub fn scoring_kernel(kind: FunctionalKind, h: Homogeneity, p: f64, m: f64) -> ScoringKernel {
    let f = RiskFunctional::new(kind, p).unwrap().with_support_bound(m).unwrap();
    ScoringKernel::new(f, h).unwrap()
}

/// A forecast inside the kernel's domain, sometimes beyond `[-M, M]`.
pub fn random_forecast<R: Rng>(rng: &mut R, k: &ScoringKernel) -> Forecast {
    let m = k.support_bound;
    let wide = 1.5 * m;
    match (k.functional.kind, k.homogeneity) {
        (FunctionalKind::MeanVariance, _) => Forecast::pair(rng.random_range(0.0..m * m), rng.random_range(-wide..wide)),
        (FunctionalKind::EsVar, Homogeneity::HHalf) => {
            let z = rng.random_range(0.01..wide);
            Forecast::pair(z + rng.random_range(0.0..m), z)
        }
        (FunctionalKind::EsVar, _) => {
            let r = rng.random_range(0.01..wide);
            Forecast::pair(r, r - rng.random_range(0.0..2.0 * m))
        }
        (_, Homogeneity::H0) => Forecast::scalar(rng.random_range(0.01..wide)),
        _ => Forecast::scalar(rng.random_range(-wide..wide)),
    }
}

/// Grid minimum of `S(x, f) - S(x, fs)` over `[-M, M]`, with the kinks
/// evaluated exactly, and the largest jump between neighbouring grid points.
pub fn brute_force_infimum(k: &ScoringKernel, f: Forecast, fs: Forecast, n: usize) -> (f64, f64) {
    let m = k.support_bound;
    let gap = |x: f64| k.gap(x, f, fs).unwrap();
    let mut min = f64::INFINITY;
    let mut slack = 0.0f64;
    let mut prev = gap(-m);
    for i in 0..=n {
        let g = gap((-m + 2.0 * m * i as f64 / n as f64).min(m));
        min = min.min(g);
        slack = slack.max((g - prev).abs());
        prev = g;
    }
    let kinks = [Some(f.r), f.z, Some(fs.r), fs.z];
    for x in kinks.into_iter().flatten().filter(|x| x.abs() <= m) {
        min = min.min(gap(x));
    }
    (min, slack)
}

/// Checks a closed-form infimum against the brute force: it may not exceed
/// any attained value and may undershoot the grid only by the slack.
pub fn infimum_matches(k: &ScoringKernel, f: Forecast, fs: Forecast, n: usize) -> Result<(), String> {
    let closed = k.gap_infimum(f, fs).unwrap();
    let (grid, slack) = brute_force_infimum(k, f, fs, n);
    let tol = 1e-6 + slack;
    if closed > grid + 1e-9 * (1.0 + grid.abs()) || closed < grid - tol {
        return Err(format!(
            "{:?} {:?} p={} M={} f={f:?} f*={fs:?}: closed {closed} grid {grid} slack {slack}",
            k.functional.kind,
            k.homogeneity,
            k.functional.level(),
            k.support_bound
        ));
    }
    Ok(())
}

/// A discrete distribution with at most six atoms.
#[derive(Debug, Clone)]
pub struct Atoms {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Atoms {
    /// Distinct sorted atoms in `[lo, hi]` with positive weights.
    pub fn random<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Self {
        let k = rng.random_range(2..=6);
        let mut x: Vec<f64> = (0..k).map(|_| rng.random_range(lo..hi)).collect();
        x.sort_by(f64::total_cmp);
        x.dedup();
        let w: Vec<f64> = x.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        Self { x, w: w.into_iter().map(|v| v / s).collect() }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.x.iter().zip(&self.w).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    /// A level whose lower quantile is an atom with exactly `1 - p` mass above it.
    pub fn exact_level<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let j = rng.random_range(0..self.x.len() - 1);
        let p: f64 = self.w[..=j].iter().sum();
        (p, self.x[j])
    }

    pub fn expectile(&self, p: f64) -> f64 {
        let id = |a: f64| self.expect(|x| if x > a { p * (x - a) } else { (1.0 - p) * (x - a) });
        let (mut lo, mut hi) = (self.x[0], *self.x.last().unwrap());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if id(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn es(&self, p: f64, q: f64) -> f64 {
        q + self.expect(|x| (x - q).max(0.0)) / (1.0 - p)
    }
}

fn close(v: f64, scale: f64) -> bool {
    v.abs() <= 1e-9 * (1.0 + scale)
}

/// `E V(X, rho(F)) = 0` for every identification kernel on one random
/// distribution per kernel.
pub fn identification_zero_mean<R: Rng>(rng: &mut R, m: f64) -> Result<(), String> {
    use ebacktest::kernels::{IdentificationForm, IdentificationKernel, Monotonicity};
    let check = |name: &str, k: IdentificationKernel, atoms: &Atoms, f: Forecast| -> Result<(), String> {
        let v = atoms.expect(|x| k.eval(x, f).unwrap());
        let scale = atoms.expect(|x| k.eval(x, f).unwrap().abs());
        if close(v, scale) {
            Ok(())
        } else {
            Err(format!("{name}: E V = {v} for {atoms:?} at {f:?}"))
        }
    };
    let bounded = |f: RiskFunctional| IdentificationKernel::new(f.with_support_bound(m).unwrap(), IdentificationForm::Bounded).unwrap();
    let ratio = |f: RiskFunctional| IdentificationKernel::new(f, IdentificationForm::Ratio).unwrap();

    let a = Atoms::random(rng, -m, m);
    check("mean bounded", bounded(RiskFunctional::mean()), &a, Forecast::scalar(a.mean()))?;
    let a = Atoms::random(rng, 0.01, m);
    check("mean ratio", ratio(RiskFunctional::mean()), &a, Forecast::scalar(a.mean()))?;

    let a = Atoms::random(rng, -m, m);
    let mu = a.mean();
    let var = a.expect(|x| (x - mu).powi(2));
    if var > 0.0 {
        check("mean-variance", ratio(RiskFunctional::mean_variance()), &a, Forecast::pair(var, mu))?;
    }

    let a = Atoms::random(rng, -m, m);
    if a.x.len() > 1 {
        let (p, q) = a.exact_level(rng);
        let f = RiskFunctional::var(p).unwrap();
        check("var", bounded(f), &a, Forecast::scalar(q))?;
        let up = bounded(f).with_direction(Monotonicity::IncreasingInR).unwrap();
        check("var mirrored", up, &a, Forecast::scalar(q))?;
        check("es-var", bounded(RiskFunctional::es_var(p).unwrap()), &a, Forecast::pair(a.es(p, q), q))?;
    }

    let p = random_level(rng, FunctionalKind::Expectile);
    let a = Atoms::random(rng, -m, m);
    check("expectile bounded", bounded(RiskFunctional::expectile(p).unwrap()), &a, Forecast::scalar(a.expectile(p)))?;
    let a = Atoms::random(rng, 0.01, m);
    check("expectile ratio", ratio(RiskFunctional::expectile(p).unwrap()), &a, Forecast::scalar(a.expectile(p)))?;

    let a = Atoms::random(rng, -m, m);
    let e = a.expectile(p);
    let vp = a.expect(|x| p * (x - e).max(0.0).powi(2) + (1.0 - p) * (x - e).min(0.0).powi(2));
    if vp > 0.0 {
        check("expectile-variantile", ratio(RiskFunctional::expectile_variantile(p).unwrap()), &a, Forecast::pair(vp, e))?;
    }
    Ok(())
}

/// The true functional of `atoms` in the coordinates the scoring kernel
/// expects, with a matching level when the kernel needs one.
fn scored_truth<R: Rng>(rng: &mut R, kind: FunctionalKind, atoms: &Atoms) -> (f64, Forecast) {
    match kind {
        FunctionalKind::Mean => (0.5, Forecast::scalar(atoms.mean())),
        FunctionalKind::MeanVariance => (0.5, Forecast::pair(atoms.expect(|x| x * x), atoms.mean())),
        FunctionalKind::VaR => {
            let (p, q) = atoms.exact_level(rng);
            (p, Forecast::scalar(q))
        }
        FunctionalKind::EsVar => {
            let (p, q) = atoms.exact_level(rng);
            (p, Forecast::pair(atoms.es(p, q), q))
        }
        FunctionalKind::Expectile => {
            let p = random_level(rng, kind);
            (p, Forecast::scalar(atoms.expectile(p)))
        }
        FunctionalKind::ExpectileVariantile => unreachable!(),
    }
}

/// The true functional minimizes the expected score among random and nearby
/// competitors, for every scoring kernel.
pub fn score_minimized<R: Rng>(rng: &mut R, m: f64) -> Result<(), String> {
    for (kind, h) in SCORING_KERNELS {
        let positive = h == Homogeneity::H0 || h == Homogeneity::HHalf;
        let atoms = loop {
            let a = Atoms::random(rng, if positive { 0.05 } else { -m }, m);
            if a.x.len() > 1 {
                break a;
            }
        };
        let (p, truth) = scored_truth(rng, kind, &atoms);
        let k = scoring_kernel(kind, h, p, m);
        let score = |f: Forecast| -> Option<f64> {
            let mut acc = 0.0;
            for (&x, &w) in atoms.x.iter().zip(&atoms.w) {
                acc += w * k.eval(x, f).ok()?;
            }
            Some(acc)
        };
        let best = score(truth).ok_or_else(|| format!("{kind:?} {h:?}: truth {truth:?} outside the domain"))?;
        let mut rivals: Vec<Forecast> = (0..20).map(|_| random_forecast(rng, &k)).collect();
        for _ in 0..20 {
            let e = rng.random_range(-0.05..0.05);
            let d = rng.random_range(-0.05..0.05);
            rivals.push(Forecast { r: truth.r * (1.0 + e), z: truth.z.map(|z| z + d) });
        }
        for f in rivals {
            if let Some(s) = score(f) {
                if s < best - 1e-10 * (1.0 + best.abs()) {
                    return Err(format!("{kind:?} {h:?} p={p}: {f:?} scores {s} below truth {truth:?} at {best} on {atoms:?}"));
                }
            }
        }
    }
    Ok(())
}

/// For Bayes pairs, `E S(X, z)` is minimized at the statistic with minimum
/// equal to the risk measure.
pub fn bayes_pairs<R: Rng>(rng: &mut R, m: f64) -> Result<(), String> {
    use ebacktest::kernels::bayes_loss;
    let a = Atoms::random(rng, -m, m);
    let mu = a.mean();
    let mut cases = vec![(RiskFunctional::mean_variance(), mu, a.expect(|x| (x - mu).powi(2)))];
    if a.x.len() > 1 {
        let (p, q) = a.exact_level(rng);
        cases.push((RiskFunctional::es_var(p).unwrap(), q, a.es(p, q)));
    }
    let p = random_level(rng, FunctionalKind::Expectile);
    let e = a.expectile(p);
    let vp = a.expect(|x| p * (x - e).max(0.0).powi(2) + (1.0 - p) * (x - e).min(0.0).powi(2));
    cases.push((RiskFunctional::expectile_variantile(p).unwrap(), e, vp));
    for (f, z, r) in cases {
        let loss = |z: f64| a.expect(|x| bayes_loss(&f, x, z).unwrap());
        let at = loss(z);
        if !close(at - r, r.abs()) {
            return Err(format!("{:?}: minimum {at} != risk {r}", f.kind));
        }
        for _ in 0..20 {
            let other = z + rng.random_range(-m..m);
            if loss(other) < at - 1e-10 * (1.0 + at.abs()) {
                return Err(format!("{:?}: z={other} beats statistic {z}", f.kind));
            }
        }
    }
    Ok(())
}
