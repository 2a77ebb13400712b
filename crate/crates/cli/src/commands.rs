use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ebacktest::backtests::{
    heatmap as run_heatmap, run_comparative, run_standard, support_bound_from_series, BacktestInput, ComparativeReport,
    Sidedness, StandardTest,
};
use ebacktest::betting::{BettingConfig, BettingMethod, HistoryMode};
use ebacktest::eprocess::{hit_statistics, HitStatistics, RestartPolicy};
use ebacktest::forecast::{oracle_forecast, rolling_forecasts, ForecastMethod, TailEstimator};
use ebacktest::io::{self, DaySeries};
use ebacktest::kernels::{Forecast, Homogeneity, IdentificationForm, RiskFunctional, ScoringKernel};
use ebacktest::simulate::{Scenario, Simulated};
use ebacktest::study::{iid_rejection_rates, IidStudy};
use ebacktest::{Error, Result};
use serde::Serialize;

use crate::manifest::{write_json, RunManifest};
use crate::{FunctionalArgs, OutArgs};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain data serializes")
}

pub fn simulate(config: &Path, dir: &Path, with_state: bool) -> Result<()> {
    let text = fs::read_to_string(config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let scenario: Scenario = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let sim = scenario.generate()?;
    create_dir(dir)?;

    let mut m = RunManifest::new("simulate");
    m.input(config)?;
    m.seeds = vec![scenario.seed];
    let mut params = json(&scenario);
    params["skewed_t"] = "fernandez-steel".into();
    m.params = params;
    m.outputs.push("losses.csv".into());
    match &sim {
        Simulated::Iid(_) => {
            m.outputs.push("forecasts.csv".into());
            m.functional = Some("es-var".into());
            m.level = Some(ebacktest::simulate::IidScenario::LEVEL);
        }
        Simulated::Path(_) if with_state => m.outputs.push("state.csv".into()),
        Simulated::Path(_) => {}
    }
    let hash = m.hash()?;
    match &sim {
        Simulated::Iid(s) => {
            io::write_losses(&dir.join("losses.csv"), 1, &s.losses, Some(&hash))?;
            let label = ("iid-noisy", "es-var", ebacktest::simulate::IidScenario::LEVEL);
            io::write_forecasts(&dir.join("forecasts.csv"), 1, &s.es_var_forecasts(), label, Some(&hash))?;
        }
        Simulated::Path(p) => {
            io::write_losses(&dir.join("losses.csv"), 1, &p.losses, Some(&hash))?;
            if with_state {
                io::write_state(&dir.join("state.csv"), p, Some(&hash))?;
            }
        }
    }
    m.write(dir)?;
    println!("{} rows written to {}", sim_len(&sim), dir.display());
    Ok(())
}

fn sim_len(sim: &Simulated) -> usize {
    match sim {
        Simulated::Iid(s) => s.losses.len(),
        Simulated::Path(p) => p.len(),
    }
}

#[derive(Args)]
pub struct ForecastArgs {
    #[arg(long)]
    losses: PathBuf,
    /// Comma-separated labels such as n-FP, st-FHS, t-EVT or opt.
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<String>,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[arg(long, default_value_t = 500)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    refit_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    fhs_draws: usize,
    #[arg(long, default_value_t = 0.9)]
    evt_threshold: f64,
    /// Generator state from `simulate --state`; required by `opt`.
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

pub fn forecast(a: &ForecastArgs) -> Result<()> {
    let functional = RiskFunctional::new(a.functional.functional, a.functional.level)?;
    let losses = io::read_losses(&a.losses)?;
    if losses.len() <= a.window {
        return Err(Error::Alignment(format!("{} losses do not exceed the window of {}", losses.len(), a.window)));
    }
    let mut methods = Vec::new();
    for label in &a.method {
        let mut m: ForecastMethod = label.parse()?;
        m.window = a.window;
        m.refit_every = a.refit_every;
        m.seed = a.seed;
        m.fhs_draws = a.fhs_draws;
        m.evt_threshold_quantile = a.evt_threshold;
        m.validate()?;
        methods.push(m);
    }
    let (opt, fitted): (Vec<ForecastMethod>, Vec<ForecastMethod>) =
        methods.iter().partition(|m| m.tail == TailEstimator::Opt);
    let mut series: Vec<(String, Vec<Forecast>)> = Vec::new();
    for r in rolling_forecasts(&losses.values, &fitted, functional)? {
        series.push((r.method.clone(), r.filled()?));
    }
    let mut m = RunManifest::new("forecast");
    m.input(&a.losses)?;
    if !opt.is_empty() {
        let path = a.state.as_ref().ok_or_else(|| Error::Config("method opt needs --state".into()))?;
        m.input(path)?;
        let state = io::read_state(path)?;
        losses.check_aligned(&state, "state")?;
        let tail = &state.values[a.window..];
        let mu: Vec<f64> = tail.iter().map(|s| s.0).collect();
        let sigma: Vec<f64> = tail.iter().map(|s| s.1).collect();
        let laws: Vec<_> = tail.iter().map(|s| s.2).collect();
        series.push(("opt".into(), oracle_forecast(&mu, &sigma, &laws, functional)?));
    }
    let dir = &a.out.dir;
    create_dir(dir)?;
    m.functional = Some(functional.kind.to_string());
    m.level = Some(functional.level());
    m.seeds = vec![a.seed];
    m.params = serde_json::json!({
        "methods": a.method,
        "window": a.window,
        "refit_every": a.refit_every,
        "fhs_draws": a.fhs_draws,
        "evt_threshold_quantile": a.evt_threshold,
        "skewed_t": "fernandez-steel",
    });
    m.outputs.push("losses.csv".into());
    m.outputs.extend(series.iter().map(|(n, _)| format!("{n}.csv")));
    let hash = m.hash()?;
    let first_day = losses.days[a.window];
    io::write_losses(&dir.join("losses.csv"), first_day, &losses.values[a.window..], Some(&hash))?;
    for (name, f) in &series {
        let label = (name.as_str(), functional.kind.as_str(), functional.level());
        io::write_forecasts(&dir.join(format!("{name}.csv")), first_day, f, label, Some(&hash))?;
    }
    m.write(dir)?;
    println!("{} forecast days for {} methods written to {}", losses.len() - a.window, series.len(), dir.display());
    Ok(())
}

#[derive(Args, Clone)]
pub struct TestArgs {
    #[command(flatten)]
    functional: FunctionalArgs,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Truncation `c` of the betting fraction.
    #[arg(long = "c", default_value_t = 0.5)]
    truncation: f64,
    /// taylor or exact.
    #[arg(long, default_value = "taylor")]
    betting: String,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// reevaluate or cached.
    #[arg(long, default_value = "reevaluate")]
    history: String,
    /// none, fixed:T1,T2,..., segments:K, rejection or rejection:THRESHOLD.
    #[arg(long, default_value = "none")]
    restart: String,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 5.0, 10.0])]
    thresholds: Vec<f64>,
    /// Loss support bound `M`; derived from the data when omitted.
    #[arg(long)]
    support_bound: Option<f64>,
    /// Homogeneity degree of the comparative score: h0, half, h1 or h2.
    #[arg(long)]
    homogeneity: Option<String>,
}

fn parse_restart(s: &str, horizon: usize, alpha: f64) -> Result<RestartPolicy> {
    let bad = || Error::Config(format!("invalid restart policy '{s}'"));
    let (kind, arg) = s.split_once(':').map_or((s, None), |(k, v)| (k, Some(v)));
    let p = match (kind, arg) {
        ("none", None) => RestartPolicy::None,
        ("rejection", None) => RestartPolicy::AtRejection { threshold: 1.0 / alpha },
        ("rejection", Some(v)) => RestartPolicy::AtRejection { threshold: v.parse().map_err(|_| bad())? },
        ("segments", Some(v)) => RestartPolicy::fixed_partition(horizon, v.parse().map_err(|_| bad())?),
        ("fixed", Some(v)) => RestartPolicy::AtFixedTimes {
            times: v.split(',').map(|t| t.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?,
        },
        _ => return Err(bad()),
    };
    p.validate()?;
    Ok(p)
}

impl TestArgs {
    fn betting(&self) -> Result<BettingConfig> {
        let method = match self.betting.as_str() {
            "taylor" => BettingMethod::GrelTaylor,
            "exact" => BettingMethod::GrelExact,
            other => return Err(Error::Config(format!("unknown betting rule '{other}'"))),
        };
        let history = match self.history.as_str() {
            "reevaluate" => HistoryMode::Reevaluate,
            "cached" => HistoryMode::Cached,
            other => return Err(Error::Config(format!("unknown history mode '{other}'"))),
        };
        let b = BettingConfig::default()
            .with_method(method)
            .with_truncation(self.truncation)
            .with_warmup(self.warmup)
            .with_history(history);
        b.validate()?;
        Ok(b)
    }

    fn homogeneity(&self) -> Result<Option<Homogeneity>> {
        Ok(match self.homogeneity.as_deref() {
            None => None,
            Some("h0") => Some(Homogeneity::H0),
            Some("half") => Some(Homogeneity::HHalf),
            Some("h1") => Some(Homogeneity::H1),
            Some("h2") => Some(Homogeneity::H2),
            Some(other) => return Err(Error::Config(format!("unknown homogeneity '{other}'"))),
        })
    }

    /// Input with every setting applied; `bound_from` supplies the series
    /// that fix `M` when no bound was given.
    fn input(&self, losses: Vec<f64>, internal: Vec<Forecast>, bound_from: &[&[Forecast]]) -> Result<BacktestInput> {
        let mut f = RiskFunctional::new(self.functional.functional, self.functional.level)?;
        let bound = match self.support_bound {
            Some(m) => Some(m),
            None if !bound_from.is_empty() => Some(support_bound_from_series(&losses, bound_from)),
            None => None,
        };
        if let Some(m) = bound {
            f = f.with_support_bound(m)?;
        }
        let restart = parse_restart(&self.restart, losses.len(), self.alpha)?;
        Ok(BacktestInput::new(losses, internal, f).with_alpha(self.alpha).with_betting(self.betting()?).with_restart(restart))
    }

    fn kernel(&self, f: RiskFunctional) -> Result<ScoringKernel> {
        match self.homogeneity()? {
            Some(h) => ScoringKernel::new(f, h),
            None => ScoringKernel::standard(f),
        }
    }

    fn stamp(&self, m: &mut RunManifest, input: &BacktestInput) {
        m.functional = Some(input.functional.kind.to_string());
        m.level = Some(input.functional.level());
        m.betting = Some(json(&input.betting));
        m.restart = Some(json(&input.restart));
        m.support_bound = input.functional.support_bound();
    }
}

#[derive(Args)]
pub struct BacktestArgs {
    #[arg(long)]
    losses: PathBuf,
    /// Internal forecasts.
    #[arg(long)]
    forecasts: PathBuf,
    /// Standard forecasts; switches to the comparative backtest.
    #[arg(long)]
    standard: Option<PathBuf>,
    #[command(flatten)]
    test: TestArgs,
    /// Identification form of the standard backtest: ratio or bounded.
    #[arg(long, default_value = "ratio")]
    form: String,
    /// lower, upper or two-sided.
    #[arg(long, default_value = "lower")]
    sided: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct ThresholdHit {
    threshold: f64,
    first_hit: Option<usize>,
    hit_count: usize,
}

#[derive(Serialize)]
struct StandardVerdict {
    kind: &'static str,
    functional: String,
    level: f64,
    alpha: f64,
    rejected: bool,
    #[serde(flatten)]
    stats: HitStatistics,
    rejections: Vec<usize>,
    thresholds: Vec<ThresholdHit>,
}

#[derive(Serialize)]
struct ComparativeVerdict {
    kind: &'static str,
    alpha: f64,
    #[serde(flatten)]
    report: ComparativeReport,
    rejections_minus: Vec<usize>,
    rejections_plus: Vec<usize>,
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn backtest(a: &BacktestArgs) -> Result<()> {
    let losses = io::read_losses(&a.losses)?;
    let internal = io::read_forecasts(&a.forecasts)?;
    losses.check_aligned(&internal, &a.forecasts.display().to_string())?;
    let standard = match &a.standard {
        Some(p) => {
            let s = io::read_forecasts(p)?;
            losses.check_aligned(&s, &p.display().to_string())?;
            Some(s)
        }
        None => None,
    };
    let mut m = RunManifest::new("backtest");
    m.input(&a.losses)?;
    m.input(&a.forecasts)?;
    let dir = &a.out.dir;
    match (&standard, &a.standard) {
        (Some(std_series), Some(std_path)) => {
            m.input(std_path)?;
            let bound_from: [&[Forecast]; 2] = [&internal.values, &std_series.values];
            let input = a.test.input(losses.values.clone(), internal.values.clone(), &bound_from)?.with_standard(std_series.values.clone());
            let kernel = a.test.kernel(input.functional)?;
            let out = run_comparative(&input, &kernel)?;
            a.test.stamp(&mut m, &input);
            m.params = serde_json::json!({ "homogeneity": json(&kernel.homogeneity), "alpha": input.alpha, "thresholds": a.test.thresholds });
            m.outputs = vec!["eprocess.csv".into(), "verdict.json".into()];
            let hash = m.hash()?;
            let report = ComparativeReport::new(&stem(&a.forecasts), &stem(std_path), &input, &out, &a.test.thresholds);
            println!(
                "{} vs {}: zone {} (sup M- = {:.4}, sup M+ = {:.4})",
                report.internal, report.standard, report.zone, report.sup_minus, report.sup_plus
            );
            create_dir(dir)?;
            io::write_eprocess(&dir.join("eprocess.csv"), &[("minus", &out.minus), ("plus", &out.plus)], Some(&hash))?;
            let verdict = ComparativeVerdict {
                kind: "comparative",
                alpha: input.alpha,
                rejections_minus: out.minus.rejections.clone(),
                rejections_plus: out.plus.rejections.clone(),
                report,
            };
            write_json(&dir.join("verdict.json"), &hash, verdict)?;
        }
        _ => {
            let input = a.test.input(losses.values.clone(), internal.values.clone(), &[])?;
            let form = match a.form.as_str() {
                "ratio" => IdentificationForm::Ratio,
                "bounded" => IdentificationForm::Bounded,
                other => return Err(Error::Config(format!("unknown identification form '{other}'"))),
            };
            let sidedness = match a.sided.as_str() {
                "lower" => Sidedness::Lower,
                "upper" => Sidedness::Upper,
                "two-sided" => Sidedness::TwoSided,
                other => return Err(Error::Config(format!("unknown sidedness '{other}'"))),
            };
            let test = StandardTest { form, sidedness, ..StandardTest::default() };
            let out = run_standard(&input, &test)?;
            a.test.stamp(&mut m, &input);
            m.params = serde_json::json!({ "form": a.form, "sided": a.sided, "alpha": input.alpha, "thresholds": a.test.thresholds });
            m.outputs = vec!["eprocess.csv".into(), "verdict.json".into()];
            let hash = m.hash()?;
            let hit = out.first_hit.map_or("none".to_string(), |t| format!("t={t}"));
            println!("rejected: {} (sup M = {:.4}, first hit {hit})", out.rejected, out.stats.sup);
            create_dir(dir)?;
            io::write_eprocess(&dir.join("eprocess.csv"), &[("m", &out.run)], Some(&hash))?;
            let thresholds = a
                .test
                .thresholds
                .iter()
                .map(|&th| {
                    let s = hit_statistics(&out.run, th);
                    ThresholdHit { threshold: th, first_hit: s.first_hit, hit_count: s.hit_count }
                })
                .collect();
            let verdict = StandardVerdict {
                kind: "standard",
                functional: input.functional.kind.to_string(),
                level: input.functional.level(),
                alpha: input.alpha,
                rejected: out.rejected,
                rejections: out.run.rejections.clone(),
                stats: out.stats,
                thresholds,
            };
            write_json(&dir.join("verdict.json"), &hash, verdict)?;
        }
    }
    m.write(dir)?;
    Ok(())
}

#[derive(Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    losses: PathBuf,
    /// Directory of forecast CSVs; each file stem names a model.
    #[arg(long)]
    roster: PathBuf,
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    out: OutArgs,
}

pub fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let entries = fs::read_dir(&a.roster).map_err(|e| Error::Config(format!("roster {}: {e}", a.roster.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && stem(p) != "losses")
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("roster {} holds no forecast CSVs", a.roster.display())));
    }
    let losses = io::read_losses(&a.losses)?;
    let mut m = RunManifest::new("heatmap");
    m.input(&a.losses)?;
    let mut roster: Vec<(String, Vec<Forecast>)> = Vec::new();
    for f in &files {
        let s: DaySeries<Forecast> = io::read_forecasts(f)?;
        losses.check_aligned(&s, &f.display().to_string())?;
        m.input(f)?;
        roster.push((stem(f), s.values));
    }
    let bound_from: Vec<&[Forecast]> = roster.iter().map(|r| r.1.as_slice()).collect();
    let template = a.test.input(losses.values.clone(), Vec::new(), &bound_from)?;
    let kernel = a.test.kernel(template.functional)?;
    let map = run_heatmap(&losses.values, &roster, &template, &kernel)?;
    a.test.stamp(&mut m, &template);
    m.params = serde_json::json!({ "homogeneity": json(&kernel.homogeneity), "alpha": template.alpha });
    m.outputs = vec!["heatmap.json".into()];
    let hash = m.hash()?;
    let dir = &a.out.dir;
    create_dir(dir)?;
    print_grid(&map);
    write_json(&dir.join("heatmap.json"), &hash, &map)?;
    m.write(dir)?;
    Ok(())
}

fn print_grid(map: &ebacktest::backtests::Heatmap) {
    let width = map.models.iter().map(|s| s.len()).max().unwrap_or(0).max(8);
    print!("{:width$}", "std\\int");
    for name in &map.models {
        print!(" {name:>width$}");
    }
    println!();
    for (row, name) in map.cells.iter().zip(&map.models) {
        print!("{name:width$}");
        for c in row {
            print!(" {:>width$}", c.verdict.zone.as_str());
        }
        println!();
    }
}

#[derive(Args)]
pub struct RatesArgs {
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    training: usize,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 5.0, 10.0, 20.0])]
    thresholds: Vec<f64>,
    #[arg(long)]
    independent_noise: bool,
    #[command(flatten)]
    out: OutArgs,
}

pub fn rejection_rates(a: &RatesArgs) -> Result<()> {
    let study = IidStudy {
        first_seed: a.first_seed,
        runs: a.runs,
        training: a.training,
        n: a.n,
        thresholds: a.thresholds.clone(),
        independent_noise: a.independent_noise,
    };
    let table = iid_rejection_rates(&study)?;
    let mut m = RunManifest::new("rejection-rates");
    m.functional = Some("es-var".into());
    m.level = Some(ebacktest::simulate::IidScenario::LEVEL);
    m.seeds = (0..a.runs as u64).map(|i| a.first_seed + i).collect();
    m.params = json(&study);
    m.outputs = vec!["rejection_rates.json".into()];
    let hash = m.hash()?;
    print!("{:>9}", "threshold");
    for c in &table.cases {
        print!(" {c:>9}");
    }
    println!();
    for (th, row) in table.thresholds.iter().zip(&table.rates) {
        print!("{th:>9}");
        for r in row {
            print!(" {r:>9.4}");
        }
        println!();
    }
    let dir = &a.out.dir;
    create_dir(dir)?;
    write_json(&dir.join("rejection_rates.json"), &hash, &table)?;
    m.write(dir)?;
    Ok(())
}

pub fn replay(path: &Path, tolerance: f64) -> Result<()> {
    let runs = io::read_eprocess(path)?;
    let mut worst: f64 = 0.0;
    for (name, run) in &runs {
        let replayed = run.replay();
        let (stored, again) = match (run.log_wealth.last(), replayed.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (0.0, 0.0),
        };
        let rel = if stored == again { 0.0 } else { (again - stored).exp_m1().abs() };
        worst = worst.max(rel);
        println!("{name}: final M = {:.12e}, replayed = {:.12e}, relative error = {rel:.3e}", stored.exp(), again.exp());
    }
    if !(worst <= tolerance) {
        return Err(Error::Domain(format!("replay differs from the stored wealth by {worst:.3e}")));
    }
    Ok(())
}
