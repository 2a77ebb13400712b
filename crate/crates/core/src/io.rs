//! CSV exchange format. Every table has a header row, dot decimals and an
//! integer day column `t`. Lines starting with `#` are comments; writers emit
//! `# schema: <name>/<version>` first. Unknown columns are rejected.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::eprocess::EProcessRun;
use crate::error::{Error, Result};
use crate::forecast::Innovation;
use crate::kernels::Forecast;
use crate::simulate::SimulatedPath;

pub const SCHEMA_VERSION: u32 = 1;

pub const LOSS_COLUMNS: [&str; 2] = ["t", "loss"];
pub const FORECAST_COLUMNS: [&str; 6] = ["t", "r", "z", "method", "functional", "level"];
pub const STATE_COLUMNS: [&str; 6] = ["t", "mu", "sigma", "nu", "skew", "law"];
pub const EPROCESS_COLUMNS: [&str; 10] =
    ["t", "process", "segment", "lambda", "payoff", "lambda_prime", "payoff_prime", "log_wealth", "wealth", "rejection"];

/// A parsed table: header positions plus raw string records.
struct Table {
    name: String,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path, allowed: &[&str], required: &[&str]) -> Result<Self> {
        let name = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::Io(format!("{name}: {e}")))?;
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
        let header = rdr.headers().map_err(|e| Error::Io(format!("{name}: {e}")))?.clone();
        let mut columns = HashMap::new();
        for (i, h) in header.iter().enumerate() {
            if !allowed.contains(&h) {
                return Err(Error::Alignment(format!("{name}: unknown column '{h}' (allowed: {})", allowed.join(", "))));
            }
            if columns.insert(h.to_string(), i).is_some() {
                return Err(Error::Alignment(format!("{name}: duplicate column '{h}'")));
            }
        }
        for r in required {
            if !columns.contains_key(*r) {
                return Err(Error::Alignment(format!("{name}: missing column '{r}'")));
            }
        }
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| Error::Io(format!("{name}: {e}")))?;
        let table = Self { name, columns, rows };
        table.check_days()?;
        Ok(table)
    }

    fn cell(&self, row: usize, col: &str) -> Option<&str> {
        let i = *self.columns.get(col)?;
        self.rows[row].get(i).filter(|s| !s.is_empty())
    }

    fn float(&self, row: usize, col: &str) -> Result<f64> {
        let s = self
            .cell(row, col)
            .ok_or_else(|| Error::domain(format!("{}: row {}: empty '{col}'", self.name, row + 1)))?;
        s.parse::<f64>()
            .map_err(|_| Error::domain(format!("{}: row {}: '{col}' = '{s}' is not a number", self.name, row + 1)))
    }

    fn opt_float(&self, row: usize, col: &str) -> Result<Option<f64>> {
        match self.cell(row, col) {
            None => Ok(None),
            Some(_) => self.float(row, col).map(Some),
        }
    }

    fn day(&self, row: usize) -> Result<usize> {
        let s = self.cell(row, "t").unwrap_or("");
        s.parse::<usize>()
            .map_err(|_| Error::Alignment(format!("{}: row {}: day index '{s}' is not an integer", self.name, row + 1)))
    }

    fn days(&self) -> Result<Vec<usize>> {
        (0..self.rows.len()).map(|i| self.day(i)).collect()
    }

    /// Day indices must be consecutive within each run of rows sharing a
    /// `process` label.
    fn check_days(&self) -> Result<()> {
        let mut prev: Option<(Option<&str>, usize)> = None;
        for i in 0..self.rows.len() {
            let t = self.day(i)?;
            let proc = self.cell(i, "process");
            if let Some((p, last)) = prev {
                if p == proc && t != last + 1 {
                    return Err(Error::Alignment(format!(
                        "{}: row {}: day {t} does not follow day {last}",
                        self.name,
                        i + 1
                    )));
                }
            }
            prev = Some((proc, t));
        }
        Ok(())
    }
}

/// A series keyed by consecutive days.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySeries<T> {
    pub days: Vec<usize>,
    pub values: Vec<T>,
}

impl<T> DaySeries<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Errors unless both series cover exactly the same days.
    pub fn check_aligned<U>(&self, other: &DaySeries<U>, what: &str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Alignment(format!("{what}: {} rows against {} losses", other.len(), self.len())));
        }
        if let Some(i) = (0..self.len()).find(|&i| self.days[i] != other.days[i]) {
            return Err(Error::Alignment(format!(
                "{what}: row {} has day {} but the losses have day {}",
                i + 1,
                other.days[i],
                self.days[i]
            )));
        }
        Ok(())
    }
}

pub fn read_losses(path: &Path) -> Result<DaySeries<f64>> {
    let t = Table::read(path, &LOSS_COLUMNS, &LOSS_COLUMNS)?;
    let values = (0..t.rows.len()).map(|i| t.float(i, "loss")).collect::<Result<_>>()?;
    Ok(DaySeries { days: t.days()?, values })
}

pub fn read_forecasts(path: &Path) -> Result<DaySeries<Forecast>> {
    let t = Table::read(path, &FORECAST_COLUMNS, &["t", "r"])?;
    let values = (0..t.rows.len())
        .map(|i| Ok(Forecast { r: t.float(i, "r")?, z: t.opt_float(i, "z")? }))
        .collect::<Result<_>>()?;
    Ok(DaySeries { days: t.days()?, values })
}

/// Generator state written next to simulated losses: `(mu, sigma, law)` per day.
pub fn read_state(path: &Path) -> Result<DaySeries<(f64, f64, Innovation)>> {
    let t = Table::read(path, &STATE_COLUMNS, &["t", "mu", "sigma", "law"])?;
    let values = (0..t.rows.len())
        .map(|i| {
            let law = match t.cell(i, "law").unwrap_or("") {
                "normal" => Innovation::Normal,
                "student-t" => Innovation::StudentT { nu: t.float(i, "nu")? },
                "skewed-t" => Innovation::SkewedT { nu: t.float(i, "nu")?, skew: t.float(i, "skew")? },
                other => return Err(Error::domain(format!("row {}: unknown law '{other}'", i + 1))),
            };
            Ok((t.float(i, "mu")?, t.float(i, "sigma")?, law))
        })
        .collect::<Result<_>>()?;
    Ok(DaySeries { days: t.days()?, values })
}

fn writer(path: &Path, schema: &str, manifest: Option<&str>) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?);
    writeln!(out, "# schema: {schema}/{SCHEMA_VERSION}")?;
    if let Some(h) = manifest {
        writeln!(out, "# manifest: {h}")?;
    }
    Ok(csv::Writer::from_writer(out))
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Writes losses for days `first_day..`.
pub fn write_losses(path: &Path, first_day: usize, losses: &[f64], manifest: Option<&str>) -> Result<()> {
    let mut w = writer(path, "losses", manifest)?;
    w.write_record(LOSS_COLUMNS)?;
    for (i, x) in losses.iter().enumerate() {
        w.write_record([(first_day + i).to_string(), num(*x)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes forecasts for days `first_day..`. `label` carries method,
/// functional and level.
pub fn write_forecasts(
    path: &Path,
    first_day: usize,
    forecasts: &[Forecast],
    label: (&str, &str, f64),
    manifest: Option<&str>,
) -> Result<()> {
    let mut w = writer(path, "forecasts", manifest)?;
    w.write_record(FORECAST_COLUMNS)?;
    for (i, f) in forecasts.iter().enumerate() {
        w.write_record([
            (first_day + i).to_string(),
            num(f.r),
            f.z.map(num).unwrap_or_default(),
            label.0.to_string(),
            label.1.to_string(),
            num(label.2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_state(path: &Path, state: &SimulatedPath, manifest: Option<&str>) -> Result<()> {
    let mut w = writer(path, "state", manifest)?;
    w.write_record(STATE_COLUMNS)?;
    for i in 0..state.len() {
        let (nu, skew, law) = match state.laws[i] {
            Innovation::Normal => (String::new(), String::new(), "normal"),
            Innovation::StudentT { nu } => (num(nu), String::new(), "student-t"),
            Innovation::SkewedT { nu, skew } => (num(nu), num(skew), "skewed-t"),
        };
        w.write_record([(i + 1).to_string(), num(state.mu[i]), num(state.sigma[i]), nu, skew, law.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one block of rows per named process.
pub fn write_eprocess(path: &Path, runs: &[(&str, &EProcessRun)], manifest: Option<&str>) -> Result<()> {
    let mut w = writer(path, "eprocess", manifest)?;
    w.write_record(EPROCESS_COLUMNS)?;
    for (name, run) in runs {
        let two = !run.payoff_prime.is_empty();
        for i in 0..run.len() {
            let opt = |v: &Vec<f64>| if two { num(v[i]) } else { String::new() };
            w.write_record([
                (i + 1).to_string(),
                name.to_string(),
                run.segment[i].to_string(),
                num(run.lambda[i]),
                num(run.payoff[i]),
                opt(&run.lambda_prime),
                opt(&run.payoff_prime),
                num(run.log_wealth[i]),
                num(run.log_wealth[i].exp()),
                u8::from(run.rejections.contains(&(i + 1))).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_eprocess(path: &Path) -> Result<Vec<(String, EProcessRun)>> {
    let t = Table::read(path, &EPROCESS_COLUMNS, &["t", "process", "segment", "lambda", "payoff", "log_wealth"])?;
    let mut out: Vec<(String, EProcessRun)> = Vec::new();
    for i in 0..t.rows.len() {
        let name = t.cell(i, "process").unwrap_or("").to_string();
        if out.last().is_none_or(|(n, _)| *n != name) {
            out.push((name, EProcessRun::default()));
        }
        let run = &mut out.last_mut().expect("pushed").1;
        let seg: usize = t
            .cell(i, "segment")
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::domain(format!("row {}: bad segment", i + 1)))?;
        if run.segment.last() != Some(&seg) {
            run.segment_starts.push(t.day(i)?);
        }
        run.segment.push(seg);
        run.lambda.push(t.float(i, "lambda")?);
        run.payoff.push(t.float(i, "payoff")?);
        if let (Some(l), Some(p)) = (t.opt_float(i, "lambda_prime")?, t.opt_float(i, "payoff_prime")?) {
            run.lambda_prime.push(l);
            run.payoff_prime.push(p);
        }
        run.log_wealth.push(t.float(i, "log_wealth")?);
        if t.cell(i, "rejection") == Some("1") {
            run.rejections.push(t.day(i)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn losses_round_trip_and_reject_unknown_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        let x = vec![0.1, -2.5e-7, 3.0, f64::MIN_POSITIVE];
        write_losses(&p, 1, &x, Some("abc")).unwrap();
        let back = read_losses(&p).unwrap();
        assert_eq!(back.values, x);
        assert_eq!(back.days, vec![1, 2, 3, 4]);

        std::fs::write(&p, "t,loss,extra\n1,0.5,1\n").unwrap();
        assert!(matches!(read_losses(&p), Err(Error::Alignment(m)) if m.contains("extra")));
        std::fs::write(&p, "t,loss\n1,0.5\n3,0.5\n").unwrap();
        assert!(matches!(read_losses(&p), Err(Error::Alignment(_))));
        std::fs::write(&p, "t,loss\n1,abc\n").unwrap();
        assert!(matches!(read_losses(&p), Err(Error::Domain(m)) if m.contains("row 1")));
    }

    #[test]
    fn forecasts_keep_optional_z() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let f = vec![Forecast::pair(2.0, 1.5), Forecast::pair(2.5, 1.75)];
        write_forecasts(&p, 11, &f, ("n-FP", "es-var", 0.975), None).unwrap();
        let back = read_forecasts(&p).unwrap();
        assert_eq!(back.values, f);
        assert_eq!(back.days, vec![11, 12]);
        std::fs::write(&p, "t,r\n1,2.0\n").unwrap();
        assert_eq!(read_forecasts(&p).unwrap().values, vec![Forecast::scalar(2.0)]);
        let losses = DaySeries { days: vec![1, 2], values: vec![0.0, 0.0] };
        assert!(losses.check_aligned(&read_forecasts(&p).unwrap(), "forecasts").is_err());
    }
}
