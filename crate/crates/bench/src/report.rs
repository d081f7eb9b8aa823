//! Report rows, CSV input/output and per-scenario summaries.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::BenchError;

pub const HEADER: [&str; 14] = [
    "scenario_id",
    "aqm",
    "utilization",
    "target_quantile",
    "target_delay",
    "m",
    "served_on_time",
    "delayed",
    "dropped",
    "failed_ratio",
    "delayed_ratio",
    "dropped_ratio",
    "seed",
    "wall_time",
];

/// Rounds to 10 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().expect("formatted float parses")
}

fn sig10<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

fn sig10_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => s.serialize_f64(round_sig(*x)),
        None => s.serialize_none(),
    }
}

/// One (scenario, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario_id: String,
    pub aqm: String,
    #[serde(serialize_with = "sig10")]
    pub utilization: f64,
    #[serde(serialize_with = "sig10_opt")]
    pub target_quantile: Option<f64>,
    #[serde(serialize_with = "sig10")]
    pub target_delay: f64,
    pub m: u64,
    pub served_on_time: u64,
    pub delayed: u64,
    pub dropped: u64,
    #[serde(serialize_with = "sig10")]
    pub failed_ratio: f64,
    #[serde(serialize_with = "sig10")]
    pub delayed_ratio: f64,
    #[serde(serialize_with = "sig10")]
    pub dropped_ratio: f64,
    pub seed: u64,
    #[serde(serialize_with = "sig10")]
    pub wall_time: f64,
}

impl Row {
    /// `delayed + dropped + served_on_time == m` and the ratios match.
    pub fn is_consistent(&self) -> bool {
        if self.delayed + self.dropped + self.served_on_time != self.m || self.m == 0 {
            return false;
        }
        let m = self.m as f64;
        let close = |r: f64, c: u64| (r - c as f64 / m).abs() <= 1e-9;
        close(self.failed_ratio, self.delayed + self.dropped)
            && close(self.delayed_ratio, self.delayed)
            && close(self.dropped_ratio, self.dropped)
    }
}

/// A row that could not be produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub scenario_id: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<Row>,
    pub errors: Vec<RowError>,
}

impl BenchReport {
    /// Orders rows and errors by (scenario_id, seed).
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| (&a.scenario_id, a.seed).cmp(&(&b.scenario_id, b.seed)));
        self.errors.sort_by(|a, b| (&a.scenario_id, a.seed).cmp(&(&b.scenario_id, b.seed)));
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BenchError> {
        write_rows(writer, &self.rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("csv is utf-8")
    }

    pub fn write_errors<W: Write>(&self, writer: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario_id", "seed", "error"])?;
        for e in &self.errors {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(())
    }
}

/// Header plus rows, in the given order.
pub fn write_rows<W: Write>(writer: W, rows: &[Row]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| BenchError::Io(e.to_string()))?;
    Ok(())
}

/// Appends rows to a CSV as they finish, flushing after each one.
pub struct IncrementalWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> IncrementalWriter<W> {
    pub fn new(writer: W) -> Result<Self, BenchError> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(HEADER)?;
        inner.flush().map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &Row) -> Result<(), BenchError> {
        self.inner.serialize(row)?;
        self.inner.flush().map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(())
    }
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<Row>, BenchError> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(BenchError::Parse(format!("unexpected report header {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<Row>, BenchError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    read_rows(file)
}

/// Failed-ratio statistics of one (scenario, aqm) group across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub scenario_id: String,
    pub aqm: String,
    pub utilization: f64,
    pub target_quantile: Option<f64>,
    pub runs: usize,
    pub mean_failed: f64,
    pub min_failed: f64,
    pub max_failed: f64,
    pub mean_delayed: f64,
    pub mean_dropped: f64,
}

pub fn summarize(rows: &[Row]) -> Vec<Summary> {
    let mut groups: BTreeMap<(&str, &str), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.scenario_id, &r.aqm)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((id, aqm), rs)| {
            let n = rs.len() as f64;
            let mean = |f: fn(&Row) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            Summary {
                scenario_id: id.to_string(),
                aqm: aqm.to_string(),
                utilization: rs[0].utilization,
                target_quantile: rs[0].target_quantile,
                runs: rs.len(),
                mean_failed: mean(|r| r.failed_ratio),
                min_failed: rs.iter().map(|r| r.failed_ratio).fold(f64::INFINITY, f64::min),
                max_failed: rs.iter().map(|r| r.failed_ratio).fold(f64::NEG_INFINITY, f64::max),
                mean_delayed: mean(|r| r.delayed_ratio),
                mean_dropped: mean(|r| r.dropped_ratio),
            }
        })
        .collect()
}

/// Fixed-width text table of summaries.
pub fn format_summary(summaries: &[Summary]) -> String {
    let mut out = format!(
        "{:<28} {:<16} {:>6} {:>8} {:>4} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
        "scenario", "aqm", "rho", "q", "runs", "failed", "min", "max", "delayed", "dropped"
    );
    for s in summaries {
        let q = s.target_quantile.map_or("-".to_string(), |q| format!("{q}"));
        out.push_str(&format!(
            "{:<28} {:<16} {:>6.3} {:>8} {:>4} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e}\n",
            s.scenario_id,
            s.aqm,
            s.utilization,
            q,
            s.runs,
            s.mean_failed,
            s.min_failed,
            s.max_failed,
            s.mean_delayed,
            s.mean_dropped
        ));
    }
    out
}
