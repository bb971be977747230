use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::aggregate::{AggregateSeries, Metric};
use super::suite::CellSummary;
use crate::error::{Error, Result};

const FINGERPRINT_PREFIX: &str = "# config-sha256=";

/// Hex digest of the canonical JSON encoding of `config`, shortened to 40
/// characters.
pub fn fingerprint<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(hex::encode(digest)[..40].to_string())
}

/// One row of an aggregate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub step: u64,
    pub metric: String,
    pub mean: f64,
    pub sem: Option<f64>,
    pub policy: String,
    pub alpha: f64,
    pub realizations: usize,
}

pub fn series_rows(series: &[AggregateSeries]) -> Vec<SeriesRow> {
    let mut rows = Vec::new();
    for s in series {
        for m in &s.metrics {
            for (i, (&mean, &sem)) in m.mean.iter().zip(&m.sem).enumerate() {
                rows.push(SeriesRow {
                    step: m.first_step + i as u64,
                    metric: m.metric.label().to_string(),
                    mean,
                    sem,
                    policy: s.key.policy.clone(),
                    alpha: s.key.spec_alpha,
                    realizations: s.realizations,
                });
            }
        }
    }
    rows
}

fn write_with_fingerprint<T: Serialize>(path: &Path, fingerprint: &str, header: &[&str], rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "{FINGERPRINT_PREFIX}{fingerprint}")?;
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_with_fingerprint<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(String, Vec<T>)> {
    let text = fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let fp = first
        .strip_prefix(FINGERPRINT_PREFIX)
        .ok_or_else(|| Error::InvalidInput(format!("{} lacks a fingerprint line", path.display())))?
        .trim()
        .to_string();
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let rows = reader.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((fp, rows))
}

const SERIES_HEADER: [&str; 7] = ["step", "metric", "mean", "sem", "policy", "alpha", "realizations"];

/// Writes per-step aggregates as CSV with columns
/// `step, metric, mean, sem, policy, alpha, realizations`, preceded by a
/// `# config-sha256=` line. Missing standard errors are empty fields.
pub fn write_series_csv(path: &Path, series: &[AggregateSeries], fingerprint: &str) -> Result<()> {
    write_with_fingerprint(path, fingerprint, &SERIES_HEADER, &series_rows(series))
}

/// Reads a file written by [`write_series_csv`], returning the fingerprint
/// and the rows.
pub fn read_series_csv(path: &Path) -> Result<(String, Vec<SeriesRow>)> {
    let (fp, rows): (String, Vec<SeriesRow>) = read_with_fingerprint(path)?;
    if let Some(bad) = rows.iter().find(|r| Metric::from_label(&r.metric).is_none()) {
        return Err(Error::InvalidInput(format!("unknown metric {:?}", bad.metric)));
    }
    Ok((fp, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub policy: String,
    pub policy_alpha: f64,
    pub spec_alpha: f64,
    pub realizations: usize,
    pub normalized_constraint_mean: f64,
    pub normalized_constraint_sem: Option<f64>,
    pub violation_tail_mean: f64,
    pub violation_tail_sem: Option<f64>,
    pub regret_tail_mean: f64,
    pub regret_tail_sem: Option<f64>,
    pub regret_unconstrained_tail_mean: f64,
    pub regret_unconstrained_tail_sem: Option<f64>,
}

impl From<&CellSummary> for TableRow {
    fn from(c: &CellSummary) -> Self {
        Self {
            policy: c.policy.clone(),
            policy_alpha: c.policy_alpha,
            spec_alpha: c.spec_alpha,
            realizations: c.realizations,
            normalized_constraint_mean: c.normalized_constraint.mean,
            normalized_constraint_sem: c.normalized_constraint.sem,
            violation_tail_mean: c.violation_tail.mean,
            violation_tail_sem: c.violation_tail.sem,
            regret_tail_mean: c.regret_tail.mean,
            regret_tail_sem: c.regret_tail.sem,
            regret_unconstrained_tail_mean: c.regret_unconstrained_tail.mean,
            regret_unconstrained_tail_sem: c.regret_unconstrained_tail.sem,
        }
    }
}

const TABLE_HEADER: [&str; 12] = [
    "policy",
    "policy_alpha",
    "spec_alpha",
    "realizations",
    "normalized_constraint_mean",
    "normalized_constraint_sem",
    "violation_tail_mean",
    "violation_tail_sem",
    "regret_tail_mean",
    "regret_tail_sem",
    "regret_unconstrained_tail_mean",
    "regret_unconstrained_tail_sem",
];

/// Writes one row per cell: the normalized constraint over the last `k`
/// steps and the end-of-run violation and regret levels.
pub fn write_table_csv(path: &Path, cells: &[CellSummary], fingerprint: &str) -> Result<()> {
    let rows: Vec<TableRow> = cells.iter().map(TableRow::from).collect();
    write_with_fingerprint(path, fingerprint, &TABLE_HEADER, &rows)
}

pub fn read_table_csv(path: &Path) -> Result<(String, Vec<TableRow>)> {
    read_with_fingerprint(path)
}

/// Writes `value` as pretty JSON wrapped with its fingerprint.
pub fn write_json_sidecar<T: Serialize>(path: &Path, fingerprint: &str, value: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Sidecar<'a, T> {
        fingerprint: &'a str,
        #[serde(flatten)]
        value: &'a T,
    }
    let mut text = serde_json::to_string_pretty(&Sidecar { fingerprint, value })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
