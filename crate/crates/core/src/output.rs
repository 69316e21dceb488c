//! CSV and manifest files written by the command-line experiments.
//!
//! Column names are fixed; downstream plotting reads them by name. Floats use
//! the shortest round-trip representation and undefined values are `NaN`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::Ensemble;
use crate::stats::{AcfResult, HistogramWithFit, MomentsOverTime};
use crate::two_agent::{ScanPoint, ScanResult, TwoAgentRun};

pub const TWO_AGENT_HEADER: [&str; 4] = ["period", "price", "gross_return", "rate_stock"];
pub const SCAN_HEADER: [&str; 8] = ["alpha", "beta", "extreme", "k1", "k2", "s1", "s2", "A"];
pub const SCAN_SUMMARY_HEADER: [&str; 5] = ["alpha", "beta", "measure", "min", "max"];
pub const MOMENTS_HEADER: [&str; 6] = ["period", "t_years", "mean", "variance", "skewness", "kurtosis"];
pub const ACF_HEADER: [&str; 2] = ["lag", "correlation"];
pub const HIST_HEADER: [&str; 5] = ["bin_left", "bin_right", "count", "empirical_density", "lognormal_density"];
pub const SUMMARY_HEADER: [&str; 8] = [
    "scheme",
    "m_or_mean_m",
    "geometric_mean_return",
    "arithmetic_mean_return",
    "std_return",
    "predicted_rs",
    "ks_distance",
    "excess_kurtosis_log_returns",
];
pub const RETURNS_HEADER: [&str; 3] = ["trajectory_index", "period", "gross_return"];

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    num(x.unwrap_or(f64::NAN))
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

/// One row per period: `P_n`, `P_n / P_{n-1}` and the constant reference rate.
pub fn write_two_agent(path: &Path, run: &TwoAgentRun, rate_stock: f64) -> io::Result<()> {
    let rows = run.prices.iter().zip(&run.returns).enumerate().map(|(i, (&p, &g))| {
        vec![(i + 1).to_string(), num(p), num(g), num(rate_stock)]
    });
    write_rows(path, &TWO_AGENT_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub alpha: f64,
    pub beta: f64,
    pub result: ScanResult,
}

/// Extremes with their grid coordinates, two rows per `(alpha, beta)`.
pub fn write_scan(path: &Path, rows: &[ScanRow]) -> io::Result<()> {
    let point = |row: &ScanRow, tag: &str, at: ScanPoint, value: f64| {
        let mut rec = vec![num(row.alpha), num(row.beta), tag.to_string()];
        rec.extend(at.iter().map(|&x| num(x)));
        rec.push(num(value));
        rec
    };
    let records = rows.iter().flat_map(|row| {
        [
            point(row, "min", row.result.argmin, row.result.min),
            point(row, "max", row.result.argmax, row.result.max),
        ]
    });
    write_rows(path, &SCAN_HEADER, records)
}

pub fn write_scan_summary(path: &Path, measure: &str, rows: &[ScanRow]) -> io::Result<()> {
    let records = rows.iter().map(|row| {
        vec![
            num(row.alpha),
            num(row.beta),
            measure.to_string(),
            num(row.result.min),
            num(row.result.max),
        ]
    });
    write_rows(path, &SCAN_SUMMARY_HEADER, records)
}

/// `period` is 1-based and `t_years = period / periods_per_year`.
pub fn write_moments(path: &Path, moments: &MomentsOverTime, periods_per_year: usize) -> io::Result<()> {
    let records = (0..moments.len()).map(|i| {
        let period = i + 1;
        vec![
            period.to_string(),
            num(period as f64 / periods_per_year as f64),
            num(moments.mean[i]),
            num(moments.variance[i]),
            opt(moments.skewness[i]),
            opt(moments.kurtosis[i]),
        ]
    });
    write_rows(path, &MOMENTS_HEADER, records)
}

pub fn write_acf(path: &Path, acf: &AcfResult) -> io::Result<()> {
    let records = acf
        .correlations
        .iter()
        .enumerate()
        .map(|(lag, &c)| vec![lag.to_string(), opt(c)]);
    write_rows(path, &ACF_HEADER, records)
}

pub fn write_hist(path: &Path, hist: &HistogramWithFit) -> io::Result<()> {
    let emp = hist.empirical_density();
    let fit = hist.lognormal_density();
    let records = hist.counts.iter().enumerate().map(|(i, &c)| {
        vec![
            num(hist.edges[i]),
            num(hist.edges[i + 1]),
            c.to_string(),
            num(emp[i]),
            num(fit[i]),
        ]
    });
    write_rows(path, &HIST_HEADER, records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Colon syntax, e.g. `fixed:40`.
    pub scheme: String,
    pub mean_active: f64,
    pub geometric_mean_return: f64,
    pub arithmetic_mean_return: f64,
    pub std_return: f64,
    pub predicted_rs: f64,
    pub ks_distance: f64,
    pub excess_kurtosis_log_returns: f64,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> io::Result<()> {
    let records = rows.iter().map(|r| {
        vec![
            r.scheme.clone(),
            num(r.mean_active),
            num(r.geometric_mean_return),
            num(r.arithmetic_mean_return),
            num(r.std_return),
            num(r.predicted_rs),
            num(r.ks_distance),
            num(r.excess_kurtosis_log_returns),
        ]
    });
    write_rows(path, &SUMMARY_HEADER, records)
}

/// Every gross return of the run, trajectory-major, period 1-based.
pub fn write_returns(path: &Path, ensemble: &Ensemble) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(io::BufWriter::new(fs::File::create(path)?));
    w.write_record(RETURNS_HEADER)?;
    for s in &ensemble.series {
        let idx = s.trajectory.to_string();
        for (t, &g) in s.returns.iter().enumerate() {
            w.write_record([idx.as_str(), &(t + 1).to_string(), &num(g)])?;
        }
    }
    w.flush()
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: Option<u64>,
    /// Resolved `key = value` configuration after all overrides.
    pub config: std::collections::BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = PathBuf::from(path);
    tmp.as_mut_os_string().push(".tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> io::Result<()> {
    let mut json = serde_json::to_vec_pretty(manifest).map_err(io::Error::other)?;
    json.push(b'\n');
    write_atomic(path, &json)
}
