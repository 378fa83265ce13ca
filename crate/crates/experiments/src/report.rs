//! Experiment reports: per-ε rows, derived checks, JSON and CSV output.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::Write;

use crate::ExpResult;

pub const SCHEMA: u32 = 1;

/// Errors below this are indistinguishable from rounding: distances of
/// points that differ by `δ` in `t` come out near `√(π δ)`, so an `f64`
/// rounding error of `1e-15` already reads as `6e-8`.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Number of rungs `ε_k = ε^{1/2^k}`, `k = 0..LADDER`, stored on every row.
pub const LADDER: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub eps: f64,
    pub eps_ladder: Vec<f64>,
    pub error: f64,
    pub bound: f64,
    pub pass: bool,
    /// Set when the row is outside the regime the bound is claimed for
    /// (largest grid value) and failed, or when a sanity probe failed.
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl Row {
    pub fn new(eps: f64, error: f64, bound: f64) -> Self {
        let eps_ladder = (0..LADDER as i32).map(|k| eps.powf(0.5f64.powi(k))).collect();
        Row { eps, eps_ladder, error, bound, pass: error <= bound, flagged: false, extra: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, v: impl Serialize) -> Self {
        self.extra.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub theorem: String,
    pub family: String,
    pub config: Value,
    pub rows: Vec<Row>,
    pub slope: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Least-squares slope of `ln error` against `ln eps`, ignoring rows with
/// `error < 1e-12`. `None` with fewer than two usable rows.
pub fn loglog_slope(rows: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|(e, v)| *e > 0.0 && *v >= 1e-12).map(|(e, v)| (e.ln(), v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Rows sorted by `eps` descending: the last error must not exceed the first,
/// and at most one step may go up. Changes below [`NOISE_FLOOR`] are ignored.
pub fn trend_ok(errors: &[f64]) -> (bool, usize) {
    if errors.len() < 2 {
        return (true, 0);
    }
    let ups = errors.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-9) + NOISE_FLOOR).count();
    let ends = errors[errors.len() - 1] <= errors[0] * (1.0 + 1e-9) + NOISE_FLOOR;
    (ends && ups <= 1, ups)
}

impl ExperimentReport {
    pub fn new(theorem: &str, family: &str, config: Value) -> Self {
        ExperimentReport {
            schema: SCHEMA,
            theorem: theorem.to_string(),
            family: family.to_string(),
            config,
            rows: Vec::new(),
            slope: None,
            checks: Vec::new(),
            pass: false,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Sorts rows, fits the slope, adds the trend check and sets `pass`.
    ///
    /// A failed row at the largest `eps` is flagged rather than counted.
    pub fn finish(mut self) -> Self {
        self.rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        self.slope = loglog_slope(&self.rows.iter().map(|r| (r.eps, r.error)).collect::<Vec<_>>());
        if self.rows.len() >= 2 {
            let errs: Vec<f64> = self.rows.iter().map(|r| r.error).collect();
            let (ok, ups) = trend_ok(&errs);
            self.checks.push(Check::new("trend", ok, format!("{ups} upward step(s) along the grid")));
        }
        if let Some(first) = self.rows.first_mut() {
            if !first.pass {
                first.flagged = true;
            }
        }
        let rows_ok = self.rows.iter().enumerate().all(|(i, r)| r.pass || (i == 0 && r.flagged));
        self.pass = rows_ok && self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> ExpResult<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// One line per row: `eps,error,bound,pass`.
    pub fn write_csv<W: Write>(&self, w: W) -> ExpResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eps", "error", "bound", "pass"])?;
        for r in &self.rows {
            out.write_record([
                format!("{:e}", r.eps),
                format!("{:e}", r.error),
                format!("{:e}", r.bound),
                r.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        let slope = self.slope.map_or("n/a".to_string(), |s| format!("{s:.4}"));
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let mut line = format!(
            "{} theorem={} family={} rows={} slope={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.theorem,
            self.family,
            self.rows.len(),
            slope
        );
        if !failed.is_empty() {
            line.push_str(&format!(" failed_checks={}", failed.join(",")));
        }
        line
    }
}
