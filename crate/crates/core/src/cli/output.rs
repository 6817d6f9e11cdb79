//! CSV and JSON encoders for command outputs.
//!
//! Boundary CSVs share one schema: `lambda,e1_<units>,e2_<units>,kind,gamma,k`.
//! `lambda` is empty for box corners; `gamma` (always in nats, as
//! configured) and `k` are empty where they do not apply.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Units;
use super::CliError;
use crate::exponent::RegionBoundary;
use crate::sim::SimReport;

/// Everything a command produces, buffered so that nothing is written when
/// a later step fails.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub stdout: String,
    pub warnings: Vec<String>,
}

impl Outputs {
    pub fn file(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Writes all buffered files under `dir`, returning their paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                Ok(path)
            })
            .collect()
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn io(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// A boundary together with the `γ` and `k` it was computed for.
pub struct LabeledBoundary<'a> {
    pub boundary: &'a RegionBoundary,
    pub gamma: Option<f64>,
    pub k: Option<usize>,
}

pub fn boundary_csv(units: Units, sets: &[LabeledBoundary<'_>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let u = units.suffix();
    w.write_record(["lambda", &format!("e1_{u}"), &format!("e2_{u}"), "kind", "gamma", "k"])
        .map_err(io)?;
    let s = units.scale();
    for set in sets {
        let kind = set.boundary.kind.as_str();
        for p in &set.boundary.points {
            w.write_record([
                fmt_opt(p.lambda),
                (p.exponents.e1 * s).to_string(),
                (p.exponents.e2 * s).to_string(),
                kind.to_string(),
                fmt_opt(set.gamma),
                fmt_opt(set.k),
            ])
            .map_err(io)?;
        }
    }
    finish(w)
}

const SIM_COLUMNS: [&str; 19] = [
    "n",
    "truth",
    "procedure",
    "trials",
    "master_seed",
    "choose_h1",
    "choose_h2",
    "reject_both",
    "err_count",
    "err_estimate",
    "err_ci_low",
    "err_ci_high",
    "continue_count",
    "continue_estimate",
    "truncated_count",
    "tau_mean",
    "tau_var",
    "exact_err",
    "exact_continue",
];

/// One row per `(n, hypothesis)`, with exact values where available.
pub fn sim_csv(rows: &[(&SimReport, Option<(f64, f64)>)]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SIM_COLUMNS).map_err(io)?;
    for (r, exact) in rows {
        w.write_record([
            r.n.to_string(),
            r.truth.tag().to_string(),
            r.procedure.clone(),
            r.trials.to_string(),
            r.master_seed.to_string(),
            r.decisions.choose_h1.to_string(),
            r.decisions.choose_h2.to_string(),
            r.decisions.reject_both.to_string(),
            r.err_count.to_string(),
            r.err_estimate.to_string(),
            r.err_ci_low.to_string(),
            r.err_ci_high.to_string(),
            r.continue_count.to_string(),
            r.continue_estimate.to_string(),
            r.truncated_count.to_string(),
            r.tau_mean.to_string(),
            r.tau_var.to_string(),
            fmt_opt(exact.map(|e| e.0)),
            fmt_opt(exact.map(|e| e.1)),
        ])
        .map_err(io)?;
    }
    finish(w)
}
