//! Report document and trajectory table. Keys are listed in `REPORT_SCHEMA.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use poisfam::TrajectoryRecord;

pub const REPORT_FILE: &str = "report.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Debug, Serialize)]
pub struct Report {
    pub system: SystemInfo,
    pub action: String,
    pub points: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<Reduction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integration: Option<Integration>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct SystemInfo {
    pub name: String,
    pub dim: usize,
    /// One-based.
    pub pair: [usize; 2],
    pub domain: Vec<[f64; 2]>,
    pub eta: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct Verification {
    pub jacobi_max_normalized: f64,
    pub jacobi_max_abs: f64,
    pub jacobi_worst_point: Vec<f64>,
    pub one_sided_points: usize,
    /// Indexed by rank.
    pub rank_histogram: Vec<usize>,
    pub casimir_gradient_max_normalized: f64,
    pub casimir_independence_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_path_max: Option<f64>,
}

#[derive(Debug, Default, Serialize)]
pub struct Reduction {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub reparam_factor: f64,
    pub canonical_deviation: f64,
    pub chart_points: usize,
    pub round_trip_max: f64,
    pub canonical_max: f64,
}

#[derive(Debug, Default, Serialize)]
pub struct Integration {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub status: String,
    pub t_reached: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub hamiltonian_drift: f64,
    pub casimir_drifts: BTreeMap<String, f64>,
    pub trajectory: String,
}

/// One pass/fail line; `value` is `null` when the check could not be evaluated.
#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value: Some(value),
            tolerance,
            pass: value <= tolerance,
            error: None,
        }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, error: impl ToString) -> Self {
        Check {
            name: name.into(),
            value: None,
            tolerance,
            pass: false,
            error: Some(error.to_string()),
        }
    }
}

impl Report {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `t,x1..xn,H,C..` with Casimir columns named by one-based index.
pub fn write_trajectory(dir: &Path, rec: &TrajectoryRecord) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let n = rec.states.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for k in 1..=n {
        write!(out, ",x{k}")?;
    }
    out.push_str(",H");
    for k in &rec.casimir_indices {
        write!(out, ",C{}", k + 1)?;
    }
    out.push('\n');
    for (row, t) in rec.times.iter().enumerate() {
        write!(out, "{t}")?;
        for v in &rec.states[row] {
            write!(out, ",{v}")?;
        }
        write!(out, ",{}", rec.hamiltonian[row])?;
        for v in &rec.casimirs[row] {
            write!(out, ",{v}")?;
        }
        out.push('\n');
    }
    let path = dir.join(TRAJECTORY_FILE);
    std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))
}
