//! Invariant suite over a finished run's output directory.

use std::path::Path;
use std::sync::Arc;

use serde_json::Value;

use super::config::{Experiment, RunConfig};
use super::experiments::{Bound, Check, MASS_DRIFT_TOL, MONOTONE_TOL};
use crate::diagnostics::survival;
use crate::grid::{build_mesh, Mesh};
use crate::hjb::VALUE_CHECK_TOL;
use crate::kinetic::DensityField;

/// Every check recorded in `summary.json`, re-evaluated, plus checks recomputed from the CSVs.
#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub checks: Vec<Check>,
    /// Problems that prevent a check from running at all.
    pub problems: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.problems.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, measured: f64, bound: Bound, limit: f64) {
        self.checks.push(Check::new(name, measured, bound, limit));
    }
}

type Table = Vec<Vec<f64>>;

fn read_csv(path: &Path, header: &str) -> Result<Table, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let found = lines.next().unwrap_or_default();
    if found != header {
        return Err(format!("{}: header `{found}`, expected `{header}`", path.display()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|cell| cell.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("{}:{}: {e}", path.display(), i + 2))
        })
        .collect()
}

/// Rows grouped by their first column, in file order.
fn snapshots(rows: &Table) -> Vec<&[Vec<f64>]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i][0].to_bits() != rows[start][0].to_bits() {
            out.push(&rows[start..i]);
            start = i;
        }
    }
    out
}

fn dynamics_mesh(config: &RunConfig) -> Result<Arc<Mesh>, String> {
    let m = &config.mesh;
    build_mesh(m.spacing, m.z_min, m.z_max, m.n)
        .map(Arc::new)
        .map_err(|e| e.to_string())
}

fn check_density(report: &mut CheckReport, name: &str, rows: &Table, mesh: &Arc<Mesh>) -> Result<(), String> {
    let mut fields = Vec::new();
    for snap in snapshots(rows) {
        let same_nodes = snap.len() == mesh.len() && snap.iter().zip(mesh.nodes()).all(|(row, z)| row[1] == *z);
        if !same_nodes {
            return Err(format!("{name}: snapshot t = {} is not on the configured mesh", snap[0][0]));
        }
        let values = snap.iter().map(|row| row[2]).collect();
        fields.push(DensityField::new(mesh.clone(), values).map_err(|e| format!("{name}: {e}"))?);
    }
    let first = fields.first().ok_or_else(|| format!("{name}: no snapshots"))?;
    let m0 = first.mass();
    let drift = fields.iter().map(|f| (f.mass() / m0 - 1.0).abs()).fold(0.0, f64::max);
    report.push(&format!("{name}:mass_drift"), drift, Bound::AtMost, MASS_DRIFT_TOL);
    let tails: Vec<Vec<f64>> = fields.iter().map(survival).collect();
    let drop = tails
        .windows(2)
        .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) / m0))
        .fold(0.0, f64::max);
    report.push(&format!("{name}:tail_mass_drop"), drop, Bound::AtMost, MONOTONE_TOL);
    Ok(())
}

fn check_values(report: &mut CheckReport, rows: &Table) {
    let (mut neg, mut drop, mut rise, mut top) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for snap in snapshots(rows) {
        let scale = 1.0 + snap.iter().fold(0.0f64, |m, r| m.max(r[2].abs()));
        neg = neg.max(snap.iter().fold(0.0f64, |m, r| m.max(0.0 - r[2])) / scale);
        drop = drop.max(snap.windows(2).map(|w| w[0][2] - w[1][2]).fold(0.0, f64::max) / scale);
        rise = rise.max(snap.windows(2).map(|w| w[1][3] - w[0][3]).fold(0.0, f64::max));
        top = top.max(snap[snap.len() - 1][3].abs());
    }
    report.push("values.csv:value_negative_part", neg, Bound::AtMost, VALUE_CHECK_TOL);
    report.push("values.csv:value_drop_in_z", drop, Bound::AtMost, VALUE_CHECK_TOL);
    report.push("values.csv:strategy_rise_in_z", rise, Bound::AtMost, MONOTONE_TOL);
    report.push("values.csv:strategy_at_z_max", top, Bound::AtMost, 0.0);
}

fn check_production(report: &mut CheckReport, name: &str, rows: &Table) {
    // smallest Y; it must be positive and finite
    let worst = rows
        .iter()
        .map(|r| if r[1].is_finite() { r[1] } else { f64::NAN })
        .fold(f64::INFINITY, |m, y| if y.is_nan() || m.is_nan() { f64::NAN } else { m.min(y) });
    report.push(&format!("{name}:min_production"), worst, Bound::Above, 0.0);
}

fn check_bgp(report: &mut CheckReport, rows: &Table) {
    let drop = rows.windows(2).map(|w| w[0][1] - w[1][1]).fold(0.0, f64::max);
    report.push("bgp.csv:cdf_drop", drop, Bound::AtMost, 0.0);
    let outside = rows
        .iter()
        .map(|r| (-r[1]).max(r[1] - 1.0))
        .fold(0.0, f64::max);
    report.push("bgp.csv:cdf_outside_unit_interval", outside, Bound::AtMost, 0.0);
    if rows.iter().all(|r| !r[3].is_nan()) {
        let scale = 1.0 + rows.iter().fold(0.0f64, |m, r| m.max(r[3].abs()));
        let drop = rows.windows(2).map(|w| w[0][3] - w[1][3]).fold(0.0, f64::max) / scale;
        report.push("bgp.csv:value_drop_in_x", drop, Bound::AtMost, VALUE_CHECK_TOL);
    }
}

fn recorded_checks(report: &mut CheckReport, summary: &Value) {
    let Some(checks) = summary["checks"].as_array() else {
        report.problems.push("summary.json has no checks array".into());
        return;
    };
    for c in checks {
        let name = c["name"].as_str().unwrap_or("<unnamed>");
        let bound: Option<Bound> = serde_json::from_value(c["bound"].clone()).ok();
        let (Some(bound), Some(limit)) = (bound, c["limit"].as_f64()) else {
            report.problems.push(format!("summary check `{name}` is malformed"));
            continue;
        };
        // non-finite measurements are stored as null and fail
        let measured = c["measured"].as_f64().unwrap_or(f64::NAN);
        report.push(name, measured, bound, limit);
    }
}

/// Runs the suite over `dir`, which must hold a `summary.json`.
pub fn check_outputs(dir: &Path) -> CheckReport {
    let mut report = CheckReport::default();
    let summary_path = dir.join("summary.json");
    let summary: Value = match std::fs::read_to_string(&summary_path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(v) => v,
        Err(e) => {
            report.problems.push(format!("{}: {e}", summary_path.display()));
            return report;
        }
    };
    if summary["status"] != "ok" {
        report.problems.push(format!(
            "run status is {}: {}",
            summary["status"],
            summary["error"].as_str().unwrap_or("no error recorded")
        ));
    }
    recorded_checks(&mut report, &summary);
    let config: RunConfig = match serde_json::from_value(summary["config"].clone()) {
        Ok(c) => c,
        Err(e) => {
            report.problems.push(format!("summary config: {e}"));
            return report;
        }
    };
    let files: Vec<String> = summary["files"]
        .as_array()
        .map(|a| a.iter().filter_map(|f| f.as_str().map(String::from)).collect())
        .unwrap_or_default();
    for name in &files {
        if let Err(e) = check_file(&mut report, dir, name, &config) {
            report.problems.push(e);
        }
    }
    report
}

fn check_file(report: &mut CheckReport, dir: &Path, name: &str, config: &RunConfig) -> Result<(), String> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(format!("{name} is listed but missing"));
    }
    let dynamics = !matches!(config.experiment, Experiment::BgpConstant | Experiment::BgpGeneral);
    if name.starts_with("density") && name.ends_with(".csv") && dynamics {
        let mesh = dynamics_mesh(config)?;
        check_density(report, name, &read_csv(&path, "t,z,f")?, &mesh)?;
    } else if name == "values.csv" {
        check_values(report, &read_csv(&path, "t,z,V,s")?);
    } else if name.starts_with("production") && name.ends_with(".csv") {
        check_production(report, name, &read_csv(&path, "t,Y")?);
    } else if name == "bgp.csv" {
        check_bgp(report, &read_csv(&path, "x,Phi,phi,v,sigma")?);
    }
    Ok(())
}

