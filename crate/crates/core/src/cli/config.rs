//! Run configuration: preset defaults, then the TOML file, then `--set` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bgp::SigmaRule;
use crate::grid::{build_mesh, Spacing, TimeAxis};
use crate::hjb::HjbScheme;
use crate::kinetic::{Integrator, LearningTech};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{key}`: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Transient,
    DiracDemo,
    BgpConstant,
    BgpGeneral,
    Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub spacing: Spacing,
    pub z_min: f64,
    pub z_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha0: f64,
    pub n: f64,
    pub beta: f64,
    pub r: f64,
    pub theta: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub relaxation: f64,
    pub integrator: Integrator,
    pub hjb_scheme: HjbScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub max_snapshots: usize,
    pub gnuplot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Knowledge window of the per-snapshot tail fits.
    pub tail_window: [f64; 2],
    /// Fraction of the horizon used for the growth fit.
    pub growth_window: [f64; 2],
    /// Allowed relative deviation of the fitted tail exponent.
    pub theta_tol: f64,
    /// Allowed relative gap between the fitted and the profile growth rates.
    pub gamma_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracConfig {
    /// Upper end of the initial support.
    pub support_max: f64,
    /// Initial density level on `[z_min, support_max]`.
    pub level: f64,
    pub eps_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub amplitude: f64,
    pub freq: f64,
    pub window: [f64; 2],
    pub terminal_fraction: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BgpConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub sigma: SigmaRule,
    pub unit_head_end: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    pub model: ModelConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub diagnostics: DiagnosticsConfig,
    pub dirac: DiracConfig,
    pub perturbation: PerturbationConfig,
    pub bgp: BgpConfig,
}

impl RunConfig {
    /// Defaults for an experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let mut config = RunConfig {
            experiment,
            mesh: MeshConfig {
                spacing: Spacing::Logarithmic,
                z_min: 1e-3,
                z_max: 1e6,
                n: 1001,
            },
            time: TimeConfig {
                t_final: 200.0,
                n_steps: 400,
            },
            model: ModelConfig {
                alpha0: 0.0849,
                n: 0.3,
                beta: 0.0,
                r: 0.06,
                theta: 0.5,
                k: 0.05,
            },
            solver: SolverConfig {
                tol: 1e-6,
                max_iter: 100,
                relaxation: 1.0,
                integrator: Integrator::default(),
                hjb_scheme: HjbScheme::default(),
            },
            output: OutputConfig {
                dir: "out".into(),
                max_snapshots: 50,
                gnuplot: false,
            },
            diagnostics: DiagnosticsConfig {
                tail_window: [1e4, 1e5],
                growth_window: [0.25, 0.75],
                theta_tol: 0.05,
                gamma_tol: 0.10,
            },
            dirac: DiracConfig {
                support_max: 0.5,
                level: 2.0,
                eps_cells: 2,
            },
            perturbation: PerturbationConfig {
                amplitude: 0.1,
                freq: 25.0,
                window: [0.1, 1.0],
                terminal_fraction: 0.1,
                max_deviation: 0.05,
            },
            bgp: BgpConfig {
                x_min: 1e-4,
                x_max: 1e4,
                n: 8001,
                sigma: SigmaRule::Unit,
                unit_head_end: 1e-2,
                tol: 1e-10,
                max_iter: 50,
            },
        };
        match experiment {
            Experiment::DiracDemo => {
                config.mesh = MeshConfig {
                    spacing: Spacing::Linear,
                    z_min: 0.0,
                    z_max: 1.0,
                    n: 201,
                };
                config.time = TimeConfig {
                    t_final: 20.0,
                    n_steps: 2000,
                };
            }
            Experiment::Perturbation => {
                config.time = TimeConfig {
                    t_final: 250.0,
                    n_steps: 500,
                };
            }
            Experiment::BgpGeneral => {
                config.bgp.sigma = SigmaRule::Step {
                    x0: 0.2,
                    low: 0.5,
                    ramp: 0.5,
                };
            }
            Experiment::Transient | Experiment::BgpConstant => {}
        }
        config
    }

    pub fn tech(&self) -> LearningTech {
        LearningTech::power_law(self.model.alpha0, self.model.n).expect("validated model parameters")
    }

    pub fn time_axis(&self) -> TimeAxis {
        TimeAxis::new(self.time.t_final, self.time.n_steps).expect("validated time axis")
    }

    /// Range checks on every field the chosen experiment reads.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        positive("model.alpha0", m.alpha0)?;
        if !(0.0..1.0).contains(&m.n) {
            return Err(ConfigError::new("model.n", format!("must lie in [0, 1), got {}", m.n)));
        }
        if !(0.0..=1.0).contains(&m.beta) {
            return Err(ConfigError::new("model.beta", format!("must lie in [0, 1], got {}", m.beta)));
        }
        if !(m.r.is_finite() && m.r >= 0.0) {
            return Err(ConfigError::new("model.r", format!("must be non-negative, got {}", m.r)));
        }
        positive("model.theta", m.theta)?;
        positive("model.k", m.k)?;

        let s = &self.solver;
        positive("solver.tol", s.tol)?;
        if s.max_iter == 0 {
            return Err(ConfigError::new("solver.max_iter", "must be at least 1"));
        }
        if !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
            return Err(ConfigError::new(
                "solver.relaxation",
                format!("must lie in (0, 1], got {}", s.relaxation),
            ));
        }
        if self.output.max_snapshots < 2 {
            return Err(ConfigError::new("output.max_snapshots", "must be at least 2"));
        }
        if self.output.dir.is_empty() {
            return Err(ConfigError::new("output.dir", "must not be empty"));
        }

        match self.experiment {
            Experiment::BgpConstant | Experiment::BgpGeneral => self.validate_bgp(),
            _ => self.validate_dynamics(),
        }
    }

    fn validate_dynamics(&self) -> Result<(), ConfigError> {
        build_mesh(self.mesh.spacing, self.mesh.z_min, self.mesh.z_max, self.mesh.n)
            .map_err(|e| ConfigError::new("mesh", e.to_string()))?;
        let time = TimeAxis::new(self.time.t_final, self.time.n_steps)
            .map_err(|e| ConfigError::new("time", e.to_string()))?;
        // unit mass in every preset; the Dirac demo rate never exceeds 1
        let max_alpha = match self.experiment {
            Experiment::DiracDemo => 1.0,
            _ => self.model.alpha0,
        };
        let forward = time.dt() * max_alpha * (1.0 + self.model.beta);
        if forward >= 1.0 {
            return Err(ConfigError::new(
                "time.n_steps",
                format!("dt * max(alpha) * (1 + beta) = {forward} must stay below 1"),
            ));
        }
        let backward = time.dt() * (self.model.r + max_alpha);
        if self.experiment != Experiment::DiracDemo && backward >= 1.0 {
            return Err(ConfigError::new(
                "time.n_steps",
                format!("dt * (r + max(alpha)) = {backward} must stay below 1"),
            ));
        }
        let d = &self.diagnostics;
        if !(d.tail_window[0] > 0.0 && d.tail_window[0] < d.tail_window[1]) {
            return Err(ConfigError::new("diagnostics.tail_window", "needs 0 < lo < hi"));
        }
        if !(0.0 <= d.growth_window[0] && d.growth_window[0] < d.growth_window[1] && d.growth_window[1] <= 1.0) {
            return Err(ConfigError::new("diagnostics.growth_window", "needs 0 <= lo < hi <= 1"));
        }
        match self.experiment {
            Experiment::DiracDemo => {
                let dirac = &self.dirac;
                if !(dirac.support_max > self.mesh.z_min && dirac.support_max <= self.mesh.z_max) {
                    return Err(ConfigError::new("dirac.support_max", "must lie inside the mesh"));
                }
                positive("dirac.level", dirac.level)?;
                if dirac.eps_cells == 0 {
                    return Err(ConfigError::new("dirac.eps_cells", "must be at least 1"));
                }
            }
            Experiment::Perturbation => {
                let p = &self.perturbation;
                if !(p.window[0] <= p.window[1]) {
                    return Err(ConfigError::new("perturbation.window", "needs lo <= hi"));
                }
                if !(0.0..1.0).contains(&p.terminal_fraction) {
                    return Err(ConfigError::new("perturbation.terminal_fraction", "must lie in [0, 1)"));
                }
            }
            _ => {}
        }
        if self.experiment != Experiment::DiracDemo && self.mesh.z_min <= 0.0 {
            return Err(ConfigError::new("mesh.z_min", "the Frechet initial density needs z_min > 0"));
        }
        Ok(())
    }

    fn validate_bgp(&self) -> Result<(), ConfigError> {
        let b = &self.bgp;
        build_mesh(Spacing::Logarithmic, b.x_min, b.x_max, b.n)
            .map_err(|e| ConfigError::new("bgp", e.to_string()))?;
        positive("bgp.tol", b.tol)?;
        if b.max_iter == 0 {
            return Err(ConfigError::new("bgp.max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

fn positive(key: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be positive, got {value}")))
    }
}

/// Parses the value part of a `key=value` override as a TOML literal,
/// falling back to a plain string.
fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(base), toml::Value::Table(overlay)) => {
            for (key, value) in overlay {
                match base.get_mut(&key) {
                    Some(slot) if slot.is_table() && value.is_table() => merge(slot, value),
                    _ => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(ConfigError::new(path, "empty key segment"));
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(parts[..i].join("."), "is not a table"))?;
        if i + 1 == parts.len() {
            table.insert((*part).to_string(), value);
            return Ok(());
        }
        node = table
            .entry((*part).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("split yields at least one segment")
}

/// Builds a validated configuration.
///
/// `file` is the text of a TOML config (may be empty); `overrides` are
/// `dotted.key=value` pairs applied after it.
pub fn parse_config(
    experiment: Experiment,
    file: Option<&str>,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let mut root = toml::Value::try_from(RunConfig::preset(experiment))
        .map_err(|e| ConfigError::new("<preset>", e.to_string()))?;
    if let Some(text) = file {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("<file>", e.to_string()))?;
        merge(&mut root, toml::Value::Table(table));
    }
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::new(item.as_str(), "expected key=value"))?;
        set_path(&mut root, key.trim(), parse_literal(raw.trim()))?;
    }
    let config: RunConfig = root.try_into().map_err(|e: toml::de::Error| {
        ConfigError::new("<config>", e.message().to_string())
    })?;
    check_experiment(experiment, config.experiment)?;
    config.validate()?;
    Ok(config)
}

fn check_experiment(requested: Experiment, configured: Experiment) -> Result<(), ConfigError> {
    let compatible = requested == configured
        || matches!(
            (requested, configured),
            (Experiment::BgpConstant, Experiment::BgpGeneral)
        );
    if compatible {
        Ok(())
    } else {
        Err(ConfigError::new(
            "experiment",
            format!("{configured:?} cannot run under the {requested:?} command"),
        ))
    }
}

pub fn load_config(
    experiment: Experiment,
    path: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let text = match path {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new(p.display().to_string(), e.to_string()))?,
        ),
        None => None,
    };
    parse_config(experiment, text.as_deref(), overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse_config(Experiment::Transient, Some(""), &[]).unwrap();
        assert_eq!(c, RunConfig::preset(Experiment::Transient));
        assert_eq!(
            (c.model.alpha0, c.model.n, c.model.theta, c.model.k, c.model.r),
            (0.0849, 0.3, 0.5, 0.05, 0.06)
        );
        assert_eq!((c.mesh.n, c.time.n_steps, c.time.t_final), (1001, 400, 200.0));
    }

    #[test]
    fn out_of_range_exponent() {
        let err = parse_config(Experiment::Transient, Some("[model]\nn = 1.2\n"), &[]).unwrap_err();
        assert_eq!(err.key, "model.n");
    }

    #[test]
    fn flags_win_over_file() {
        let file = "[model]\nalpha0 = 0.2\n";
        let c = parse_config(Experiment::Transient, Some(file), &["model.alpha0=0.1".into()]).unwrap();
        assert_eq!(c.model.alpha0, 0.1);
        let c = parse_config(Experiment::Transient, Some(file), &[]).unwrap();
        assert_eq!(c.model.alpha0, 0.2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config(Experiment::Transient, Some("[model]\nalpah0 = 0.2\n"), &[]).is_err());
        assert!(parse_config(Experiment::Transient, None, &["mesh.nn=3".into()]).is_err());
        assert!(parse_config(Experiment::Transient, None, &["model".into()]).is_err());
    }

    #[test]
    fn string_and_table_overrides() {
        let c = parse_config(
            Experiment::Transient,
            None,
            &["solver.integrator=forward-euler".into(), "output.dir=\"runs/a\"".into()],
        )
        .unwrap();
        assert_eq!(c.solver.integrator, Integrator::ForwardEuler);
        assert_eq!(c.output.dir, "runs/a");
        let c = parse_config(
            Experiment::BgpConstant,
            None,
            &["experiment=bgp-general".into(), "bgp.sigma={kind=\"unit\"}".into()],
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::BgpGeneral);
        assert_eq!(c.bgp.sigma, SigmaRule::Unit);
    }

    #[test]
    fn experiment_must_match_command() {
        let err = parse_config(Experiment::Transient, Some("experiment = \"dirac-demo\"\n"), &[]).unwrap_err();
        assert_eq!(err.key, "experiment");
    }

    #[test]
    fn step_bound_is_checked_up_front() {
        let err = parse_config(Experiment::Transient, None, &["time.n_steps=10".into()]).unwrap_err();
        assert_eq!(err.key, "time.n_steps");
    }
}
