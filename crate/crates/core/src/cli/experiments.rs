//! Experiment presets: run, measure, write artifacts and `summary.json`.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::config::{Experiment, RunConfig};
use super::output::{
    gnuplot_bgp, gnuplot_series, gnuplot_snapshots, thin_indices, write_bgp_csv, write_density_csv,
    write_json, write_production_csv, write_table_csv, write_text, write_values_csv,
};
use crate::bgp::{
    bgp_constant_alpha, bgp_general, gamma_from_profile, phi_residual, v_residual, BgpProfile, GeneralOptions,
    SigmaRule, PHI_RESIDUAL_TOL, V_RESIDUAL_TOL,
};
use crate::diagnostics::{
    dirac_metrics, fit_growth_rate, fit_survival_tail, relative_deviation, survival, TailFit,
};
use crate::error::Error;
use crate::grid::{build_mesh, Mesh, Spacing};
use crate::hjb::VALUE_CHECK_TOL;
use crate::kinetic::{first_moment, frechet_initial_density, simulate_density, DensityField, LearningTech};
use crate::mfg::{perturb_density, solve_mfg, MfgOptions, MfgSolution, Residual};

/// Relative mass drift allowed over a run.
pub const MASS_DRIFT_TOL: f64 = 1e-8;
/// Roundoff allowance for quantities that must not decrease in time.
pub const MONOTONE_TOL: f64 = 1e-12;
/// Fraction of the mass that must sit near the top of the support at the end of the Dirac demo.
pub const DIRAC_TAIL_TARGET: f64 = 0.99;
/// Relative gap allowed between the growth rate used by a profile and its own quadrature.
pub const GAMMA_QUADRATURE_TOL: f64 = 1e-5;
/// Closed-form profile reproduction.
pub const CLOSED_FORM_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    AtLeast,
    Below,
    Above,
}

impl Bound {
    pub fn holds(self, measured: f64, limit: f64) -> bool {
        match self {
            Bound::AtMost => measured <= limit,
            Bound::AtLeast => measured >= limit,
            Bound::Below => measured < limit,
            Bound::Above => measured > limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: Bound,
    pub limit: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, bound: Bound, limit: f64) -> Self {
        Check {
            name: name.into(),
            passed: bound.holds(measured, limit),
            measured,
            bound,
            limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub status: Status,
    pub error: Option<String>,
    pub config: RunConfig,
    pub results: BTreeMap<String, serde_json::Value>,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

impl Summary {
    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    /// 0 ok, 1 i/o failure, 2 invalid parameters found while running,
    /// 3 a solver did not converge, 4 numerical failure.
    pub exit_code: i32,
}

#[derive(Debug)]
enum Failure {
    Io(io::Error),
    Solver(Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

type Step = std::result::Result<(), Failure>;

struct Run<'a> {
    config: &'a RunConfig,
    dir: PathBuf,
    results: BTreeMap<String, serde_json::Value>,
    checks: Vec<Check>,
    files: Vec<String>,
    converged: bool,
}

impl Run<'_> {
    fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn result<T: Serialize>(&mut self, key: &str, value: T) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.results.insert(key.to_string(), value);
    }

    fn check(&mut self, name: &str, measured: f64, bound: Bound, limit: f64) {
        self.checks.push(Check::new(name, measured, bound, limit));
    }

    fn gnuplot(&mut self, name: &str, script: String) -> io::Result<()> {
        if self.config.output.gnuplot {
            let path = self.file(name);
            write_text(&path, &script)?;
        }
        Ok(())
    }
}

/// Runs the configured experiment into `config.output.dir`.
pub fn run_experiment(config: &RunConfig) -> RunOutcome {
    let dir = PathBuf::from(&config.output.dir);
    let mut run = Run {
        config,
        dir: dir.clone(),
        results: BTreeMap::new(),
        checks: Vec::new(),
        files: Vec::new(),
        converged: true,
    };
    let outcome = std::fs::create_dir_all(&dir).map_err(Failure::from).and_then(|()| {
        match config.experiment {
            Experiment::Transient => transient(&mut run),
            Experiment::DiracDemo => dirac(&mut run),
            Experiment::Perturbation => perturbation(&mut run),
            Experiment::BgpConstant | Experiment::BgpGeneral => bgp(&mut run),
        }
    });
    let (status, error, mut exit_code) = match outcome {
        Ok(()) if run.converged => (Status::Ok, None, 0),
        Ok(()) => (Status::NotConverged, Some("solver did not converge".to_string()), 3),
        Err(Failure::Io(e)) => (Status::Failed, Some(format!("i/o error: {e}")), 1),
        Err(Failure::Solver(e)) => {
            let code = match e {
                Error::NotConverged { .. } => 3,
                ref e if e.is_numerical() => 4,
                _ => 2,
            };
            let status = if code == 3 { Status::NotConverged } else { Status::Failed };
            (status, Some(e.to_string()), code)
        }
    };
    if let Some(e) = &error {
        log::error!("{e}");
    }
    let mut files = run.files;
    files.push("summary.json".into());
    let summary = Summary {
        experiment: config.experiment,
        status,
        error,
        config: config.clone(),
        results: run.results,
        checks: run.checks,
        files,
    };
    if let Err(e) = write_json(&dir.join("summary.json"), &summary) {
        log::error!("cannot write summary.json: {e}");
        exit_code = 1;
    }
    RunOutcome { summary, exit_code }
}

fn dynamics_mesh(config: &RunConfig) -> Result<Arc<Mesh>, Error> {
    let m = &config.mesh;
    Ok(Arc::new(build_mesh(m.spacing, m.z_min, m.z_max, m.n)?))
}

fn mfg_options(config: &RunConfig) -> MfgOptions {
    MfgOptions {
        r: config.model.r,
        beta: config.model.beta,
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
        relaxation: config.solver.relaxation,
        integrator: config.solver.integrator,
        scheme: config.solver.hjb_scheme,
    }
}

#[derive(Serialize)]
struct MfgReport<'a> {
    iterations: usize,
    converged: bool,
    residuals: &'a [Residual],
}

fn report(sol: &MfgSolution) -> MfgReport<'_> {
    MfgReport {
        iterations: sol.iterations,
        converged: sol.converged,
        residuals: &sol.residuals,
    }
}

fn final_residual(sol: &MfgSolution) -> f64 {
    sol.residuals.last().map_or(f64::INFINITY, |r| r.delta_f.max(r.delta_v))
}

/// Mass conservation, and the first moment and every nodal tail mass non-decreasing in time.
fn density_checks(run: &mut Run, label: &str, path: &[DensityField]) {
    let m0 = path[0].mass();
    let drift = path.iter().map(|f| (f.mass() / m0 - 1.0).abs()).fold(0.0, f64::max);
    run.check(&format!("{label}mass_drift"), drift, Bound::AtMost, MASS_DRIFT_TOL);

    let moments: Vec<f64> = path.iter().map(first_moment).collect();
    let scale = moments[0].abs().max(f64::MIN_POSITIVE);
    let drop = moments.windows(2).map(|w| (w[0] - w[1]) / scale).fold(0.0, f64::max);
    run.check(&format!("{label}first_moment_drop"), drop, Bound::AtMost, MONOTONE_TOL);

    let mut worst = 0.0f64;
    let mut previous = survival(&path[0]);
    for f in &path[1..] {
        let current = survival(f);
        for (a, b) in previous.iter().zip(&current) {
            worst = worst.max((a - b) / m0);
        }
        previous = current;
    }
    run.check(&format!("{label}tail_mass_drop"), worst, Bound::AtMost, MONOTONE_TOL);
}

/// Sign and monotonicity of `V`, `B` and `S` at every backward step.
fn value_checks(run: &mut Run, sol: &MfgSolution) {
    let mut v_neg = 0.0f64;
    let mut v_drop = 0.0f64;
    for v in &sol.value_path {
        let v = v.values();
        let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v_neg = v_neg.max(v.iter().fold(0.0f64, |m, x| m.max(0.0 - x)) / scale);
        v_drop = v_drop.max(v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max) / scale);
    }
    let mut b_neg = 0.0f64;
    let mut b_rise = 0.0f64;
    for b in &sol.gain_path {
        let b = b.values();
        let scale = 1.0 + b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        b_neg = b_neg.max(b.iter().fold(0.0f64, |m, x| m.max(0.0 - x)) / scale);
        b_rise = b_rise.max(b.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) / scale);
    }
    let mut s_rise = 0.0f64;
    let mut s_top = 0.0f64;
    for s in &sol.strategy_path {
        let s = s.values();
        s_rise = s_rise.max(s.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max));
        s_top = s_top.max(s[s.len() - 1].abs());
    }
    run.check("value_negative_part", v_neg, Bound::AtMost, VALUE_CHECK_TOL);
    run.check("value_drop_in_z", v_drop, Bound::AtMost, VALUE_CHECK_TOL);
    run.check("gain_negative_part", b_neg, Bound::AtMost, VALUE_CHECK_TOL);
    run.check("gain_rise_in_z", b_rise, Bound::AtMost, VALUE_CHECK_TOL);
    run.check("strategy_rise_in_z", s_rise, Bound::AtMost, MONOTONE_TOL);
    run.check("strategy_at_z_max", s_top, Bound::AtMost, 0.0);
}

fn write_mfg_outputs(run: &mut Run, sol: &MfgSolution, times: &[f64]) -> io::Result<()> {
    let idx = thin_indices(times.len(), run.config.output.max_snapshots);
    let log_x = run.config.mesh.spacing == Spacing::Logarithmic;
    let path = run.file("density.csv");
    write_density_csv(&path, times, &sol.density_path, &idx)?;
    let path = run.file("values.csv");
    write_values_csv(&path, times, &sol.value_path, &sol.strategy_path, &idx)?;
    let path = run.file("production.csv");
    write_production_csv(&path, times, &sol.production_series)?;
    run.gnuplot("density.gp", gnuplot_snapshots("density.csv", 3, "f", log_x))?;
    run.gnuplot("values.gp", gnuplot_snapshots("values.csv", 3, "V", log_x))?;
    run.gnuplot("production.gp", gnuplot_series("production.csv", "Y", true))
}

fn tail_fit(f: &DensityField, window: (f64, f64)) -> Result<TailFit, Error> {
    fit_survival_tail(&survival(f), f.mass(), f.mesh(), window)
}

fn transient(run: &mut Run) -> Step {
    let c = run.config;
    let mesh = dynamics_mesh(c)?;
    let time = c.time_axis();
    let times = time.times();
    let tech = c.tech();
    let f0 = frechet_initial_density(mesh.clone(), c.model.k, c.model.theta)?;
    let sol = solve_mfg(&f0, &tech, &time, &mfg_options(c))?;
    run.converged &= sol.converged;
    write_mfg_outputs(run, &sol, &times)?;
    run.result("mfg", report(&sol));
    run.check("mfg_residual", final_residual(&sol), Bound::Below, c.solver.tol);
    density_checks(run, "", &sol.density_path);
    value_checks(run, &sol);

    // tail exponent at every step, tabulated at the written snapshots
    let window = (c.diagnostics.tail_window[0], c.diagnostics.tail_window[1]);
    let fits: Vec<TailFit> = sol
        .density_path
        .iter()
        .map(|f| tail_fit(f, window))
        .collect::<Result<_, _>>()?;
    let theta_gap = fits
        .iter()
        .map(|fit| (fit.theta_hat / c.model.theta - 1.0).abs())
        .fold(0.0, f64::max);
    run.check("tail_exponent_gap", theta_gap, Bound::AtMost, c.diagnostics.theta_tol);
    let idx = thin_indices(times.len(), c.output.max_snapshots);
    let rows: Vec<Vec<f64>> = idx
        .iter()
        .map(|&k| vec![times[k], fits[k].theta_hat, fits[k].k_hat, fits[k].r_squared])
        .collect();
    let path = run.file("tail_fits.csv");
    write_table_csv(&path, &["t", "theta_hat", "k_hat", "r_squared"], &rows)?;
    run.result("tail_fits", idx.iter().map(|&k| (times[k], fits[k])).collect::<Vec<_>>());

    // growth of Y against theta_hat * int alpha(S) f on the same window
    let t_final = time.t_final();
    let growth_window = (
        c.diagnostics.growth_window[0] * t_final,
        c.diagnostics.growth_window[1] * t_final,
    );
    let growth = fit_growth_rate(&times, &sol.production_series, growth_window)?;
    let mut profile_gammas = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        if t < growth_window.0 || t > growth_window.1 {
            continue;
        }
        let f = &sol.density_path[k];
        let gamma = gamma_from_profile(
            f.values(),
            sol.strategy_path[k].values(),
            &tech,
            fits[k].theta_hat,
            &mesh,
        )?;
        profile_gammas.push((t, gamma));
    }
    let gamma_gap = profile_gammas
        .iter()
        .map(|(_, g)| (growth.gamma_hat / g - 1.0).abs())
        .fold(0.0, f64::max);
    run.check("growth_rate_gap", gamma_gap, Bound::AtMost, c.diagnostics.gamma_tol);
    run.result("growth_fit", growth);
    run.result("profile_gamma", profile_gammas);
    Ok(())
}

fn dirac(run: &mut Run) -> Step {
    let c = run.config;
    let d = &c.dirac;
    let mesh = dynamics_mesh(c)?;
    let time = c.time_axis();
    let times = time.times();
    let values = mesh
        .nodes()
        .iter()
        .map(|&z| if z <= d.support_max { d.level } else { 0.0 })
        .collect();
    let f0 = DensityField::new(mesh.clone(), values)?.renormalized(1.0)?;
    let alpha: Vec<f64> = mesh.nodes().iter().map(|z| (1.0 - z).max(0.0)).collect();
    let integrator = c.solver.integrator;
    let (path0, path1) = std::thread::scope(|scope| {
        let run_beta = |beta: f64| {
            let (f0, alpha, time) = (&f0, &alpha, &time);
            scope.spawn(move || simulate_density(f0, alpha, beta, time, integrator))
        };
        let h0 = run_beta(0.0);
        let h1 = run_beta(1.0);
        (
            h0.join().expect("beta = 0 worker panicked"),
            h1.join().expect("beta = 1 worker panicked"),
        )
    });
    let (path0, path1) = (path0?, path1?);

    let idx = thin_indices(times.len(), c.output.max_snapshots);
    let log_x = c.mesh.spacing == Spacing::Logarithmic;
    for (name, path) in [("density_beta0", &path0), ("density_beta1", &path1)] {
        let file = run.file(&format!("{name}.csv"));
        write_density_csv(&file, &times, path, &idx)?;
        run.gnuplot(&format!("{name}.gp"), gnuplot_snapshots(&format!("{name}.csv"), 3, "f", log_x))?;
    }
    let m0 = dirac_metrics(&path0, &times, d.support_max, d.eps_cells)?;
    let m1 = dirac_metrics(&path1, &times, d.support_max, d.eps_cells)?;
    density_checks(run, "beta0_", &path0);
    density_checks(run, "beta1_", &path1);
    run.check("beta0_final_tail_mass", m0.final_tail_mass, Bound::Above, DIRAC_TAIL_TARGET);
    run.check("beta1_final_tail_mass", m1.final_tail_mass, Bound::Above, DIRAC_TAIL_TARGET);
    let lead = match (m0.concentration_time, m1.concentration_time) {
        (Some(t0), Some(t1)) => t1 - t0,
        _ => f64::NAN,
    };
    run.check("concentration_time_lead", lead, Bound::Below, 0.0);
    run.result("beta0", m0);
    run.result("beta1", m1);
    Ok(())
}

fn perturbation(run: &mut Run) -> Step {
    let c = run.config;
    let p = &c.perturbation;
    let mesh = dynamics_mesh(c)?;
    let time = c.time_axis();
    let times = time.times();
    let tech = c.tech();
    let options = mfg_options(c);
    let f0 = frechet_initial_density(mesh, c.model.k, c.model.theta)?;
    let perturbed = perturb_density(&f0, p.amplitude, p.freq, (p.window[0], p.window[1]))?;
    let (a, b) = std::thread::scope(|scope| {
        let solve = |f: &DensityField| {
            let (f, tech, time, options) = (f.clone(), &tech, &time, &options);
            scope.spawn(move || solve_mfg(&f, tech, time, options))
        };
        let ha = solve(&f0);
        let hb = solve(&perturbed.density);
        (
            ha.join().expect("reference worker panicked"),
            hb.join().expect("perturbed worker panicked"),
        )
    });
    let (a, b) = (a?, b?);
    run.converged &= a.converged && b.converged;

    let path = run.file("production_unperturbed.csv");
    write_production_csv(&path, &times, &a.production_series)?;
    let path = run.file("production_perturbed.csv");
    write_production_csv(&path, &times, &b.production_series)?;
    let rows: Vec<Vec<f64>> = times
        .iter()
        .zip(a.production_series.iter().zip(&b.production_series))
        .map(|(&t, (&ya, &yb))| vec![t, ya, yb, ((yb - ya) / ya).abs()])
        .collect();
    let path = run.file("deviation.csv");
    write_table_csv(&path, &["t", "Y_unperturbed", "Y_perturbed", "relative_deviation"], &rows)?;
    run.gnuplot("production_unperturbed.gp", gnuplot_series("production_unperturbed.csv", "Y", true))?;
    run.gnuplot("production_perturbed.gp", gnuplot_series("production_perturbed.csv", "Y", true))?;

    let deviation = relative_deviation(&a.production_series, &b.production_series, p.terminal_fraction)?;
    run.check("unperturbed_mfg_residual", final_residual(&a), Bound::Below, c.solver.tol);
    run.check("perturbed_mfg_residual", final_residual(&b), Bound::Below, c.solver.tol);
    density_checks(run, "unperturbed_", &a.density_path);
    density_checks(run, "perturbed_", &b.density_path);
    run.check("deviation_core", deviation.core, Bound::AtMost, p.max_deviation);
    run.result("deviation", deviation);
    run.result("raw_mass_change", perturbed.raw_mass_change);
    run.result("renormalized", perturbed.renormalized);
    run.result("unperturbed_mfg", report(&a));
    run.result("perturbed_mfg", report(&b));
    Ok(())
}

#[derive(Serialize)]
struct BgpHeader<'a> {
    gamma: f64,
    theta: f64,
    k: f64,
    r: f64,
    sigma: SigmaRule,
    converged: bool,
    iterations: usize,
    gamma_history: &'a [f64],
}

fn bgp(run: &mut Run) -> Step {
    let c = run.config;
    let b = &c.bgp;
    let mesh = Arc::new(build_mesh(Spacing::Logarithmic, b.x_min, b.x_max, b.n)?);
    let theta = c.model.theta;
    let (profile, tech, sigma) = match c.experiment {
        Experiment::BgpGeneral => {
            let tech = c.tech();
            let options = GeneralOptions {
                unit_head_end: b.unit_head_end,
                tol: b.tol,
                max_iter: b.max_iter,
                ..GeneralOptions::default()
            };
            let profile = bgp_general(b.sigma, &tech, theta, mesh.clone(), &options)?;
            (profile, tech, b.sigma)
        }
        _ => {
            let profile = bgp_constant_alpha(c.model.alpha0, theta, c.model.k, c.model.r, mesh.clone())?;
            let tech = LearningTech::ConstantRate { alpha0: c.model.alpha0 };
            (profile, tech, SigmaRule::Unit)
        }
    };
    let path = run.file("bgp.csv");
    write_bgp_csv(&path, &profile)?;
    let header = BgpHeader {
        gamma: profile.gamma,
        theta,
        k: profile.k_tail,
        r: c.model.r,
        sigma,
        converged: profile.converged,
        iterations: profile.iterations,
        gamma_history: &profile.gamma_history,
    };
    let path = run.file("bgp_header.json");
    write_json(&path, &header)?;
    run.gnuplot("bgp.gp", gnuplot_bgp("bgp.csv"))?;
    run.result("bgp", &header);

    let cdf_drop = profile.cdf.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    run.check("cdf_drop", cdf_drop, Bound::AtMost, 0.0);
    let quadrature = gamma_from_profile(&profile.density, &profile.sigma, &tech, theta, &mesh)?;
    run.check(
        "gamma_quadrature_gap",
        (quadrature / profile.gamma - 1.0).abs(),
        Bound::AtMost,
        GAMMA_QUADRATURE_TOL,
    );
    match c.experiment {
        Experiment::BgpGeneral => general_checks(run, &profile, &tech),
        _ => constant_checks(run, &profile),
    }
}

fn constant_checks(run: &mut Run, profile: &BgpProfile) -> Step {
    let c = run.config;
    let (alpha0, theta, k) = (c.model.alpha0, c.model.theta, c.model.k);
    run.check("gamma_exact_gap", (profile.gamma - theta * alpha0).abs(), Bound::AtMost, 0.0);
    let closed = profile
        .mesh
        .nodes()
        .iter()
        .zip(&profile.cdf)
        .map(|(&x, &p)| (p - 1.0 / (1.0 + k * x.powf(-1.0 / theta))).abs())
        .fold(0.0, f64::max);
    run.check("cdf_closed_form_gap", closed, Bound::AtMost, CLOSED_FORM_TOL);
    let v = profile.value.as_deref().unwrap_or_default();
    let residual = v_residual(v, &profile.density, profile.gamma, c.model.r, alpha0, &profile.mesh)?;
    run.check("value_residual", residual, Bound::AtMost, V_RESIDUAL_TOL);
    let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let neg = v.iter().fold(0.0f64, |m, x| m.max(0.0 - x)) / scale;
    let drop = v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max) / scale;
    run.check("value_negative_part", neg, Bound::AtMost, VALUE_CHECK_TOL);
    run.check("value_drop_in_x", drop, Bound::AtMost, VALUE_CHECK_TOL);
    Ok(())
}

fn general_checks(run: &mut Run, profile: &BgpProfile, tech: &LearningTech) -> Step {
    let c = run.config;
    let theta = c.model.theta;
    let low = match c.bgp.sigma {
        SigmaRule::Unit => 1.0,
        SigmaRule::Step { low, .. } => low,
    };
    run.check("gamma_lower_bracket", profile.gamma, Bound::AtLeast, theta * tech.rate(low, 0));
    run.check("gamma_upper_bracket", profile.gamma, Bound::AtMost, theta * tech.rate(1.0, 0));
    run.check("iterations", profile.iterations as f64, Bound::AtMost, c.bgp.max_iter as f64);
    run.check("cdf_residual", phi_residual(profile, tech)?, Bound::AtMost, PHI_RESIDUAL_TOL);
    Ok(())
}

/// Bytes of the listed output files, for comparing runs.
pub fn read_outputs(dir: &Path, files: &[String]) -> io::Result<Vec<(String, Vec<u8>)>> {
    files
        .iter()
        .map(|name| Ok((name.clone(), std::fs::read(dir.join(name))?)))
        .collect()
}
