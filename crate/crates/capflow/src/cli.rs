//! Command line front end.
//!
//! Subcommands: `stationary`, `spectrum`, `nullspace`, `scan`, `homotopy`,
//! `evolve`. Configuration comes from an optional JSON file (`--config`)
//! overridden by `--key value` flags; results land as CSV/JSON files under
//! the output directory, with a JSON summary on stdout. Identical
//! configurations produce byte-identical outputs.
//!
//! Exit codes: 0 success, 2 infeasible parameters or bad configuration,
//! 3 eigensolver failure, 4 flow termination (step rejected or contact
//! angle degenerate), 5 scan with no feasible cell.

use crate::cap::{cap_from_angle, feasible_alpha_range, feasible_r_range, make_cap, ssc_reference, CapParams};
use crate::chart::Chart;
use crate::error::Error;
use crate::flow::{
    decay_rate, eigenfunction_perturbation, evolve, random_smooth_perturbation, DecayFit,
    FlowContext, FlowKind, FlowStatus, Scheme, Trajectory,
};
use crate::grid::{Field, Grid};
use crate::report;
use crate::stability::{
    analytic_nullspace, apply_a0, assemble_mode, halfsphere_reference, homotopy_spectrum,
    scan_cell, solve_mode, spectrum, RadiusRule, ScanCell, SpectrumReport, StabilityMap,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_FLOW: i32 = 4;
pub const EXIT_SCAN: i32 = 5;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Auto(String),
    Value(f64),
}

impl Default for DtSpec {
    fn default() -> Self {
        DtSpec::Auto("auto".into())
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    #[default]
    None,
    Random,
    Eigen,
    Mode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    pub seed: Option<u64>,
    pub k: usize,
    pub index: usize,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec { kind: PerturbationKind::None, amplitude: 0.01, seed: None, k: 2, index: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub r: Option<f64>,
    pub alpha: Option<f64>,
    pub n_phi: usize,
    pub n_theta: usize,
    pub k_max: usize,
    pub l_max: usize,
    pub t_end: f64,
    pub dt: DtSpec,
    pub scheme: String,
    pub sample_every: usize,
    pub linear: bool,
    pub perturbation: PerturbationSpec,
    pub a_list: Vec<f64>,
    pub b_list: Vec<f64>,
    /// "mid" or a fixed radius.
    pub r_rule: serde_json::Value,
    pub d_values: Vec<f64>,
    pub out_dir: PathBuf,
    pub reference: bool,
    /// Tail fraction for the decay fit.
    pub window: f64,
    pub cfl: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            a: 1.0,
            b: 0.5,
            r: None,
            alpha: None,
            n_phi: 32,
            n_theta: 64,
            k_max: 4,
            l_max: 12,
            t_end: 1.0,
            dt: DtSpec::default(),
            scheme: "rk4".into(),
            sample_every: 50,
            linear: false,
            perturbation: PerturbationSpec::default(),
            a_list: vec![],
            b_list: vec![],
            r_rule: serde_json::Value::String("mid".into()),
            d_values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            out_dir: PathBuf::from("out"),
            reference: false,
            window: 0.4,
            cfl: 0.2,
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number '{t}': {e}"))))
        .collect()
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, Error> {
        let mut cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        for (key, value) in overrides {
            cfg.apply_override(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_override(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let bad = |e: std::num::ParseFloatError| Error::Config(format!("--{key} {value}: {e}"));
        let bad_i = |e: std::num::ParseIntError| Error::Config(format!("--{key} {value}: {e}"));
        match key {
            "a" => self.a = value.parse().map_err(bad)?,
            "b" => self.b = value.parse().map_err(bad)?,
            "r" => {
                self.r = Some(value.parse().map_err(bad)?);
                self.alpha = None;
            }
            "alpha" => {
                self.alpha = Some(value.parse().map_err(bad)?);
                self.r = None;
            }
            "n-phi" => self.n_phi = value.parse().map_err(bad_i)?,
            "n-theta" => self.n_theta = value.parse().map_err(bad_i)?,
            "k-max" => self.k_max = value.parse().map_err(bad_i)?,
            "l-max" => self.l_max = value.parse().map_err(bad_i)?,
            "t-end" => self.t_end = value.parse().map_err(bad)?,
            "dt" => {
                self.dt = if value == "auto" {
                    DtSpec::Auto("auto".into())
                } else {
                    DtSpec::Value(value.parse().map_err(bad)?)
                }
            }
            "scheme" => self.scheme = value.into(),
            "sample-every" => self.sample_every = value.parse().map_err(bad_i)?,
            "linear" => self.linear = value.parse().map_err(|e| Error::Config(format!("--linear {value}: {e}")))?,
            "perturbation" => {
                self.perturbation.kind = match value {
                    "none" => PerturbationKind::None,
                    "random" => PerturbationKind::Random,
                    "eigen" => PerturbationKind::Eigen,
                    "mode" => PerturbationKind::Mode,
                    other => return Err(Error::Config(format!("unknown perturbation '{other}'"))),
                }
            }
            "amplitude" => self.perturbation.amplitude = value.parse().map_err(bad)?,
            "seed" => self.perturbation.seed = Some(value.parse().map_err(bad_i)?),
            "mode-k" => self.perturbation.k = value.parse().map_err(bad_i)?,
            "mode-index" => self.perturbation.index = value.parse().map_err(bad_i)?,
            "a-list" => self.a_list = parse_list(value)?,
            "b-list" => self.b_list = parse_list(value)?,
            "r-rule" => {
                self.r_rule = if value == "mid" {
                    serde_json::Value::String("mid".into())
                } else {
                    json!(value.parse::<f64>().map_err(bad)?)
                }
            }
            "d-values" => self.d_values = parse_list(value)?,
            "out-dir" => self.out_dir = PathBuf::from(value),
            "reference" => self.reference = value.parse().map_err(|e| Error::Config(format!("--reference {value}: {e}")))?,
            "window" => self.window = value.parse().map_err(bad)?,
            "cfl" => self.cfl = value.parse().map_err(bad)?,
            other => return Err(Error::Config(format!("unknown option --{other}"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), Error> {
        if self.r.is_some() && self.alpha.is_some() {
            return Err(Error::Config("give exactly one of r and alpha".into()));
        }
        if self.perturbation.kind == PerturbationKind::Random && self.perturbation.seed.is_none() {
            return Err(Error::Config("random perturbations require a seed".into()));
        }
        Ok(())
    }

    pub fn cap(&self) -> Result<CapParams, Error> {
        match (self.r, self.alpha) {
            (Some(r), None) => make_cap(self.a, self.b, r),
            (None, Some(alpha)) => cap_from_angle(self.a, self.b, alpha),
            (None, None) => Err(Error::Config("give one of r and alpha".into())),
            _ => unreachable!(),
        }
    }

    pub fn radius_rule(&self) -> Result<RadiusRule, Error> {
        match &self.r_rule {
            serde_json::Value::String(s) if s == "mid" => Ok(RadiusRule::MidInterval),
            serde_json::Value::Number(n) => Ok(RadiusRule::Fixed(n.as_f64().unwrap())),
            other => Err(Error::Config(format!("bad r_rule {other}"))),
        }
    }

    pub fn scheme(&self) -> Result<Scheme, Error> {
        match self.scheme.as_str() {
            "rk4" => Ok(Scheme::Rk4),
            "euler" => Ok(Scheme::Euler),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Thread cap for scan parallelism (`CAPFLOW_THREADS`, default: available
/// cores).
fn thread_cap() -> usize {
    std::env::var("CAPFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Deterministic parallel map: results keep input order.
fn parallel_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let threads = thread_cap().min(items.len().max(1));
    if threads <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let mut slots: Vec<Option<U>> = (0..n).map(|_| None).collect();
    let work: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(work);
    let slots_ref = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                match item {
                    Some((i, x)) => {
                        let y = f(x);
                        slots_ref.lock().unwrap()[i] = Some(y);
                    }
                    None => break,
                }
            });
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn emit(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).unwrap());
}

fn fail(code: i32, kind: &str, reason: String) -> i32 {
    emit(&json!({ "error": kind, "reason": reason }));
    code
}

fn error_exit(e: &Error) -> i32 {
    match e {
        Error::NoStationaryCap { reason } => fail(EXIT_INFEASIBLE, "no_stationary_cap", reason.clone()),
        Error::NotHalfsphere { cos_alpha } => fail(
            EXIT_INFEASIBLE,
            "not_halfsphere",
            format!("cos(alpha) = {cos_alpha}, need a half-sphere configuration"),
        ),
        Error::Config(reason) | Error::InvalidDiscretization { reason } => {
            fail(EXIT_INFEASIBLE, "config", reason.clone())
        }
        Error::SolverFailure { reason } => fail(EXIT_SOLVER, "solver_failure", reason.clone()),
        Error::ComplexSpectrum { max_im, radius } => fail(
            EXIT_SOLVER,
            "complex_spectrum",
            format!("max |Im| {max_im} vs radius {radius}"),
        ),
        Error::AngleDegenerate { margin } => {
            fail(EXIT_FLOW, "angle_degenerate", format!("margin {margin}"))
        }
        Error::StepRejected { t, reason } => fail(EXIT_FLOW, "step_rejected", format!("t = {t}: {reason}")),
        other => fail(EXIT_INFEASIBLE, "error", other.to_string()),
    }
}

#[derive(Serialize)]
struct IntervalReport {
    lo: f64,
    /// `None` encodes an interval unbounded above.
    hi: Option<f64>,
}

fn interval_report(i: crate::cap::Interval) -> IntervalReport {
    IntervalReport { lo: i.lo, hi: i.hi.is_finite().then_some(i.hi) }
}

fn cmd_stationary(cfg: &RunConfig) -> Result<i32, Error> {
    let cap = cfg.cap()?;
    let refq = ssc_reference(&cap);
    let summary = json!({
        "cap": cap,
        "reference": refq,
        "r_range": interval_report(feasible_r_range(cfg.a, cfg.b)?),
        "alpha_range": interval_report(feasible_alpha_range(cfg.a, cfg.b)?),
        "c_crit_margin": cap.b - cap.c_crit,
        "theta_max": cap.theta_max(),
    });
    emit(&summary);
    Ok(EXIT_OK)
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<i32, Error> {
    let cap = cfg.cap()?;
    let rep: SpectrumReport = spectrum(&cap, cfg.k_max, cfg.n_theta)?;
    let csv_path = write_file(&cfg.out_dir, "spectrum.csv", &report::spectrum_csv(&rep))?;
    let json_path = write_file(
        &cfg.out_dir,
        "spectrum.json",
        &serde_json::to_string_pretty(&rep).unwrap(),
    )?;
    let mut files = vec![csv_path, json_path];
    if cfg.reference {
        let analytic = halfsphere_reference(&cap, cfg.k_max, cfg.l_max)?;
        let computed = homotopy_spectrum(&cap, &[0.0], cfg.k_max, cfg.n_theta)?;
        let table: Vec<Vec<f64>> = computed.lambdas.iter().map(|per_d| per_d[0].clone()).collect();
        files.push(write_file(
            &cfg.out_dir,
            "spectrum_reference.csv",
            &report::reference_csv(&table, &analytic),
        )?);
    }
    emit(&json!({
        "nullspace_dim": rep.nullspace_dim,
        "min_positive": rep.min_positive,
        "has_negative": rep.has_negative,
        "tol_null": rep.tol_null,
        "files": files,
    }));
    Ok(EXIT_OK)
}

fn cmd_nullspace(cfg: &RunConfig) -> Result<i32, Error> {
    let cap = cfg.cap()?;
    let mut csv = String::from("n_phi,n_theta,field,residual_inf\n");
    let mut residuals = Vec::new();
    for scale in [1usize, 2] {
        let grid = Grid::for_cap(&cap, cfg.n_phi * scale, cfg.n_theta * scale)?;
        let basis = analytic_nullspace(&cap, &grid);
        let mut row = Vec::new();
        for (name, v) in [("v0", &basis.v0), ("v1", &basis.v1), ("v2", &basis.v2)] {
            let res = apply_a0(v, &cap, &grid).max_abs();
            csv.push_str(&format!(
                "{},{},{},{}\n",
                cfg.n_phi * scale,
                cfg.n_theta * scale,
                name,
                report::fmt_f64(res)
            ));
            row.push(res);
        }
        residuals.push(row);
    }
    let ratios: Vec<f64> = residuals[0].iter().zip(&residuals[1]).map(|(c, f)| c / f).collect();
    let path = write_file(&cfg.out_dir, "nullspace.csv", &csv)?;
    emit(&json!({
        "degenerate_branch": cap.degenerate_branch(),
        "coarse_residuals": residuals[0],
        "fine_residuals": residuals[1],
        "refinement_ratios": ratios,
        "files": [path],
    }));
    Ok(EXIT_OK)
}

fn cmd_scan(cfg: &RunConfig) -> Result<i32, Error> {
    if cfg.a_list.is_empty() || cfg.b_list.is_empty() {
        return Err(Error::Config("scan needs a_list and b_list".into()));
    }
    let rule = cfg.radius_rule()?;
    let mut pairs = Vec::new();
    for &a in &cfg.a_list {
        for &b in &cfg.b_list {
            pairs.push((a, b));
        }
    }
    let (k_max, n_theta) = (cfg.k_max, cfg.n_theta);
    let cells: Vec<ScanCell> =
        parallel_map(pairs, move |(a, b)| scan_cell(a, b, rule, k_max, n_theta));
    let map = StabilityMap { k_max, n_theta, cells };
    let csv_path = write_file(&cfg.out_dir, "scan.csv", &report::scan_csv(&map))?;
    let json_path = write_file(&cfg.out_dir, "scan.json", &serde_json::to_string_pretty(&map).unwrap())?;
    let feasible = map
        .cells
        .iter()
        .filter(|c| matches!(c.outcome, crate::stability::CellOutcome::Feasible { .. }))
        .count();
    emit(&json!({
        "cells": map.cells.len(),
        "feasible": feasible,
        "files": [csv_path, json_path],
    }));
    Ok(if map.all_failed() { EXIT_SCAN } else { EXIT_OK })
}

fn cmd_homotopy(cfg: &RunConfig) -> Result<i32, Error> {
    let cap = cfg.cap()?;
    let mut d_values = cfg.d_values.clone();
    d_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let curves = homotopy_spectrum(&cap, &d_values, cfg.k_max, cfg.n_theta)?;
    let path = write_file(&cfg.out_dir, "homotopy.csv", &report::homotopy_csv(&curves, 8))?;
    // endpoint diagnostics: d = 0 against the analytic half-sphere table
    let analytic = halfsphere_reference(&cap, cfg.k_max, cfg.l_max)?;
    let mut worst = 0.0f64;
    if d_values.first() == Some(&0.0) {
        for (k, exact) in analytic.iter().enumerate() {
            for (i, lam) in exact.iter().take(4).enumerate() {
                if i < curves.lambdas[k][0].len() {
                    worst = worst.max((curves.lambdas[k][0][i] - lam).abs() / lam.abs().max(1.0));
                }
            }
        }
    }
    emit(&json!({
        "d_values": d_values,
        "d0_reference_rel_error": worst,
        "files": [path],
    }));
    Ok(EXIT_OK)
}

fn evolve_summary(cfg: &RunConfig, cap: &CapParams, traj: &Trajectory) -> serde_json::Value {
    let status = match &traj.status {
        FlowStatus::Completed => "completed".to_string(),
        FlowStatus::Stationary => "stationary".to_string(),
        FlowStatus::Rejected { t, reason } => format!("rejected at t = {t}: {reason}"),
    };
    let decay: serde_json::Value = if traj.status == FlowStatus::Stationary {
        json!("insufficient_decay")
    } else {
        match decay_rate(traj, cfg.window) {
            Ok(DecayFit { rate, r_squared }) => json!({ "rate": rate, "r_squared": r_squared }),
            Err(Error::InsufficientDecay) => json!("insufficient_decay"),
            Err(e) => json!({ "unavailable": e.to_string() }),
        }
    };
    let fitted = traj.samples.last().map(|s| {
        let r_fit = (s.fit_radius * s.fit_radius - s.fit_center[2] * s.fit_center[2])
            .max(0.0)
            .sqrt();
        let cos_alpha_fit = s.fit_center[2] / s.fit_radius;
        json!({
            "center": s.fit_center,
            "R": s.fit_radius,
            "r": r_fit,
            "cos_alpha": cos_alpha_fit,
            "residual": s.fit_residual,
            "angle_condition_gap": cos_alpha_fit - (cap.b / r_fit - cap.a),
        })
    });
    json!({
        "status": status,
        "decay": decay,
        "fitted": fitted,
        "dt": traj.dt,
        "steps": traj.steps,
        "max_energy_increase": traj.max_energy_increase,
        "samples": traj.samples.len(),
    })
}

fn cmd_evolve(cfg: &RunConfig) -> Result<i32, Error> {
    let cap = cfg.cap()?;
    let grid = Grid::for_cap(&cap, cfg.n_phi, cfg.n_theta)?;
    let ctx = {
        let mut c = FlowContext::new(Chart::new(cap.clone()), grid.clone());
        c.c_cfl = cfg.cfl;
        c
    };
    let initial = match cfg.perturbation.kind {
        PerturbationKind::None => Field::zeros(&grid),
        PerturbationKind::Random => random_smooth_perturbation(
            cfg.perturbation.seed.unwrap(),
            cfg.perturbation.amplitude,
            &grid,
        ),
        PerturbationKind::Eigen => {
            let sol = solve_mode(&assemble_mode(cfg.perturbation.k, &cap, 2 * cfg.n_theta)?)?;
            eigenfunction_perturbation(&sol, cfg.perturbation.index, cfg.perturbation.amplitude, &grid)
        }
        PerturbationKind::Mode => {
            let k = cfg.perturbation.k as f64;
            let amp = cfg.perturbation.amplitude;
            Field::from_fn(&grid, |phi, theta| amp * theta.sin() * (k * phi).cos())
        }
    };
    let dt = match cfg.dt {
        DtSpec::Value(v) => v,
        DtSpec::Auto(_) => ctx.dt_stability_bound(),
    };
    let kind = if cfg.linear { FlowKind::Linear } else { FlowKind::Nonlinear };
    let traj = evolve(initial, &ctx, kind, cfg.scheme()?, cfg.t_end, dt, cfg.sample_every)?;
    let csv_path = write_file(&cfg.out_dir, "trajectory.csv", &report::trajectory_csv(&traj))?;
    let mut summary = evolve_summary(cfg, &cap, &traj);
    summary["files"] = json!([csv_path]);
    let json_path = write_file(&cfg.out_dir, "summary.json", &serde_json::to_string_pretty(&summary).unwrap())?;
    summary["files"] = json!([csv_path, json_path]);
    emit(&summary);
    Ok(match traj.status {
        FlowStatus::Rejected { .. } => EXIT_FLOW,
        _ => EXIT_OK,
    })
}

const USAGE: &str = "\
capflow - volume-preserving mean curvature flow of spherical caps with line tension

USAGE:
  capflow <COMMAND> [--config <file>] [--key value]...

COMMANDS:
  stationary   stationary-cap parameters, reference quantities, feasibility
  spectrum     eigenvalues of the linearized operator per azimuthal mode
  nullspace    residuals of the analytic nullspace fields at two resolutions
  scan         (a, b) parameter sweep with stability classification
  homotopy     eigenvalue curves of the half-sphere boundary homotopy
  evolve       time integration of the nonlinear or linearized flow

COMMON OPTIONS (flags override the config file):
  --a X --b X            energy coefficients
  --r X | --alpha X      contact radius or contact angle (exactly one)
  --n-phi N --n-theta N  grid resolution
  --k-max N --l-max N    azimuthal and reference mode cutoffs
  --out-dir DIR          output directory (default: out)

EVOLVE OPTIONS:
  --t-end T --dt X|auto --scheme rk4|euler --sample-every N --linear BOOL
  --perturbation none|random|eigen|mode --amplitude X --seed N
  --mode-k K --mode-index I --window F --cfl F

SCAN / HOMOTOPY OPTIONS:
  --a-list 0,0.5,1 --b-list 0.2,0.5 --r-rule mid|X --d-values 0,0.5,1

Environment: CAPFLOW_THREADS caps scan parallelism.
";

/// Entry point; returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return EXIT_INFEASIBLE;
    };
    if command == "--help" || command == "-h" || command == "help" {
        print!("{USAGE}");
        return EXIT_OK;
    }

    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            eprintln!("unexpected argument '{arg}'");
            eprint!("{USAGE}");
            return EXIT_INFEASIBLE;
        };
        let Some(value) = it.next() else {
            eprintln!("--{key} needs a value");
            return EXIT_INFEASIBLE;
        };
        if key == "config" {
            config_path = Some(PathBuf::from(value));
        } else {
            overrides.push((key.to_string(), value.to_string()));
        }
    }

    let cfg = match RunConfig::load(config_path.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => return error_exit(&e),
    };
    let result = match command.as_str() {
        "stationary" => cmd_stationary(&cfg),
        "spectrum" => cmd_spectrum(&cfg),
        "nullspace" => cmd_nullspace(&cfg),
        "scan" => cmd_scan(&cfg),
        "homotopy" => cmd_homotopy(&cfg),
        "evolve" => cmd_evolve(&cfg),
        other => {
            eprintln!("unknown command '{other}'");
            eprint!("{USAGE}");
            return EXIT_INFEASIBLE;
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => error_exit(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_precedence_and_validation() {
        let cfg = RunConfig::load(
            None,
            &[("a".into(), "0.5".into()), ("b".into(), "0.3".into()), ("r".into(), "0.4".into())],
        )
        .unwrap();
        assert_eq!(cfg.a, 0.5);
        let cap = cfg.cap().unwrap();
        assert!((cap.cos_alpha - 0.25).abs() < 1e-15);

        // r and alpha are mutually exclusive, last flag wins
        let cfg = RunConfig::load(
            None,
            &[("r".into(), "0.4".into()), ("alpha".into(), "1.5".into())],
        )
        .unwrap();
        assert!(cfg.r.is_none() && cfg.alpha.is_some());

        // random perturbation without a seed is rejected
        let err = RunConfig::load(
            None,
            &[("perturbation".into(), "random".into()), ("r".into(), "0.5".into())],
        );
        assert!(err.is_err());
    }

    #[test]
    fn parallel_map_keeps_order() {
        let out = parallel_map((0..64).collect::<Vec<_>>(), |x| x * 2);
        assert_eq!(out, (0..64).map(|x| x * 2).collect::<Vec<_>>());
    }
}
