//! Time integration of the nonlinear and linearized flows.
//!
//! The nonlinear flow advances the height function by
//!
//!   d rho/dt = (H - Hbar) / <n, d_w Psi>            in the interior,
//!   d rho/dt = (a + b kappa + <n, n_D>) / <n_cont, d_w Psi>   on the trace,
//!
//! with all geometry evaluated on the current embedded surface. The
//! linearized flow is d rho/dt = -A0 rho with the same discrete operator
//! as the stability module.
//!
//! Integration is explicit (classical RK4 by default). Near the coordinate
//! pole the azimuthal diffusion stiffens like 1/sin^2(theta); stage
//! derivatives are therefore projected onto the azimuthal modes that are
//! stable at the chosen dt (a polar Fourier filter). The retained mode
//! count grows like sin(theta)/h_theta, so the projection perturbs smooth
//! fields only at O(h^2) and vanishes under refinement.

use crate::cap::CapParams;
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::stability::modes::ModeSolution;
use crate::stability::nullspace::{l2_tilde_norm, project_nullspace};
use crate::surface::{
    boundary_quantities, dot, embed, energy, enclosed_volume, mean_of_h, Embedding, Vec3,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Contact angle margin at which a run aborts: |<n, n_D>| within 1e-3 of 1
/// signals imminent detachment or flattening.
pub const ANGLE_MARGIN_LIMIT: f64 = 1e-3;

/// Azimuthal share of the RK4 real-axis stability budget.
const PHI_STABILITY_BUDGET: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Nonlinear,
    Linear,
}

/// Precomputed chart data for a flow run.
#[derive(Debug, Clone)]
pub struct FlowContext {
    pub chart: Chart,
    pub grid: Grid,
    pub c_cfl: f64,
    /// d_w Psi per node, independent of the offset.
    dpsi: Vec<Vec3>,
}

impl FlowContext {
    pub fn new(chart: Chart, grid: Grid) -> FlowContext {
        let nl = grid.n_theta + 1;
        let mut dpsi = Vec::with_capacity(grid.n_phi * nl);
        for i in 0..grid.n_phi {
            for l in 0..nl {
                let p = crate::chart::SurfacePoint { phi: grid.phi[i], theta: grid.level_theta(l) };
                dpsi.push(chart.dpsi_dw_unchecked(p));
            }
        }
        FlowContext { chart, grid, c_cfl: 0.2, dpsi }
    }

    #[inline]
    pub fn dpsi_at(&self, i: usize, level: usize) -> Vec3 {
        self.dpsi[i * (self.grid.n_theta + 1) + level]
    }

    pub fn cap(&self) -> &CapParams {
        &self.chart.cap
    }

    /// Parabolic step bound c_cfl * min over the polar diffusion term, the
    /// azimuthal term at the smallest unfiltered colatitude, and the
    /// boundary line-diffusion term with factor 1/(b sin(alpha)).
    pub fn dt_stability_bound(&self) -> f64 {
        let cap = self.cap();
        let r2 = cap.radius * cap.radius;
        let ht = self.grid.h_theta;
        let hp = self.grid.h_phi;
        let s_cut = (2.0 * ht / hp).min(1.0);
        let t_theta = r2 * ht * ht;
        let t_phi = r2 * s_cut * s_cut * hp * hp;
        let t_boundary = r2 * cap.sin_alpha * hp * hp / cap.b;
        self.c_cfl * t_theta.min(t_phi).min(t_boundary)
    }
}

/// Azimuthal mode projection applied to stage derivatives near the pole.
#[derive(Debug, Clone)]
pub struct PolarFilter {
    /// (interior level, circulant row of the Dirichlet projection).
    rings: Vec<(usize, Vec<f64>)>,
}

impl PolarFilter {
    pub fn new(ctx: &FlowContext, dt: f64) -> PolarFilter {
        let grid = &ctx.grid;
        let cap = ctx.cap();
        let n = grid.n_phi;
        let mut rings = Vec::new();
        // mode k is stable at ring theta when dt k^2 / (R sin theta)^2
        // stays inside the azimuthal budget
        let kcap = cap.radius * (PHI_STABILITY_BUDGET / dt).sqrt();
        for (j, &theta) in grid.theta.iter().enumerate() {
            let k_allowed = ((theta.sin() * kcap).floor() as usize).max(1);
            if k_allowed < n / 2 {
                rings.push((j, dirichlet_row(n, k_allowed)));
            }
        }
        PolarFilter { rings }
    }

    /// Project the interior rows of a field onto the retained modes.
    pub fn apply(&self, f: &mut Field) {
        let n = f.n_phi;
        let nt = f.n_theta;
        let mut row = vec![0.0; n];
        for (j, c) in &self.rings {
            for (i, r) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (m, cm) in c.iter().enumerate() {
                    acc += cm * f.values[((i + m) % n) * nt + j];
                }
                *acc_store(r) = acc;
            }
            for i in 0..n {
                f.values[i * nt + j] = row[i];
            }
        }
    }

    pub fn ring_count(&self) -> usize {
        self.rings.len()
    }
}

#[inline]
fn acc_store(r: &mut f64) -> &mut f64 {
    r
}

/// Circulant row of the projection onto azimuthal modes |k| <= k_allowed.
fn dirichlet_row(n: usize, k_allowed: usize) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for (m, cm) in c.iter_mut().enumerate() {
        let x = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        let mut acc = 1.0;
        for k in 1..=k_allowed {
            acc += 2.0 * (k as f64 * x).cos();
        }
        *cm = acc / n as f64;
    }
    c
}

/// Nonlinear right-hand side from an already evaluated embedding.
fn rhs_nonlinear_emb(emb: &Embedding, ctx: &FlowContext) -> Result<Field> {
    let grid = &ctx.grid;
    let cap = ctx.cap();
    let bq = boundary_quantities(emb, cap)?;
    let margin = bq
        .cos_angle
        .iter()
        .map(|c| 1.0 - c.abs())
        .fold(f64::INFINITY, f64::min);
    if margin <= ANGLE_MARGIN_LIMIT {
        return Err(Error::AngleDegenerate { margin });
    }

    let hbar = mean_of_h(emb, grid);
    let mut out = Field::zeros(grid);
    for i in 0..grid.n_phi {
        for j in 0..grid.n_theta {
            let k = emb.idx(i, j);
            let den = dot(emb.normals[k], ctx.dpsi_at(i, j));
            if den.abs() < 1e-6 {
                return Err(Error::DegenerateMetric { i_phi: i, level: j });
            }
            *out.at_mut(i, j) = (emb.hfield[k] - hbar) / den;
        }
        let den = dot(bq.conormal[i], ctx.dpsi_at(i, grid.n_theta));
        if den.abs() < 1e-6 {
            return Err(Error::DegenerateMetric { i_phi: i, level: grid.n_theta });
        }
        out.trace[i] = (cap.a + cap.b * bq.kappa[i] + bq.cos_angle[i]) / den;
    }
    Ok(out)
}

/// Time derivative of rho under the nonlinear flow.
pub fn rhs_nonlinear(rho: &Field, ctx: &FlowContext) -> Result<Field> {
    let emb = embed(&ctx.grid, rho, &ctx.chart)?;
    rhs_nonlinear_emb(&emb, ctx)
}

/// Time derivative of rho under the linearized flow: -A0 rho.
pub fn rhs_linear(rho: &Field, cap: &CapParams, grid: &Grid) -> Field {
    crate::stability::nullspace::apply_a0(rho, cap, grid).scale(-1.0)
}

fn eval_rhs(rho: &Field, ctx: &FlowContext, kind: FlowKind) -> Result<Field> {
    match kind {
        FlowKind::Nonlinear => rhs_nonlinear(rho, ctx),
        FlowKind::Linear => Ok(rhs_linear(rho, ctx.cap(), &ctx.grid)),
    }
}

/// Flow state at one instant; the embedding is cached lazily (always
/// present for nonlinear runs).
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub rho: Field,
    pub embedding: Option<Embedding>,
}

impl FlowState {
    pub fn new(t: f64, rho: Field) -> FlowState {
        FlowState { t, rho, embedding: None }
    }

    pub fn ensure_embedding(&mut self, ctx: &FlowContext) -> Result<&Embedding> {
        if self.embedding.is_none() {
            self.embedding = Some(embed(&ctx.grid, &self.rho, &ctx.chart)?);
        }
        Ok(self.embedding.as_ref().unwrap())
    }
}

/// Advance one step; stage derivatives are passed through the polar filter.
pub fn step(
    state: &mut FlowState,
    dt: f64,
    ctx: &FlowContext,
    kind: FlowKind,
    scheme: Scheme,
    filter: &PolarFilter,
) -> Result<FlowState> {
    let t = state.t;
    let wrap = |e: Error| match e {
        Error::StepRejected { .. } => e,
        other => Error::StepRejected { t, reason: other.to_string() },
    };

    let stage = |rho: &Field| -> Result<Field> {
        let mut k = eval_rhs(rho, ctx, kind)?;
        filter.apply(&mut k);
        Ok(k)
    };

    let rho_new = match scheme {
        Scheme::Euler => {
            let k1 = stage(&state.rho).map_err(wrap)?;
            state.rho.axpy(dt, &k1)
        }
        Scheme::Rk4 => {
            let k1 = stage(&state.rho).map_err(wrap)?;
            let k2 = stage(&state.rho.axpy(0.5 * dt, &k1)).map_err(wrap)?;
            let k3 = stage(&state.rho.axpy(0.5 * dt, &k2)).map_err(wrap)?;
            let k4 = stage(&state.rho.axpy(dt, &k3)).map_err(wrap)?;
            let mut incr = k1;
            incr = incr.axpy(2.0, &k2).axpy(2.0, &k3).axpy(1.0, &k4);
            state.rho.axpy(dt / 6.0, &incr)
        }
    };

    if rho_new.max_abs() >= ctx.chart.epsilon0 {
        return Err(Error::StepRejected {
            t,
            reason: format!("max |rho| = {} left the chart", rho_new.max_abs()),
        });
    }
    Ok(FlowState::new(t + dt, rho_new))
}

/// Per-sample diagnostics of a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    pub volume: f64,
    pub energy: f64,
    pub max_rho: f64,
    pub l2_rho: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    /// Weighted norm of rho minus its nullspace projection.
    pub remainder: f64,
    pub fit_residual: f64,
    #[serde(rename = "fit_R")]
    pub fit_radius: f64,
    pub fit_center: Vec3,
    /// min over the contact curve of 1 - |<n, n_D>|.
    pub angle_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    /// Started from the zero field and never left the discrete equilibrium.
    Stationary,
    Rejected { t: f64, reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: FlowStatus,
    pub dt: f64,
    pub steps: usize,
    /// Largest per-step energy increase relative to |E| (nonlinear runs).
    pub max_energy_increase: f64,
}

fn make_sample(state: &mut FlowState, ctx: &FlowContext) -> Result<Sample> {
    let cap = ctx.cap().clone();
    let grid = ctx.grid.clone();
    let emb = state.ensure_embedding(ctx)?;
    let volume = enclosed_volume(emb, &grid, &cap)?;
    let en = energy(emb, &grid, cap.a, cap.b);
    let bq = boundary_quantities(emb, &cap)?;
    let angle_margin = bq
        .cos_angle
        .iter()
        .map(|c| 1.0 - c.abs())
        .fold(f64::INFINITY, f64::min);
    let fit = fit_sphere(emb)?;
    let (a0, a1, a2, remainder) = project_nullspace(&state.rho, &cap, &grid);
    Ok(Sample {
        t: state.t,
        volume,
        energy: en,
        max_rho: state.rho.max_abs(),
        l2_rho: l2_tilde_norm(&state.rho, &cap, &grid),
        a0,
        a1,
        a2,
        remainder: l2_tilde_norm(&remainder, &cap, &grid),
        fit_residual: fit.residual,
        fit_radius: fit.radius,
        fit_center: fit.center,
        angle_margin,
    })
}

/// Integrate to t_end, sampling diagnostics every `sample_every` steps.
/// Step rejection terminates the run early with the cause in the status.
pub fn evolve(
    initial: Field,
    ctx: &FlowContext,
    kind: FlowKind,
    scheme: Scheme,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    assert!(t_end > 0.0 && dt > 0.0 && sample_every > 0);
    let started_at_zero = initial.max_abs() == 0.0;
    let n_steps = (t_end / dt).ceil() as usize;
    let dt = t_end / n_steps as f64;
    let filter = PolarFilter::new(ctx, dt);

    let mut state = FlowState::new(0.0, initial);
    let mut samples = vec![make_sample(&mut state, ctx)?];
    let mut prev_energy = samples[0].energy;
    let mut max_energy_increase = 0.0f64;
    let mut status = FlowStatus::Completed;
    let mut steps = 0;

    for s in 1..=n_steps {
        match step(&mut state, dt, ctx, kind, scheme, &filter) {
            Ok(mut next) => {
                steps = s;
                if kind == FlowKind::Nonlinear {
                    let emb = next.ensure_embedding(ctx)?;
                    let en = energy(emb, &ctx.grid, ctx.cap().a, ctx.cap().b);
                    max_energy_increase =
                        max_energy_increase.max((en - prev_energy) / prev_energy.abs());
                    prev_energy = en;
                }
                if s % sample_every == 0 || s == n_steps {
                    samples.push(make_sample(&mut next, ctx)?);
                }
                state = next;
            }
            Err(Error::StepRejected { t, reason }) => {
                status = FlowStatus::Rejected { t, reason };
                break;
            }
            Err(other) => return Err(other),
        }
    }

    if status == FlowStatus::Completed && started_at_zero {
        status = FlowStatus::Stationary;
    }
    Ok(Trajectory { samples, status, dt, steps, max_energy_increase })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SphereFit {
    pub center: Vec3,
    pub radius: f64,
    /// RMS distance of the points from the fitted sphere.
    pub residual: f64,
}

/// Algebraic least-squares sphere fit: |X|^2 = 2 <X, c> + (R^2 - |c|^2).
pub fn fit_sphere(emb: &Embedding) -> Result<SphereFit> {
    let mut ata = nalgebra::Matrix4::<f64>::zeros();
    let mut atb = nalgebra::Vector4::<f64>::zeros();
    for p in &emb.points {
        let row = nalgebra::Vector4::new(2.0 * p[0], 2.0 * p[1], 2.0 * p[2], 1.0);
        let b = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        ata += row * row.transpose();
        atb += row * b;
    }
    let sol = ata.lu().solve(&atb).ok_or(Error::DegenerateFit)?;
    let center = [sol[0], sol[1], sol[2]];
    let r2 = sol[3] + center[0] * center[0] + center[1] * center[1] + center[2] * center[2];
    if !(r2 > 0.0) {
        return Err(Error::DegenerateFit);
    }
    let radius = r2.sqrt();
    let mut acc = 0.0;
    for p in &emb.points {
        let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2))
            .sqrt();
        acc += (d - radius) * (d - radius);
    }
    let residual = (acc / emb.points.len() as f64).sqrt();
    Ok(SphereFit { center, radius, residual })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
}

/// Exponential decay rate of the remainder norm over the final `window`
/// fraction of a trajectory (least squares on the log).
pub fn decay_rate(traj: &Trajectory, window: f64) -> Result<DecayFit> {
    let t_end = traj.samples.last().map(|s| s.t).unwrap_or(0.0);
    let t_from = t_end * (1.0 - window);
    let tail: Vec<&Sample> = traj.samples.iter().filter(|s| s.t >= t_from).collect();
    if tail.len() < 10 {
        return Err(Error::Config(format!(
            "decay fit needs at least 10 samples in the tail window, got {}",
            tail.len()
        )));
    }
    if tail.iter().all(|s| s.remainder < 1e-13) {
        return Err(Error::InsufficientDecay);
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|s| s.remainder > 1e-300)
        .map(|s| (s.t, s.remainder.ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InsufficientDecay);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (x, y) in &pts {
        ss_res += (y - (slope * x + intercept)).powi(2);
        ss_tot += (y - mean_y).powi(2);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit { rate: -slope, r_squared })
}

/// Deterministic smooth perturbation: truncated Fourier-polynomial series
/// with coefficient decay 1/(1 + k^2 + j^2)^2; azimuthal mode k carries a
/// sin(theta)^k factor for pole regularity. Scaled to the requested
/// max-norm amplitude.
pub fn random_smooth_perturbation(seed: u64, amplitude: f64, grid: &Grid) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefs = Vec::new();
    for k in 0..=3usize {
        for j in 0..=3usize {
            let w = 1.0 / (1.0 + (k * k + j * j) as f64).powi(2);
            let a = w * (2.0 * rng.random::<f64>() - 1.0);
            let b = w * (2.0 * rng.random::<f64>() - 1.0);
            coefs.push((k, j, a, b));
        }
    }
    let tm = grid.theta_max;
    let field = Field::from_fn(grid, |phi, theta| {
        let mut acc = 0.0;
        for &(k, j, a, b) in &coefs {
            let angular = a * (k as f64 * phi).cos() + b * (k as f64 * phi).sin();
            let radial = theta.sin().powi(k as i32) * (theta / tm).powi(j as i32);
            acc += angular * radial;
        }
        acc
    });
    let m = field.max_abs();
    if m == 0.0 {
        field
    } else {
        field.scale(amplitude / m)
    }
}

/// Sample one mode eigenfunction onto the grid as g(theta) cos(k phi),
/// scaled to the requested max-norm amplitude.
pub fn eigenfunction_perturbation(
    sol: &ModeSolution,
    index: usize,
    amplitude: f64,
    grid: &Grid,
) -> Field {
    let k = sol.k as f64;
    let field = Field::from_fn(grid, |phi, theta| sol.eval(index, theta) * (k * phi).cos());
    let m = field.max_abs();
    if m == 0.0 {
        field
    } else {
        field.scale(amplitude / m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::make_cap;
    use crate::stability::modes::{assemble_mode, solve_mode};

    fn context(a: f64, b: f64, r: f64, np: usize, nt: usize) -> FlowContext {
        let cap = make_cap(a, b, r).unwrap();
        let grid = Grid::for_cap(&cap, np, nt).unwrap();
        FlowContext::new(Chart::new(cap), grid)
    }

    #[test]
    fn stationary_cap_rhs_vanishes_at_second_order() {
        let mut norms = Vec::new();
        for nt in [32usize, 64] {
            let ctx = context(0.5, 0.3, 0.4, 2 * nt, nt);
            let rhs = rhs_nonlinear(&Field::zeros(&ctx.grid), &ctx).unwrap();
            norms.push(rhs.max_abs());
        }
        assert!(norms[1] < 2e-2, "rhs norm {}", norms[1]);
        assert!(norms[0] / norms[1] > 3.0, "ratio {}", norms[0] / norms[1]);
    }

    #[test]
    fn chart_denominators_at_zero_offset() {
        let ctx = context(0.5, 0.3, 0.4, 16, 24);
        let emb = embed(&ctx.grid, &Field::zeros(&ctx.grid), &ctx.chart).unwrap();
        // interior <n, d_w Psi> = 1
        for i in 0..ctx.grid.n_phi {
            for j in 0..ctx.grid.n_theta {
                let den = dot(emb.normals[emb.idx(i, j)], ctx.dpsi_at(i, j));
                assert!((den - 1.0).abs() < 1e-6, "interior den {den}");
            }
        }
        // boundary <n_contact, d_w Psi> = 1/sin(alpha)
        let bq = boundary_quantities(&emb, ctx.cap()).unwrap();
        for i in 0..ctx.grid.n_phi {
            let den = dot(bq.conormal[i], ctx.dpsi_at(i, ctx.grid.n_theta));
            assert!((den - 1.0 / ctx.cap().sin_alpha).abs() < 1e-9, "boundary den {den}");
        }
    }

    #[test]
    fn translation_mode_is_quadratically_neutral() {
        let ctx = context(0.5, 0.3, 0.4, 32, 48);
        let basis = crate::stability::nullspace::analytic_nullspace(ctx.cap(), &ctx.grid);
        let base = rhs_nonlinear(&Field::zeros(&ctx.grid), &ctx).unwrap().max_abs();
        let mut prev = f64::INFINITY;
        for &eps in &[2e-2, 1e-2] {
            let rhs = rhs_nonlinear(&basis.v1.scale(eps), &ctx).unwrap();
            // subtract the discretization floor measured at rho = 0
            let excess = (rhs.max_abs() - base).max(1e-30);
            assert!(excess < prev);
            prev = excess;
        }
    }

    #[test]
    fn linearization_consistency_order_one() {
        // at the half-sphere the analytic-coefficient linearized operator
        // and the geometric linearization coincide
        let ctx = context(1.0, 0.5, 0.5, 32, 128);
        let w = random_smooth_perturbation(5, 1.0, &ctx.grid);
        let lin = rhs_linear(&w, ctx.cap(), &ctx.grid);
        let mut errs = Vec::new();
        for &eps in &[1e-2, 2.5e-3] {
            let nl = rhs_nonlinear(&w.scale(eps), &ctx).unwrap();
            let diff = nl.axpy(-eps, &lin);
            errs.push(diff.max_abs() / eps);
        }
        let order = (errs[0] / errs[1]).ln() / 4.0f64.ln();
        assert!(order > 0.8, "observed order {order} (errs {errs:?})");
    }

    #[test]
    fn zero_rhs_keeps_state() {
        let ctx = context(1.0, 0.5, 0.5, 16, 16);
        let filter = PolarFilter::new(&ctx, 1e-4);
        let mut state = FlowState::new(0.0, Field::zeros(&ctx.grid));
        let next = step(&mut state, 1e-4, &ctx, FlowKind::Linear, Scheme::Rk4, &filter).unwrap();
        assert_eq!(next.rho.max_abs(), 0.0);
    }

    #[test]
    fn rk4_temporal_order() {
        // Richardson: halving dt must shrink the one-shot error ~16x
        let ctx = context(1.0, 0.5, 0.5, 8, 24);
        let rho0 = Field::from_fn(&ctx.grid, |_, theta| 1e-2 * theta.cos());
        let t_end = 2e-3;
        let run = |dt: f64| -> Field {
            let traj_dt = dt;
            let mut state = FlowState::new(0.0, rho0.clone());
            let filter = PolarFilter::new(&ctx, traj_dt);
            let n = (t_end / traj_dt).round() as usize;
            for _ in 0..n {
                state = step(&mut state, traj_dt, &ctx, FlowKind::Linear, Scheme::Rk4, &filter).unwrap();
            }
            state.rho
        };
        let dt0 = 1e-4;
        let (y1, y2, y4) = (run(dt0), run(dt0 / 2.0), run(dt0 / 4.0));
        let e12 = y1.axpy(-1.0, &y2).max_abs();
        let e24 = y2.axpy(-1.0, &y4).max_abs();
        let order = (e12 / e24).ln() / 2.0f64.ln();
        assert!(order > 3.8, "temporal order {order}");
    }

    #[test]
    fn dt_bound_scaling_and_stability_probe() {
        let ctx = context(1.0, 0.5, 0.5, 16, 32);
        let ctx2 = context(1.0, 0.5, 0.5, 16, 64);
        let ratio = ctx.dt_stability_bound() / ctx2.dt_stability_bound();
        assert!((ratio - 4.0).abs() < 1.5, "bound ratio {ratio}");

        // c_cfl = 0.2 stable, c_cfl = 2.0 unstable on the half-sphere probe
        let rho0 = random_smooth_perturbation(3, 5e-3, &ctx.grid);
        let stable = evolve(
            rho0.clone(),
            &ctx,
            FlowKind::Nonlinear,
            Scheme::Rk4,
            200.0 * ctx.dt_stability_bound(),
            ctx.dt_stability_bound(),
            50,
        )
        .unwrap();
        assert_eq!(stable.status, FlowStatus::Completed);
        let mut wild = ctx.clone();
        wild.c_cfl = 2.0;
        let traj = evolve(
            rho0,
            &wild,
            FlowKind::Nonlinear,
            Scheme::Rk4,
            200.0 * wild.dt_stability_bound(),
            wild.dt_stability_bound(),
            50,
        )
        .unwrap();
        assert!(
            matches!(traj.status, FlowStatus::Rejected { .. }),
            "expected instability at c_cfl = 2"
        );
    }

    #[test]
    fn mode_confinement_and_null_coefficient_drift() {
        let ctx = context(0.5, 0.3, 0.4, 16, 32);
        let k = 2usize;
        let rho0 = Field::from_fn(&ctx.grid, |phi, theta| 1e-2 * theta.sin().powi(2) * (k as f64 * phi).cos());
        let dt = ctx.dt_stability_bound();
        let traj = evolve(rho0, &ctx, FlowKind::Linear, Scheme::Rk4, 400.0 * dt, dt, 100).unwrap();
        assert_eq!(traj.status, FlowStatus::Completed);
        // a1, a2 stay zero (translations are equilibria of the linear flow)
        for s in &traj.samples {
            assert!(s.a1.abs() < 1e-8 && s.a2.abs() < 1e-8, "a1 {} a2 {}", s.a1, s.a2);
        }

        // other azimuthal modes stay at rounding level
        let mut state = FlowState::new(
            0.0,
            Field::from_fn(&ctx.grid, |phi, theta| 1e-2 * theta.sin().powi(2) * (k as f64 * phi).cos()),
        );
        let filter = PolarFilter::new(&ctx, dt);
        for _ in 0..50 {
            state = step(&mut state, dt, &ctx, FlowKind::Linear, Scheme::Rk4, &filter).unwrap();
        }
        let n = ctx.grid.n_phi;
        for m in 0..=n / 2 {
            if m == k {
                continue;
            }
            let mut amp = 0.0f64;
            for j in 0..ctx.grid.n_theta {
                let (mut c, mut s) = (0.0, 0.0);
                for i in 0..n {
                    let v = state.rho.at(i, j);
                    c += v * (m as f64 * ctx.grid.phi[i]).cos();
                    s += v * (m as f64 * ctx.grid.phi[i]).sin();
                }
                amp = amp.max((c * c + s * s).sqrt() / n as f64);
            }
            assert!(amp < 1e-10, "mode {m} leaked to {amp}");
        }
    }

    #[test]
    fn equivariance_under_rotation() {
        let ctx = context(0.5, 0.3, 0.4, 16, 24);
        let dt = ctx.dt_stability_bound();
        let rho = random_smooth_perturbation(9, 5e-3, &ctx.grid);
        let shift = 4usize;
        let mut rotated = Field::zeros(&ctx.grid);
        for i in 0..ctx.grid.n_phi {
            let src = (i + shift) % ctx.grid.n_phi;
            for j in 0..ctx.grid.n_theta {
                *rotated.at_mut(i, j) = rho.at(src, j);
            }
            rotated.trace[i] = rho.trace[src];
        }
        let t1 = evolve(rho, &ctx, FlowKind::Nonlinear, Scheme::Rk4, 50.0 * dt, dt, 10).unwrap();
        let t2 = evolve(rotated, &ctx, FlowKind::Nonlinear, Scheme::Rk4, 50.0 * dt, dt, 10).unwrap();
        for (a, b) in t1.samples.iter().zip(&t2.samples) {
            assert!((a.volume - b.volume).abs() < 1e-10);
            assert!((a.energy - b.energy).abs() < 1e-10);
            assert!((a.remainder - b.remainder).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_fit_oracles() {
        let ctx = context(0.5, 0.3, 0.4, 16, 24);
        let emb = embed(&ctx.grid, &Field::zeros(&ctx.grid), &ctx.chart).unwrap();
        let fit = fit_sphere(&emb).unwrap();
        assert!(fit.residual < 1e-10);
        assert!((fit.radius - ctx.cap().radius).abs() < 1e-10);
        assert!((fit.center[2] - ctx.cap().h_center).abs() < 1e-10);
        assert!(fit.center[0].abs() < 1e-10 && fit.center[1].abs() < 1e-10);

        // translated cloud
        let mut shifted = emb.clone();
        for p in &mut shifted.points {
            p[0] += 0.1;
        }
        let fit = fit_sphere(&shifted).unwrap();
        assert!((fit.center[0] - 0.1).abs() < 1e-10);
    }

    #[test]
    fn decay_fit_and_floors() {
        let mk = |rem: Vec<f64>| Trajectory {
            samples: rem
                .iter()
                .enumerate()
                .map(|(i, &r)| Sample {
                    t: i as f64 * 0.1,
                    volume: 1.0,
                    energy: 1.0,
                    max_rho: r,
                    l2_rho: r,
                    a0: 0.0,
                    a1: 0.0,
                    a2: 0.0,
                    remainder: r,
                    fit_residual: 0.0,
                    fit_radius: 1.0,
                    fit_center: [0.0; 3],
                    angle_margin: 1.0,
                })
                .collect(),
            status: FlowStatus::Completed,
            dt: 0.1,
            steps: rem.len(),
            max_energy_increase: 0.0,
        };
        let traj = mk((0..40).map(|i| (-3.0 * 0.1 * i as f64).exp()).collect());
        let fit = decay_rate(&traj, 0.5).unwrap();
        assert!((fit.rate - 3.0).abs() < 1e-10 && fit.r_squared > 0.999999);

        let traj = mk(vec![1e-16; 40]);
        assert!(matches!(decay_rate(&traj, 0.5), Err(Error::InsufficientDecay)));

        // two-mode mixture: tail rate equals the smaller eigenvalue
        let traj = mk((0..200)
            .map(|i| {
                let t = 0.1 * i as f64;
                (-2.0 * t).exp() + 0.5 * (-9.0 * t).exp()
            })
            .collect());
        let fit = decay_rate(&traj, 0.3).unwrap();
        assert!((fit.rate - 2.0).abs() < 0.05 * 2.0, "tail rate {}", fit.rate);
    }

    #[test]
    fn perturbation_generators_deterministic() {
        let ctx = context(0.5, 0.3, 0.4, 16, 24);
        let f1 = random_smooth_perturbation(42, 0.01, &ctx.grid);
        let f2 = random_smooth_perturbation(42, 0.01, &ctx.grid);
        assert_eq!(f1, f2);
        assert!((f1.max_abs() - 0.01).abs() < 1e-15);
        let f3 = random_smooth_perturbation(43, 0.01, &ctx.grid);
        assert!(f1.axpy(-1.0, &f3).max_abs() > 1e-5);

        let sol = solve_mode(&assemble_mode(2, ctx.cap(), 64).unwrap()).unwrap();
        let e = eigenfunction_perturbation(&sol, 0, 0.02, &ctx.grid);
        assert!((e.max_abs() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn eigenfield_linear_decay_matches_eigenvalue() {
        let cap = make_cap(1.0, 0.5, 0.5).unwrap();
        let grid = Grid::for_cap(&cap, 16, 64).unwrap();
        let ctx = FlowContext::new(Chart::new(cap.clone()), grid);
        let sol = solve_mode(&assemble_mode(2, &cap, 256).unwrap()).unwrap();
        let lambda = sol.eigenvalues[0];
        assert!(lambda > 0.0);
        let rho0 = eigenfunction_perturbation(&sol, 0, 1e-3, &ctx.grid);
        let dt = ctx.dt_stability_bound();
        let t_end = 2.0 / lambda;
        let traj = evolve(rho0, &ctx, FlowKind::Linear, Scheme::Rk4, t_end, dt, 25).unwrap();
        let fit = decay_rate(&traj, 0.6).unwrap();
        assert!(
            (fit.rate - lambda).abs() < 0.02 * lambda,
            "rate {} vs lambda {lambda}",
            fit.rate
        );
        assert!(fit.r_squared > 0.999);
    }
}
