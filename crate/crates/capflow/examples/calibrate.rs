use capflow::cap::make_cap;
use capflow::chart::Chart;
use capflow::flow::*;
use capflow::grid::{Field, Grid};
use capflow::stability::*;
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    let cap = make_cap(0.5, 0.3, 0.4).unwrap();

    if which == "spec" {
        // which mode attains min_positive?
        let t = Instant::now();
        let rep = spectrum(&cap, 3, 200).unwrap();
        for m in &rep.modes {
            println!("k={} first: {:?}", m.k, &m.eigenvalues[..4.min(m.eigenvalues.len())]);
        }
        println!("min_positive {:?} tol_null {} ({:?})", rep.min_positive, rep.tol_null, t.elapsed());
    }

    if which == "c8" {
        let t0 = Instant::now();
        let grid = Grid::for_cap(&cap, 64, 64).unwrap();
        let ctx = FlowContext::new(Chart::new(cap.clone()), grid.clone());
        let rho0 = Field::from_fn(&grid, |phi, theta| 0.01 * theta.sin() * (2.0 * phi).cos());
        let dt = ctx.dt_stability_bound();
        let t_end: f64 = std::env::args().nth(2).unwrap_or("0.5".into()).parse().unwrap();
        let steps = (t_end / dt).ceil() as usize;
        println!("dt {dt:.3e} steps {steps}");
        let traj = evolve(rho0, &ctx, FlowKind::Nonlinear, Scheme::Rk4, t_end, dt, (steps / 200).max(1)).unwrap();
        let v0 = traj.samples[0].volume;
        let drift = traj.samples.iter().map(|s| (s.volume - v0).abs() / v0).fold(0.0f64, f64::max);
        let last = traj.samples.last().unwrap();
        println!("status {:?} elapsed {:?}", traj.status, t0.elapsed());
        println!("volume drift {drift:.3e}  max_energy_increase {:.3e}", traj.max_energy_increase);
        println!("final fit residual {:.3e} (thresh {:.3e})", last.fit_residual, 1e-4 * cap.radius);
        let r_fit = (last.fit_radius.powi(2) - last.fit_center[2].powi(2)).sqrt();
        let gap = last.fit_center[2] / last.fit_radius - (cap.b / r_fit - cap.a);
        println!("angle gap {gap:.3e}  remainder {:.3e} max_rho {:.3e}", last.remainder, last.max_rho);
    }

    if which == "c9" {
        let t0 = Instant::now();
        let grid = Grid::for_cap(&cap, 48, 64).unwrap();
        let ctx = FlowContext::new(Chart::new(cap.clone()), grid.clone());
        let basis = analytic_nullspace(&cap, &grid);
        let rho0 = basis.v1.scale(0.02);
        let dt = ctx.dt_stability_bound();
        let t_end: f64 = std::env::args().nth(2).unwrap_or("0.3".into()).parse().unwrap();
        let traj = evolve(rho0, &ctx, FlowKind::Nonlinear, Scheme::Rk4, t_end, dt, 200).unwrap();
        let worst_rem = traj.samples.iter().map(|s| s.remainder).fold(0.0f64, f64::max);
        let last = traj.samples.last().unwrap();
        println!("status {:?} elapsed {:?}", traj.status, t0.elapsed());
        println!("max remainder {worst_rem:.3e} (thresh 5e-4), final center_x {:.5}", last.fit_center[0]);
    }

    if which == "c11" {
        let hs = make_cap(1.0, 0.5, 0.5).unwrap();
        for nt in [96usize, 128, 192] {
            let grid = Grid::for_cap(&hs, 32, nt).unwrap();
            let ctx = FlowContext::new(Chart::new(hs.clone()), grid.clone());
            let mut orders = Vec::new();
            for seed in 1..=5u64 {
                let w = random_smooth_perturbation(seed, 1.0, &grid);
                let lin = rhs_linear(&w, &hs, &grid);
                let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
                    .iter()
                    .map(|&eps| {
                        let nl = rhs_nonlinear(&w.scale(eps), &ctx).unwrap();
                        nl.axpy(-eps, &lin).max_abs() / (eps * w.max_abs())
                    })
                    .collect();
                let order = (errs[0] / errs[2]).ln() / 4.0f64.ln();
                orders.push(order);
                if seed == 1 { println!("nt={nt} errs {errs:?}"); }
            }
            println!("nt={nt} orders {orders:?}");
        }
    }

    if which == "c7" {
        // eigenfield linear decay at the general cap, mode from min_positive
        let t0 = Instant::now();
        let rep = spectrum(&cap, 3, 200).unwrap();
        let (kstar, lam) = rep
            .modes
            .iter()
            .filter_map(|m| m.eigenvalues.iter().find(|&&l| l > rep.tol_null).map(|&l| (m.k, l)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        println!("min_positive {lam} from mode {kstar}");
        let grid = Grid::for_cap(&cap, 16, 96).unwrap();
        let ctx = FlowContext::new(Chart::new(cap.clone()), grid.clone());
        let rho0 = if kstar == 0 {
            let sys = assemble_mode(0, &cap, 400).unwrap();
            let non = nonlocal_mode0(&sys).unwrap();
            let lam0 = *non.eigenvalues.iter().find(|&&l| (l - lam).abs() < 0.3 * lam.abs() + 1.0).unwrap();
            println!("fem eigenvalue near: {lam0}");
            let v = non.eigenvector_near(lam0).unwrap();
            let sol = ModeSolution { k: 0, nodes: non.nodes.clone(), eigenvalues: vec![lam0], vectors: vec![v] };
            eigenfunction_perturbation(&sol, 0, 1e-3, &grid)
        } else {
            let sol = solve_mode(&assemble_mode(kstar, &cap, 400).unwrap()).unwrap();
            let idx = sol.eigenvalues.iter().position(|&l| (l - lam).abs() < 1e-3 * lam.abs().max(1.0)).unwrap();
            eigenfunction_perturbation(&sol, idx, 1e-3, &grid)
        };
        let dt = ctx.dt_stability_bound();
        let t_end = 5.0 / lam;
        let steps = (t_end / dt).ceil() as usize;
        let traj = evolve(rho0, &ctx, FlowKind::Linear, Scheme::Rk4, t_end, dt, (steps / 150).max(1)).unwrap();
        let fit = decay_rate(&traj, 0.5).unwrap();
        println!("steps {steps} rate {} vs {lam} rel {:+.4e} R2 {} ({:?})", fit.rate, (fit.rate - lam) / lam, fit.r_squared, t0.elapsed());
    }
}
