use capflow::cap::make_cap;
use capflow::chart::Chart;
use capflow::flow::*;
use capflow::grid::{Field, Grid};
use capflow::surface::{embed, energy};

fn main() {
    let cap = make_cap(0.5, 0.3, 0.4).unwrap();
    let grid = Grid::for_cap(&cap, 64, 64).unwrap();
    let ctx = FlowContext::new(Chart::new(cap.clone()), grid.clone());
    let rho0 = Field::from_fn(&grid, |phi, theta| 0.01 * theta.sin() * (2.0 * phi).cos());
    let dt = ctx.dt_stability_bound();
    let filter = PolarFilter::new(&ctx, dt);
    let mut state = FlowState::new(0.0, rho0);
    let mut prev = {
        let emb = embed(&grid, &state.rho, &ctx.chart).unwrap();
        energy(&emb, &grid, cap.a, cap.b)
    };
    let mut worst = (0.0f64, 0.0f64, 0.0f64); // rel increase, t, E
    for s in 0..36090 {
        state = step(&mut state, dt, &ctx, FlowKind::Nonlinear, Scheme::Rk4, &filter).unwrap();
        let emb = embed(&grid, &state.rho, &ctx.chart).unwrap();
        let e = energy(&emb, &grid, cap.a, cap.b);
        let rel = (e - prev) / prev.abs();
        if rel > worst.0 {
            worst = (rel, state.t, e);
            println!("step {s} t {:.4} rel dE +{:.3e} E {:.12}", state.t, rel, e);
        }
        prev = e;
        if s % 6000 == 0 {
            println!("  [t {:.3} E {:.12} dE {:+.3e}]", state.t, e, rel);
        }
    }
    println!("worst {worst:?}");
}
