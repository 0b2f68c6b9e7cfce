//! Deterministic CSV emission for the CLI reports.
//!
//! Every float prints with 17 significant digits so the text round-trips
//! to the exact f64 bit pattern; identical runs produce byte-identical
//! files.

use crate::flow::Trajectory;
use crate::stability::{CellOutcome, HomotopyCurves, SpectrumReport, StabilityMap};

/// 17-significant-digit float (round-trip exact).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        "nan".into()
    }
}

/// Flat eigenvalue table `a,b,r,alpha,k,index,lambda`.
pub fn spectrum_csv(rep: &SpectrumReport) -> String {
    let mut out = String::from("a,b,r,alpha,k,index,lambda\n");
    for mode in &rep.modes {
        for (index, lam) in mode.eigenvalues.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_f64(rep.a),
                fmt_f64(rep.b),
                fmt_f64(rep.r),
                fmt_f64(rep.alpha),
                mode.k,
                index,
                fmt_f64(*lam)
            ));
        }
    }
    out
}

/// Computed-vs-analytic table for the half-sphere d = 0 endpoint.
pub fn reference_csv(computed: &[Vec<f64>], analytic: &[Vec<f64>]) -> String {
    let mut out = String::from("k,index,lambda_computed,lambda_analytic\n");
    for (k, (comp, exact)) in computed.iter().zip(analytic).enumerate() {
        for (index, lam) in exact.iter().enumerate() {
            if index >= comp.len() {
                break;
            }
            out.push_str(&format!(
                "{},{},{},{}\n",
                k,
                index,
                fmt_f64(comp[index]),
                fmt_f64(*lam)
            ));
        }
    }
    out
}

pub fn scan_csv(map: &StabilityMap) -> String {
    let mut out = String::from(
        "a,b,status,r,alpha,region,c_crit,b_margin,nullspace_dim,min_positive,has_negative\n",
    );
    for cell in &map.cells {
        match &cell.outcome {
            CellOutcome::Feasible {
                r,
                alpha,
                region,
                c_crit,
                b_margin,
                nullspace_dim,
                min_positive,
                has_negative,
            } => {
                let region = match region {
                    crate::stability::Region::SZero => "S0",
                    crate::stability::Region::SPlus => "S+",
                    crate::stability::Region::SMinus => "S-",
                };
                out.push_str(&format!(
                    "{},{},ok,{},{},{},{},{},{},{},{}\n",
                    fmt_f64(cell.a),
                    fmt_f64(cell.b),
                    fmt_f64(*r),
                    fmt_f64(*alpha),
                    region,
                    fmt_f64(*c_crit),
                    fmt_f64(*b_margin),
                    nullspace_dim,
                    min_positive.map(fmt_f64).unwrap_or_default(),
                    has_negative
                ));
            }
            CellOutcome::NoStationaryCap { reason } => {
                out.push_str(&format!(
                    "{},{},no_stationary_cap,,,,,,,,\"{}\"\n",
                    fmt_f64(cell.a),
                    fmt_f64(cell.b),
                    reason.replace('"', "'")
                ));
            }
            CellOutcome::SolverFailure { reason } => {
                out.push_str(&format!(
                    "{},{},solver_failure,,,,,,,,\"{}\"\n",
                    fmt_f64(cell.a),
                    fmt_f64(cell.b),
                    reason.replace('"', "'")
                ));
            }
        }
    }
    out
}

/// Wide eigenvalue-curve table, one column per homotopy parameter.
pub fn homotopy_csv(curves: &HomotopyCurves, n_eigs: usize) -> String {
    let mut out = String::from("k,index");
    for d in &curves.d_values {
        out.push_str(&format!(",lambda_d{}", d));
    }
    out.push('\n');
    for (k, per_d) in curves.lambdas.iter().enumerate() {
        let count = per_d.iter().map(|v| v.len()).min().unwrap_or(0).min(n_eigs);
        for index in 0..count {
            out.push_str(&format!("{k},{index}"));
            for lams in per_d {
                out.push(',');
                out.push_str(&fmt_f64(lams[index]));
            }
            out.push('\n');
        }
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from(
        "t,volume,energy,max_rho,l2_rho,a0,a1,a2,remainder,fit_residual,fit_R,angle_margin\n",
    );
    for s in &traj.samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(s.t),
            fmt_f64(s.volume),
            fmt_f64(s.energy),
            fmt_f64(s.max_rho),
            fmt_f64(s.l2_rho),
            fmt_f64(s.a0),
            fmt_f64(s.a1),
            fmt_f64(s.a2),
            fmt_f64(s.remainder),
            fmt_f64(s.fit_residual),
            fmt_f64(s.fit_radius),
            fmt_f64(s.angle_margin)
        ));
    }
    out
}

/// Field CSV, `phi,theta,value`, theta fastest, trace rows included.
pub fn field_csv(field: &crate::grid::Field, grid: &crate::grid::Grid) -> String {
    let mut out = String::from("phi,theta,value\n");
    for i in 0..grid.n_phi {
        for j in 0..grid.n_theta {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(grid.phi[i]),
                fmt_f64(grid.theta[j]),
                fmt_f64(field.at(i, j))
            ));
        }
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(grid.phi[i]),
            fmt_f64(grid.theta_max),
            fmt_f64(field.trace[i])
        ));
    }
    out
}

/// Embedding CSV, `phi,theta,x,y,z,H`.
pub fn embedding_csv(emb: &crate::surface::Embedding, grid: &crate::grid::Grid) -> String {
    let mut out = String::from("phi,theta,x,y,z,H\n");
    for i in 0..grid.n_phi {
        for l in 0..emb.n_levels {
            let k = emb.idx(i, l);
            let p = emb.points[k];
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_f64(grid.phi[i]),
                fmt_f64(grid.level_theta(l)),
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2]),
                fmt_f64(emb.hfield[k])
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.1, -3.5e-7, std::f64::consts::PI, 1.0 / 3.0, 2.0f64.powi(-40)] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
