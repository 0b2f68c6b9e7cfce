//! Linearized stability of stationary caps: assembled mode spectra,
//! nullspace counting, and parameter-plane scans.

pub mod modes;
pub mod nullspace;

pub use modes::{
    assemble_mode, halfsphere_reference, homotopy_spectrum, nonlocal_mode0, solve_mode,
    HomotopyCurves, Mode0Nonlocal, ModeSolution, ModeSystem,
};
pub use nullspace::{
    analytic_nullspace, apply_a0, l2_tilde_inner, l2_tilde_norm, project_nullspace, NullBasis,
};

use crate::cap::{feasible_r_range, make_cap, CapParams};
use crate::error::Result;
use serde::Serialize;

/// Sorted eigenvalue list of one azimuthal mode.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSpectrum {
    pub k: usize,
    pub eigenvalues: Vec<f64>,
}

/// Assembled eigenvalue inventory of the linearized operator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub c_crit: f64,
    pub n_theta: usize,
    pub modes: Vec<ModeSpectrum>,
    /// |lambda| < tol_null counted with azimuthal multiplicity (two per
    /// mode k >= 1 for the sine and cosine copies).
    pub nullspace_dim: usize,
    pub min_positive: Option<f64>,
    pub has_negative: bool,
    pub tol_null: f64,
}

/// Eigenvalues of the linearized operator for modes 0..=k_max; mode 0
/// includes the nonlocal volume correction.
pub fn spectrum(cap: &CapParams, k_max: usize, n_theta: usize) -> Result<SpectrumReport> {
    assert!(k_max >= 2, "spectrum needs k_max >= 2");
    let mut modes = Vec::with_capacity(k_max + 1);

    let sys0 = assemble_mode(0, cap, n_theta)?;
    let non0 = nonlocal_mode0(&sys0)?;
    modes.push(ModeSpectrum { k: 0, eigenvalues: non0.eigenvalues.clone() });
    for k in 1..=k_max {
        let sol = solve_mode(&assemble_mode(k, cap, n_theta)?)?;
        modes.push(ModeSpectrum { k, eigenvalues: sol.eigenvalues });
    }

    // nullspace tolerance: 10 h^2 times the local spectral scale (largest
    // magnitude among the five smallest eigenvalues of the union)
    let h = cap.theta_max() / n_theta as f64;
    let mut union: Vec<f64> = modes.iter().flat_map(|m| m.eigenvalues.iter().copied()).collect();
    union.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let scale = union.iter().take(5).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol_null = 10.0 * scale * h * h;

    let mut nullspace_dim = 0;
    let mut min_positive: Option<f64> = None;
    let mut has_negative = false;
    for m in &modes {
        let mult = if m.k == 0 { 1 } else { 2 };
        for &lam in &m.eigenvalues {
            if lam.abs() < tol_null {
                nullspace_dim += mult;
            } else if lam < 0.0 {
                has_negative = true;
            } else if min_positive.map_or(true, |mp| lam < mp) {
                min_positive = Some(lam);
            }
        }
    }

    Ok(SpectrumReport {
        a: cap.a,
        b: cap.b,
        r: cap.r,
        alpha: cap.alpha,
        radius: cap.radius,
        c_crit: cap.c_crit,
        n_theta,
        modes,
        nullspace_dim,
        min_positive,
        has_negative,
        tol_null,
    })
}

/// Region of the (a, b, r) parameter plane by the sign of cos(alpha).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// cos(alpha) = 0 (stationary half-spheres, b/r = a).
    SZero,
    /// cos(alpha) > 0.
    SPlus,
    /// cos(alpha) < 0.
    SMinus,
}

pub fn classify_region(cap: &CapParams) -> Region {
    if cap.cos_alpha.abs() < 1e-12 {
        Region::SZero
    } else if cap.cos_alpha > 0.0 {
        Region::SPlus
    } else {
        Region::SMinus
    }
}

/// How the contact radius is chosen for each (a, b) cell of a scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum RadiusRule {
    /// Midpoint of the feasible interval; twice the lower endpoint when the
    /// interval is unbounded.
    MidInterval,
    Fixed(f64),
}

impl RadiusRule {
    pub fn pick(&self, a: f64, b: f64) -> Result<f64> {
        match self {
            RadiusRule::Fixed(r) => Ok(*r),
            RadiusRule::MidInterval => {
                let range = feasible_r_range(a, b)?;
                Ok(if range.hi.is_finite() { 0.5 * (range.lo + range.hi) } else { 2.0 * range.lo })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Feasible {
        r: f64,
        alpha: f64,
        region: Region,
        c_crit: f64,
        /// b - c_crit; positive inside the proven-stable range.
        b_margin: f64,
        nullspace_dim: usize,
        min_positive: Option<f64>,
        has_negative: bool,
    },
    NoStationaryCap {
        reason: String,
    },
    SolverFailure {
        reason: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanCell {
    pub a: f64,
    pub b: f64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityMap {
    pub k_max: usize,
    pub n_theta: usize,
    pub cells: Vec<ScanCell>,
}

impl StabilityMap {
    pub fn all_failed(&self) -> bool {
        self.cells
            .iter()
            .all(|c| !matches!(c.outcome, CellOutcome::Feasible { .. }))
    }
}

/// Evaluate one (a, b) cell of the parameter scan.
pub fn scan_cell(a: f64, b: f64, r_rule: RadiusRule, k_max: usize, n_theta: usize) -> ScanCell {
    let cap = match r_rule.pick(a, b).and_then(|r| make_cap(a, b, r)) {
        Ok(cap) => cap,
        Err(e) => {
            return ScanCell { a, b, outcome: CellOutcome::NoStationaryCap { reason: e.to_string() } }
        }
    };
    match spectrum(&cap, k_max, n_theta) {
        Ok(rep) => ScanCell {
            a,
            b,
            outcome: CellOutcome::Feasible {
                r: cap.r,
                alpha: cap.alpha,
                region: classify_region(&cap),
                c_crit: cap.c_crit,
                b_margin: b - cap.c_crit,
                nullspace_dim: rep.nullspace_dim,
                min_positive: rep.min_positive,
                has_negative: rep.has_negative,
            },
        },
        Err(e) => ScanCell { a, b, outcome: CellOutcome::SolverFailure { reason: e.to_string() } },
    }
}

/// Scan the (a, b) lattice; per-cell failures are recorded inline.
pub fn scan_parameters(
    a_list: &[f64],
    b_list: &[f64],
    r_rule: RadiusRule,
    k_max: usize,
    n_theta: usize,
) -> StabilityMap {
    let mut cells = Vec::with_capacity(a_list.len() * b_list.len());
    for &a in a_list {
        for &b in b_list {
            cells.push(scan_cell(a, b, r_rule, k_max, n_theta));
        }
    }
    StabilityMap { k_max, n_theta, cells }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_reports_three_null_modes() {
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        let rep = spectrum(&cap, 3, 120).unwrap();
        assert_eq!(rep.nullspace_dim, 3);
        assert!(rep.min_positive.unwrap() > 0.0);
        assert!(!rep.has_negative);
        // k >= 2 sublists entirely positive
        for m in &rep.modes {
            if m.k >= 2 {
                assert!(m.eigenvalues[0] > 0.0, "mode {} lowest {}", m.k, m.eigenvalues[0]);
            }
        }
    }

    #[test]
    fn scan_small_lattice() {
        let map = scan_parameters(&[0.0, 0.5, 1.0], &[0.2, 0.5], RadiusRule::MidInterval, 2, 60);
        assert_eq!(map.cells.len(), 6);
        for cell in &map.cells {
            match &cell.outcome {
                CellOutcome::Feasible { nullspace_dim, min_positive, b_margin, .. } => {
                    assert_eq!(*nullspace_dim, 3, "cell ({}, {})", cell.a, cell.b);
                    assert!(min_positive.unwrap() > 0.0);
                    assert!(*b_margin > 0.0);
                }
                other => panic!("unexpected outcome {other:?}"),
            }
        }
        assert!(!map.all_failed());
    }

    #[test]
    fn infeasible_cells_recorded_inline() {
        let map = scan_parameters(&[2.0], &[1.0], RadiusRule::Fixed(2.0), 2, 40);
        assert!(map.all_failed());
        match &map.cells[0].outcome {
            CellOutcome::NoStationaryCap { reason } => assert!(reason.contains("outside")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
