//! Discrete linearized operator on the full grid, its analytic nullspace,
//! and the projection onto the nullspace.
//!
//! The interior component of A0 is
//!
//!   (A0 rho)^(1) = -Lap rho - |sigma|^2 rho + mean(Lap rho + |sigma|^2 rho)
//!
//! over the reference cap, and the boundary component is
//!
//!   (A0 rho)^(2) = -(sin(a)/R) ( -sin(a) rho_th - cos(a) rho
//!                  + b/(R sin^2 a) (rho_phph + rho) )    at theta_max.
//!
//! Its nullspace is spanned by the two horizontal translations
//! sin(phi) sin(theta), cos(phi) sin(theta) and the radial-expansion mode
//! 1 + c_alpha cos(theta) (or cos(theta) on the degenerate branch).

use crate::cap::CapParams;
use crate::grid::{spectral_dphi2, Field, Grid};
use crate::surface::{boundary_dtheta, laplace_beltrami_reference};

/// The three analytic nullspace fields sampled on a grid.
#[derive(Debug, Clone)]
pub struct NullBasis {
    /// Radial expansion (+ vertical shift): 1 + c_alpha cos(theta), or
    /// cos(theta) on the degenerate branch.
    pub v0: Field,
    /// x-shift: sin(phi) sin(theta).
    pub v1: Field,
    /// y-shift: cos(phi) sin(theta).
    pub v2: Field,
}

pub fn analytic_nullspace(cap: &CapParams, grid: &Grid) -> NullBasis {
    let v0 = match cap.c_alpha {
        Some(ca) => Field::from_fn(grid, |_, theta| 1.0 + ca * theta.cos()),
        None => Field::from_fn(grid, |_, theta| theta.cos()),
    };
    let v1 = Field::from_fn(grid, |phi, theta| phi.sin() * theta.sin());
    let v2 = Field::from_fn(grid, |phi, theta| phi.cos() * theta.sin());
    NullBasis { v0, v1, v2 }
}

/// Integral over the reference cap (measure R^2 sin(theta) dtheta dphi).
pub fn reference_area_integral(grid: &Grid, cap: &CapParams, f: impl Fn(usize, usize) -> f64) -> f64 {
    let r2 = cap.radius * cap.radius;
    let mut acc = 0.0;
    for i in 0..grid.n_phi {
        for j in 0..grid.n_theta {
            acc += f(i, j) * grid.theta[j].sin() * grid.theta_weights[j];
        }
    }
    acc * r2 * grid.h_phi
}

/// Integral over the reference contact circle (measure r dphi).
pub fn reference_boundary_integral(grid: &Grid, cap: &CapParams, f: impl Fn(usize) -> f64) -> f64 {
    (0..grid.n_phi).map(&f).sum::<f64>() * cap.r * grid.h_phi
}

/// Weighted inner product: interior L2 plus boundary L2 with 1/sin^2(alpha).
pub fn l2_tilde_inner(u: &Field, v: &Field, cap: &CapParams, grid: &Grid) -> f64 {
    let interior = reference_area_integral(grid, cap, |i, j| u.at(i, j) * v.at(i, j));
    let boundary = reference_boundary_integral(grid, cap, |i| u.trace[i] * v.trace[i]);
    interior + boundary / (cap.sin_alpha * cap.sin_alpha)
}

pub fn l2_tilde_norm(v: &Field, cap: &CapParams, grid: &Grid) -> f64 {
    l2_tilde_inner(v, v, cap, grid).sqrt()
}

/// Apply the discrete linearized operator A0.
pub fn apply_a0(rho: &Field, cap: &CapParams, grid: &Grid) -> Field {
    let sig2 = 2.0 / (cap.radius * cap.radius);
    let lap = laplace_beltrami_reference(grid, rho, cap);
    // the nonlocal term subtracts the cap average of Lap rho + |sigma|^2 rho,
    // quadrature identical to the projection's a0 numerator
    let mean = reference_area_integral(grid, cap, |i, j| lap.at(i, j) + sig2 * rho.at(i, j))
        / reference_area_integral(grid, cap, |_, _| 1.0);

    let mut out = Field::zeros(grid);
    for i in 0..grid.n_phi {
        for j in 0..grid.n_theta {
            *out.at_mut(i, j) = -lap.at(i, j) - sig2 * rho.at(i, j) + mean;
        }
        let dth = boundary_dtheta(grid, rho, i);
        let dpp = spectral_dphi2(grid, rho, i, grid.n_theta);
        let tr = rho.trace[i];
        let sa = cap.sin_alpha;
        out.trace[i] = -(sa / cap.radius)
            * (-sa * dth - cap.cos_alpha * tr + cap.b / (cap.radius * sa * sa) * (dpp + tr));
    }
    out
}

/// Nullspace coefficients of a field and the projected remainder.
///
/// a0 is the ratio of cap means against v0; a1, a2 are weighted inner
/// products against the translation modes (boundary weight 1/sin^2 alpha).
pub fn project_nullspace(v: &Field, cap: &CapParams, grid: &Grid) -> (f64, f64, f64, Field) {
    let basis = analytic_nullspace(cap, grid);
    let a0 = reference_area_integral(grid, cap, |i, j| v.at(i, j))
        / reference_area_integral(grid, cap, |i, j| basis.v0.at(i, j));
    let a1 = l2_tilde_inner(v, &basis.v1, cap, grid) / l2_tilde_inner(&basis.v1, &basis.v1, cap, grid);
    let a2 = l2_tilde_inner(v, &basis.v2, cap, grid) / l2_tilde_inner(&basis.v2, &basis.v2, cap, grid);
    let remainder = v
        .axpy(-a0, &basis.v0)
        .axpy(-a1, &basis.v1)
        .axpy(-a2, &basis.v2);
    (a0, a1, a2, remainder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::make_cap;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nullspace_samples() {
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        let grid = Grid::for_cap(&cap, 16, 32).unwrap();
        let basis = analytic_nullspace(&cap, &grid);
        // v1(phi = pi/2, theta = pi/2) = 1 (sampled near those angles)
        let f = |phi: f64, theta: f64| phi.sin() * theta.sin();
        for i in 0..grid.n_phi {
            for j in 0..grid.n_theta {
                assert_eq!(basis.v1.at(i, j), f(grid.phi[i], grid.theta[j]));
            }
        }
        // back-transform: v1 = x / R pointwise under the parametrization
        let chart = crate::chart::Chart::new(cap.clone());
        for i in 0..grid.n_phi {
            for j in 0..grid.n_theta {
                let p = crate::chart::SurfacePoint { phi: grid.phi[i], theta: grid.theta[j] };
                let x = chart.reference_point(p);
                assert!((basis.v1.at(i, j) - x[0] / cap.radius).abs() < 1e-14);
                assert!((basis.v2.at(i, j) - x[1] / cap.radius).abs() < 1e-14);
            }
        }
        // half-sphere with b = 0.5, R = 0.5: v0(theta = 0) = 1 + c_alpha = 0
        let hs = make_cap(1.0, 0.5, 0.5).unwrap();
        let grid = Grid::for_cap(&hs, 16, 32).unwrap();
        let basis = analytic_nullspace(&hs, &grid);
        let v0_pole = 1.0 + hs.c_alpha.unwrap();
        assert!(v0_pole.abs() < 1e-14);
        assert!((basis.v0.at(0, 0) - (1.0 + hs.c_alpha.unwrap() * grid.theta[0].cos())).abs() < 1e-15);
    }

    #[test]
    fn a0_annihilates_nullspace_at_second_order() {
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        let mut norms = Vec::new();
        for n in [24usize, 48] {
            let grid = Grid::for_cap(&cap, 2 * n, 3 * n / 2).unwrap();
            let basis = analytic_nullspace(&cap, &grid);
            let worst = [&basis.v0, &basis.v1, &basis.v2]
                .iter()
                .map(|v| apply_a0(v, &cap, &grid).max_abs())
                .fold(0.0f64, f64::max);
            norms.push(worst);
        }
        assert!(norms[0] / norms[1] > 3.5, "residual ratio {}", norms[0] / norms[1]);
        assert!(norms[1] < 1e-2);
    }

    #[test]
    fn a0_on_constants() {
        // interior exactly zero, boundary -(sin a / R)(-cos a + b/(R sin^2 a));
        // half-sphere R = 0.5, b = 0.5 gives -2
        let cap = make_cap(1.0, 0.5, 0.5).unwrap();
        let grid = Grid::for_cap(&cap, 16, 32).unwrap();
        let one = Field::from_fn(&grid, |_, _| 1.0);
        let out = apply_a0(&one, &cap, &grid);
        for i in 0..grid.n_phi {
            for j in 0..grid.n_theta {
                assert!(out.at(i, j).abs() < 1e-9, "interior {}", out.at(i, j));
            }
            assert!((out.trace[i] + 2.0).abs() < 1e-9, "boundary {}", out.trace[i]);
        }
    }

    #[test]
    fn a0_mean_free_on_higher_modes() {
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        let grid = Grid::for_cap(&cap, 16, 32).unwrap();
        let rho = Field::from_fn(&grid, |phi, theta| theta.sin() * (2.0 * phi).cos());
        let out = apply_a0(&rho, &cap, &grid);
        let mean = reference_area_integral(&grid, &cap, |i, j| out.at(i, j));
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn projection_is_partition_of_identity_on_basis() {
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        let grid = Grid::for_cap(&cap, 16, 32).unwrap();
        let basis = analytic_nullspace(&cap, &grid);
        let (a0, a1, a2, rem) = project_nullspace(&basis.v1, &cap, &grid);
        assert!(a0.abs() < 1e-10 && (a1 - 1.0).abs() < 1e-10 && a2.abs() < 1e-10);
        assert!(rem.max_abs() < 1e-10);
        let combo = basis.v0.scale(3.0).axpy(-2.0, &basis.v2);
        let (a0, a1, a2, _) = project_nullspace(&combo, &cap, &grid);
        assert!((a0 - 3.0).abs() < 1e-10 && a1.abs() < 1e-10 && (a2 + 2.0).abs() < 1e-10);
    }

    #[test]
    fn projection_idempotent_and_kills_a0_range() {
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        let grid = Grid::for_cap(&cap, 16, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let (c1, c2, c3) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let w = Field::from_fn(&grid, |phi, theta| {
                c1 * (theta).cos() + c2 * theta.sin() * phi.sin() + c3 * (2.0 * theta).cos() * (3.0 * phi).cos()
            });
            let (a0, a1, a2, _) = project_nullspace(&w, &cap, &grid);
            let basis = analytic_nullspace(&cap, &grid);
            let recon = basis.v0.scale(a0).axpy(a1, &basis.v1).axpy(a2, &basis.v2);
            let (b0, b1, b2, _) = project_nullspace(&recon, &cap, &grid);
            assert!((a0 - b0).abs() < 1e-12 && (a1 - b1).abs() < 1e-12 && (a2 - b2).abs() < 1e-12);

            // P A0 = 0 in the a0 slot: exact by shared quadrature
            let img = apply_a0(&w, &cap, &grid);
            let (g0, _, _, _) = project_nullspace(&img, &cap, &grid);
            assert!(g0.abs() < 1e-11, "a0(A0 w) = {g0}");
        }
    }
}
