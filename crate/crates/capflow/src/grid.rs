//! Tensor-product lattice on the cap chart and scalar fields over it.
//!
//! The azimuth is uniform and periodic, phi_i = 2 pi i / n_phi. The polar
//! direction is cell-centered, theta_j = (j + 1/2) h with h = theta_max /
//! n_theta, so no node sits on the coordinate pole, plus one boundary
//! collocation level at theta = theta_max. Level indices run 0..=n_theta
//! where level n_theta is the boundary.
//!
//! Polar derivative stencils are 5-point windows precomputed per level.
//! Near the pole the windows reach across it through ghost levels built
//! from the antipodal rule f(-theta, phi) = f(theta, phi + pi); the wide
//! windows keep the cot(theta)-weighted first derivative second-order in
//! the sup norm all the way to the first ring. The last levels share a
//! one-sided window spanning the half-cell gap at the boundary.
//!
//! Azimuthal second derivatives come in two flavours: centered 3-point
//! differences (used on embedded geometry) and an exact-symbol circulant
//! (used by the reference-cap operators, where the 1/sin^2(theta) weight
//! would otherwise amplify the phi truncation error near the pole).

use crate::cap::CapParams;
use crate::error::{Error, Result};

/// Finite-difference weights for the m-th derivative at `x0` from arbitrary
/// nodes `xs` (Fornberg's recursion).
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m);
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Stencil over theta levels; negative levels refer to ghosts across the pole.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub start: isize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub n_phi: usize,
    pub n_theta: usize,
    pub theta_max: f64,
    pub h_phi: f64,
    pub h_theta: f64,
    /// Cell-centered polar nodes, length n_theta.
    pub theta: Vec<f64>,
    /// Azimuthal nodes, length n_phi.
    pub phi: Vec<f64>,
    /// Midpoint quadrature weights for the cell-centered levels.
    pub theta_weights: Vec<f64>,
    /// First/second derivative stencils per level 0..=n_theta.
    pub d1: Vec<Stencil>,
    pub d2: Vec<Stencil>,
    /// Circulant row of the exact-symbol azimuthal second derivative:
    /// (d^2 f / d phi^2)_i = sum_m spec_d2[m] f_{(i+m) mod n_phi}.
    pub spec_d2: Vec<f64>,
}

impl Grid {
    pub fn new(n_phi: usize, n_theta: usize, theta_max: f64) -> Result<Grid> {
        if n_phi < 8 || n_phi % 2 != 0 {
            return Err(Error::InvalidDiscretization {
                reason: format!("n_phi = {n_phi} must be even and at least 8"),
            });
        }
        if n_theta < 8 {
            return Err(Error::InvalidDiscretization {
                reason: format!("n_theta = {n_theta} must be at least 8"),
            });
        }
        let h_theta = theta_max / n_theta as f64;
        let h_phi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let theta: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * h_theta).collect();
        let phi: Vec<f64> = (0..n_phi).map(|i| i as f64 * h_phi).collect();
        let theta_weights = vec![h_theta; n_theta];

        // level coordinate incl. ghosts (< 0) and boundary (n_theta)
        let coord = |l: isize| -> f64 {
            if l < 0 {
                -((-l) as f64 - 0.5) * h_theta
            } else if (l as usize) < n_theta {
                theta[l as usize]
            } else {
                theta_max
            }
        };

        let mut d1 = Vec::with_capacity(n_theta + 1);
        let mut d2 = Vec::with_capacity(n_theta + 1);
        for l in 0..=n_theta {
            let start = (l as isize - 2).clamp(-2, n_theta as isize - 4);
            let xs: Vec<f64> = (0..5).map(|k| coord(start + k as isize)).collect();
            let x0 = coord(l as isize);
            d1.push(Stencil { start, weights: fd_weights(x0, &xs, 1) });
            d2.push(Stencil { start, weights: fd_weights(x0, &xs, 2) });
        }

        // exact-symbol azimuthal second derivative (circulant row)
        let n = n_phi;
        let mut spec_d2 = vec![0.0; n];
        for (m, c) in spec_d2.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                let keff = k.min(n - k) as f64;
                acc += -keff * keff * (2.0 * std::f64::consts::PI * (k * m % n) as f64 / n as f64).cos();
            }
            *c = acc / n as f64;
        }
        // force an exact zero row sum so constants are annihilated even
        // under the 1/sin^2(theta) amplification near the pole
        let row_sum: f64 = spec_d2.iter().sum();
        let correction = row_sum / n as f64;
        spec_d2.iter_mut().for_each(|c| *c -= correction);

        Ok(Grid {
            n_phi,
            n_theta,
            theta_max,
            h_phi,
            h_theta,
            theta,
            phi,
            theta_weights,
            d1,
            d2,
            spec_d2,
        })
    }

    pub fn for_cap(cap: &CapParams, n_phi: usize, n_theta: usize) -> Result<Grid> {
        Grid::new(n_phi, n_theta, cap.theta_max())
    }

    /// theta coordinate of a level (level n_theta = boundary).
    pub fn level_theta(&self, level: usize) -> f64 {
        if level < self.n_theta {
            self.theta[level]
        } else {
            self.theta_max
        }
    }

    /// Azimuthal index of the antipodal node used by the pole ghost levels.
    pub fn ghost_phi(&self, i: usize) -> usize {
        (i + self.n_phi / 2) % self.n_phi
    }

    /// Resolve a (possibly ghost) level to a concrete (phi index, level).
    #[inline]
    pub fn resolve_level(&self, i: usize, l: isize) -> (usize, usize) {
        if l < 0 {
            (self.ghost_phi(i), (-l - 1) as usize)
        } else {
            (i, l as usize)
        }
    }
}

/// Scalar field on the grid: interior values plus a boundary trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub n_phi: usize,
    pub n_theta: usize,
    /// Row-major, theta fastest: values[i * n_theta + j].
    pub values: Vec<f64>,
    /// Trace at theta = theta_max, length n_phi.
    pub trace: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field {
            n_phi: grid.n_phi,
            n_theta: grid.n_theta,
            values: vec![0.0; grid.n_phi * grid.n_theta],
            trace: vec![0.0; grid.n_phi],
        }
    }

    /// Sample a function of (phi, theta) on all nodes including the trace.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut out = Field::zeros(grid);
        for i in 0..grid.n_phi {
            for j in 0..grid.n_theta {
                out.values[i * grid.n_theta + j] = f(grid.phi[i], grid.theta[j]);
            }
            out.trace[i] = f(grid.phi[i], grid.theta_max);
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.values[i * self.n_theta + j]
    }

    /// Value at a theta level, where level n_theta selects the trace.
    #[inline]
    pub fn at_level(&self, i: usize, level: usize) -> f64 {
        if level < self.n_theta {
            self.values[i * self.n_theta + level]
        } else {
            self.trace[i]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .chain(self.trace.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// self + c * other
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(&other.values) {
            *v += c * o;
        }
        for (v, o) in out.trace.iter_mut().zip(&other.trace) {
            *v += c * o;
        }
        out
    }

    pub fn scale(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out.trace.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Mismatch between the stored trace and the interior extrapolated to
    /// theta_max (trace-compatibility diagnostic).
    pub fn trace_mismatch(&self, grid: &Grid) -> f64 {
        let nt = grid.n_theta;
        let xs = [grid.theta[nt - 3], grid.theta[nt - 2], grid.theta[nt - 1]];
        let w = fd_weights(grid.theta_max, &xs, 0);
        let mut worst = 0.0f64;
        for i in 0..self.n_phi {
            let ex = w[0] * self.at(i, nt - 3) + w[1] * self.at(i, nt - 2) + w[2] * self.at(i, nt - 1);
            worst = worst.max((ex - self.trace[i]).abs());
        }
        worst
    }
}

/// Apply a theta stencil to one azimuthal column of a field, resolving
/// ghost levels through the antipodal rule.
pub fn apply_theta_stencil(grid: &Grid, field: &Field, stencil: &Stencil, i: usize) -> f64 {
    let mut acc = 0.0;
    for (k, w) in stencil.weights.iter().enumerate() {
        let (ii, ll) = grid.resolve_level(i, stencil.start + k as isize);
        acc += w * field.at_level(ii, ll);
    }
    acc
}

/// Centered periodic first derivative in phi at (i, level).
pub fn dphi(grid: &Grid, field: &Field, i: usize, level: usize) -> f64 {
    let n = grid.n_phi;
    let ip = (i + 1) % n;
    let im = (i + n - 1) % n;
    (field.at_level(ip, level) - field.at_level(im, level)) / (2.0 * grid.h_phi)
}

/// Centered periodic second derivative in phi at (i, level).
pub fn dphi2(grid: &Grid, field: &Field, i: usize, level: usize) -> f64 {
    let n = grid.n_phi;
    let ip = (i + 1) % n;
    let im = (i + n - 1) % n;
    (field.at_level(ip, level) - 2.0 * field.at_level(i, level) + field.at_level(im, level))
        / (grid.h_phi * grid.h_phi)
}

/// Exact-symbol azimuthal second derivative at (i, level).
pub fn spectral_dphi2(grid: &Grid, field: &Field, i: usize, level: usize) -> f64 {
    let n = grid.n_phi;
    let mut acc = 0.0;
    for (m, c) in grid.spec_d2.iter().enumerate() {
        acc += c * field.at_level((i + m) % n, level);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_matches_classical_stencils() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert!((w[0] + 0.5).abs() < 1e-14 && w[1].abs() < 1e-14 && (w[2] - 0.5).abs() < 1e-14);
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14 && (w[2] - 1.0).abs() < 1e-14);
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0], 1);
        assert!((w[0] + 1.5).abs() < 1e-14 && (w[1] - 2.0).abs() < 1e-14 && (w[2] + 0.5).abs() < 1e-14);
        // centered 5-point second derivative
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let exact = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn stencils_differentiate_quartics_exactly() {
        let grid = Grid::new(8, 16, 2.0).unwrap();
        let f = |x: f64| 1.0 + 2.0 * x + 0.5 * x * x - 0.25 * x * x * x + 0.1 * x * x * x * x;
        let df = |x: f64| 2.0 + x - 0.75 * x * x + 0.4 * x * x * x;
        let d2f = |x: f64| 1.0 - 1.5 * x + 1.2 * x * x;
        let coord = |ll: isize| -> f64 {
            if ll < 0 {
                -((-ll) as f64 - 0.5) * grid.h_theta
            } else if (ll as usize) < grid.n_theta {
                grid.theta[ll as usize]
            } else {
                grid.theta_max
            }
        };
        for l in 0..=grid.n_theta {
            let x0 = grid.level_theta(l);
            let eval = |st: &Stencil| -> f64 {
                st.weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * f(coord(st.start + k as isize)))
                    .sum()
            };
            assert!((eval(&grid.d1[l]) - df(x0)).abs() < 1e-9, "d1 at level {l}");
            assert!((eval(&grid.d2[l]) - d2f(x0)).abs() < 1e-8, "d2 at level {l}");
        }
    }

    #[test]
    fn ghost_levels_are_antipodal() {
        let grid = Grid::new(8, 8, 1.0).unwrap();
        assert_eq!(grid.ghost_phi(0), 4);
        assert_eq!(grid.ghost_phi(5), 1);
        assert_eq!(grid.resolve_level(0, -1), (4, 0));
        assert_eq!(grid.resolve_level(0, -2), (4, 1));
        assert_eq!(grid.resolve_level(3, 2), (3, 2));
    }

    #[test]
    fn spectral_phi2_is_exact_on_modes() {
        let grid = Grid::new(16, 8, 1.0).unwrap();
        for k in 0..=7usize {
            let f = Field::from_fn(&grid, |phi, _| (k as f64 * phi).cos());
            for i in 0..grid.n_phi {
                let d = spectral_dphi2(&grid, &f, i, 3);
                let exact = -((k * k) as f64) * (k as f64 * grid.phi[i]).cos();
                assert!((d - exact).abs() < 1e-10, "k={k} i={i}: {d} vs {exact}");
            }
        }
    }

    #[test]
    fn field_sampling_and_trace() {
        let grid = Grid::new(8, 8, 1.5).unwrap();
        let f = Field::from_fn(&grid, |phi, theta| phi.cos() * theta);
        assert!((f.at_level(0, 8) - 1.5).abs() < 1e-15);
        assert!(f.trace_mismatch(&grid) < 1e-12);
    }
}
