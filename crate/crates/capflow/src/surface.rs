//! Discrete differential geometry of embedded height-function surfaces.
//!
//! An embedding evaluates X = Psi(P(phi, theta), rho) on the grid and
//! differentiates the points directly: centered periodic stencils in phi,
//! the precomputed polar stencils in theta (with the antipodal ghost level
//! near the pole). Sign conventions are global: the normal points away from
//! the enclosed region, a sphere of radius R has mean curvature H = -2/R,
//! and the contact circle of radius r has geodesic curvature -1/r.

use crate::cap::CapParams;
use crate::chart::{Chart, SurfacePoint};
use crate::error::{Error, Result};
use crate::grid::{apply_theta_stencil, spectral_dphi2, Field, Grid};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Evaluated surface with metric, curvature and area-element fields on all
/// levels 0..=n_theta (the last level is the contact curve).
#[derive(Debug, Clone)]
pub struct Embedding {
    pub n_phi: usize,
    pub n_levels: usize,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// First fundamental form E = <X_phi, X_phi>, F = <X_phi, X_theta>,
    /// G = <X_theta, X_theta>.
    pub e1: Vec<f64>,
    pub f1: Vec<f64>,
    pub g1: Vec<f64>,
    /// Second fundamental form e = <X_phiphi, n>, f = <X_phitheta, n>,
    /// g2 = <X_thetatheta, n>.
    pub e2: Vec<f64>,
    pub f2: Vec<f64>,
    pub g2: Vec<f64>,
    /// Mean curvature (sum of principal curvatures).
    pub hfield: Vec<f64>,
    /// Area element sqrt(det) = |X_phi x X_theta|.
    pub sqrt_det: Vec<f64>,
    /// Tangent vectors, kept for boundary geometry.
    pub x_phi: Vec<Vec3>,
    pub x_phiphi: Vec<Vec3>,
}

impl Embedding {
    #[inline]
    pub fn idx(&self, i: usize, level: usize) -> usize {
        i * self.n_levels + level
    }

    pub fn n_theta(&self) -> usize {
        self.n_levels - 1
    }
}

/// Evaluate the surface for height field `rho` over the chart.
pub fn embed(grid: &Grid, rho: &Field, chart: &Chart) -> Result<Embedding> {
    let np = grid.n_phi;
    let nl = grid.n_theta + 1;
    let eps0 = chart.epsilon0;
    let mut points = vec![[0.0; 3]; np * nl];
    for i in 0..np {
        for l in 0..nl {
            let w = rho.at_level(i, l);
            if w.abs() >= eps0 {
                return Err(Error::OffsetOutOfChart { w, epsilon0: eps0 });
            }
            let p = SurfacePoint { phi: grid.phi[i], theta: grid.level_theta(l) };
            points[i * nl + l] = chart.psi_unchecked(p, w);
        }
    }
    embed_points(grid, points)
}

/// Differentiate a precomputed point cloud laid out like an embedding.
fn embed_points(grid: &Grid, points: Vec<Vec3>) -> Result<Embedding> {
    let np = grid.n_phi;
    let nl = grid.n_theta + 1;
    let idx = |i: usize, l: usize| i * nl + l;

    // phi derivatives per level: periodic centered 5-point (4th order, so
    // the azimuthal symbol stays close to the exact one used by the
    // reference-cap operators)
    let mut x_phi = vec![[0.0; 3]; np * nl];
    let mut x_phiphi = vec![[0.0; 3]; np * nl];
    let w1 = [1.0, -8.0, 8.0, -1.0].map(|w| w / (12.0 * grid.h_phi));
    let w2 = [-1.0, 16.0, -30.0, 16.0, -1.0].map(|w| w / (12.0 * grid.h_phi * grid.h_phi));
    for i in 0..np {
        let ipp = (i + 2) % np;
        let ip = (i + 1) % np;
        let im = (i + np - 1) % np;
        let imm = (i + np - 2) % np;
        for l in 0..nl {
            let pp = points[idx(ipp, l)];
            let p = points[idx(ip, l)];
            let c = points[idx(i, l)];
            let m = points[idx(im, l)];
            let mm = points[idx(imm, l)];
            for k in 0..3 {
                x_phi[idx(i, l)][k] = w1[0] * mm[k] + w1[1] * m[k] + w1[2] * p[k] + w1[3] * pp[k];
                x_phiphi[idx(i, l)][k] = w2[0] * mm[k]
                    + w2[1] * m[k]
                    + w2[2] * c[k]
                    + w2[3] * p[k]
                    + w2[4] * pp[k];
            }
        }
    }

    // theta derivatives; ghost levels map to the antipodal column
    let apply = |arr: &Vec<Vec3>, st: &crate::grid::Stencil, i: usize| -> Vec3 {
        let mut acc = [0.0; 3];
        for (k, w) in st.weights.iter().enumerate() {
            let (ii, ll) = grid.resolve_level(i, st.start + k as isize);
            let v = arr[idx(ii, ll)];
            for c in 0..3 {
                acc[c] += w * v[c];
            }
        }
        acc
    };

    let mut normals = vec![[0.0; 3]; np * nl];
    let mut e1 = vec![0.0; np * nl];
    let mut f1 = vec![0.0; np * nl];
    let mut g1 = vec![0.0; np * nl];
    let mut e2 = vec![0.0; np * nl];
    let mut f2 = vec![0.0; np * nl];
    let mut g2v = vec![0.0; np * nl];
    let mut hfield = vec![0.0; np * nl];
    let mut sqrt_det = vec![0.0; np * nl];

    for i in 0..np {
        for l in 0..nl {
            let xt = apply(&points, &grid.d1[l], i);
            let xtt = apply(&points, &grid.d2[l], i);
            let xpt = apply(&x_phi, &grid.d1[l], i);
            let xp = x_phi[idx(i, l)];
            let xpp = x_phiphi[idx(i, l)];

            let cr = cross(xp, xt);
            let sd = norm(cr);
            if sd < 1e-12 {
                return Err(Error::DegenerateMetric { i_phi: i, level: l });
            }
            let n = [cr[0] / sd, cr[1] / sd, cr[2] / sd];

            let ee = dot(xp, xp);
            let ff = dot(xp, xt);
            let gg = dot(xt, xt);
            let le = dot(xpp, n);
            let lf = dot(xpt, n);
            let lg = dot(xtt, n);
            let den = ee * gg - ff * ff;

            let j = idx(i, l);
            normals[j] = n;
            e1[j] = ee;
            f1[j] = ff;
            g1[j] = gg;
            e2[j] = le;
            f2[j] = lf;
            g2v[j] = lg;
            sqrt_det[j] = sd;
            hfield[j] = (le * gg - 2.0 * lf * ff + lg * ee) / den;
        }
    }

    Ok(Embedding {
        n_phi: np,
        n_levels: nl,
        points,
        normals,
        e1,
        f1,
        g1,
        e2,
        f2,
        g2: g2v,
        hfield,
        sqrt_det,
        x_phi,
        x_phiphi,
    })
}

/// Surface integral of per-node values over the cap (midpoint in theta,
/// rectangle rule in the periodic phi direction).
pub fn area_integral_fn(emb: &Embedding, grid: &Grid, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.n_phi {
        for j in 0..grid.n_theta {
            acc += f(i, j) * emb.sqrt_det[emb.idx(i, j)] * grid.theta_weights[j];
        }
    }
    acc * grid.h_phi
}

pub fn area_integral(emb: &Embedding, grid: &Grid, f: &Field) -> f64 {
    area_integral_fn(emb, grid, |i, j| f.at(i, j))
}

pub fn area(emb: &Embedding, grid: &Grid) -> f64 {
    area_integral_fn(emb, grid, |_, _| 1.0)
}

/// Area average of the mean curvature.
pub fn mean_of_h(emb: &Embedding, grid: &Grid) -> f64 {
    area_integral_fn(emb, grid, |i, j| emb.hfield[emb.idx(i, j)]) / area(emb, grid)
}

fn check_contact_planar(emb: &Embedding, scale: f64) -> Result<()> {
    let nl = emb.n_levels;
    let max_abs_z = (0..emb.n_phi)
        .map(|i| emb.points[i * nl + nl - 1][2].abs())
        .fold(0.0f64, f64::max);
    if max_abs_z > 1e-8 * scale {
        Err(Error::ContactNotPlanar { max_abs_z })
    } else {
        Ok(())
    }
}

/// Volume enclosed between the surface and the plane z = 0, computed as
/// (1/3) int <X, n> dA; the planar facet contributes nothing on z = 0.
pub fn enclosed_volume(emb: &Embedding, grid: &Grid, cap: &CapParams) -> Result<f64> {
    check_contact_planar(emb, cap.radius)?;
    Ok(area_integral_fn(emb, grid, |i, j| {
        let k = emb.idx(i, j);
        dot(emb.points[k], emb.normals[k])
    }) / 3.0)
}

/// Length of the contact curve (chordal sum, second order).
pub fn contact_length(emb: &Embedding) -> f64 {
    let nl = emb.n_levels;
    let mut acc = 0.0;
    for i in 0..emb.n_phi {
        let a = emb.points[i * nl + nl - 1];
        let b = emb.points[((i + 1) % emb.n_phi) * nl + nl - 1];
        acc += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    }
    acc
}

/// Wetted area enclosed by the contact curve (shoelace).
pub fn wetted_area(emb: &Embedding) -> f64 {
    let nl = emb.n_levels;
    let mut acc = 0.0;
    for i in 0..emb.n_phi {
        let a = emb.points[i * nl + nl - 1];
        let b = emb.points[((i + 1) % emb.n_phi) * nl + nl - 1];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * acc.abs()
}

/// Total energy Area(Gamma) - a Area(D) + b Length(contact curve).
pub fn energy(emb: &Embedding, grid: &Grid, a: f64, b: f64) -> f64 {
    area(emb, grid) - a * wetted_area(emb) + b * contact_length(emb)
}

/// Geometry of the contact curve.
#[derive(Debug, Clone)]
pub struct BoundaryQuantities {
    /// Signed planar curvature; -1/r on a circle of radius r.
    pub kappa: Vec<f64>,
    /// <n_Gamma, n_D> with n_D = -e3.
    pub cos_angle: Vec<f64>,
    /// Outward in-plane conormal of the wetted region.
    pub conormal: Vec<Vec3>,
    /// |dc/dphi|, converts phi derivatives to arc-length derivatives.
    pub speed: Vec<f64>,
}

pub fn boundary_quantities(emb: &Embedding, cap: &CapParams) -> Result<BoundaryQuantities> {
    check_contact_planar(emb, cap.radius)?;
    let nl = emb.n_levels;
    let np = emb.n_phi;
    let mut kappa = Vec::with_capacity(np);
    let mut cos_angle = Vec::with_capacity(np);
    let mut conormal = Vec::with_capacity(np);
    let mut speed = Vec::with_capacity(np);
    for i in 0..np {
        let k = i * nl + nl - 1;
        let d1 = emb.x_phi[k];
        let d2 = emb.x_phiphi[k];
        let sp = (d1[0] * d1[0] + d1[1] * d1[1]).sqrt();
        kappa.push((d1[0] * d2[1] - d1[1] * d2[0]) / (sp * sp * sp));
        cos_angle.push(-emb.normals[k][2]);
        conormal.push([-d1[1] / sp, d1[0] / sp, 0.0]);
        speed.push(sp);
    }
    Ok(BoundaryQuantities { kappa, cos_angle, conormal, speed })
}

/// Laplace-Beltrami operator of the reference cap applied to a field:
/// (1/R^2) (rho_thth + cot(theta) rho_th + rho_phph / sin^2(theta)),
/// evaluated on every level including the boundary. The azimuthal part uses
/// the exact-symbol circulant: the 1/sin^2(theta) weight near the pole
/// would amplify a finite-difference phi truncation to O(h_phi^2 / h_theta).
pub fn laplace_beltrami_reference(grid: &Grid, rho: &Field, cap: &CapParams) -> Field {
    let inv_r2 = 1.0 / (cap.radius * cap.radius);
    let mut out = Field::zeros(grid);
    for i in 0..grid.n_phi {
        for l in 0..=grid.n_theta {
            let theta = grid.level_theta(l);
            let (st, ct) = theta.sin_cos();
            let d1 = apply_theta_stencil(grid, rho, &grid.d1[l], i);
            let d2 = apply_theta_stencil(grid, rho, &grid.d2[l], i);
            let dpp = spectral_dphi2(grid, rho, i, l);
            let v = inv_r2 * (d2 + ct / st * d1 + dpp / (st * st));
            if l < grid.n_theta {
                *out.at_mut(i, l) = v;
            } else {
                out.trace[i] = v;
            }
        }
    }
    out
}

/// First derivative in theta at the boundary level (one-sided window).
pub fn boundary_dtheta(grid: &Grid, rho: &Field, i: usize) -> f64 {
    apply_theta_stencil(grid, rho, &grid.d1[grid.n_theta], i)
}
