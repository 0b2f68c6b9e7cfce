//! Fourier-mode eigenproblems of the linearized boundary-coupled operator.
//!
//! Separating the azimuthal dependence exp(i k phi) reduces the linearized
//! operator on the cap to a family of Sturm-Liouville problems on
//! [0, pi - alpha] with the eigenvalue also appearing in the boundary
//! condition. The problems are discretized variationally with piecewise
//! linear elements: for mode k the stiffness realizes
//!
//!   B(u,v) = int u' v' sin(th) - (2 - k^2/sin^2(th)) u v sin(th) dth
//!          + (cos(alpha) - b (1-k^2) / (R sin^2(alpha))) u(th_max) v(th_max)
//!
//! and the mass carries the weighted inner product R^2 sin(th) dth plus the
//! boundary weight R / sin(alpha). The boundary degree of freedom is an
//! ordinary unknown, which encodes the dynamic (eigenvalue-in-boundary)
//! coupling without any special casing. For k >= 1 the pole node is an
//! essential zero; for k = 0 the sin(th) weight enforces regularity weakly.

use crate::cap::CapParams;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const GAUSS_OFFSET: f64 = 0.288675134594812_9; // 1/(2 sqrt(3))

/// Assembled matrices of one azimuthal mode.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub k: usize,
    /// FEM nodes on [0, theta_max]; length n_theta + 1.
    pub nodes: Vec<f64>,
    /// True when the pole node is eliminated (k >= 1).
    pub pole_constrained: bool,
    /// Stiffness and mass over the retained degrees of freedom.
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    cap: CapParams,
}

/// Eigenpairs of one mode, vectors given on the full node set (pole entry
/// zero when constrained), M-orthonormal, ascending.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub k: usize,
    pub nodes: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

impl ModeSolution {
    /// Piecewise-linear evaluation of one eigenfunction.
    pub fn eval(&self, index: usize, theta: f64) -> f64 {
        let v = &self.vectors[index];
        let n = self.nodes.len();
        let h = self.nodes[1] - self.nodes[0];
        let t = (theta / h).floor();
        let j = (t as usize).min(n - 2);
        let s = (theta - self.nodes[j]) / h;
        v[j] * (1.0 - s) + v[j + 1] * s
    }
}

/// Assemble the mode-k system with n_theta elements.
pub fn assemble_mode(k: usize, cap: &CapParams, n_theta: usize) -> Result<ModeSystem> {
    if n_theta < 16 {
        return Err(Error::InvalidDiscretization {
            reason: format!("mode assembly needs n_theta >= 16, got {n_theta}"),
        });
    }
    let theta_max = cap.theta_max();
    let n = n_theta;
    let h = theta_max / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|m| m as f64 * h).collect();
    let k2 = (k * k) as f64;
    let r2 = cap.radius * cap.radius;

    let mut kk = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut mm = DMatrix::<f64>::zeros(n + 1, n + 1);

    for e in 0..n {
        let xl = nodes[e];
        let mid = xl + 0.5 * h;
        let gauss = [mid - GAUSS_OFFSET * h, mid + GAUSS_OFFSET * h];
        // local basis: phi_l = (x_r - x)/h, phi_r = (x - x_l)/h
        let grad = [-1.0 / h, 1.0 / h];
        for gx in gauss {
            let w = 0.5 * h;
            let s = gx.sin();
            let val = [(nodes[e + 1] - gx) / h, (gx - xl) / h];
            for a in 0..2 {
                for b in 0..2 {
                    kk[(e + a, e + b)] += w * (grad[a] * grad[b] * s - 2.0 * val[a] * val[b] * s);
                    mm[(e + a, e + b)] += w * r2 * val[a] * val[b] * s;
                }
            }
        }
        if k > 0 {
            // singular weight k^2 / sin(theta): midpoint on the first
            // element (integrand finite but endpoint singular), Gauss after
            if e == 0 {
                let s = mid.sin();
                let val = [0.5, 0.5];
                for a in 0..2 {
                    for b in 0..2 {
                        kk[(e + a, e + b)] += h * k2 * val[a] * val[b] / s;
                    }
                }
            } else {
                for gx in gauss {
                    let w = 0.5 * h;
                    let val = [(nodes[e + 1] - gx) / h, (gx - xl) / h];
                    for a in 0..2 {
                        for b in 0..2 {
                            kk[(e + a, e + b)] += w * k2 * val[a] * val[b] / gx.sin();
                        }
                    }
                }
            }
        }
    }

    // boundary degree of freedom: Wentzell coupling and its mass weight
    let sa = cap.sin_alpha;
    kk[(n, n)] += cap.cos_alpha - cap.b * (1.0 - k2) / (cap.radius * sa * sa);
    mm[(n, n)] += cap.radius / sa;

    let (stiffness, mass) = if k >= 1 {
        (kk.view((1, 1), (n, n)).into_owned(), mm.view((1, 1), (n, n)).into_owned())
    } else {
        (kk, mm)
    };

    Ok(ModeSystem {
        k,
        nodes,
        pole_constrained: k >= 1,
        stiffness,
        mass,
        cap: cap.clone(),
    })
}

/// Insert the constrained pole entry back into a solution vector.
fn pad_pole(sys: &ModeSystem, x: DVector<f64>) -> DVector<f64> {
    if !sys.pole_constrained {
        return x;
    }
    let mut full = DVector::zeros(x.len() + 1);
    full.rows_mut(1, x.len()).copy_from(&x);
    full
}

/// Solve the symmetric definite pencil K x = lambda M x.
pub fn solve_mode(sys: &ModeSystem) -> Result<ModeSolution> {
    let chol = nalgebra::Cholesky::new(sys.mass.clone()).ok_or(Error::SolverFailure {
        reason: "mass matrix not positive definite".into(),
    })?;
    let l = chol.l();
    // A = L^-1 K L^-T
    let mut a = sys.stiffness.clone();
    l.solve_lower_triangular_mut(&mut a);
    a.transpose_mut();
    l.solve_lower_triangular_mut(&mut a);
    // enforce exact symmetry against assembly rounding
    let at = a.transpose();
    a = (a + at) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(a, 1e-13, 10_000).ok_or(Error::SolverFailure {
        reason: format!("symmetric eigensolver did not converge (mode {})", sys.k),
    })?;

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut vectors = Vec::with_capacity(order.len());
    for &i in &order {
        eigenvalues.push(eig.eigenvalues[i]);
        let y = eig.eigenvectors.column(i).into_owned();
        let x = lt.solve_upper_triangular(&y).ok_or(Error::SolverFailure {
            reason: "back substitution failed".into(),
        })?;
        vectors.push(pad_pole(sys, x));
    }
    Ok(ModeSolution { k: sys.k, nodes: sys.nodes.clone(), eigenvalues, vectors })
}

/// Linear functional computing the cap average of (Laplacian + |sigma|^2)
/// applied to a mode-0 coefficient vector: the Laplacian integrates to the
/// boundary flux 2 pi sin(alpha) g'(theta_max) (Gauss' theorem), the zero
/// order part to the weighted mean.
fn mode0_average_functional(sys: &ModeSystem) -> DVector<f64> {
    let cap = &sys.cap;
    let n = sys.nodes.len() - 1;
    let h = sys.nodes[1] - sys.nodes[0];
    let area = 2.0 * std::f64::consts::PI * cap.radius * cap.radius * (1.0 + cap.cos_alpha);
    let mut c = DVector::zeros(n + 1);
    // flux: one-sided second-order slope at theta_max
    let flux = 2.0 * std::f64::consts::PI * cap.sin_alpha;
    c[n] += flux * 1.5 / h;
    c[n - 1] += flux * (-2.0) / h;
    c[n - 2] += flux * 0.5 / h;
    // |sigma|^2 weighted integral: (2/R^2) * 2 pi R^2 int g sin = 4 pi int g sin
    for e in 0..n {
        let xl = sys.nodes[e];
        let mid = xl + 0.5 * h;
        for gx in [mid - GAUSS_OFFSET * h, mid + GAUSS_OFFSET * h] {
            let w = 0.5 * h;
            let s = gx.sin();
            c[e] += 4.0 * std::f64::consts::PI * w * (sys.nodes[e + 1] - gx) / h * s;
            c[e + 1] += 4.0 * std::f64::consts::PI * w * (gx - xl) / h * s;
        }
    }
    c / area
}

/// Load vector of the pair (1, 0) in the weighted inner product.
fn mode0_constant_load(sys: &ModeSystem) -> DVector<f64> {
    let n = sys.nodes.len() - 1;
    let h = sys.nodes[1] - sys.nodes[0];
    let r2 = sys.cap.radius * sys.cap.radius;
    let mut w = DVector::zeros(n + 1);
    for e in 0..n {
        let xl = sys.nodes[e];
        let mid = xl + 0.5 * h;
        for gx in [mid - GAUSS_OFFSET * h, mid + GAUSS_OFFSET * h] {
            let wq = 0.5 * h;
            let s = gx.sin();
            w[e] += r2 * wq * (sys.nodes[e + 1] - gx) / h * s;
            w[e + 1] += r2 * wq * (gx - xl) / h * s;
        }
    }
    w
}

/// Spectrum of the mode-0 operator with the nonlocal volume term: the
/// rank-one addition g -> mean(Laplacian + |sigma|^2) g on the interior
/// component makes the problem nonsymmetric; solved densely.
#[derive(Debug, Clone)]
pub struct Mode0Nonlocal {
    pub eigenvalues: Vec<f64>,
    pub nodes: Vec<f64>,
    system: ModeSystem,
    rank_one: DMatrix<f64>,
}

pub fn nonlocal_mode0(sys: &ModeSystem) -> Result<Mode0Nonlocal> {
    assert_eq!(sys.k, 0, "nonlocal correction applies to mode 0 only");
    let w = mode0_constant_load(sys);
    let c = mode0_average_functional(sys);
    let rank_one = &w * c.transpose();
    let full = &sys.stiffness + &rank_one;

    let chol = nalgebra::Cholesky::new(sys.mass.clone()).ok_or(Error::SolverFailure {
        reason: "mass matrix not positive definite".into(),
    })?;
    let l = chol.l();
    let mut a = full.clone();
    l.solve_lower_triangular_mut(&mut a);
    a.transpose_mut();
    l.solve_lower_triangular_mut(&mut a);
    a.transpose_mut();

    let schur = nalgebra::Schur::try_new(a, 1e-12, 100_000).ok_or(Error::SolverFailure {
        reason: "Schur iteration did not converge for the nonlocal mode-0 solve".into(),
    })?;
    let ev = schur.complex_eigenvalues();
    let radius = ev.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let max_im = ev.iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);
    if max_im > 1e-8 * radius {
        return Err(Error::ComplexSpectrum { max_im, radius });
    }
    let mut eigenvalues: Vec<f64> = ev.iter().map(|z| z.re).collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(Mode0Nonlocal { eigenvalues, nodes: sys.nodes.clone(), system: sys.clone(), rank_one })
}

impl Mode0Nonlocal {
    /// Eigenvector for the eigenvalue nearest `target` by inverse iteration
    /// on the shifted pencil; returned with unit weighted norm.
    pub fn eigenvector_near(&self, target: f64) -> Result<DVector<f64>> {
        let n = self.nodes.len();
        let full = &self.system.stiffness + &self.rank_one;
        // small detuning keeps the shifted matrix invertible
        let scale = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let shifted = &full - &(self.system.mass.clone() * (target + 1e-10 * scale.max(1.0)));
        let lu = shifted.lu();
        let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        for _ in 0..6 {
            let rhs = &self.system.mass * &x;
            x = lu.solve(&rhs).ok_or(Error::SolverFailure {
                reason: "inverse iteration solve failed".into(),
            })?;
            let nrm = (x.dot(&(&self.system.mass * &x))).sqrt();
            x /= nrm;
        }
        Ok(x)
    }
}

/// Analytic eigenvalues of the reflection-symmetric (d = 0) half-sphere
/// problem: lambda = (l(l+1) - 2)/R^2 with l = k, k+2, k+4, ...
pub fn halfsphere_reference(cap: &CapParams, k_max: usize, l_max: usize) -> Result<Vec<Vec<f64>>> {
    if cap.cos_alpha.abs() > 1e-12 {
        return Err(Error::NotHalfsphere { cos_alpha: cap.cos_alpha });
    }
    let r2 = cap.radius * cap.radius;
    let mut table = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut row = Vec::new();
        let mut l = k;
        while l <= l_max {
            row.push(((l * (l + 1)) as f64 - 2.0) / r2);
            l += 2;
        }
        table.push(row);
    }
    Ok(table)
}

/// Assemble the d-homotopy system of the half-sphere in the normalized
/// variables mu = R^2 lambda + 2: the boundary stiffness and boundary mass
/// are both scaled by d, so d = 0 is the natural Neumann problem and d = 1
/// reproduces the full dynamic boundary coupling.
fn assemble_homotopy(k: usize, cap: &CapParams, n_theta: usize, d: f64) -> Result<ModeSystem> {
    if cap.cos_alpha.abs() > 1e-12 {
        return Err(Error::NotHalfsphere { cos_alpha: cap.cos_alpha });
    }
    let theta_max = cap.theta_max();
    let n = n_theta;
    let h = theta_max / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|m| m as f64 * h).collect();
    let k2 = (k * k) as f64;

    let mut kk = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut mm = DMatrix::<f64>::zeros(n + 1, n + 1);
    for e in 0..n {
        let xl = nodes[e];
        let mid = xl + 0.5 * h;
        let gauss = [mid - GAUSS_OFFSET * h, mid + GAUSS_OFFSET * h];
        let grad = [-1.0 / h, 1.0 / h];
        for gx in gauss {
            let w = 0.5 * h;
            let s = gx.sin();
            let val = [(nodes[e + 1] - gx) / h, (gx - xl) / h];
            for a in 0..2 {
                for b in 0..2 {
                    kk[(e + a, e + b)] += w * grad[a] * grad[b] * s;
                    mm[(e + a, e + b)] += w * val[a] * val[b] * s;
                }
            }
        }
        if k > 0 {
            if e == 0 {
                let s = mid.sin();
                for a in 0..2 {
                    for b in 0..2 {
                        kk[(e + a, e + b)] += h * k2 * 0.25 / s;
                    }
                }
            } else {
                for gx in gauss {
                    let w = 0.5 * h;
                    let val = [(nodes[e + 1] - gx) / h, (gx - xl) / h];
                    for a in 0..2 {
                        for b in 0..2 {
                            kk[(e + a, e + b)] += w * k2 * val[a] * val[b] / gx.sin();
                        }
                    }
                }
            }
        }
    }
    kk[(n, n)] += -(d / cap.radius) * (cap.b * (1.0 - k2) - 2.0);
    mm[(n, n)] += d / cap.radius;

    let (stiffness, mass) = if k >= 1 {
        (kk.view((1, 1), (n, n)).into_owned(), mm.view((1, 1), (n, n)).into_owned())
    } else {
        (kk, mm)
    };
    Ok(ModeSystem { k, nodes, pole_constrained: k >= 1, stiffness, mass, cap: cap.clone() })
}

/// Eigenvalue curves of the d-homotopy, matched across d by sorted order.
#[derive(Debug, Clone)]
pub struct HomotopyCurves {
    pub d_values: Vec<f64>,
    /// lambdas[k][di] = sorted eigenvalues of mode k at d_values[di].
    pub lambdas: Vec<Vec<Vec<f64>>>,
}

pub fn homotopy_spectrum(
    cap: &CapParams,
    d_values: &[f64],
    k_max: usize,
    n_theta: usize,
) -> Result<HomotopyCurves> {
    let r2 = cap.radius * cap.radius;
    let mut lambdas = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut per_d = Vec::with_capacity(d_values.len());
        for &d in d_values {
            let sys = assemble_homotopy(k, cap, n_theta, d)?;
            let sol = solve_mode(&sys)?;
            per_d.push(sol.eigenvalues.iter().map(|mu| (mu - 2.0) / r2).collect());
        }
        lambdas.push(per_d);
    }
    Ok(HomotopyCurves { d_values: d_values.to_vec(), lambdas })
}
