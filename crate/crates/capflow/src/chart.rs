//! Curvilinear chart over the reference cap.
//!
//! Points of an evolving surface are written as
//!
//!   Psi(q, w) = q + w n(q) - w eta(theta) cot(alpha) T(q),
//!
//! where q = P(phi, theta) lies on the reference cap, n is its outward
//! normal, T = (sin(phi) cos(theta), cos(phi) cos(theta), -sin(theta)) is the
//! unit tangential field pointing towards the contact curve, and eta is a
//! cutoff with eta(theta_max) = 1. The tangential correction keeps boundary
//! points exactly on the plane z = 0 for every offset w.

use crate::cap::CapParams;
use crate::error::{Error, Result};

/// Point on the reference cap in spherical coordinates, phi in [0, 2 pi),
/// theta in [0, theta_max].
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub phi: f64,
    pub theta: f64,
}

/// C^2 cutoff eta supported on [theta_max - delta, theta_max], rising from 0
/// to 1 along the quintic smoothstep 6x^5 - 15x^4 + 10x^3.
#[derive(Debug, Clone, Copy)]
pub struct CutoffProfile {
    pub theta_max: f64,
    pub delta: f64,
}

impl CutoffProfile {
    /// Default support width (pi - alpha)/4.
    pub fn for_cap(cap: &CapParams) -> Self {
        let theta_max = cap.theta_max();
        CutoffProfile { theta_max, delta: theta_max / 4.0 }
    }

    pub fn with_width(cap: &CapParams, delta: f64) -> Self {
        let theta_max = cap.theta_max();
        assert!(delta > 0.0 && delta < theta_max);
        CutoffProfile { theta_max, delta }
    }

    pub fn eta(&self, theta: f64) -> f64 {
        if theta >= self.theta_max {
            return 1.0;
        }
        let x = (theta - (self.theta_max - self.delta)) / self.delta;
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            x * x * x * (10.0 + x * (6.0 * x - 15.0))
        }
    }
}

/// Reference cap together with its chart data.
#[derive(Debug, Clone)]
pub struct Chart {
    pub cap: CapParams,
    pub cutoff: CutoffProfile,
    /// Chart half-width: offsets must satisfy |w| < epsilon0.
    pub epsilon0: f64,
}

impl Chart {
    pub fn new(cap: CapParams) -> Self {
        let cutoff = CutoffProfile::for_cap(&cap);
        let epsilon0 = 0.3 * cap.radius;
        Chart { cap, cutoff, epsilon0 }
    }

    pub fn with_cutoff(cap: CapParams, cutoff: CutoffProfile) -> Self {
        let epsilon0 = 0.3 * cap.radius;
        Chart { cap, cutoff, epsilon0 }
    }

    /// P(phi, theta) = (R sin(phi) sin(theta), R cos(phi) sin(theta), R cos(theta) + H).
    pub fn reference_point(&self, p: SurfacePoint) -> [f64; 3] {
        let (sp, cp) = p.phi.sin_cos();
        let (st, ct) = p.theta.sin_cos();
        let radius = self.cap.radius;
        [radius * sp * st, radius * cp * st, radius * ct + self.cap.h_center]
    }

    /// Outward unit normal of the reference cap.
    pub fn reference_normal(&self, p: SurfacePoint) -> [f64; 3] {
        let (sp, cp) = p.phi.sin_cos();
        let (st, ct) = p.theta.sin_cos();
        [sp * st, cp * st, ct]
    }

    /// Unit tangential field towards the contact curve.
    pub fn tangent_field(&self, p: SurfacePoint) -> [f64; 3] {
        let (sp, cp) = p.phi.sin_cos();
        let (st, ct) = p.theta.sin_cos();
        [sp * ct, cp * ct, -st]
    }

    fn check_offset(&self, w: f64) -> Result<()> {
        if w.abs() >= self.epsilon0 {
            Err(Error::OffsetOutOfChart { w, epsilon0: self.epsilon0 })
        } else {
            Ok(())
        }
    }

    /// Chart map Psi(q, w); boundary points (theta = theta_max) stay on z = 0.
    pub fn psi(&self, p: SurfacePoint, w: f64) -> Result<[f64; 3]> {
        self.check_offset(w)?;
        Ok(self.psi_unchecked(p, w))
    }

    pub fn psi_unchecked(&self, p: SurfacePoint, w: f64) -> [f64; 3] {
        let q = self.reference_point(p);
        let n = self.reference_normal(p);
        let t = self.tangent_field(p);
        let cot = self.cap.cos_alpha / self.cap.sin_alpha;
        let tang = -w * self.cutoff.eta(p.theta) * cot;
        [q[0] + w * n[0] + tang * t[0], q[1] + w * n[1] + tang * t[1], q[2] + w * n[2] + tang * t[2]]
    }

    /// d/dw Psi(q, w) = n(q) - eta(theta) cot(alpha) T(q); independent of w.
    pub fn dpsi_dw(&self, p: SurfacePoint, w: f64) -> Result<[f64; 3]> {
        self.check_offset(w)?;
        Ok(self.dpsi_dw_unchecked(p))
    }

    pub fn dpsi_dw_unchecked(&self, p: SurfacePoint) -> [f64; 3] {
        let n = self.reference_normal(p);
        let t = self.tangent_field(p);
        let c = -self.cutoff.eta(p.theta) * self.cap.cos_alpha / self.cap.sin_alpha;
        [n[0] + c * t[0], n[1] + c * t[1], n[2] + c * t[2]]
    }
}
