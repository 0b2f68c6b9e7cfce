//! Closed-form algebra of stationary spherical caps (SSCs).
//!
//! A cap sitting on the plane z = 0 with contact radius r, contact angle
//! alpha, sphere radius R and signed center height H satisfies
//!
//!   H = r cot(alpha),   R = r / sin(alpha),
//!
//! and it is stationary for the line-tension flow exactly when
//!
//!   cos(alpha) = b/r - a,
//!
//! with contact-energy coefficient a > -1 and line tension b > 0. The
//! critical line tension below which the linearized nullspace can grow is
//!
//!   c_crit = -(1/3) R sin^2(alpha) cos(alpha).

use crate::error::{Error, Result};
use serde::Serialize;

/// Contact angles are kept strictly inside (0, pi): caps with
/// |cos(alpha)| beyond this bound count as detached or flattened.
pub const COS_ALPHA_LIMIT: f64 = 1.0 - 1e-8;

/// Relative width (in units of R) of the band around
/// R sin^2(alpha) = b cos(alpha) treated as the degenerate branch.
pub const DEGENERATE_BAND: f64 = 1e-9;

/// Open interval, possibly unbounded above.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Parameter bundle of one stationary spherical cap.
#[derive(Debug, Clone, Serialize)]
pub struct CapParams {
    /// Contact-energy coefficient (dimensionless).
    pub a: f64,
    /// Line-tension coefficient (length).
    pub b: f64,
    /// Contact-circle radius.
    pub r: f64,
    /// Contact angle in (0, pi).
    pub alpha: f64,
    pub cos_alpha: f64,
    pub sin_alpha: f64,
    /// Sphere radius R = r / sin(alpha).
    #[serde(rename = "R")]
    pub radius: f64,
    /// Signed center height H = R cos(alpha).
    #[serde(rename = "H_center")]
    pub h_center: f64,
    /// Radial-expansion coefficient of the nullspace mode; `None` on the
    /// degenerate branch R sin^2(alpha) = b cos(alpha).
    pub c_alpha: Option<f64>,
    /// Critical line tension -(1/3) R sin^2(alpha) cos(alpha).
    pub c_crit: f64,
}

impl CapParams {
    /// Colatitude extent of the cap chart, theta in [0, pi - alpha].
    pub fn theta_max(&self) -> f64 {
        std::f64::consts::PI - self.alpha
    }

    /// Whether this cap sits on the degenerate branch of the nullspace.
    pub fn degenerate_branch(&self) -> bool {
        self.c_alpha.is_none()
    }
}

/// Feasible contact radii for stationary caps: (b/(a+1), inf) for
/// -1 < a <= 1 and (b/(a+1), b/(a-1)) for a > 1.
pub fn feasible_r_range(a: f64, b: f64) -> Result<Interval> {
    if !(a > -1.0) || !(b > 0.0) {
        return Err(Error::NoStationaryCap {
            reason: format!("no stationary caps for a = {a} (need a > -1) and b = {b} (need b > 0)"),
        });
    }
    let lo = b / (a + 1.0);
    let hi = if a > 1.0 { b / (a - 1.0) } else { f64::INFINITY };
    Ok(Interval { lo, hi })
}

/// Feasible contact angles: (0, arccos(-a)) for -1 < a <= 1, else (0, pi).
pub fn feasible_alpha_range(a: f64, b: f64) -> Result<Interval> {
    if !(a > -1.0) || !(b > 0.0) {
        return Err(Error::NoStationaryCap {
            reason: format!("no stationary caps for a = {a} (need a > -1) and b = {b} (need b > 0)"),
        });
    }
    let hi = if a > 1.0 { std::f64::consts::PI } else { (-a).acos() };
    Ok(Interval { lo: 0.0, hi })
}

/// Radial-expansion coefficient of the mode-0 nullspace element,
/// c_alpha = (R cos(alpha) sin^2(alpha) - b) / (R sin^2(alpha) - b cos(alpha)),
/// or `None` when the denominator sits inside the degenerate band.
pub fn c_alpha_coefficient(radius: f64, sin_alpha: f64, cos_alpha: f64, b: f64) -> Option<f64> {
    let den = radius * sin_alpha * sin_alpha - b * cos_alpha;
    if den.abs() < DEGENERATE_BAND * radius {
        None
    } else {
        Some((radius * cos_alpha * sin_alpha * sin_alpha - b) / den)
    }
}

/// Build the stationary cap with contact radius r for parameters (a, b).
pub fn make_cap(a: f64, b: f64, r: f64) -> Result<CapParams> {
    let range = feasible_r_range(a, b)?;
    if !range.contains(r) {
        return Err(Error::NoStationaryCap {
            reason: format!("r = {r} outside ({}, {})", range.lo, range.hi),
        });
    }
    let cos_alpha = b / r - a;
    if cos_alpha.abs() > COS_ALPHA_LIMIT {
        return Err(Error::NoStationaryCap {
            reason: format!("cos(alpha) = {cos_alpha} too close to +-1 (detached or flat cap)"),
        });
    }
    let sin_alpha = (1.0 - cos_alpha * cos_alpha).sqrt();
    let alpha = cos_alpha.acos();
    let radius = r / sin_alpha;
    let h_center = radius * cos_alpha;
    let c_crit = -radius * sin_alpha * sin_alpha * cos_alpha / 3.0;
    Ok(CapParams {
        a,
        b,
        r,
        alpha,
        cos_alpha,
        sin_alpha,
        radius,
        h_center,
        c_alpha: c_alpha_coefficient(radius, sin_alpha, cos_alpha, b),
        c_crit,
    })
}

/// Build the stationary cap with prescribed contact angle; inverts the
/// stationarity relation in closed form, r = b / (cos(alpha) + a).
pub fn cap_from_angle(a: f64, b: f64, alpha: f64) -> Result<CapParams> {
    let range = feasible_alpha_range(a, b)?;
    if !range.contains(alpha) {
        return Err(Error::NoStationaryCap {
            reason: format!("alpha = {alpha} outside ({}, {})", range.lo, range.hi),
        });
    }
    let den = alpha.cos() + a;
    if den <= 0.0 {
        return Err(Error::NoStationaryCap {
            reason: format!("cos(alpha) + a = {den} not positive"),
        });
    }
    make_cap(a, b, b / den)
}

/// Analytic reference quantities of the stationary cap.
#[derive(Debug, Clone, Serialize)]
pub struct SscReference {
    /// Mean curvature H_Gamma = -2/R (outward normal, sum of principal curvatures).
    pub mean_curvature: f64,
    /// |sigma|^2 = 2/R^2, squared norm of the second fundamental form.
    pub second_form_sq: f64,
    /// Gauss curvature 1/R^2.
    pub gauss_curvature: f64,
    /// Geodesic curvature of the contact circle, -1/r.
    pub contact_curvature: f64,
    /// II(n_boundary, n_boundary) = -1/R on the contact curve.
    pub boundary_second_form: f64,
    /// <tau, d_sigma n_contact> = 1/(R sin(alpha)) on the contact curve.
    pub conormal_coupling: f64,
}

pub fn ssc_reference(cap: &CapParams) -> SscReference {
    SscReference {
        mean_curvature: -2.0 / cap.radius,
        second_form_sq: 2.0 / (cap.radius * cap.radius),
        gauss_curvature: 1.0 / (cap.radius * cap.radius),
        contact_curvature: -1.0 / cap.r,
        boundary_second_form: -1.0 / cap.radius,
        conormal_coupling: 1.0 / (cap.radius * cap.sin_alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_sphere() {
        let cap = make_cap(1.0, 0.5, 0.5).unwrap();
        assert!((cap.alpha - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(cap.radius, 0.5);
        assert_eq!(cap.h_center, 0.0);
        assert_eq!(cap.c_crit, 0.0);
        // c_alpha = -b/R on the half-sphere
        assert!((cap.c_alpha.unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_cap() {
        // High-precision values for (a, b, r) = (0.5, 0.3, 0.4).
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        assert!((cap.cos_alpha - 0.25).abs() < 1e-15);
        assert!((cap.alpha - 1.318116071652818).abs() < 1e-14);
        assert!((cap.radius - 0.413118223595457_8).abs() < 1e-15);
        assert!((cap.h_center - 0.103279555898864_45).abs() < 1e-15);
        assert!((cap.c_crit + 0.032274861218395_14).abs() < 1e-15);
        assert!((cap.c_alpha.unwrap() + 0.650581171339107_2).abs() < 1e-13);
    }

    #[test]
    fn infeasible_caps() {
        assert!(matches!(make_cap(-2.0, 1.0, 1.0), Err(Error::NoStationaryCap { .. })));
        assert!(matches!(make_cap(-1.0, 1.0, 1.0), Err(Error::NoStationaryCap { .. })));
        assert!(matches!(feasible_r_range(-1.0, 1.0), Err(Error::NoStationaryCap { .. })));
        // a > 1: r must stay inside (b/(a+1), b/(a-1))
        assert!(matches!(make_cap(2.0, 1.0, 2.0), Err(Error::NoStationaryCap { .. })));
    }

    #[test]
    fn ranges() {
        let r = feasible_r_range(2.0, 1.0).unwrap();
        assert!((r.lo - 1.0 / 3.0).abs() < 1e-15 && (r.hi - 1.0).abs() < 1e-15);
        let r = feasible_r_range(0.0, 1.0).unwrap();
        assert!((r.lo - 1.0).abs() < 1e-15 && r.hi.is_infinite());

        let a = feasible_alpha_range(1.0, 1.0).unwrap();
        assert!((a.hi - std::f64::consts::PI).abs() < 1e-15);
        let a = feasible_alpha_range(0.0, 1.0).unwrap();
        assert!((a.hi - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let a = feasible_alpha_range(2.0, 1.0).unwrap();
        assert!((a.hi - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn reference_quantities() {
        let cap = make_cap(1.0, 0.5, 0.5).unwrap();
        let q = ssc_reference(&cap);
        assert_eq!(q.mean_curvature, -4.0);
        assert_eq!(q.second_form_sq, 8.0);
        assert_eq!(q.contact_curvature, -2.0);
        // R sin(alpha) kappa = -1 for every cap
        let cap = make_cap(0.5, 0.3, 0.4).unwrap();
        let q = ssc_reference(&cap);
        assert!((cap.radius * cap.sin_alpha * q.contact_curvature + 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_branch_detection() {
        // R sin^2(alpha) = b cos(alpha) at a = 0.5 happens for b/r = t with
        // t - 0.5 = 1/sqrt(1+t^2); r = 0.5 then forces b below.
        let b = 0.577332569558327_14;
        let cap = make_cap(0.5, b, 0.5).unwrap();
        assert!(cap.degenerate_branch());
        // b -> 0 limit at fixed r: c_alpha -> cos(alpha)
        for &b in &[1e-4, 1e-6] {
            let cap = make_cap(0.5, b, 0.4).unwrap();
            let c = cap.c_alpha.unwrap();
            assert!(
                (c - cap.cos_alpha).abs() < 20.0 * b,
                "c_alpha {c} vs cos_alpha {} at b={b}",
                cap.cos_alpha
            );
        }
    }

    #[test]
    fn angle_round_trip_and_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut accepted = 0;
        for _ in 0..1000 {
            let a = -0.95 + 3.5 * rng.random::<f64>();
            let b = 0.05 + 2.0 * rng.random::<f64>();
            let range = feasible_r_range(a, b).unwrap();
            let hi = if range.hi.is_finite() { range.hi } else { 8.0 * range.lo };
            let t = rng.random::<f64>();
            let r = range.lo + (hi - range.lo) * (0.02 + 0.96 * t);
            let cap = match make_cap(a, b, r) {
                Ok(c) => c,
                Err(_) => continue, // clamp band near the interval ends
            };
            accepted += 1;
            assert!(cap.cos_alpha.abs() < 1.0);
            assert!((cap.radius * cap.sin_alpha - r).abs() <= 1e-12 * r);
            assert!(
                (cap.h_center - r / cap.alpha.tan()).abs()
                    <= 1e-12 * r.max(cap.h_center.abs())
            );
            // c_crit <= 0 exactly when cos(alpha) >= 0
            assert_eq!(cap.c_crit <= 0.0, cap.cos_alpha >= 0.0);
            // round trip through the angle
            let back = cap_from_angle(a, b, cap.alpha).unwrap();
            assert!((back.r - r).abs() <= 1e-10 * r);

            // sampling outside the feasible interval must fail
            let below = range.lo * (1.0 - 1e-3) - 1e-12;
            if below > 0.0 {
                assert!(make_cap(a, b, below).is_err());
            }
            if range.hi.is_finite() {
                assert!(make_cap(a, b, range.hi * (1.0 + 1e-3)).is_err());
            }
        }
        assert!(accepted > 900);
    }
}
