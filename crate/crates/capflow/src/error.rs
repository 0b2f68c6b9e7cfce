//! Error type shared by the geometry, spectral and flow layers.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// No stationary cap exists for the requested parameters, e.g. a <= -1
    /// or a contact radius outside the feasible interval.
    #[error("no stationary cap: {reason}")]
    NoStationaryCap { reason: String },

    /// Normal offset left the curvilinear chart (|w| >= epsilon0).
    #[error("offset {w} outside chart (|w| must stay below {epsilon0})")]
    OffsetOutOfChart { w: f64, epsilon0: f64 },

    /// The discrete metric determinant collapsed at a non-pole node.
    #[error("degenerate metric at node (phi index {i_phi}, theta level {level})")]
    DegenerateMetric { i_phi: usize, level: usize },

    /// Contact curve left the container plane z = 0.
    #[error("contact curve not planar: max |z| = {max_abs_z}")]
    ContactNotPlanar { max_abs_z: f64 },

    /// The contact angle approached 0 or pi during a flow.
    #[error("contact angle degenerate: margin {margin}")]
    AngleDegenerate { margin: f64 },

    /// Grid or mode-system sizes below the supported minimum.
    #[error("invalid discretization: {reason}")]
    InvalidDiscretization { reason: String },

    /// An eigenvalue solve did not converge; signals an assembly bug.
    #[error("eigenvalue solver failure: {reason}")]
    SolverFailure { reason: String },

    /// The nonsymmetric mode-0 solve produced non-real eigenvalues.
    #[error("complex spectrum: max |Im| = {max_im} vs spectral radius {radius}")]
    ComplexSpectrum { max_im: f64, radius: f64 },

    /// An operation that requires cos(alpha) = 0 was called on a general cap.
    #[error("not a half-sphere: cos(alpha) = {cos_alpha}")]
    NotHalfsphere { cos_alpha: f64 },

    /// A time step left the chart or degenerated the contact angle.
    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },

    /// Remainder norm sat at the rounding floor; no decay rate can be fit.
    #[error("insufficient decay over the fit window")]
    InsufficientDecay,

    /// Sphere fit impossible (points coplanar or too few).
    #[error("degenerate sphere fit")]
    DegenerateFit,

    #[error("i/o error: {0}")]
    Io(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
