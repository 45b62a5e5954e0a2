//! Error taxonomy shared by all modules.
//!
//! Numerical validity is checked, never silently restored: a state that
//! violates a constraint or a matrix that leaves its chart is reported with
//! the measured magnitude so callers can decide what to do.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A matrix handed to `vee` is not skew-symmetric within tolerance.
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e} > {tol:.3e})")]
    NotSkew { asymmetry: f64, tol: f64 },

    /// A matrix claimed to be a rotation fails the orthonormality check.
    #[error("matrix is not orthonormal (defect {defect:.3e} > {tol:.3e})")]
    NotOrthonormal { defect: f64, tol: f64 },

    /// Input left the Cayley chart (rotation angle at or near pi).
    #[error("rotation lies outside the Cayley chart (|trace + 1| = {trace_plus_one:.3e})")]
    ChartBoundary { trace_plus_one: f64 },

    /// An angular velocity violates the Suslov constraint <a, w> = 0.
    #[error("state violates the constraint <a, w> = 0 (residual {residual:.3e})")]
    ConstraintViolated { residual: f64 },

    /// The inertia tensor (or its upper 2x2 block) is too close to singular.
    #[error("degenerate inertia tensor: {detail}")]
    DegenerateInertia { detail: String },

    /// The projected constraint stiffness <a, I^-1 a> vanished.
    #[error("degenerate constraint projection (<a, I^-1 a> = {value:.3e})")]
    DegenerateConstraint { value: f64 },

    /// Newton iteration exhausted its budget without meeting tolerance.
    #[error("Newton solve did not converge in {iters} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NonConvergence {
        iters: usize,
        residual: f64,
        tol: f64,
    },

    /// Newton Jacobian condition number crossed the regularity threshold.
    #[error("Newton Jacobian is numerically singular (condition {condition:.3e})")]
    SingularJacobian { condition: f64 },

    /// A failure inside a trajectory, annotated with the step at which it
    /// occurred (step k produces the row at t = k * eps).
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },

    /// A least-squares order fit could not be performed honestly.
    #[error("order fit failed: {detail}")]
    Fit { detail: String },

    /// Invalid run configuration (file syntax, value ranges, arity).
    #[error("configuration error: {detail}")]
    Config { detail: String },

    /// Malformed trajectory CSV.
    #[error("CSV error: {detail}")]
    Csv { detail: String },

    /// A trajectory with no rows was handed to a consumer that needs data.
    #[error("empty trajectory")]
    EmptyTrajectory,

    /// Filesystem failure (message carried; io::Error is not Clone/PartialEq).
    #[error("I/O error: {detail}")]
    Io { detail: String },
}

impl Error {
    /// The underlying failure, with any [`Error::Step`] annotation peeled
    /// off. Lets callers classify a trajectory failure by its cause.
    pub fn root(&self) -> &Error {
        let mut e = self;
        while let Error::Step { source, .. } = e {
            e = source;
        }
        e
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io {
            detail: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
