use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("startup iteration does not contract (factor {factor:.3e} at eps {eps:.3e})")]
    NonContraction { factor: f64, eps: f64 },

    #[error("step failure at t = {t:.6e}: step size {step:.3e} below minimum")]
    StepFailure { t: f64, step: f64 },

    #[error("invariant violated: {invariant} (at {at:.6e}, value {value:.6e})")]
    InvariantViolation {
        invariant: &'static str,
        at: f64,
        value: f64,
    },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("{what} = {value:.6e} outside [{lo:.6e}, {hi:.6e}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("quadrature resolution: {0}")]
    Resolution(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("contour self-intersects at t = {t:.6e}")]
    SelfIntersection { t: f64 },

    #[error("expected {expected} circle crossings at r = {r:.3e}, found {found}")]
    IntersectionCount {
        r: f64,
        expected: usize,
        found: usize,
    },

    #[error("velocity requested at a contour node with desingularization disabled")]
    SingularNode,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that signal a broken numerical invariant rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::InvariantViolation { .. }
                | Error::SelfIntersection { .. }
                | Error::NonContraction { .. }
                | Error::StepFailure { .. }
                | Error::NotConverged(_)
                | Error::IntersectionCount { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
