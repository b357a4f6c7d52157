use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndetError {
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("margins violate min f + min g >= 1 (slack {slack:.6e})")]
    Compatibility { slack: f64 },
    #[error("discrete margins violate positivity at cell ({row}, {col}): value {value:.6e}")]
    DiscreteCompatibility { row: usize, col: usize, value: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("margin density vanishes at pulled-back point {0}")]
    SingularDensity(f64),
    #[error("no linking coefficient exists: {0}")]
    NoSolution(String),
    #[error("quantile function is not monotone: {0}")]
    Monotonicity(String),
    #[error("density is negative at ({x:.4}, {y:.4}): {value:.6e}")]
    Positivity { x: f64, y: f64, value: f64 },
    #[error("density is not square integrable: {0}")]
    Integrability(String),
    #[error("rejection sampler acceptance rate {rate:.3e} is below 1e-6")]
    Efficiency { rate: f64 },
    #[error("declared margins disagree with the density by {0:.3e}")]
    MarginMismatch(f64),
}

impl IndetError {
    /// True for errors caused by bad input rather than by arithmetic.
    pub fn is_validation(&self) -> bool {
        !matches!(self, IndetError::Numerical(_) | IndetError::Efficiency { .. })
    }
}

pub type Result<T> = std::result::Result<T, IndetError>;
