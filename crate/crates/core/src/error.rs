use thiserror::Error;

pub type Result<T> = std::result::Result<T, BsgError>;

#[derive(Debug, Error)]
pub enum BsgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("precision matrix X'X + C is numerically singular (condition number {condition:.3e})")]
    SingularPrecision { condition: f64 },

    #[error("design matrix X'X is singular (condition number {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("inverse-Wishart degrees of freedom {dof} must exceed d + 1 = {min}")]
    DegreesOfFreedom { dof: f64, min: f64 },

    #[error("component {component} has zero forecast error variance")]
    DegenerateComponent { component: usize },

    #[error("draw {draw}: {source}")]
    Draw {
        draw: usize,
        #[source]
        source: Box<BsgError>,
    },

    #[error("coefficients are not stationary (max eigenvalue modulus {max_modulus:.6})")]
    NonStationary { max_modulus: f64 },

    #[error("population blow-up at step {step}")]
    BlowUp { step: usize },

    #[error("infeasible network specification: {0}")]
    Infeasible(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl BsgError {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numeric(&self) -> bool {
        match self {
            BsgError::NotPositiveDefinite(_)
            | BsgError::SingularPrecision { .. }
            | BsgError::SingularDesign { .. }
            | BsgError::DegreesOfFreedom { .. }
            | BsgError::DegenerateComponent { .. }
            | BsgError::NonStationary { .. }
            | BsgError::BlowUp { .. } => true,
            BsgError::Draw { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
