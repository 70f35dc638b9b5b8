use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate spectrum: all spectral weights vanish")]
    DegenerateSpectrum,

    #[error("inadmissible elastic constants: {0}")]
    InadmissibleConstants(String),

    #[error("h-transform inversion did not converge (b = {b}, alpha = {alpha}, residual = {residual:e}, iterations = {iterations})")]
    HTransformNonConvergence {
        b: f64,
        alpha: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("elasticity is not positive definite at x = {x:?} (smallest eigenvalue {lambda_min:e})")]
    NotPositiveDefinite { x: [f64; 3], lambda_min: f64 },

    #[error("linear solver did not converge for load case {case} after {iterations} iterations (relative residual {residual:e})")]
    SolverNonConvergence {
        case: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("effective matrix is not positive definite (smallest eigenvalue {0:e})")]
    EffectiveNotPositive(f64),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),
}
