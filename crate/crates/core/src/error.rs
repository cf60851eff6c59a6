use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Fock cutoff {0} is below the minimum of 2")]
    CutoffTooSmall(usize),
    #[error("mode index {index} out of range for a {modes}-mode space")]
    InvalidMode { index: usize, modes: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("negative dissipation rate {0}")]
    NegativeRate(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("zero qubit-cavity detuning")]
    ZeroDetuning,
    #[error("resonance pole: {0}")]
    Resonance(String),
    #[error("guard violated: {0}")]
    Guard(String),
    #[error("drive solve ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("defective generator: {0}")]
    Defective(String),
    #[error("degenerate steady space: {0} eigenvalues near zero")]
    DegenerateSteadyState(usize),
    #[error("non-physical state: minimum eigenvalue {0:.3e}")]
    NonPhysicalState(f64),
    #[error("no excited mode carries weight above threshold")]
    NoExcitedMode,
    #[error("fit rejected: {0}")]
    FitRejected(String),
    #[error("trace drift {0:.3e} exceeds tolerance")]
    TraceDrift(f64),
    #[error("degenerate target mode: nearest intermediate gap {0:.3e}")]
    DegenerateTarget(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
