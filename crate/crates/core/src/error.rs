use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    Validation(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate element {0} (zero or negative area)")]
    DegenerateElement(usize),

    #[error("linear solve failed: {reason} (relative residual {residual:e})")]
    LinearSolve { reason: String, residual: f64 },

    #[error("newton stagnated after {iterations} iterations, residual history {history:?}")]
    Newton { iterations: usize, history: Vec<f64> },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep { step, source: Box::new(self) }
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration { iteration, source: Box::new(self) }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::LinearSolve { .. } | Error::Newton { .. } | Error::DegenerateElement(_) => true,
            Error::AtStep { source, .. } | Error::AtIteration { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
