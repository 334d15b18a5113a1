use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty sample set ({0})")]
    EmptySampleSet(&'static str),

    #[error("degenerate distribution: RKHS variance {sigma2:.3e} below 1e-12")]
    DegenerateDistribution { sigma2: f64 },

    #[error("negative MMD^2 value {value:.3e} exceeds the -1e-9 numerical floor")]
    NegativeMmd { value: f64 },

    #[error("precondition violated: {name} requires N > {min_n:.3}, got {n}")]
    Precondition {
        name: &'static str,
        min_n: f64,
        n: usize,
    },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
