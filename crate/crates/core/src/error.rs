use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("schema violation in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("invalid spectrum table: {0}")]
    InvalidSpectrum(String),

    #[error("integration overflow at mu = {mu} on a grid with {intervals} intervals; refine the grid")]
    IntegrationOverflow { mu: f64, intervals: usize },

    #[error("could not bracket eigenvalue with index {index}")]
    SearchFailure { index: usize },

    #[error("mu = {mu} is not an eigenvalue (|Phi| = {residual:e})")]
    NotAnEigenvalue { mu: f64, residual: f64 },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("inadmissible perturbation at index {index}: 1 + c*a = {value}")]
    Inadmissible { index: usize, value: f64 },

    #[error("spectrum covers indices 0..={available} but coefficient index {index} is nonzero")]
    Coverage { index: usize, available: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Nystrom system for row {row} is singular")]
    Solvability { row: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Strips any number of [`Error::Stage`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
