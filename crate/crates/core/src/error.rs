use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between sampling a graph and scoring a classifier.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the latent domain of a kernel or distribution.
    #[error("point {point:?} is outside the domain {domain}")]
    Domain { point: Vec<f64>, domain: String },

    /// Invalid or non-normalizable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A requested eigenvalue is below the positivity tolerance.
    #[error("degenerate spectrum: eigenvalue {index} = {value:e} is not strictly positive")]
    DegenerateSpectrum { index: usize, value: f64 },

    /// The top-`requested` eigenvalues of the adjacency matrix are not all positive.
    #[error(
        "embedding dimension {requested} is rank deficient: lambda_{requested} = {value:e}; \
         largest admissible dimension is {largest_admissible}"
    )]
    RankDeficient {
        requested: usize,
        largest_admissible: usize,
        value: f64,
    },

    /// The oracle spectral gap at the requested dimension is not positive.
    #[error("degenerate spectral gap at d = {d}: {gap:e}")]
    DegenerateGap { d: usize, gap: f64 },

    /// An iterative method ran out of iterations.
    #[error("no convergence after {iterations} iterations: {diagnostics}")]
    Convergence {
        iterations: usize,
        diagnostics: String,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Attach the name of the pipeline stage that failed.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage tags peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateSpectrum { .. }
                | Error::RankDeficient { .. }
                | Error::DegenerateGap { .. }
                | Error::Convergence { .. }
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
