use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Numerical degeneracy detected at a specific evaluation site.
    /// Carries chart id and node index so failures are attributable.
    #[error("numerical degeneracy in chart {chart} at node {node}: {detail}")]
    Degeneracy {
        chart: usize,
        node: usize,
        detail: String,
    },

    /// Numerical degeneracy at a point with no evaluation-site context;
    /// node loops convert this into `Degeneracy` via [`Error::locate`].
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("model construction failed: {0}")]
    ModelConstruction(String),

    #[error("unsupported derivative order {0} (max 2)")]
    UnsupportedOrder(usize),

    #[error("config validation failed: {0}")]
    ConfigValidation(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse failure: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach an evaluation site to a point-level degeneracy.
    pub fn locate(self, chart: usize, node: usize) -> Self {
        match self {
            Error::DegenerateMetric(detail) => Error::Degeneracy {
                chart,
                node,
                detail,
            },
            other => other,
        }
    }
}
