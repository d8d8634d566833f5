use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point at infinity: stereographic unprojection of the north pole")]
    PointAtInfinity,

    #[error("centerpoint LP infeasible after {attempts} attempts")]
    CenterpointFailure { attempts: usize },

    #[error("separator search exhausted {retries} great-circle draws (best |gamma_O| = {best_cut})")]
    SeparatorFailure { retries: usize, best_cut: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("dimension mismatch on shared bond {bond}: {left} vs {right}")]
    BondMismatch { bond: String, left: usize, right: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
