use std::path::PathBuf;

use num_bigint::BigUint;

use crate::space::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A document failed to parse; `field` is the JSON path of the offending value.
    #[error("parse error in {}: field `{field}`: {message}", path.display())]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("enumeration refused: cardinality {cardinality} exceeds cap {cap}")]
    CapExceeded { cardinality: BigUint, cap: u64 },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("search error: {0}")]
    Search(String),

    /// A run stopped after `trials` journal lines were flushed; it can be resumed.
    #[error("run stopped after {trials} journaled trials: {source}")]
    Interrupted {
        trials: usize,
        #[source]
        source: Box<Error>,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
