use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("malformed record: {0}")]
    Record(String),

    #[error("malformed tree: {0}")]
    Structure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{needed} unique OOV values but the placeholder budget is {budget}")]
    Capacity { needed: usize, budget: u32 },

    #[error("UNK replacement is lossy and cannot be inverted")]
    NotInvertible,

    #[error("placeholder `{0}` has no entry in the anonymization map")]
    CorruptMap(String),

    #[error("cannot split by repository: {0}")]
    Split(String),

    #[error("function {0} has no variable position that can take a repairable bug")]
    NoEligiblePair(String),

    #[error("{predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },

    #[error("unmatched example id `{0}`")]
    UnmatchedId(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("snippet {id}: {source}")]
    InSnippet {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_snippet(self, id: &str) -> Self {
        Error::InSnippet {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
