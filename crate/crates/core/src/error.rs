use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty document")]
    EmptyDocument,

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate topic count: K={topics} exceeds {tokens} training tokens")]
    DegenerateTopicCount { topics: usize, tokens: usize },

    #[error("degenerate topic model")]
    DegenerateTopicModel,

    #[error("no preference signal")]
    NoPreferenceSignal,

    #[error("no preference signal source: training a ranker needs qrels")]
    NoPreferenceSource,

    #[error("feature length mismatch: model expects {expected}, got {found}")]
    FeatureLength { expected: usize, found: usize },

    #[error("unknown query id `{0}`")]
    UnknownQuery(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
