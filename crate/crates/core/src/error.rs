use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum UrlError {
    #[error("cannot parse url {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("url {0:?} has no host")]
    MissingHost(String),
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum LeakageError {
    #[error("request count r = {r} exceeds link count n = {n}")]
    TooManyRequests { n: u64, r: u64 },
}

#[derive(Debug, Error)]
pub enum RulesFileError {
    #[error("rules file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("rules file {path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule {0} not found")]
    NotFound(u64),
    #[error("context {0} does not exist")]
    UnknownContext(u64),
    #[error(transparent)]
    Persist(#[from] RulesFileError),
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum AlertError {
    #[error("alert {0} not found")]
    NotFound(u64),
    #[error("alert {0} was already resolved")]
    AlreadyResolved(u64),
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Rules(#[from] RulesFileError),
}
