use crate::model::Violation;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("power cache has no entry for exponent {0}")]
    CacheMiss(usize),

    #[error("impossible bridge: (A^{gap})[{from}, {to}] is zero")]
    ImpossibleBridge { from: usize, to: usize, gap: usize },

    #[error("observed sequence has zero probability under the parameters (observation {index})")]
    ZeroLikelihood { index: usize },

    #[error("invalid parameters: {}", fmt_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
