use std::fmt;
use thiserror::Error;

/// A 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at {span}: {msg}")]
    Syntax { span: Span, msg: String },
    #[error("type error at {span}: {msg}")]
    Type { span: Span, msg: String },
    #[error("desugaring error at {span}: {msg}")]
    Desugar { span: Span, msg: String },
    #[error("unknown variable {0}")]
    UnknownVariable(u32),
    #[error("variable {0} has no weight")]
    Unweighted(String),
    #[error("conflicting weights for variable {0}")]
    WeightConflict(String),
    #[error("handles belong to different managers")]
    ManagerMismatch,
    #[error("exactly-one over an empty variable list")]
    EmptyExactlyOne,
    #[error("assignment to {0}, which is not a branch variable")]
    NotBranchVariable(String),
    #[error("policy does not choose an alternative for site {0}")]
    MissingPolicy(String),
    #[error("duplicate binding of {0}")]
    DuplicateBinding(String),
    #[error("undefined variable {0}")]
    Undefined(String),
    #[error("{0}")]
    Invalid(String),
    #[error("evidence has probability zero{0}")]
    ZeroEvidence(String),
    #[error("problem too large for exhaustive evaluation: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
