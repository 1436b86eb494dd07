use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ErrorKind {
    #[error("{0}")]
    Lexical(String),
    #[error("expected {expected}, found {found}")]
    Syntax { expected: String, found: String },
    #[error("variable ?{var} in {block} is not bound")]
    UnboundVariable { block: String, var: String },
    #[error("variable names starting with `__` are reserved (?{0})")]
    ReservedVariable(String),
    #[error("{norm}: the regulated event needs an `actor(?event, ?agent)` condition")]
    MissingActor { norm: String },
    #[error("{block}: {reason}")]
    MalformedOutcome { block: String, reason: String },
    #[error("{norm}: ELSE requires a BEFORE event")]
    ElseWithoutBefore { norm: String },
    #[error("{norm}: exactly one `CREATE DeonticRelation(?dr)` is required")]
    MissingDeonticRelation { norm: String },
    #[error("{block}: {reason}")]
    ComputeType { block: String, reason: String },
    #[error("{exception}: conditions must include `isGenerated(?dr, {target})`")]
    MissingIsGenerated { exception: String, target: String },
    #[error("{exception}: {reason}")]
    ConsequentMismatch { exception: String, reason: String },
    #[error("{block}: {reason}")]
    InvalidAssert { block: String, reason: String },
    #[error("{block}: ?{var} is compared before any positive condition binds it")]
    NotRangeRestricted { block: String, var: String },
    #[error("`{0}` is defined more than once")]
    DuplicateName(String),
    #[error("{exception}: unknown target `{target}`")]
    UnknownTarget { exception: String, target: String },
    #[error("{exception}: ?{var} is bound neither locally nor by the target norm")]
    UnboundExceptionVariable { var: String, exception: String },
    #[error("{exception}: exceptions to exceptions may only target exceptions to norms")]
    NestingTooDeep { exception: String },
}

impl ErrorKind {
    /// Stable identifier used in diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            ErrorKind::Lexical(_) | ErrorKind::Syntax { .. } => "syntax",
            ErrorKind::UnboundVariable { .. } => "unbound-variable",
            ErrorKind::ReservedVariable(_) => "reserved-variable",
            ErrorKind::MissingActor { .. } => "missing-actor",
            ErrorKind::MalformedOutcome { .. } => "malformed-outcome",
            ErrorKind::ElseWithoutBefore { .. } => "else-without-before",
            ErrorKind::MissingDeonticRelation { .. } => "missing-deontic-relation",
            ErrorKind::ComputeType { .. } => "compute-type",
            ErrorKind::MissingIsGenerated { .. } => "missing-is-generated",
            ErrorKind::ConsequentMismatch { .. } => "consequent-mismatch",
            ErrorKind::InvalidAssert { .. } => "invalid-assert",
            ErrorKind::NotRangeRestricted { .. } => "not-range-restricted",
            ErrorKind::DuplicateName(_) => "duplicate-name",
            ErrorKind::UnknownTarget { .. } => "unknown-target",
            ErrorKind::UnboundExceptionVariable { .. } => "unbound-exception-variable",
            ErrorKind::NestingTooDeep { .. } => "nesting-too-deep",
        }
    }

    pub fn is_syntax(&self) -> bool {
        matches!(self, ErrorKind::Lexical(_) | ErrorKind::Syntax { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ErrorKind,
}

impl ParseError {
    pub fn new(line: usize, col: usize, kind: ErrorKind) -> Self {
        ParseError { line, col, kind }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.kind)
    }
}
