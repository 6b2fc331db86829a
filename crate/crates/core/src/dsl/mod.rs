//! Expression language for fields over jet coordinates and parameters.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' factor)?
//! atom   := number | ident | call | '(' expr ')' | '-' atom | vector
//! call   := name '(' expr (',' expr)* ')'
//! vector := '[' expr (',' expr)* ']'
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x^2` is `(-x)^2`.

mod compile;
mod doc;
mod parser;

use thiserror::Error;

pub use compile::{Compiled, Context, ExprField, Kind};
pub use doc::{
    Entry, GeneratorDoc, Model, ModelDoc, ParamValue, PointDoc, AFFINITY_TOLERANCE, SKEW_TOLERANCE,
};
pub use parser::{parse, BinOp, Expr, ExprKind};

/// Line and column (both 1-based) of a character in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("lexical error at {pos}: {message}")]
    Lexical { pos: Pos, message: String },
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("unknown function `{name}` at {pos}")]
    UnknownFunction { pos: Pos, name: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { pos: Pos, name: String },
    #[error("type error at {pos}: {message}")]
    Kind { pos: Pos, message: String },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Lexical { pos, .. }
            | ParseError::Syntax { pos, .. }
            | ParseError::UnknownFunction { pos, .. }
            | ParseError::UnknownIdentifier { pos, .. }
            | ParseError::Kind { pos, .. } => *pos,
        }
    }
}
