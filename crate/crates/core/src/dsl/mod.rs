//! The `.fm` text format: parser, canonical printer and DOT export.

mod dot;
mod lexer;
mod parser;
mod printer;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use dot::{export_dot, DotError};
pub use parser::{parse_formula, parse_model};
pub use printer::{natural_cmp, serialize_model};

/// 1-based line and column; length in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    Syntax,
    UnknownKeyword,
    DuplicateName,
    UndersizedGroup,
    UnknownSymbol,
    /// Tree-shape problems such as a missing or repeated root.
    Structure,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::UnknownKeyword => "unknown keyword",
            DiagnosticKind::DuplicateName => "duplicate name",
            DiagnosticKind::UndersizedGroup => "undersized group",
            DiagnosticKind::UnknownSymbol => "unknown symbol",
            DiagnosticKind::Structure => "structure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub span: SourceSpan,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl ParseDiagnostic {
    pub fn new(span: SourceSpan, kind: DiagnosticKind, message: impl Into<String>) -> Self {
        ParseDiagnostic { span, kind, message: message.into() }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.column, self.kind, self.message)
    }
}

impl std::error::Error for ParseDiagnostic {}
