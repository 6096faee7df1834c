use super::{DiagnosticKind, ParseDiagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Letters, digits, underscores; dots allowed between segments so that
    /// labels like `C5.1` lex as one word.
    Word(String),
    Int(i64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Cmp(crate::formula::CmpOp),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub(crate) const KEYWORDS: &[&str] = &[
    "model",
    "root",
    "mandatory",
    "optional",
    "xor",
    "or",
    "attribute",
    "constraint",
    "int",
    "not",
    "and",
    "implies",
    "iff",
];

pub(crate) fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub(crate) fn lex(text: &str, diags: &mut Vec<ParseDiagnostic>) -> Vec<Token> {
    use crate::formula::CmpOp;

    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let span = |line, col, len: usize| SourceSpan { line, column: col, length: len as u32 };

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (n, tok) = match c {
            '{' => (1, Tok::LBrace),
            '}' => (1, Tok::RBrace),
            '(' => (1, Tok::LParen),
            ')' => (1, Tok::RParen),
            ':' => (1, Tok::Colon),
            '<' if next == Some('=') => (2, Tok::Cmp(CmpOp::Le)),
            '<' => (1, Tok::Cmp(CmpOp::Lt)),
            '>' if next == Some('=') => (2, Tok::Cmp(CmpOp::Ge)),
            '>' => (1, Tok::Cmp(CmpOp::Gt)),
            '=' if next == Some('=') => (2, Tok::Cmp(CmpOp::Eq)),
            c if c.is_ascii_digit() || (c == '-' && next.is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let digits: String = chars[i..j].iter().collect();
                match digits.parse::<i64>() {
                    Ok(v) => (j - i, Tok::Int(v)),
                    Err(_) => {
                        diags.push(ParseDiagnostic::new(
                            span(start_line, start_col, j - i),
                            DiagnosticKind::Syntax,
                            format!("integer `{digits}` is out of range"),
                        ));
                        (j - i, Tok::Int(0))
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                loop {
                    while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    let dotted = chars.get(j) == Some(&'.')
                        && chars.get(j + 1).is_some_and(|d| d.is_ascii_alphanumeric() || *d == '_');
                    if !dotted {
                        break;
                    }
                    j += 1;
                }
                (j - i, Tok::Word(chars[i..j].iter().collect()))
            }
            other => {
                diags.push(ParseDiagnostic::new(
                    span(start_line, start_col, 1),
                    DiagnosticKind::Syntax,
                    format!("unexpected character `{other}`"),
                ));
                i += 1;
                col += 1;
                continue;
            }
        };
        out.push(Token { tok, span: span(start_line, start_col, n) });
        i += n;
        col += n as u32;
    }
    out.push(Token { tok: Tok::Eof, span: span(line, col, 0) });
    out
}
