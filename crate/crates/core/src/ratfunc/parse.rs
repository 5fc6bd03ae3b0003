use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::{RatFunc, RatFuncError, VarTable};

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {pos}: {kind}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Unexpected { found: String, expected: String },
    UnknownIdentifier(String),
    BadExponent(String),
    UnexpectedChar(char),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Unexpected { found, expected } => {
                write!(f, "expected {expected}, found {found}")
            }
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::BadExponent(found) => {
                write!(f, "exponent must be a nonnegative integer literal, found {found}")
            }
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = text[start..i].parse().expect("digits");
                out.push((start, Tok::Int(n)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    pos: start,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    vars: &'a Arc<VarTable>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> RatFuncError {
        ParseError {
            pos: self.pos(),
            kind: ParseErrorKind::Unexpected {
                found: self.peek().describe(),
                expected: expected.to_string(),
            },
        }
        .into()
    }

    fn expr(&mut self) -> Result<RatFunc, RatFuncError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?)?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RatFunc, RatFuncError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc.mul(&self.factor()?)?;
                }
                Tok::Slash => {
                    self.bump();
                    let pos = self.pos();
                    let rhs = self.factor()?;
                    acc = acc.div(&rhs).map_err(|e| match e {
                        RatFuncError::DivisionByZero => ParseError {
                            pos,
                            kind: ParseErrorKind::Unexpected {
                                found: "a zero divisor".into(),
                                expected: "a nonzero divisor".into(),
                            },
                        }
                        .into(),
                        other => other,
                    })?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<RatFunc, RatFuncError> {
        let mut negate = false;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                }
                Tok::Minus => {
                    self.bump();
                    negate = !negate;
                }
                _ => break,
            }
        }
        let mut base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let pos = self.pos();
            match self.bump() {
                Tok::Int(n) => {
                    let e: u32 = n.try_into().map_err(|_| ParseError {
                        pos,
                        kind: ParseErrorKind::BadExponent("an oversized literal".into()),
                    })?;
                    base = base.pow(e)?;
                }
                other => {
                    return Err(ParseError {
                        pos,
                        kind: ParseErrorKind::BadExponent(other.describe()),
                    }
                    .into())
                }
            }
        }
        Ok(if negate { base.neg() } else { base })
    }

    fn atom(&mut self) -> Result<RatFunc, RatFuncError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(RatFunc::constant(self.vars, BigRational::from_integer(n)))
            }
            Tok::Ident(name) => {
                self.bump();
                match self.vars.index_of(&name) {
                    Some(i) => Ok(RatFunc::var(self.vars, i)),
                    None => Err(ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownIdentifier(name),
                    }
                    .into()),
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.unexpected("integer, identifier or `(`")),
        }
    }
}

/// Parses an expression over `vars`.
///
/// ```text
/// expr   := term (("+"|"-") term)*
/// term   := factor (("*"|"/") factor)*
/// factor := ("+"|"-")* atom ("^" uint)?
/// atom   := uint | ident | "(" expr ")"
/// ```
pub fn parse_expr(text: &str, vars: &Arc<VarTable>) -> Result<RatFunc, RatFuncError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, vars };
    let f = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("operator or end of input"));
    }
    Ok(f)
}
