//! Recursive-descent parser for the expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | base ('^' uint)?
//! base   := rational | symbol | symbol '(' expr (',' expr)* ')'
//!         | ('D' '[' uint (',' uint)* ']')+ symbol '(' expr (',' expr)* ')'
//!         | '(' expr ')'
//! ```
//!
//! Rationals are written `12`, `3/4` or `0.25` and are always exact.
//! Partial indices inside `D[..]` are one-based argument positions.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{pow, Zero};

use super::{Expr, Rational, Symbol, Tree};

const MAX_DEPTH: usize = 128;
const MAX_EXPONENT: u32 = 64;
const MAX_PRODUCT_TERMS: usize = 250_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("`{name}` takes {expected} argument(s), found {found} at byte {offset}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownSymbol { offset, .. }
            | ParseError::ArityMismatch { offset, .. } => *offset,
        }
    }

    pub(crate) fn shifted(self, by: usize) -> ParseError {
        match self {
            ParseError::Syntax { offset, message } => ParseError::Syntax {
                offset: offset + by,
                message,
            },
            ParseError::UnknownSymbol { name, offset } => ParseError::UnknownSymbol {
                name,
                offset: offset + by,
            },
            ParseError::ArityMismatch {
                name,
                expected,
                found,
                offset,
            } => ParseError::ArityMismatch {
                name,
                expected,
                found,
                offset: offset + by,
            },
        }
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.into(),
    }
}

/// Symbols an expression may mention: coordinates and opaque functions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scope {
    coords: BTreeSet<String>,
    opaques: BTreeMap<String, usize>,
}

impl Scope {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_coords<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut scope = Scope::new();
        for n in names {
            scope.add_coord(n);
        }
        scope
    }

    pub fn add_coord(&mut self, name: impl AsRef<str>) {
        self.coords.insert(name.as_ref().to_string());
    }

    pub fn add_opaque(&mut self, name: impl AsRef<str>, arity: usize) {
        self.opaques.insert(name.as_ref().to_string(), arity);
    }

    pub fn coord(mut self, name: impl AsRef<str>) -> Self {
        self.add_coord(name);
        self
    }

    pub fn opaque(mut self, name: impl AsRef<str>, arity: usize) -> Self {
        self.add_opaque(name, arity);
        self
    }

    pub fn has_coord(&self, name: &str) -> bool {
        self.coords.contains(name)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.opaques.get(name).copied()
    }

    pub fn merge(&mut self, other: &Scope) {
        self.coords.extend(other.coords.iter().cloned());
        self.opaques
            .extend(other.opaques.iter().map(|(k, v)| (k.clone(), *v)));
    }

    pub fn coords(&self) -> impl Iterator<Item = &str> {
        self.coords.iter().map(String::as_str)
    }

    pub fn opaques(&self) -> impl Iterator<Item = (&str, usize)> {
        self.opaques.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'^' => out.push((Tok::Caret, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b'[' => out.push((Tok::LBracket, i)),
            b']' => out.push((Tok::RBracket, i)),
            b',' => out.push((Tok::Comma, i)),
            b'0'..=b'9' => {
                let (r, end) = lex_number(bytes, i)?;
                out.push((Tok::Num(r), start));
                i = end;
                continue;
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        }
        i += 1;
    }
    Ok(out)
}

fn digits(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    i
}

fn lex_number(bytes: &[u8], start: usize) -> Result<(Rational, usize), ParseError> {
    let int_end = digits(bytes, start);
    let int_part: BigInt = std::str::from_utf8(&bytes[start..int_end])
        .expect("ascii")
        .parse()
        .map_err(|_| syntax(start, "malformed number"))?;
    let mut i = int_end;
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        let frac_end = digits(bytes, i + 1);
        let frac = &bytes[i + 1..frac_end];
        if frac.len() > 64 {
            return Err(syntax(i, "too many decimal digits"));
        }
        let frac_val: BigInt = std::str::from_utf8(frac).expect("ascii").parse().expect("digits");
        let scale = pow(BigInt::from(10), frac.len());
        let value = Rational::new(int_part * &scale + frac_val, scale);
        return Ok((value, frac_end));
    }
    if i + 1 < bytes.len() && bytes[i] == b'/' && bytes[i + 1].is_ascii_digit() {
        let den_end = digits(bytes, i + 1);
        let den: BigInt = std::str::from_utf8(&bytes[i + 1..den_end])
            .expect("ascii")
            .parse()
            .expect("digits");
        if den.is_zero() {
            return Err(syntax(i + 1, "zero denominator"));
        }
        i = den_end;
        return Ok((Rational::new(int_part, den), i));
    }
    Ok((Rational::from_integer(int_part), i))
}

struct Parser<'t> {
    toks: &'t [(Tok, usize)],
    pos: usize,
    end: usize,
    depth: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected {what}")))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(syntax(self.offset(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Tree, ParseError> {
        self.enter()?;
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = Tree::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = Tree::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn term(&mut self) -> Result<Tree, ParseError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            acc = Tree::Mul(Box::new(acc), Box::new(self.factor()?));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Tree, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            self.enter()?;
            let inner = self.factor()?;
            self.depth -= 1;
            return Ok(Tree::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let at = self.offset();
            let n = match self.bump() {
                Some(Tok::Num(r)) if r.is_integer() => r.to_integer(),
                _ => return Err(syntax(at, "expected non-negative integer exponent")),
            };
            let n: u32 = u32::try_from(n)
                .ok()
                .filter(|n| *n <= MAX_EXPONENT)
                .ok_or_else(|| syntax(at, format!("exponent exceeds {MAX_EXPONENT}")))?;
            return Ok(Tree::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn uint_list(&mut self) -> Result<Vec<usize>, ParseError> {
        let mut out = Vec::new();
        loop {
            let at = self.offset();
            match self.bump() {
                Some(Tok::Num(r)) if r.is_integer() => {
                    let k = usize::try_from(r.to_integer())
                        .ok()
                        .filter(|k| *k >= 1)
                        .ok_or_else(|| syntax(at, "partial index must be a positive integer"))?;
                    out.push(k);
                }
                _ => return Err(syntax(at, "expected partial index")),
            }
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                _ => break,
            }
        }
        Ok(out)
    }

    fn call_args(&mut self) -> Result<Vec<Tree>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn base(&mut self) -> Result<Tree, ParseError> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Num(r)) => Ok(Tree::Num(r)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) if name == "D" && self.peek() == Some(&Tok::LBracket) => {
                self.pos -= 1;
                let mut one_based = Vec::new();
                while self.peek() == Some(&Tok::Ident("D".into()))
                    && self.peek_at(1) == Some(&Tok::LBracket)
                {
                    self.pos += 2;
                    one_based.extend(self.uint_list()?);
                    self.expect(Tok::RBracket, "`]`")?;
                }
                let fat = self.offset();
                let func = match self.bump() {
                    Some(Tok::Ident(f)) => f,
                    _ => return Err(syntax(fat, "expected function name after `D[..]`")),
                };
                let args = self.call_args()?;
                if let Some(&k) = one_based.iter().find(|&&k| k > args.len()) {
                    return Err(syntax(
                        at,
                        format!("partial index {k} out of range for {} argument(s)", args.len()),
                    ));
                }
                Ok(Tree::Call {
                    name: func,
                    partials: one_based.into_iter().map(|k| k - 1).collect(),
                    args,
                    at: fat,
                })
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    let args = self.call_args()?;
                    Ok(Tree::Call {
                        name,
                        partials: Vec::new(),
                        args,
                        at,
                    })
                } else {
                    Ok(Tree::Sym { name, at })
                }
            }
            Some(_) => Err(syntax(at, "unexpected token")),
            None => Err(syntax(at, "unexpected end of input")),
        }
    }
}

/// Parse text into a raw syntax tree without resolving symbols.
pub fn parse_tree(text: &str) -> Result<Tree, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
        depth: 0,
    };
    let tree = p.expr()?;
    if p.pos < toks.len() {
        return Err(syntax(p.offset(), "unexpected trailing input"));
    }
    Ok(tree)
}

fn checked_mul(a: &Expr, b: &Expr, at: usize) -> Result<Expr, ParseError> {
    if a.len().saturating_mul(b.len()) > MAX_PRODUCT_TERMS {
        return Err(syntax(at, "expression expands beyond the supported size"));
    }
    Ok(a * b)
}

fn checked_pow(base: &Expr, n: u32, at: usize) -> Result<Expr, ParseError> {
    let mut acc = Expr::one();
    for _ in 0..n {
        acc = checked_mul(&acc, base, at)?;
    }
    Ok(acc)
}

/// Resolve a syntax tree against `scope` and canonicalize it.
pub(crate) fn resolve(tree: &Tree, scope: &Scope) -> Result<Expr, ParseError> {
    Ok(match tree {
        Tree::Num(r) => Expr::constant(r.clone()),
        Tree::Sym { name, at } => {
            if !scope.has_coord(name) {
                return Err(ParseError::UnknownSymbol {
                    name: name.clone(),
                    offset: *at,
                });
            }
            Expr::symbol(name.as_str())
        }
        Tree::Add(a, b) => resolve(a, scope)? + resolve(b, scope)?,
        Tree::Sub(a, b) => resolve(a, scope)? - resolve(b, scope)?,
        Tree::Mul(a, b) => checked_mul(&resolve(a, scope)?, &resolve(b, scope)?, 0)?,
        Tree::Neg(a) => -resolve(a, scope)?,
        Tree::Pow(a, n) => checked_pow(&resolve(a, scope)?, *n, 0)?,
        Tree::Call {
            name,
            partials,
            args,
            at,
        } => {
            let expected = scope.arity(name).ok_or_else(|| ParseError::UnknownSymbol {
                name: name.clone(),
                offset: *at,
            })?;
            if expected != args.len() {
                return Err(ParseError::ArityMismatch {
                    name: name.clone(),
                    expected,
                    found: args.len(),
                    offset: *at,
                });
            }
            let args = args
                .iter()
                .map(|a| resolve(a, scope))
                .collect::<Result<Vec<_>, _>>()?;
            Expr::apply_partial(Symbol::new(name), partials.clone(), args)
        }
    })
}

/// Parse `text` into a canonical expression over the symbols in `scope`.
pub fn parse_expr(text: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let tree = parse_tree(text)?;
    resolve(&tree, scope)
}
