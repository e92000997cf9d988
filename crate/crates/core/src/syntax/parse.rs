//! Concrete syntax.
//!
//! One term per file. Grammar, loosest to tightest:
//!
//! ```text
//! term   ::= \x:P. term | fix x:T. term
//!          | case term of { inl x -> term | inr y -> term }
//!          | app (: T)?
//! app    ::= prefix (prefix)*          -- left-associative application
//! prefix ::= (thunk|force|fst|snd|inl|inr|fold|unfold) prefix | atom
//! atom   ::= () | x | <term, term> | coin(a/b) | (term)
//!
//! T      ::= P -> T | P
//! P      ::= P' + P | P'
//! P'     ::= F * P' | F
//! F      ::= !F | rec z. P | unit | z | (T)
//! ```
//!
//! Line comments start with `--`. `rec` and `\`/`fix` bodies extend as far
//! right as possible.

use crate::rational::{is_probability, Rat};
use crate::syntax::term::Term;
use crate::syntax::ty::{GenType, PosType};
use num::BigInt;
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub msg: String,
}

fn err<T>(pos: Pos, msg: impl Into<String>) -> Result<T, SyntaxError> {
    Err(SyntaxError { pos, msg: msg.into() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    LAngle,
    RAngle,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    Pipe,
    Backslash,
    Arrow,
    Star,
    Plus,
    Bang,
    Slash,
    Int(BigInt),
    Ident(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LAngle => write!(f, "<"),
            Tok::RAngle => write!(f, ">"),
            Tok::LBrace => write!(f, "{{"),
            Tok::RBrace => write!(f, "}}"),
            Tok::Comma => write!(f, ","),
            Tok::Dot => write!(f, "."),
            Tok::Colon => write!(f, ":"),
            Tok::Pipe => write!(f, "|"),
            Tok::Backslash => write!(f, "\\"),
            Tok::Arrow => write!(f, "->"),
            Tok::Star => write!(f, "*"),
            Tok::Plus => write!(f, "+"),
            Tok::Bang => write!(f, "!"),
            Tok::Slash => write!(f, "/"),
            Tok::Int(n) => write!(f, "{n}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = src.chars().peekable();
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(c) = c {
                if c == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }
    loop {
        let pos = Pos { line, col };
        let c = match chars.peek() {
            None => break,
            Some(c) => *c,
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '-' => {
                bump!();
                match chars.peek() {
                    Some('-') => {
                        while let Some(&c) = chars.peek() {
                            if c == '\n' {
                                break;
                            }
                            bump!();
                        }
                    }
                    Some('>') => {
                        bump!();
                        out.push((Tok::Arrow, pos));
                    }
                    _ => return err(pos, "expected `--` or `->` after `-`"),
                }
            }
            '(' => {
                bump!();
                out.push((Tok::LParen, pos));
            }
            ')' => {
                bump!();
                out.push((Tok::RParen, pos));
            }
            '<' => {
                bump!();
                out.push((Tok::LAngle, pos));
            }
            '>' => {
                bump!();
                out.push((Tok::RAngle, pos));
            }
            '{' => {
                bump!();
                out.push((Tok::LBrace, pos));
            }
            '}' => {
                bump!();
                out.push((Tok::RBrace, pos));
            }
            ',' => {
                bump!();
                out.push((Tok::Comma, pos));
            }
            '.' => {
                bump!();
                out.push((Tok::Dot, pos));
            }
            ':' => {
                bump!();
                out.push((Tok::Colon, pos));
            }
            '|' => {
                bump!();
                out.push((Tok::Pipe, pos));
            }
            '\\' => {
                bump!();
                out.push((Tok::Backslash, pos));
            }
            '*' => {
                bump!();
                out.push((Tok::Star, pos));
            }
            '+' => {
                bump!();
                out.push((Tok::Plus, pos));
            }
            '!' => {
                bump!();
                out.push((Tok::Bang, pos));
            }
            '/' => {
                bump!();
                out.push((Tok::Slash, pos));
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Int(s.parse().unwrap()), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), pos));
            }
            c => return err(pos, format!("unexpected character `{c}`")),
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "unit", "rec", "thunk", "force", "fst", "snd", "inl", "inr", "case", "of", "fix", "fold",
    "unfold", "coin",
];

/// True when `s` lexes as a single non-keyword identifier.
pub(crate) fn is_valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        && !KEYWORDS.contains(&s)
}

pub(crate) struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    /// term variables in scope, innermost last
    scope: Vec<Rc<str>>,
    /// type variables in scope, innermost last
    tyscope: Vec<String>,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Parser { toks: lex(src)?, at: 0, scope: Vec::new(), tyscope: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        let (t, pos) = self.next();
        if t == tok {
            Ok(())
        } else {
            err(pos, format!("expected `{tok}`, found `{t}`"))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), SyntaxError> {
        let (t, pos) = self.next();
        match t {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok((s, pos)),
            t => err(pos, format!("expected identifier, found `{t}`")),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    // ---- types ----

    pub(crate) fn gen_type(&mut self) -> Result<GenType, SyntaxError> {
        let lhs = self.pos_type()?;
        if *self.peek() == Tok::Arrow {
            self.next();
            let rhs = self.gen_type()?;
            Ok(GenType::arrow(lhs, rhs))
        } else {
            Ok(GenType::pos(lhs))
        }
    }

    pub(crate) fn pos_type(&mut self) -> Result<PosType, SyntaxError> {
        let lhs = self.tensor_type()?;
        if *self.peek() == Tok::Plus {
            self.next();
            let rhs = self.pos_type()?;
            Ok(PosType::sum(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn tensor_type(&mut self) -> Result<PosType, SyntaxError> {
        let lhs = self.factor_type()?;
        if *self.peek() == Tok::Star {
            self.next();
            let rhs = self.tensor_type()?;
            Ok(PosType::tensor(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn factor_type(&mut self) -> Result<PosType, SyntaxError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Bang => {
                self.next();
                // `!F` over a positive factor; `!(T)` for general arguments
                if *self.peek() == Tok::LParen {
                    self.next();
                    let inner = self.gen_type()?;
                    self.expect(Tok::RParen)?;
                    Ok(PosType::bang(inner))
                } else {
                    let inner = self.factor_type()?;
                    Ok(PosType::bang(inner.general()))
                }
            }
            Tok::Ident(s) if s == "rec" => {
                self.next();
                let (name, _) = self.ident()?;
                self.expect(Tok::Dot)?;
                self.tyscope.push(name.clone());
                let body = self.pos_type();
                self.tyscope.pop();
                Ok(PosType::mu(name.as_str(), body?))
            }
            Tok::Ident(s) if s == "unit" => {
                self.next();
                Ok(PosType::unit())
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.next();
                match self.tyscope.iter().rev().position(|v| *v == s) {
                    Some(i) => Ok(PosType::var(i as u32)),
                    None => err(pos, format!("unbound type variable `{s}`")),
                }
            }
            Tok::LParen => {
                self.next();
                let inner = self.gen_type()?;
                self.expect(Tok::RParen)?;
                match inner.as_pos() {
                    Some(p) => Ok(p.clone()),
                    None => err(pos, "general type in positive position (arrows are not positive)"),
                }
            }
            t => err(pos, format!("expected a type, found `{t}`")),
        }
    }

    // ---- terms ----

    pub(crate) fn term(&mut self) -> Result<Term, SyntaxError> {
        match self.peek().clone() {
            Tok::Backslash => {
                self.next();
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon)?;
                let annot = self.pos_type()?;
                self.expect(Tok::Dot)?;
                self.scope.push(Rc::from(name.as_str()));
                let body = self.term();
                self.scope.pop();
                Ok(Term::lam(name.as_str(), annot, body?))
            }
            Tok::Ident(s) if s == "fix" => {
                self.next();
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon)?;
                let annot = self.gen_type()?;
                self.expect(Tok::Dot)?;
                self.scope.push(Rc::from(name.as_str()));
                let body = self.term();
                self.scope.pop();
                Ok(Term::fix(name.as_str(), annot, body?))
            }
            Tok::Ident(s) if s == "case" => {
                self.next();
                let scrut = self.term()?;
                if !self.eat_kw("of") {
                    return err(self.pos(), "expected `of` in case expression");
                }
                self.expect(Tok::LBrace)?;
                if !self.eat_kw("inl") {
                    return err(self.pos(), "expected `inl` branch");
                }
                let (lname, _) = self.ident()?;
                self.expect(Tok::Arrow)?;
                self.scope.push(Rc::from(lname.as_str()));
                let left = self.term();
                self.scope.pop();
                let left = left?;
                self.expect(Tok::Pipe)?;
                if !self.eat_kw("inr") {
                    return err(self.pos(), "expected `inr` branch");
                }
                let (rname, _) = self.ident()?;
                self.expect(Tok::Arrow)?;
                self.scope.push(Rc::from(rname.as_str()));
                let right = self.term();
                self.scope.pop();
                let right = right?;
                self.expect(Tok::RBrace)?;
                let t = Term::case(scrut, lname.as_str(), left, rname.as_str(), right);
                if *self.peek() == Tok::Colon {
                    self.next();
                    let ty = self.gen_type()?;
                    Ok(Term::ascribe(t, ty))
                } else {
                    Ok(t)
                }
            }
            _ => {
                let t = self.app_term()?;
                if *self.peek() == Tok::Colon {
                    self.next();
                    let ty = self.gen_type()?;
                    Ok(Term::ascribe(t, ty))
                } else {
                    Ok(t)
                }
            }
        }
    }

    fn starts_operand(&self) -> bool {
        match self.peek() {
            Tok::LParen | Tok::LAngle => true,
            Tok::Ident(s) => match s.as_str() {
                "of" | "rec" | "unit" | "fix" | "case" => false,
                _ => true,
            },
            _ => false,
        }
    }

    fn app_term(&mut self) -> Result<Term, SyntaxError> {
        let mut t = self.prefix_term()?;
        while self.starts_operand() {
            let arg = self.prefix_term()?;
            t = Term::app(t, arg);
        }
        Ok(t)
    }

    fn prefix_term(&mut self) -> Result<Term, SyntaxError> {
        let pos = self.pos();
        if let Tok::Ident(s) = self.peek().clone() {
            let wrap: Option<fn(Term) -> Term> = match s.as_str() {
                "thunk" => Some(Term::thunk),
                "force" => Some(Term::force),
                "fst" => Some(Term::prl),
                "snd" => Some(Term::prr),
                "inl" => Some(Term::inl),
                "inr" => Some(Term::inr),
                "fold" => Some(Term::fold),
                "unfold" => Some(Term::unfold),
                _ => None,
            };
            if let Some(wrap) = wrap {
                self.next();
                let inner = self.prefix_term()?;
                return Ok(wrap(inner));
            }
            if s == "coin" {
                self.next();
                self.expect(Tok::LParen)?;
                let p = self.rational()?;
                self.expect(Tok::RParen)?;
                if !is_probability(&p) {
                    return err(pos, format!("coin probability {p} outside [0,1]"));
                }
                return Ok(Term::coin(p));
            }
        }
        self.atom_term()
    }

    fn rational(&mut self) -> Result<Rat, SyntaxError> {
        let (t, pos) = self.next();
        let num = match t {
            Tok::Int(n) => n,
            t => return err(pos, format!("expected a number, found `{t}`")),
        };
        if *self.peek() == Tok::Slash {
            self.next();
            let (t, pos) = self.next();
            let den = match t {
                Tok::Int(n) => n,
                t => return err(pos, format!("expected a denominator, found `{t}`")),
            };
            if den == BigInt::from(0) {
                return err(pos, "zero denominator");
            }
            Ok(Rat::new(num, den))
        } else {
            Ok(Rat::from_integer(num))
        }
    }

    fn atom_term(&mut self) -> Result<Term, SyntaxError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                if *self.peek() == Tok::RParen {
                    self.next();
                    Ok(Term::one())
                } else {
                    let t = self.term()?;
                    self.expect(Tok::RParen)?;
                    Ok(t)
                }
            }
            Tok::LAngle => {
                self.next();
                let l = self.term()?;
                self.expect(Tok::Comma)?;
                let r = self.term()?;
                self.expect(Tok::RAngle)?;
                Ok(Term::pair(l, r))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.next();
                match self.scope.iter().rev().position(|v| **v == s) {
                    Some(i) => Ok(Term::var(i as u32)),
                    None => err(pos, format!("unbound variable `{s}`")),
                }
            }
            t => err(pos, format!("expected a term, found `{t}`")),
        }
    }

    fn finish<T>(&mut self, v: T) -> Result<T, SyntaxError> {
        let (t, pos) = self.next();
        if t == Tok::Eof {
            Ok(v)
        } else {
            err(pos, format!("trailing input starting at `{t}`"))
        }
    }
}

/// Parses a single closed term.
pub fn parse_term(src: &str) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    p.finish(t)
}

/// Parses a closed general type.
pub fn parse_gen_type(src: &str) -> Result<GenType, SyntaxError> {
    let mut p = Parser::new(src)?;
    let t = p.gen_type()?;
    p.finish(t)
}

/// Parses a closed positive type.
pub fn parse_pos_type(src: &str) -> Result<PosType, SyntaxError> {
    let mut p = Parser::new(src)?;
    let t = p.pos_type()?;
    p.finish(t)
}
