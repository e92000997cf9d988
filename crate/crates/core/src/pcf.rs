//! A call-by-name PCF with products, translated into the core calculus.
//!
//! A PCF type becomes a finite sequence of general types; a judgment
//! `Γ ⊢ s : A` becomes `Clen A` terms over the bang-tuple translation of
//! `Γ`. The reference evaluator here is the oracle for differential tests
//! of the translation at ground type.

use crate::stdlib::{nat_ty, num, succ_term};
use crate::syntax::term::Term;
use crate::syntax::ty::{GenType, PosType};
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PcfType {
    Nat,
    Arrow(Box<PcfType>, Box<PcfType>),
    Prod(Box<PcfType>, Box<PcfType>),
}

impl fmt::Display for PcfType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcfType::Nat => write!(f, "nat"),
            PcfType::Arrow(a, b) => match a.as_ref() {
                PcfType::Arrow(..) => write!(f, "({a}) => {b}"),
                _ => write!(f, "{a} => {b}"),
            },
            PcfType::Prod(a, b) => {
                match a.as_ref() {
                    PcfType::Nat => write!(f, "{a}")?,
                    _ => write!(f, "({a})")?,
                }
                write!(f, " * ")?;
                match b.as_ref() {
                    PcfType::Nat | PcfType::Prod(..) => write!(f, "{b}"),
                    _ => write!(f, "({b})"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PcfTerm {
    Var(u32),
    Num(u64),
    Succ(Rc<PcfTerm>),
    Pred(Rc<PcfTerm>),
    Ifz(Rc<PcfTerm>, Rc<PcfTerm>, Rc<PcfTerm>),
    Lam { hint: Rc<str>, annot: PcfType, body: Rc<PcfTerm> },
    App(Rc<PcfTerm>, Rc<PcfTerm>),
    Pair(Rc<PcfTerm>, Rc<PcfTerm>),
    ProjL(Rc<PcfTerm>),
    ProjR(Rc<PcfTerm>),
    Fix { hint: Rc<str>, annot: PcfType, body: Rc<PcfTerm> },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PcfError {
    #[error("{0}")]
    Syntax(String),
    #[error("unbound variable index {0}")]
    UnboundVar(u32),
    #[error("expected {expected}, found {actual}")]
    TypeMismatch { expected: PcfType, actual: PcfType },
    #[error("applied a non-function of type {0}")]
    ApplyNonFunction(PcfType),
    #[error("projection from a non-product of type {0}")]
    ProjectNonProduct(PcfType),
    #[error("the program is not of ground type nat")]
    NotGround,
}

impl PcfTerm {
    fn shift(&self, d: u32, cutoff: u32) -> PcfTerm {
        match self {
            PcfTerm::Var(i) => PcfTerm::Var(if *i >= cutoff { i + d } else { *i }),
            PcfTerm::Num(n) => PcfTerm::Num(*n),
            PcfTerm::Succ(t) => PcfTerm::Succ(Rc::new(t.shift(d, cutoff))),
            PcfTerm::Pred(t) => PcfTerm::Pred(Rc::new(t.shift(d, cutoff))),
            PcfTerm::Ifz(s, t, u) => PcfTerm::Ifz(
                Rc::new(s.shift(d, cutoff)),
                Rc::new(t.shift(d, cutoff)),
                Rc::new(u.shift(d, cutoff)),
            ),
            PcfTerm::Lam { hint, annot, body } => PcfTerm::Lam {
                hint: hint.clone(),
                annot: annot.clone(),
                body: Rc::new(body.shift(d, cutoff + 1)),
            },
            PcfTerm::App(s, t) => {
                PcfTerm::App(Rc::new(s.shift(d, cutoff)), Rc::new(t.shift(d, cutoff)))
            }
            PcfTerm::Pair(s, t) => {
                PcfTerm::Pair(Rc::new(s.shift(d, cutoff)), Rc::new(t.shift(d, cutoff)))
            }
            PcfTerm::ProjL(t) => PcfTerm::ProjL(Rc::new(t.shift(d, cutoff))),
            PcfTerm::ProjR(t) => PcfTerm::ProjR(Rc::new(t.shift(d, cutoff))),
            PcfTerm::Fix { hint, annot, body } => PcfTerm::Fix {
                hint: hint.clone(),
                annot: annot.clone(),
                body: Rc::new(body.shift(d, cutoff + 1)),
            },
        }
    }

    fn subst(&self, v: &PcfTerm, j: u32) -> PcfTerm {
        match self {
            PcfTerm::Var(i) => {
                if *i == j {
                    v.clone()
                } else if *i > j {
                    PcfTerm::Var(i - 1)
                } else {
                    self.clone()
                }
            }
            PcfTerm::Num(n) => PcfTerm::Num(*n),
            PcfTerm::Succ(t) => PcfTerm::Succ(Rc::new(t.subst(v, j))),
            PcfTerm::Pred(t) => PcfTerm::Pred(Rc::new(t.subst(v, j))),
            PcfTerm::Ifz(s, t, u) => PcfTerm::Ifz(
                Rc::new(s.subst(v, j)),
                Rc::new(t.subst(v, j)),
                Rc::new(u.subst(v, j)),
            ),
            PcfTerm::Lam { hint, annot, body } => PcfTerm::Lam {
                hint: hint.clone(),
                annot: annot.clone(),
                body: Rc::new(body.subst(&v.shift(1, 0), j + 1)),
            },
            PcfTerm::App(s, t) => {
                PcfTerm::App(Rc::new(s.subst(v, j)), Rc::new(t.subst(v, j)))
            }
            PcfTerm::Pair(s, t) => {
                PcfTerm::Pair(Rc::new(s.subst(v, j)), Rc::new(t.subst(v, j)))
            }
            PcfTerm::ProjL(t) => PcfTerm::ProjL(Rc::new(t.subst(v, j))),
            PcfTerm::ProjR(t) => PcfTerm::ProjR(Rc::new(t.subst(v, j))),
            PcfTerm::Fix { hint, annot, body } => PcfTerm::Fix {
                hint: hint.clone(),
                annot: annot.clone(),
                body: Rc::new(body.subst(&v.shift(1, 0), j + 1)),
            },
        }
    }
}

// ---- typing ----

pub fn infer_pcf(ctx: &mut Vec<PcfType>, t: &PcfTerm) -> Result<PcfType, PcfError> {
    match t {
        PcfTerm::Var(i) => ctx
            .get(ctx.len().wrapping_sub(1 + *i as usize))
            .cloned()
            .ok_or(PcfError::UnboundVar(*i)),
        PcfTerm::Num(_) => Ok(PcfType::Nat),
        PcfTerm::Succ(s) | PcfTerm::Pred(s) => {
            expect(ctx, s, &PcfType::Nat)?;
            Ok(PcfType::Nat)
        }
        PcfTerm::Ifz(s, t1, t2) => {
            expect(ctx, s, &PcfType::Nat)?;
            let a = infer_pcf(ctx, t1)?;
            expect(ctx, t2, &a)?;
            Ok(a)
        }
        PcfTerm::Lam { annot, body, .. } => {
            ctx.push(annot.clone());
            let b = infer_pcf(ctx, body);
            ctx.pop();
            Ok(PcfType::Arrow(Box::new(annot.clone()), Box::new(b?)))
        }
        PcfTerm::App(s, t) => {
            let f = infer_pcf(ctx, s)?;
            match f {
                PcfType::Arrow(a, b) => {
                    expect(ctx, t, &a)?;
                    Ok(*b)
                }
                other => Err(PcfError::ApplyNonFunction(other)),
            }
        }
        PcfTerm::Pair(s, t) => Ok(PcfType::Prod(
            Box::new(infer_pcf(ctx, s)?),
            Box::new(infer_pcf(ctx, t)?),
        )),
        PcfTerm::ProjL(s) | PcfTerm::ProjR(s) => {
            let p = infer_pcf(ctx, s)?;
            match p {
                PcfType::Prod(a, b) => Ok(if matches!(t, PcfTerm::ProjL(_)) { *a } else { *b }),
                other => Err(PcfError::ProjectNonProduct(other)),
            }
        }
        PcfTerm::Fix { annot, body, .. } => {
            ctx.push(annot.clone());
            let b = infer_pcf(ctx, body);
            ctx.pop();
            let b = b?;
            if b == *annot {
                Ok(b)
            } else {
                Err(PcfError::TypeMismatch { expected: annot.clone(), actual: b })
            }
        }
    }
}

fn expect(ctx: &mut Vec<PcfType>, t: &PcfTerm, expected: &PcfType) -> Result<(), PcfError> {
    let actual = infer_pcf(ctx, t)?;
    if actual == *expected {
        Ok(())
    } else {
        Err(PcfError::TypeMismatch { expected: expected.clone(), actual })
    }
}

pub fn infer_pcf_closed(t: &PcfTerm) -> Result<PcfType, PcfError> {
    infer_pcf(&mut Vec::new(), t)
}

// ---- the type translation ----

/// `Clen A`: the length of the translated sequence.
pub fn clen(a: &PcfType) -> usize {
    match a {
        PcfType::Nat => 1,
        PcfType::Arrow(_, b) => clen(b),
        PcfType::Prod(a, b) => clen(a) + clen(b),
    }
}

/// `!(σ_1..σ_n)`: the right-nested tensor of bangs ending in unit.
pub fn bang_seq(tys: &[GenType]) -> PosType {
    match tys.split_first() {
        None => PosType::unit(),
        Some((t, rest)) => PosType::tensor(PosType::bang(t.clone()), bang_seq(rest)),
    }
}

/// `⟨A⟩`: the sequence of general types of a PCF type.
pub fn ctype(a: &PcfType) -> Vec<GenType> {
    match a {
        PcfType::Nat => vec![nat_ty().general()],
        PcfType::Arrow(a, b) => {
            let arg = bang_seq(&ctype(a));
            ctype(b)
                .into_iter()
                .map(|t| GenType::arrow(arg.clone(), t))
                .collect()
        }
        PcfType::Prod(a, b) => {
            let mut out = ctype(a);
            out.extend(ctype(b));
            out
        }
    }
}

// ---- the term translation ----

/// Translates `Γ ⊢ s : A` into `Clen A` core terms, each typable as
/// `!⟨Γ⟩ ⊢ ⟨s⟩_i : ⟨A⟩_i`. Returns the translated sequence and `A`.
pub fn translate(ctx: &[PcfType], s: &PcfTerm) -> Result<(Vec<Term>, PcfType), PcfError> {
    let mut tyctx = ctx.to_vec();
    let a = infer_pcf(&mut tyctx, s)?;
    let terms = tr(ctx, s, &a)?;
    Ok((terms, a))
}

fn tr(ctx: &[PcfType], s: &PcfTerm, a: &PcfType) -> Result<Vec<Term>, PcfError> {
    match s {
        PcfTerm::Var(i) => {
            // x : !⟨C⟩; component i is force (fst (snd^{i-1} x))
            let n = clen(a);
            let mut out = Vec::with_capacity(n);
            for comp in 0..n {
                let mut access = Term::var(*i);
                for _ in 0..comp {
                    access = Term::prr(access);
                }
                out.push(Term::force(Term::prl(access)));
            }
            Ok(out)
        }
        PcfTerm::Num(n) => {
            let mut t = num(0);
            for _ in 0..*n {
                t = succ_term(t);
            }
            Ok(vec![Term::ascribe(t, nat_ty().general())])
        }
        PcfTerm::Succ(inner) => {
            let t = tr(ctx, inner, &PcfType::Nat)?.remove(0);
            Ok(vec![Term::ascribe(succ_term(t), nat_ty().general())])
        }
        PcfTerm::Pred(inner) => {
            let t = tr(ctx, inner, &PcfType::Nat)?.remove(0);
            // case (unfold ⟨s⟩) of { z -> num 0 | x -> x }; the scrutinee
            // carries an ascription because numerals are fold-headed
            Ok(vec![Term::case(
                Term::unfold(Term::ascribe(t, nat_ty().general())),
                "z",
                num(0),
                "x",
                Term::var(0),
            )])
        }
        PcfTerm::Ifz(scrut, t1, t2) => {
            let sc = Term::ascribe(tr(ctx, scrut, &PcfType::Nat)?.remove(0), nat_ty().general());
            let us = tr(ctx, t1, a)?;
            let vs = tr(ctx, t2, a)?;
            let comps = ctype(a);
            Ok(us
                .into_iter()
                .zip(vs)
                .zip(comps)
                .map(|((u, v), ty)| {
                    Term::ascribe(
                        Term::case(
                            Term::unfold(sc.clone()),
                            "z",
                            u.shift(1, 0),
                            "z",
                            v.shift(1, 0),
                        ),
                        ty,
                    )
                })
                .collect())
        }
        PcfTerm::Lam { hint, annot, body } => {
            let PcfType::Arrow(_, b) = a else { unreachable!("typed") };
            let mut inner_ctx = ctx.to_vec();
            inner_ctx.push(annot.clone());
            let bodies = tr(&inner_ctx, body, b)?;
            let arg_ty = bang_seq(&ctype(annot));
            Ok(bodies
                .into_iter()
                .map(|t| Term::lam(hint.clone(), arg_ty.clone(), t))
                .collect())
        }
        PcfTerm::App(f, arg) => {
            let mut tyctx = ctx.to_vec();
            let fty = infer_pcf(&mut tyctx, f)?;
            let PcfType::Arrow(arg_ty, _) = &fty else { unreachable!("typed") };
            let fs = tr(ctx, f, &fty)?;
            let args = tr(ctx, arg, arg_ty)?;
            // N = <thunk ⟨t⟩_1, <thunk ⟨t⟩_2, …, <thunk ⟨t⟩_m, ()>…>>
            let mut n_term = Term::one();
            for t in args.into_iter().rev() {
                n_term = Term::pair(Term::thunk(t), n_term);
            }
            Ok(fs.into_iter().map(|fi| Term::app(fi, n_term.clone())).collect())
        }
        PcfTerm::Pair(s1, s2) => {
            let PcfType::Prod(a1, a2) = a else { unreachable!("typed") };
            let mut out = tr(ctx, s1, a1)?;
            out.extend(tr(ctx, s2, a2)?);
            Ok(out)
        }
        PcfTerm::ProjL(inner) | PcfTerm::ProjR(inner) => {
            let mut tyctx = ctx.to_vec();
            let pty = infer_pcf(&mut tyctx, inner)?;
            let PcfType::Prod(a1, a2) = &pty else { unreachable!("typed") };
            let all = tr(ctx, inner, &pty)?;
            let n1 = clen(a1);
            let _ = a2;
            Ok(match s {
                PcfTerm::ProjL(_) => all[..n1].to_vec(),
                _ => all[n1..].to_vec(),
            })
        }
        PcfTerm::Fix { annot, body, .. } => {
            let n = clen(annot);
            let comp_tys = ctype(annot);
            let mut inner_ctx = ctx.to_vec();
            inner_ctx.push(annot.clone());
            let bodies = tr(&inner_ctx, body, annot)?;
            // replace the bound x : !⟨A⟩ by the tuple of n fresh bang
            // variables ⟨x_1, ⟨…, ⟨x_n, ()⟩⟩⟩ (x_n innermost, so component
            // j sits at index n-1-j), then eliminate them innermost-first
            // by nested fixpoints
            let mut tuple = Term::one();
            for j in (0..n).rev() {
                tuple = Term::pair(Term::var((n - 1 - j) as u32), tuple);
            }
            let ms: Vec<Term> = bodies
                .into_iter()
                .map(|b| b.shift(n as u32, 1).subst(&tuple, 0))
                .collect();
            Ok(solve_mutual(&ms, &comp_tys))
        }
    }
}

/// Sequential elimination of mutual recursion: bind the innermost variable
/// with a fixpoint, substitute its thunk into the rest, recurse, and
/// back-substitute.
fn solve_mutual(ms: &[Term], tys: &[GenType]) -> Vec<Term> {
    let n = ms.len();
    debug_assert_eq!(n, tys.len());
    if n == 1 {
        return vec![Term::fix("w", tys[0].clone(), ms[0].clone())];
    }
    let last = Term::fix("w", tys[n - 1].clone(), ms[n - 1].clone());
    let rest: Vec<Term> = ms[..n - 1]
        .iter()
        .map(|m| m.subst(&Term::thunk(last.clone()), 0))
        .collect();
    let mut solved = solve_mutual(&rest, &tys[..n - 1]);
    // close the remaining variables of `last` with the solved components,
    // innermost-first
    let mut closed_last = last;
    for s in solved.iter().rev() {
        closed_last = closed_last.subst(&Term::thunk(s.clone()), 0);
    }
    solved.push(closed_last);
    solved
}

// ---- reference call-by-name evaluation ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CbnResult {
    Num(u64),
    NonNumeral,
    Timeout,
}

/// Big-step call-by-name evaluation at ground type with a fuel budget.
pub fn cbn_eval(t: &PcfTerm, fuel: u64) -> CbnResult {
    let mut budget = fuel;
    match eval_nat(t, &Env::nil(), &mut budget) {
        Some(Ok(n)) => CbnResult::Num(n),
        Some(Err(())) => CbnResult::NonNumeral,
        None => CbnResult::Timeout,
    }
}

type Nat = Option<Result<u64, ()>>;

// Environments of unevaluated closures: call-by-name re-evaluates a closure
// at every use (no sharing), but avoids substitution entirely.
#[derive(Clone)]
struct Closure {
    term: Rc<PcfTerm>,
    env: Env,
}

#[derive(Clone)]
enum EnvNode {
    Nil,
    Cons(Closure, Env),
}

#[derive(Clone)]
struct Env(Rc<EnvNode>);

impl Env {
    fn nil() -> Env {
        Env(Rc::new(EnvNode::Nil))
    }

    fn cons(&self, c: Closure) -> Env {
        Env(Rc::new(EnvNode::Cons(c, self.clone())))
    }

    fn lookup(&self, i: u32) -> Option<Closure> {
        let mut node = &self.0;
        let mut i = i;
        loop {
            match node.as_ref() {
                EnvNode::Nil => return None,
                EnvNode::Cons(c, rest) => {
                    if i == 0 {
                        return Some(c.clone());
                    }
                    i -= 1;
                    node = &rest.0;
                }
            }
        }
    }
}

fn tick(budget: &mut u64) -> bool {
    if *budget == 0 {
        false
    } else {
        *budget -= 1;
        true
    }
}

fn eval_nat(t: &PcfTerm, env: &Env, budget: &mut u64) -> Nat {
    if !tick(budget) {
        return None;
    }
    match t {
        PcfTerm::Var(i) => match env.lookup(*i) {
            Some(c) => eval_nat(&c.term, &c.env, budget),
            None => Some(Err(())),
        },
        PcfTerm::Num(n) => Some(Ok(*n)),
        PcfTerm::Succ(s) => match eval_nat(s, env, budget)? {
            Ok(n) => Some(Ok(n + 1)),
            Err(()) => Some(Err(())),
        },
        PcfTerm::Pred(s) => match eval_nat(s, env, budget)? {
            Ok(n) => Some(Ok(n.saturating_sub(1))),
            Err(()) => Some(Err(())),
        },
        PcfTerm::Ifz(s, t1, t2) => match eval_nat(s, env, budget)? {
            Ok(0) => eval_nat(t1, env, budget),
            Ok(_) => eval_nat(t2, env, budget),
            Err(()) => Some(Err(())),
        },
        PcfTerm::App(..) | PcfTerm::ProjL(_) | PcfTerm::ProjR(_) | PcfTerm::Fix { .. } => {
            match whnf(t, env, budget)? {
                Ok(head) => match head.term.as_ref() {
                    PcfTerm::Num(_) | PcfTerm::Succ(_) | PcfTerm::Pred(_) => {
                        eval_nat(&head.term, &head.env, budget)
                    }
                    _ => Some(Err(())),
                },
                Err(()) => Some(Err(())),
            }
        }
        PcfTerm::Lam { .. } | PcfTerm::Pair(..) => Some(Err(())),
    }
}

/// Reduces to weak head normal form (a constructor with its environment).
fn whnf(t: &PcfTerm, env: &Env, budget: &mut u64) -> Option<Result<Closure, ()>> {
    if !tick(budget) {
        return None;
    }
    match t {
        PcfTerm::Var(i) => match env.lookup(*i) {
            Some(c) => whnf(&c.term, &c.env, budget),
            None => Some(Err(())),
        },
        PcfTerm::App(f, arg) => match whnf(f, env, budget)? {
            Ok(head) => match head.term.as_ref() {
                PcfTerm::Lam { body, .. } => {
                    let bound = Closure { term: arg.clone(), env: env.clone() };
                    whnf(body, &head.env.cons(bound), budget)
                }
                _ => Some(Err(())),
            },
            Err(()) => Some(Err(())),
        },
        PcfTerm::ProjL(s) | PcfTerm::ProjR(s) => match whnf(s, env, budget)? {
            Ok(head) => match head.term.as_ref() {
                PcfTerm::Pair(a, b) => {
                    let pick = if matches!(t, PcfTerm::ProjL(_)) { a } else { b };
                    whnf(pick, &head.env, budget)
                }
                _ => Some(Err(())),
            },
            Err(()) => Some(Err(())),
        },
        PcfTerm::Fix { body, .. } => {
            let knot = Closure { term: Rc::new(t.clone()), env: env.clone() };
            whnf(body, &env.cons(knot), budget)
        }
        PcfTerm::Ifz(s, t1, t2) => match eval_nat(s, env, budget)? {
            Ok(0) => whnf(t1, env, budget),
            Ok(_) => whnf(t2, env, budget),
            Err(()) => Some(Err(())),
        },
        _ => Some(Ok(Closure { term: Rc::new(t.clone()), env: env.clone() })),
    }
}

// ---- surface syntax ----

/// Parses the PCF surface syntax: `nat`, `A => B`, `A * B`; terms are
/// numerals, `succ`/`pred`/`fst`/`snd` prefixes, `ifz s then t else u`,
/// `\x:A. s`, `fix x:A. s`, pairs `<s, t>`, application by juxtaposition,
/// `--` comments.
pub fn parse_pcf(src: &str) -> Result<PcfTerm, PcfError> {
    let toks = pcf_lex(src)?;
    let mut p = PcfParser { toks, at: 0, scope: Vec::new() };
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PTok {
    LParen,
    RParen,
    LAngle,
    RAngle,
    Comma,
    Dot,
    Colon,
    Backslash,
    DArrow,
    Star,
    Int(u64),
    Ident(String),
    Eof,
}

fn pcf_lex(src: &str) -> Result<Vec<PTok>, PcfError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                chars.next();
            }
            '-' => {
                chars.next();
                if chars.peek() == Some(&'-') {
                    for c in chars.by_ref() {
                        if c == '\n' {
                            break;
                        }
                    }
                } else {
                    return Err(PcfError::Syntax("expected `--`".into()));
                }
            }
            '(' => {
                chars.next();
                out.push(PTok::LParen);
            }
            ')' => {
                chars.next();
                out.push(PTok::RParen);
            }
            '<' => {
                chars.next();
                out.push(PTok::LAngle);
            }
            '>' => {
                chars.next();
                out.push(PTok::RAngle);
            }
            ',' => {
                chars.next();
                out.push(PTok::Comma);
            }
            '.' => {
                chars.next();
                out.push(PTok::Dot);
            }
            ':' => {
                chars.next();
                out.push(PTok::Colon);
            }
            '\\' => {
                chars.next();
                out.push(PTok::Backslash);
            }
            '*' => {
                chars.next();
                out.push(PTok::Star);
            }
            '=' => {
                chars.next();
                if chars.next() == Some('>') {
                    out.push(PTok::DArrow);
                } else {
                    return Err(PcfError::Syntax("expected `=>`".into()));
                }
            }
            '0'..='9' => {
                let mut n: u64 = 0;
                while let Some(&d) = chars.peek() {
                    if let Some(v) = d.to_digit(10) {
                        n = n * 10 + v as u64;
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(PTok::Int(n));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(PTok::Ident(s));
            }
            c => return Err(PcfError::Syntax(format!("unexpected character `{c}`"))),
        }
    }
    out.push(PTok::Eof);
    Ok(out)
}

const PCF_KEYWORDS: &[&str] =
    &["nat", "succ", "pred", "ifz", "then", "else", "fix", "fst", "snd"];

struct PcfParser {
    toks: Vec<PTok>,
    at: usize,
    scope: Vec<String>,
}

impl PcfParser {
    fn peek(&self) -> &PTok {
        &self.toks[self.at]
    }

    fn next(&mut self) -> PTok {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, t: PTok) -> Result<(), PcfError> {
        let got = self.next();
        if got == t {
            Ok(())
        } else {
            Err(PcfError::Syntax(format!("expected {t:?}, found {got:?}")))
        }
    }

    fn expect_eof(&mut self) -> Result<(), PcfError> {
        self.expect(PTok::Eof)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), PTok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<String, PcfError> {
        match self.next() {
            PTok::Ident(s) if !PCF_KEYWORDS.contains(&s.as_str()) => Ok(s),
            t => Err(PcfError::Syntax(format!("expected identifier, found {t:?}"))),
        }
    }

    fn ty(&mut self) -> Result<PcfType, PcfError> {
        let lhs = self.ty_prod()?;
        if *self.peek() == PTok::DArrow {
            self.next();
            let rhs = self.ty()?;
            Ok(PcfType::Arrow(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn ty_prod(&mut self) -> Result<PcfType, PcfError> {
        let lhs = self.ty_atom()?;
        if *self.peek() == PTok::Star {
            self.next();
            let rhs = self.ty_prod()?;
            Ok(PcfType::Prod(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn ty_atom(&mut self) -> Result<PcfType, PcfError> {
        match self.next() {
            PTok::Ident(s) if s == "nat" => Ok(PcfType::Nat),
            PTok::LParen => {
                let t = self.ty()?;
                self.expect(PTok::RParen)?;
                Ok(t)
            }
            t => Err(PcfError::Syntax(format!("expected a type, found {t:?}"))),
        }
    }

    fn term(&mut self) -> Result<PcfTerm, PcfError> {
        if *self.peek() == PTok::Backslash {
            self.next();
            let name = self.ident()?;
            self.expect(PTok::Colon)?;
            let annot = self.ty()?;
            self.expect(PTok::Dot)?;
            self.scope.push(name.clone());
            let body = self.term();
            self.scope.pop();
            return Ok(PcfTerm::Lam {
                hint: Rc::from(name.as_str()),
                annot,
                body: Rc::new(body?),
            });
        }
        if self.is_kw("fix") {
            self.next();
            let name = self.ident()?;
            self.expect(PTok::Colon)?;
            let annot = self.ty()?;
            self.expect(PTok::Dot)?;
            self.scope.push(name.clone());
            let body = self.term();
            self.scope.pop();
            return Ok(PcfTerm::Fix {
                hint: Rc::from(name.as_str()),
                annot,
                body: Rc::new(body?),
            });
        }
        if self.is_kw("ifz") {
            self.next();
            let s = self.term()?;
            if !self.is_kw("then") {
                return Err(PcfError::Syntax("expected `then`".into()));
            }
            self.next();
            let t1 = self.term()?;
            if !self.is_kw("else") {
                return Err(PcfError::Syntax("expected `else`".into()));
            }
            self.next();
            let t2 = self.term()?;
            return Ok(PcfTerm::Ifz(Rc::new(s), Rc::new(t1), Rc::new(t2)));
        }
        self.app()
    }

    fn starts_operand(&self) -> bool {
        match self.peek() {
            PTok::LParen | PTok::LAngle | PTok::Int(_) => true,
            PTok::Ident(s) => !matches!(s.as_str(), "then" | "else" | "nat"),
            _ => false,
        }
    }

    fn app(&mut self) -> Result<PcfTerm, PcfError> {
        let mut t = self.prefix()?;
        while self.starts_operand() {
            let arg = self.prefix()?;
            t = PcfTerm::App(Rc::new(t), Rc::new(arg));
        }
        Ok(t)
    }

    fn prefix(&mut self) -> Result<PcfTerm, PcfError> {
        if let PTok::Ident(s) = self.peek().clone() {
            let wrap: Option<fn(Rc<PcfTerm>) -> PcfTerm> = match s.as_str() {
                "succ" => Some(PcfTerm::Succ),
                "pred" => Some(PcfTerm::Pred),
                "fst" => Some(PcfTerm::ProjL),
                "snd" => Some(PcfTerm::ProjR),
                _ => None,
            };
            if let Some(wrap) = wrap {
                self.next();
                let inner = self.prefix()?;
                return Ok(wrap(Rc::new(inner)));
            }
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<PcfTerm, PcfError> {
        match self.next() {
            PTok::Int(n) => Ok(PcfTerm::Num(n)),
            PTok::LParen => {
                let t = self.term()?;
                self.expect(PTok::RParen)?;
                Ok(t)
            }
            PTok::LAngle => {
                let a = self.term()?;
                self.expect(PTok::Comma)?;
                let b = self.term()?;
                self.expect(PTok::RAngle)?;
                Ok(PcfTerm::Pair(Rc::new(a), Rc::new(b)))
            }
            PTok::Ident(s) if !PCF_KEYWORDS.contains(&s.as_str()) => {
                match self.scope.iter().rev().position(|v| *v == s) {
                    Some(i) => Ok(PcfTerm::Var(i as u32)),
                    None => Err(PcfError::Syntax(format!("unbound variable `{s}`"))),
                }
            }
            t => Err(PcfError::Syntax(format!("expected a term, found {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::explore;
    use crate::rational::zero;
    use crate::typecheck::check;
    use crate::typecheck::TypingContext;

    fn nat() -> PcfType {
        PcfType::Nat
    }

    #[test]
    fn clen_cases() {
        assert_eq!(clen(&nat()), 1);
        let a = PcfType::Arrow(Box::new(nat()), Box::new(nat()));
        assert_eq!(clen(&a), 1);
        let p = PcfType::Prod(Box::new(nat()), Box::new(nat()));
        let f = PcfType::Arrow(Box::new(p.clone()), Box::new(p.clone()));
        assert_eq!(clen(&f), 2);
    }

    #[test]
    fn ctype_cases() {
        assert_eq!(ctype(&nat()), vec![nat_ty().general()]);
        let p = PcfType::Prod(Box::new(nat()), Box::new(nat()));
        assert_eq!(ctype(&p).len(), 2);
        // ⟨ι⇒ι⟩ = [(!Nat ⊗ 1) -> Nat]
        let a = PcfType::Arrow(Box::new(nat()), Box::new(nat()));
        let expected = GenType::arrow(
            PosType::tensor(PosType::bang(nat_ty().general()), PosType::unit()),
            nat_ty().general(),
        );
        assert_eq!(ctype(&a), vec![expected]);
    }

    #[test]
    fn cbn_eval_basics() {
        let t = parse_pcf("pred (succ 0)").unwrap();
        assert_eq!(cbn_eval(&t, 1000), CbnResult::Num(0));
        let t = parse_pcf("ifz 0 then 7 else 9").unwrap();
        assert_eq!(cbn_eval(&t, 1000), CbnResult::Num(7));
        let t = parse_pcf("pred 0").unwrap();
        assert_eq!(cbn_eval(&t, 1000), CbnResult::Num(0));
        let t = parse_pcf(r"(\x:nat. succ x) 4").unwrap();
        assert_eq!(cbn_eval(&t, 1000), CbnResult::Num(5));
        let t = parse_pcf("fst <3, 9>").unwrap();
        assert_eq!(cbn_eval(&t, 1000), CbnResult::Num(3));
        // divergence times out
        let t = parse_pcf("fix x:nat. x").unwrap();
        assert_eq!(cbn_eval(&t, 1000), CbnResult::Timeout);
    }

    fn add_src() -> &'static str {
        r"fix add:nat => nat => nat. \x:nat. \y:nat. ifz x then y else succ (add (pred x) y)"
    }

    #[test]
    fn fix_defined_addition() {
        let t = parse_pcf(&format!("({}) 2 3", add_src())).unwrap();
        assert_eq!(cbn_eval(&t, 100_000), CbnResult::Num(5));
    }

    #[test]
    fn translation_typechecks_componentwise() {
        let progs = [
            "0",
            "succ (succ 0)",
            "pred (succ 0)",
            r"\x:nat. x",
            r"\x:nat * nat. <snd x, fst x>",
            "ifz 1 then <0, 1> else <1, 0>",
            r"(\x:nat. succ x) 4",
            add_src(),
            r"fix f:(nat * nat) => nat. \p:nat * nat. ifz fst p then snd p else f <pred (fst p), succ (snd p)>",
            r"fix p:nat * nat. <0, succ (fst p)>",
        ];
        for src in progs {
            let t = parse_pcf(src).unwrap();
            let (terms, a) = translate(&[], &t).unwrap();
            let comps = ctype(&a);
            assert_eq!(terms.len(), clen(&a), "{src}");
            assert_eq!(terms.len(), comps.len(), "{src}");
            for (term, ty) in terms.iter().zip(&comps) {
                let mut ctx = TypingContext::empty();
                check(&mut ctx, term, ty)
                    .unwrap_or_else(|e| panic!("{src} → {term}: {e}"));
            }
        }
    }

    #[test]
    fn translation_under_context_typechecks() {
        // Γ = (x : nat * nat), s = <snd x, fst x>
        let src = r"\x:nat * nat. <snd x, fst x>";
        let t = parse_pcf(src).unwrap();
        let PcfTerm::Lam { annot, body, .. } = &t else { panic!() };
        let (terms, a) = translate(std::slice::from_ref(annot), body).unwrap();
        let gamma = bang_seq(&ctype(annot));
        for (term, ty) in terms.iter().zip(ctype(&a)) {
            let mut ctx = TypingContext::empty();
            ctx.push("x", gamma.clone());
            check(&mut ctx, term, &ty).unwrap();
        }
    }

    #[test]
    fn ground_differential_against_cbn() {
        let progs = [
            ("pred (succ (succ 0))", 1u32),
            ("ifz 0 then 7 else 9", 7),
            (r"(\x:nat. succ (succ x)) 1", 3),
            ("fst <2, 9>", 2),
            ("snd <2, 9>", 9),
        ];
        for (src, expected) in progs {
            let t = parse_pcf(src).unwrap();
            assert_eq!(cbn_eval(&t, 100_000), CbnResult::Num(expected as u64), "{src}");
            let (terms, a) = translate(&[], &t).unwrap();
            assert_eq!(a, nat());
            let d = explore(&terms[0].erase_ascriptions(), 10_000, zero()).unwrap();
            assert_eq!(d.probability_of(&num(expected)), crate::rational::one(), "{src}");
        }
    }

    #[test]
    fn mutual_fix_translation_runs() {
        // fix at product arity exercises the sequential elimination: the
        // second component calls the first through the recursive pair
        for (src, expected) in [
            ("fst (fix p:nat * nat. <0, succ (fst p)>)", 0u32),
            ("snd (fix p:nat * nat. <0, succ (fst p)>)", 1),
        ] {
            let t = parse_pcf(src).unwrap();
            assert_eq!(cbn_eval(&t, 100_000), CbnResult::Num(expected as u64), "{src}");
            let (terms, _) = translate(&[], &t).unwrap();
            let d = explore(&terms[0].erase_ascriptions(), 50_000, zero()).unwrap();
            assert_eq!(d.probability_of(&num(expected)), crate::rational::one(), "{src}");
        }
    }
}
