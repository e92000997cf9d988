//! Derived constructs: booleans, naturals, streams, lists, probabilistic
//! tests, restriction operators and testing terms. Every generator emits
//! core terms with fold/unfold inserted at recursive types.

use crate::pcs::web::{in_web_gen, WebPoint};
use crate::rational::{is_probability, one as rone, zero as rzero, Rat};
use crate::syntax::term::Term;
use crate::syntax::ty::{GenType, PosKind, PosType};
use num::BigInt;
use num::One as _;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StdlibError {
    #[error("probability {0} outside [0,1]")]
    BadProbability(Rat),
    #[error("probabilities sum to {0} > 1")]
    MassExceedsOne(Rat),
    #[error("empty window: left {0} > right {1}")]
    EmptyWindow(u32, u32),
    #[error("window index {0} out of range for {1} windows")]
    WindowIndex(u32, usize),
    #[error("point {0} is not in the web of {1}")]
    PointNotInWeb(WebPoint, GenType),
    #[error("value-flavor tester needs a positive type, got {0}")]
    TesterNeedsPositive(GenType),
}

// ---- ground types and constants ----

pub fn bool_ty() -> PosType {
    PosType::sum(PosType::unit(), PosType::unit())
}

pub fn nat_ty() -> PosType {
    PosType::mu("n", PosType::sum(PosType::unit(), PosType::var(0)))
}

pub fn tt() -> Term {
    Term::inl(Term::one())
}

pub fn ff() -> Term {
    Term::inr(Term::one())
}

/// `ifb M N_l N_r`: branch on a boolean, branch variables unused.
pub fn ifb(m: Term, n_l: Term, n_r: Term) -> Term {
    Term::case(m, "_l", n_l.shift(1, 0), "_r", n_r.shift(1, 0))
}

pub fn num(n: u32) -> Term {
    let mut t = Term::fold(Term::inl(Term::one()));
    for _ in 0..n {
        t = Term::fold(Term::inr(t));
    }
    t
}

pub fn succ_term(m: Term) -> Term {
    Term::fold(Term::inr(m))
}

/// `ifz M N_l (x. N_r)`: N_l is written in the current scope (shifted under
/// the unused zero-branch binder), N_r in the scope extended by the
/// predecessor variable.
pub fn ifz(m: Term, n_l: Term, hint: &str, n_r: Term) -> Term {
    Term::case(Term::unfold(m), "_z", n_l.shift(1, 0), hint, n_r)
}

/// The ever-looping program at any type.
pub fn loop_term(sigma: &GenType) -> Term {
    Term::fix("x", sigma.clone(), Term::force(Term::var(0)))
}

pub fn loop_unit() -> Term {
    loop_term(&PosType::unit().general())
}

pub fn loop_nat() -> Term {
    loop_term(&nat_ty().general())
}

// ---- probabilistic tests ----

/// `dice p M1 M2 = ifb (coin p) M1 M2`.
pub fn dice(p: Rat, m1: Term, m2: Term) -> Result<Term, StdlibError> {
    if !is_probability(&p) {
        return Err(StdlibError::BadProbability(p));
    }
    Ok(ifb(Term::coin(p), m1, m2))
}

/// The random natural: reduces to `num i` with probability `ps[i]`.
/// Renormalizes tail probabilities exactly; the last clause uses the
/// ever-looping program for the missing mass.
pub fn ran(ps: &[Rat]) -> Result<Term, StdlibError> {
    for p in ps {
        if !is_probability(p) {
            return Err(StdlibError::BadProbability(p.clone()));
        }
    }
    let total = ps.iter().fold(rzero(), |a, b| a + b);
    if total > rone() {
        return Err(StdlibError::MassExceedsOne(total));
    }
    Ok(ran_rec(ps))
}

fn ran_rec(ps: &[Rat]) -> Term {
    match ps {
        [] => loop_nat(),
        [p0, rest @ ..] => {
            if *p0 == rone() {
                return num(0);
            }
            if rest.is_empty() {
                return ifb(Term::coin(p0.clone()), num(0), loop_nat());
            }
            let scale = rone() - p0.clone();
            let renorm: Vec<Rat> = rest.iter().map(|p| p.clone() / scale.clone()).collect();
            ifb(Term::coin(p0.clone()), num(0), succ_term(ran_rec(&renorm)))
        }
    }
}

/// Tests equality to `k`: `probe k : Nat -> unit` converges on `num k`
/// exactly as often as its argument reduces there.
pub fn probe(k: u32) -> Term {
    if k == 0 {
        Term::lam("x", nat_ty(), ifz(Term::var(0), Term::one(), "z", loop_unit()))
    } else {
        Term::lam(
            "x",
            nat_ty(),
            ifz(Term::var(0), loop_unit(), "z", Term::app(probe(k - 1), Term::var(0))),
        )
    }
}

/// `Pprod_k` at result type `phi`: discards `k` unit arguments, then the
/// identity.
pub fn pprod(k: u32, phi: &PosType) -> Term {
    if k == 0 {
        Term::lam("y", phi.clone(), Term::var(0))
    } else {
        Term::lam("x", PosType::unit(), pprod(k - 1, phi))
    }
}

/// `M0 · N` at a positive type: converges to V with probability p·q.
pub fn dot(m0: Term, n: Term, phi: &PosType) -> Term {
    Term::app(Term::app(pprod(1, phi), m0), n)
}

/// `M0 ∧ … ∧ M_{k-1}` of unit-typed terms; `()` when empty.
pub fn and_chain(ms: &[Term]) -> Term {
    match ms.split_last() {
        None => Term::one(),
        Some((last, init)) => {
            let mut t = pprod(init.len() as u32, &PosType::unit());
            for m in init {
                t = Term::app(t, m.clone());
            }
            Term::app(t, last.clone())
        }
    }
}

/// Sequencing at a general type: run the unit term, then the body.
/// Extends `M0 · N` to non-positive `N` (a `Pprod` application would need a
/// value of general type).
pub fn seq_unit(m0: Term, n: Term) -> Term {
    Term::app(Term::lam("u", PosType::unit(), n.shift(1, 0)), m0)
}

/// `choose`: applied to a natural-typed term, reduces to `ms[i]` with its
/// probability of being `num i`; diverges out of range. The terms may
/// mention enclosing binders; shifting tracks the internal ones.
pub fn pchoose(sigma: &GenType, ms: &[Term]) -> Term {
    match ms.split_first() {
        None => Term::lam("z", nat_ty(), loop_term(sigma).shift(1, 0)),
        Some((m0, rest)) => {
            let m0 = m0.shift(1, 0); // under λz
            let rest: Vec<Term> = rest.iter().map(|m| m.shift(2, 0)).collect(); // λz + branch
            Term::lam(
                "z",
                nat_ty(),
                ifz(
                    Term::var(0),
                    m0,
                    "y",
                    Term::app(pchoose(sigma, &rest), Term::var(0)),
                ),
            )
        }
    }
}

/// `Pext l r : Nat -> Nat` keeps the sub-distribution with support in
/// `{l..r}` at its original indices.
pub fn pext(l: u32, r: u32) -> Result<Term, StdlibError> {
    if l > r {
        return Err(StdlibError::EmptyWindow(l, r));
    }
    Ok(pext_rec(l, r))
}

fn pext_rec(l: u32, r: u32) -> Term {
    if l == 0 && r == 0 {
        Term::lam("z", nat_ty(), ifz(Term::var(0), num(0), "x", loop_nat()))
    } else if l == 0 {
        let nums: Vec<Term> = (0..=r).map(num).collect();
        pchoose(&nat_ty().general(), &nums)
    } else {
        Term::lam(
            "z",
            nat_ty(),
            ifz(
                Term::var(0),
                loop_nat(),
                "x",
                succ_term(Term::app(pext_rec(l - 1, r - 1), Term::var(0))),
            ),
        )
    }
}

/// `Pwin i (n_0..n_k)`: the extractor for the i-th window of length `n_i`.
pub fn pwin(i: u32, ns: &[u32]) -> Result<Term, StdlibError> {
    if (i as usize) >= ns.len() {
        return Err(StdlibError::WindowIndex(i, ns.len()));
    }
    let offset: u32 = ns[..i as usize].iter().sum();
    let len = ns[i as usize];
    if len == 0 {
        return Err(StdlibError::EmptyWindow(offset, offset));
    }
    pext(offset, offset + len - 1)
}

/// Rebasing window: `num (offset+i) ↦ num i` for `i < len`, divergence
/// elsewhere. Testing terms hand windows of the parameter stream to their
/// sub-testers through this, so each sub-tester sees parameters starting at
/// index zero.
pub fn window(offset: u32, len: u32) -> Term {
    if len == 0 {
        Term::lam("z", nat_ty(), loop_nat())
    } else if offset == 0 {
        pext_rec(0, len - 1)
    } else {
        Term::lam(
            "z",
            nat_ty(),
            ifz(
                Term::var(0),
                loop_nat(),
                "x",
                Term::app(window(offset - 1, len), Term::var(0)),
            ),
        )
    }
}

// ---- streams and lists ----

/// `Stream φ = rec s. !(φ * s)`.
pub fn stream_ty(phi: &PosType) -> PosType {
    PosType::mu("s", PosType::bang(PosType::tensor(closed_for_mu(phi), PosType::var(0)).general()))
}

/// `λ0 φ = rec l. unit + (φ * l)` — strict lists.
pub fn list_strict_ty(phi: &PosType) -> PosType {
    PosType::mu(
        "l",
        PosType::sum(PosType::unit(), PosType::tensor(closed_for_mu(phi), PosType::var(0))),
    )
}

/// `λ1 φ = rec l. unit + !(φ * l)` — lazy lists / terminable streams.
pub fn list_lazy_ty(phi: &PosType) -> PosType {
    PosType::mu(
        "l",
        PosType::sum(
            PosType::unit(),
            PosType::bang(PosType::tensor(closed_for_mu(phi), PosType::var(0)).general()),
        ),
    )
}

/// `λ2 σ = rec l. unit + (!σ * l)` — lists of thunks of a general type.
pub fn list_thunks_ty(sigma: &GenType) -> PosType {
    PosType::mu(
        "l",
        PosType::sum(
            PosType::unit(),
            PosType::tensor(PosType::bang(sigma.clone()), PosType::var(0)),
        ),
    )
}

/// Closed element types sit under the `rec` binder unchanged.
fn closed_for_mu(phi: &PosType) -> PosType {
    debug_assert!(phi.is_closed(), "element types must be closed");
    phi.clone()
}

/// The nth-element function `M : Stream φ -> Nat -> φ`.
pub fn stream_nth(phi: &PosType) -> Term {
    let stream = stream_ty(phi);
    let ty = GenType::arrow(stream.clone(), GenType::arrow(nat_ty(), phi.general()));
    // fix f. λx. λy. ifz y (fst (force (unfold x))) (z. force f (snd (force (unfold x))) z)
    let head = Term::prl(Term::force(Term::unfold(Term::var(1)))); // y=0, x=1, f=2
    let tail_call = Term::app(
        Term::app(
            Term::force(Term::var(3)),
            Term::prr(Term::force(Term::unfold(Term::var(2)))),
        ),
        Term::var(0),
    ); // z=0, y=1, x=2, f=3
    Term::fix(
        "f",
        ty,
        Term::lam(
            "x",
            stream,
            Term::lam("y", nat_ty(), ifz(Term::var(0), head, "z", tail_call)),
        ),
    )
}

/// The value stream with no content: `O = fold (thunk (loop (φ * Stream φ)))`.
pub fn undefined_stream(phi: &PosType) -> Term {
    let stream = stream_ty(phi);
    let inner = PosType::tensor(phi.clone(), stream.clone()).general();
    Term::ascribe(Term::fold(Term::thunk(loop_term(&inner))), stream.general())
}

/// `N : !(Nat -> φ) -> Stream φ` turns a function into the stream of its
/// applications to successive naturals; the recursive call sits inside a
/// box, which keeps the construction lazy.
pub fn fun_to_stream(phi: &PosType) -> Term {
    let stream = stream_ty(phi);
    let fun = PosType::bang(GenType::arrow(nat_ty(), phi.general()));
    let ty = GenType::arrow(fun.clone(), stream.general());
    // fix F. λf. fold (thunk <force f (num 0), force F (thunk (λx. force f (succ x)))>)
    let head = Term::app(Term::force(Term::var(0)), num(0)); // f=0, F=1
    let shifted_fun_app = Term::app(Term::force(Term::var(1)), succ_term(Term::var(0))); // x=0, f=1, F=2
    let tail = Term::app(
        Term::force(Term::var(1)),
        Term::thunk(Term::lam("x", nat_ty(), shifted_fun_app)),
    );
    Term::fix(
        "F",
        ty,
        Term::lam("f", fun, Term::fold(Term::thunk(Term::pair(head, tail)))),
    )
}

/// `P : (Stream φ * Stream φ) -> (Nat + Nat) -> φ` selects a stream by the
/// tag and an element by the payload.
pub fn stream_pair_select(phi: &PosType) -> Term {
    let stream = stream_ty(phi);
    let pair_ty = PosType::tensor(stream.clone(), stream.clone());
    let tag_ty = PosType::sum(nat_ty(), nat_ty());
    let m = stream_nth(phi);
    // λy. λc. case c of { x -> M (fst y) x | x -> M (snd y) x }
    let left = Term::app(
        Term::app(m.clone(), Term::prl(Term::var(2))),
        Term::var(0),
    ); // x=0, c=1, y=2
    let right = Term::app(
        Term::app(m, Term::prr(Term::var(2))),
        Term::var(0),
    );
    Term::lam(
        "y",
        pair_ty,
        Term::lam("c", tag_ty, Term::case(Term::var(0), "x", left, "x", right)),
    )
}

/// The random boolean lazy list: empty with probability 1/4 at each cell,
/// otherwise a boxed cell holding a fresh coin and the recursion.
pub fn random_list() -> Term {
    let lam1 = list_lazy_ty(&bool_ty());
    let cell = Term::thunk(Term::pair(
        Term::coin(Rat::new(BigInt::from(1), BigInt::from(2))),
        Term::force(Term::var(0)),
    ));
    Term::fix(
        "x",
        lam1.general(),
        ifb(
            Term::coin(Rat::new(BigInt::from(1), BigInt::from(4))),
            Term::fold(Term::inl(Term::one())),
            Term::fold(Term::inr(cell)),
        ),
    )
}

/// `R : λ1 -> λ0` evaluates a terminable stream to a strict list.
pub fn force_list() -> Term {
    let lam1 = list_lazy_ty(&bool_ty());
    let lam0 = list_strict_ty(&bool_ty());
    let ty = GenType::arrow(lam1.clone(), lam0.general());
    let cell_ty = PosType::tensor(bool_ty(), lam1.clone());
    // fix f. λx. case unfold x of { z -> nil | z -> (λy. cons (fst y) (force f (snd y))) (force z) }
    let nil = Term::fold(Term::inl(Term::one()));
    let cons_body = Term::fold(Term::inr(Term::pair(
        Term::prl(Term::var(0)),
        Term::app(Term::force(Term::var(3)), Term::prr(Term::var(0))),
    ))); // y=0, z=1, x=2, f=3
    let rhs = Term::app(
        Term::lam("y", cell_ty, Term::ascribe(cons_body, lam0.general())),
        Term::force(Term::var(0)),
    ); // z=0, x=1, f=2
    Term::fix(
        "f",
        ty,
        Term::lam(
            "x",
            lam1,
            Term::case(
                Term::unfold(Term::var(0)),
                "z",
                Term::ascribe(nil, lam0.general()),
                "z",
                rhs,
            ),
        ),
    )
}

/// Named corpus of the example terms with their stated types.
pub struct CorpusItem {
    pub name: &'static str,
    pub term: Term,
    pub ty: GenType,
}

pub fn corpus() -> Vec<CorpusItem> {
    let unit = PosType::unit();
    let b = bool_ty();
    let nat = nat_ty();
    let stream_u = stream_ty(&unit);
    let lam1 = list_lazy_ty(&b);
    let lam0 = list_strict_ty(&b);
    let mut items = vec![
        CorpusItem {
            name: "stream_nth",
            term: stream_nth(&unit),
            ty: GenType::arrow(
                stream_u.clone(),
                GenType::arrow(nat.clone(), unit.general()),
            ),
        },
        CorpusItem {
            name: "stream_nth_bool",
            term: stream_nth(&b),
            ty: GenType::arrow(
                stream_ty(&b),
                GenType::arrow(nat.clone(), b.general()),
            ),
        },
        CorpusItem {
            name: "fun_to_stream",
            term: fun_to_stream(&nat),
            ty: GenType::arrow(
                PosType::bang(GenType::arrow(nat.clone(), nat.general())),
                stream_ty(&nat).general(),
            ),
        },
        CorpusItem {
            name: "stream_pair_select",
            term: stream_pair_select(&unit),
            ty: GenType::arrow(
                PosType::tensor(stream_u.clone(), stream_u.clone()),
                GenType::arrow(PosType::sum(nat.clone(), nat.clone()), unit.general()),
            ),
        },
        CorpusItem {
            name: "undefined_stream",
            term: undefined_stream(&unit),
            ty: stream_u.general(),
        },
        CorpusItem { name: "random_list", term: random_list(), ty: lam1.general() },
        CorpusItem {
            name: "force_list",
            term: force_list(),
            ty: GenType::arrow(lam1.clone(), lam0.general()),
        },
        CorpusItem {
            name: "empty_thunk_list",
            term: Term::ascribe(
                Term::fold(Term::inl(Term::one())),
                list_thunks_ty(&GenType::arrow(unit.clone(), unit.general())).general(),
            ),
            ty: list_thunks_ty(&GenType::arrow(unit.clone(), unit.general())).general(),
        },
        CorpusItem {
            name: "ran_quarters",
            term: Term::ascribe(
                ran(&[Rat::new(1.into(), 4.into()), Rat::new(3.into(), 4.into())]).unwrap(),
                nat.general(),
            ),
            ty: nat.general(),
        },
        CorpusItem {
            name: "probe_2",
            term: probe(2),
            ty: GenType::arrow(nat.clone(), unit.general()),
        },
        CorpusItem {
            name: "pext_1_3",
            term: pext(1, 3).unwrap(),
            ty: GenType::arrow(nat.clone(), nat.general()),
        },
        CorpusItem {
            name: "pwin_1",
            term: pwin(1, &[2, 3]).unwrap(),
            ty: GenType::arrow(nat.clone(), nat.general()),
        },
        CorpusItem {
            name: "choose_bools",
            term: pchoose(&b.general(), &[tt(), ff()]),
            ty: GenType::arrow(nat.clone(), b.general()),
        },
        CorpusItem {
            name: "loop_unit",
            term: loop_unit(),
            ty: unit.general(),
        },
    ];
    // dice over unit terms
    items.push(CorpusItem {
        name: "dice_half",
        term: dice(Rat::new(1.into(), 2.into()), Term::one(), loop_unit()).unwrap(),
        ty: unit.general(),
    });
    items
}

// ---- restriction operators ----

/// `Restr n σ : !σ -> σ`.
pub fn restr(n: u32, sigma: &GenType) -> Term {
    match sigma.kind() {
        crate::syntax::ty::GenKind::Pos(phi) => Term::lam(
            "x",
            PosType::bang(sigma.clone()),
            Term::app(restrv(n, phi), Term::force(Term::var(0))),
        ),
        crate::syntax::ty::GenKind::Arrow(phi, tau) => {
            // λf. λx. Restr n τ (thunk (force f (Restrv n φ x)))
            let inner = Term::app(
                Term::force(Term::var(1)),
                Term::app(restrv(n, phi), Term::var(0)),
            );
            Term::lam(
                "f",
                PosType::bang(sigma.clone()),
                Term::lam(
                    "x",
                    phi.clone(),
                    Term::app(restr(n, tau), Term::thunk(inner)),
                ),
            )
        }
    }
}

/// `Restrv n φ : φ -> φ`.
pub fn restrv(n: u32, phi: &PosType) -> Term {
    match phi.kind() {
        PosKind::Unit => Term::lam("x", phi.clone(), Term::var(0)),
        PosKind::Bang(sigma) => Term::lam(
            "x",
            phi.clone(),
            Term::thunk(Term::app(restr(n, sigma), Term::var(0))),
        ),
        PosKind::Tensor(l, r) => Term::lam(
            "x",
            phi.clone(),
            Term::pair(
                Term::app(restrv(n, l), Term::prl(Term::var(0))),
                Term::app(restrv(n, r), Term::prr(Term::var(0))),
            ),
        ),
        PosKind::Sum(l, r) => {
            let body = Term::case(
                Term::var(0),
                "xl",
                Term::inl(Term::app(restrv(n, l), Term::var(0))),
                "xr",
                Term::inr(Term::app(restrv(n, r), Term::var(0))),
            );
            Term::lam("x", phi.clone(), Term::ascribe(body, phi.general()))
        }
        PosKind::Mu { .. } => {
            if n == 0 {
                Term::lam("x", phi.clone(), loop_term(&phi.general()))
            } else {
                let unfolded = phi.unfold_mu().expect("mu unfolds");
                let body = Term::fold(Term::app(
                    restrv(n - 1, &unfolded),
                    Term::unfold(Term::var(0)),
                ));
                Term::lam("x", phi.clone(), Term::ascribe(body, phi.general()))
            }
        }
        PosKind::Var(_) => unreachable!("restriction of open types"),
    }
}

// ---- testing terms ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TesterFlavor {
    /// `Testv a : !Nat -> φ -> unit`
    Value,
    /// `Testa a : !Nat -> σ`
    Plus,
    /// `Testt a : !Nat -> !σ -> unit`
    Minus,
}

#[derive(Debug, Clone)]
pub struct TesterBundle {
    pub term: Term,
    /// number of random parameters the tester consumes
    pub arity: u32,
    /// coefficient of the unitary monomial; always positive
    pub coeff: BigInt,
}

/// Builds the testing term for a web point. Membership of the point in the
/// (untruncated) web of the type is checked first.
pub fn tester(a: &WebPoint, ty: &GenType, flavor: TesterFlavor) -> Result<TesterBundle, StdlibError> {
    if !in_web_gen(a, ty) {
        return Err(StdlibError::PointNotInWeb(a.clone(), ty.clone()));
    }
    let mut gen = TesterGen::default();
    match flavor {
        TesterFlavor::Value => {
            let phi = ty
                .as_pos()
                .ok_or_else(|| StdlibError::TesterNeedsPositive(ty.clone()))?;
            Ok(gen.value(a, phi))
        }
        TesterFlavor::Plus => Ok(gen.plus_gen(a, ty)),
        TesterFlavor::Minus => Ok(gen.minus(a, ty)),
    }
}

/// Independent recurrence evaluator for (arity, coeff): shares no code with
/// the term builder, so the two can be compared.
pub fn tester_stats(
    a: &WebPoint,
    ty: &GenType,
    flavor: TesterFlavor,
) -> Result<(u32, BigInt), StdlibError> {
    if !in_web_gen(a, ty) {
        return Err(StdlibError::PointNotInWeb(a.clone(), ty.clone()));
    }
    fn pos_stats(a: &WebPoint, phi: &PosType, value_flavor: bool) -> (u32, BigInt) {
        let head = crate::pcs::web::head_constructor(phi).expect("inhabited web");
        match (head.kind(), a) {
            (PosKind::Unit, WebPoint::Star) => (0, BigInt::one()),
            (PosKind::Bang(tau), WebPoint::Bag(elems)) => {
                if value_flavor {
                    let mut len = 0;
                    let mut coeff = BigInt::one();
                    for b in elems.iter() {
                        let (l, c) = gen_stats(b, tau, false);
                        len += l;
                        coeff *= c;
                    }
                    (len, coeff)
                } else {
                    let mut len = elems.len() as u32;
                    let mut coeff = crate::pcs::matrix::bag_factorial(elems);
                    for b in elems.iter() {
                        let (l, c) = gen_plus_stats(b, tau);
                        len += l;
                        coeff *= c;
                    }
                    (len, coeff)
                }
            }
            (PosKind::Tensor(l, r), WebPoint::Pair(x, y)) => {
                let (l1, c1) = pos_stats(x, l, value_flavor);
                let (l2, c2) = pos_stats(y, r, value_flavor);
                (l1 + l2, c1 * c2)
            }
            (PosKind::Sum(l, _), WebPoint::Inl(x)) => pos_stats(x, l, value_flavor),
            (PosKind::Sum(_, r), WebPoint::Inr(x)) => pos_stats(x, r, value_flavor),
            _ => unreachable!("membership checked"),
        }
    }
    // plus flavor at a general type
    fn gen_plus_stats(a: &WebPoint, sigma: &GenType) -> (u32, BigInt) {
        match sigma.kind() {
            crate::syntax::ty::GenKind::Pos(phi) => pos_stats(a, phi, false),
            crate::syntax::ty::GenKind::Arrow(phi, tau) => match a {
                WebPoint::Pair(b, c) => {
                    let (l1, c1) = pos_stats(b, phi, true);
                    let (l2, c2) = gen_plus_stats(c, tau);
                    (l1 + l2, c1 * c2)
                }
                _ => unreachable!("membership checked"),
            },
        }
    }
    // minus flavor at a general type
    fn gen_stats(a: &WebPoint, sigma: &GenType, _dummy: bool) -> (u32, BigInt) {
        match sigma.kind() {
            crate::syntax::ty::GenKind::Pos(phi) => pos_stats(a, phi, true),
            crate::syntax::ty::GenKind::Arrow(phi, tau) => match a {
                WebPoint::Pair(b, c) => {
                    let (l1, c1) = gen_plus_stats(b, &phi.general());
                    let (l2, c2) = gen_stats(c, tau, false);
                    (l1 + l2, c1 * c2)
                }
                _ => unreachable!("membership checked"),
            },
        }
    }
    Ok(match flavor {
        TesterFlavor::Value => {
            let phi = ty
                .as_pos()
                .ok_or_else(|| StdlibError::TesterNeedsPositive(ty.clone()))?;
            pos_stats(a, phi, true)
        }
        TesterFlavor::Plus => gen_plus_stats(a, ty),
        TesterFlavor::Minus => gen_stats(a, ty, false),
    })
}

#[derive(Default)]
struct TesterGen {
    value_memo: HashMap<(WebPoint, PosType), TesterBundle>,
    plus_memo: HashMap<(WebPoint, GenType), TesterBundle>,
    minus_memo: HashMap<(WebPoint, GenType), TesterBundle>,
}

fn bang_nat() -> PosType {
    PosType::bang(nat_ty().general())
}

/// `thunk (window(offset,len) (force Z))` with `Z` at the given index.
fn windowed_stream(z_index: u32, offset: u32, len: u32) -> Term {
    Term::thunk(Term::app(window(offset, len), Term::force(Term::var(z_index))))
}

impl TesterGen {
    /// `Testv a : !Nat -> φ -> unit`
    fn value(&mut self, a: &WebPoint, phi: &PosType) -> TesterBundle {
        let key = (a.clone(), phi.clone());
        if let Some(b) = self.value_memo.get(&key) {
            return b.clone();
        }
        let bundle = match phi.kind() {
            PosKind::Mu { .. } => {
                let unfolded = phi.unfold_mu().expect("mu unfolds");
                let inner = self.value(a, &unfolded);
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::lam(
                        "x",
                        phi.clone(),
                        Term::app(
                            Term::app(inner.term.clone(), Term::var(1)),
                            Term::unfold(Term::var(0)),
                        ),
                    ),
                );
                TesterBundle { term, arity: inner.arity, coeff: inner.coeff }
            }
            PosKind::Unit => TesterBundle {
                term: Term::lam("Z", bang_nat(), Term::lam("x", phi.clone(), Term::var(0))),
                arity: 0,
                coeff: BigInt::one(),
            },
            PosKind::Bang(tau) => {
                let elems = a.bag_elems().expect("membership checked").to_vec();
                let subs: Vec<TesterBundle> =
                    elems.iter().map(|b| self.minus(b, tau)).collect();
                let mut offset = 0;
                let mut conjuncts = Vec::with_capacity(subs.len());
                for sub in &subs {
                    // inside λZ λx: Z at 1, x at 0
                    conjuncts.push(Term::app(
                        Term::app(sub.term.clone(), windowed_stream(1, offset, sub.arity)),
                        Term::var(0),
                    ));
                    offset += sub.arity;
                }
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::lam("x", phi.clone(), and_chain(&conjuncts)),
                );
                let coeff = subs.iter().fold(BigInt::one(), |acc, s| acc * &s.coeff);
                TesterBundle { term, arity: offset, coeff }
            }
            PosKind::Tensor(lt, rt) => {
                let WebPoint::Pair(bl, br) = a else { unreachable!("membership checked") };
                let left = self.value(bl, lt);
                let right = self.value(br, rt);
                let c1 = Term::app(
                    Term::app(left.term.clone(), windowed_stream(1, 0, left.arity)),
                    Term::prl(Term::var(0)),
                );
                let c2 = Term::app(
                    Term::app(right.term.clone(), windowed_stream(1, left.arity, right.arity)),
                    Term::prr(Term::var(0)),
                );
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::lam("x", phi.clone(), and_chain(&[c1, c2])),
                );
                TesterBundle {
                    term,
                    arity: left.arity + right.arity,
                    coeff: left.coeff * right.coeff,
                }
            }
            PosKind::Sum(lt, rt) => {
                let (inner, is_left) = match a {
                    WebPoint::Inl(x) => (self.value(x, lt), true),
                    WebPoint::Inr(x) => (self.value(x, rt), false),
                    _ => unreachable!("membership checked"),
                };
                // λZ. λx. case x of { y -> Testv Z y | _ -> loop }
                let hit = Term::app(
                    Term::app(inner.term.clone(), Term::var(2)),
                    Term::var(0),
                ); // y=0, x=1, Z=2
                let miss = loop_unit();
                let body = if is_left {
                    Term::case(Term::var(0), "y", hit, "y", miss)
                } else {
                    Term::case(Term::var(0), "y", miss, "y", hit)
                };
                let term =
                    Term::lam("Z", bang_nat(), Term::lam("x", phi.clone(), body));
                TesterBundle { term, arity: inner.arity, coeff: inner.coeff }
            }
            PosKind::Var(_) => unreachable!("closed types only"),
        };
        self.value_memo.insert(key, bundle.clone());
        bundle
    }

    /// `Testa a : !Nat -> σ`
    fn plus_gen(&mut self, a: &WebPoint, sigma: &GenType) -> TesterBundle {
        let key = (a.clone(), sigma.clone());
        if let Some(b) = self.plus_memo.get(&key) {
            return b.clone();
        }
        let bundle = match sigma.kind() {
            crate::syntax::ty::GenKind::Pos(phi) => self.plus_pos(a, phi),
            crate::syntax::ty::GenKind::Arrow(phi, tau) => {
                let WebPoint::Pair(b, c) = a else { unreachable!("membership checked") };
                let vb = self.value(b, phi);
                let ac = self.plus_gen(c, tau);
                // λZ. λx. (Testv b ⟨win0⟩ x) ; (Testa c ⟨win1⟩)
                let check = Term::app(
                    Term::app(vb.term.clone(), windowed_stream(1, 0, vb.arity)),
                    Term::var(0),
                );
                let result = Term::app(ac.term.clone(), windowed_stream(1, vb.arity, ac.arity));
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::lam("x", phi.clone(), seq_unit(check, result)),
                );
                TesterBundle {
                    term,
                    arity: vb.arity + ac.arity,
                    coeff: vb.coeff * ac.coeff,
                }
            }
        };
        self.plus_memo.insert(key, bundle.clone());
        bundle
    }

    fn plus_pos(&mut self, a: &WebPoint, phi: &PosType) -> TesterBundle {
        match phi.kind() {
            PosKind::Mu { .. } => {
                let unfolded = phi.unfold_mu().expect("mu unfolds");
                let inner = self.plus_pos(a, &unfolded);
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::ascribe(
                        Term::fold(Term::app(inner.term.clone(), Term::var(0))),
                        phi.general(),
                    ),
                );
                TesterBundle { term, arity: inner.arity, coeff: inner.coeff }
            }
            PosKind::Unit => TesterBundle {
                term: Term::lam("Z", bang_nat(), Term::one()),
                arity: 0,
                coeff: BigInt::one(),
            },
            PosKind::Bang(tau) => {
                let elems = a.bag_elems().expect("membership checked").to_vec();
                let k = elems.len() as u32;
                let subs: Vec<TesterBundle> =
                    elems.iter().map(|b| self.plus_gen(b, tau)).collect();
                // windows: draw window [0,k), then one per element
                let mut offset = k;
                let mut choices = Vec::with_capacity(subs.len());
                for sub in &subs {
                    choices.push(Term::app(
                        sub.term.clone(),
                        windowed_stream(0, offset, sub.arity),
                    )); // Z at 0 inside λZ
                    offset += sub.arity;
                }
                let body = Term::thunk(Term::app(
                    pchoose(tau, &choices),
                    Term::force(Term::var(0)),
                ));
                let term = Term::lam("Z", bang_nat(), body);
                let coeff = subs
                    .iter()
                    .fold(crate::pcs::matrix::bag_factorial(&elems), |acc, s| acc * &s.coeff);
                TesterBundle { term, arity: offset, coeff }
            }
            PosKind::Tensor(lt, rt) => {
                let WebPoint::Pair(bl, br) = a else { unreachable!("membership checked") };
                let left = self.plus_pos(bl, lt);
                let right = self.plus_pos(br, rt);
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::pair(
                        Term::app(left.term.clone(), windowed_stream(0, 0, left.arity)),
                        Term::app(right.term.clone(), windowed_stream(0, left.arity, right.arity)),
                    ),
                );
                TesterBundle {
                    term,
                    arity: left.arity + right.arity,
                    coeff: left.coeff * right.coeff,
                }
            }
            PosKind::Sum(lt, rt) => {
                let (inner, is_left) = match a {
                    WebPoint::Inl(x) => (self.plus_pos(x, lt), true),
                    WebPoint::Inr(x) => (self.plus_pos(x, rt), false),
                    _ => unreachable!("membership checked"),
                };
                let applied = Term::app(inner.term.clone(), Term::var(0));
                let injected = if is_left { Term::inl(applied) } else { Term::inr(applied) };
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::ascribe(injected, phi.general()),
                );
                TesterBundle { term, arity: inner.arity, coeff: inner.coeff }
            }
            PosKind::Var(_) => unreachable!("closed types only"),
        }
    }

    /// `Testt a : !Nat -> !σ -> unit`
    fn minus(&mut self, a: &WebPoint, sigma: &GenType) -> TesterBundle {
        let key = (a.clone(), sigma.clone());
        if let Some(b) = self.minus_memo.get(&key) {
            return b.clone();
        }
        let bundle = match sigma.kind() {
            crate::syntax::ty::GenKind::Pos(phi) => {
                let inner = self.value(a, phi);
                // λZ. λx:!φ. Testv a Z (force x)
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::lam(
                        "x",
                        PosType::bang(sigma.clone()),
                        Term::app(
                            Term::app(inner.term.clone(), Term::var(1)),
                            Term::force(Term::var(0)),
                        ),
                    ),
                );
                TesterBundle { term, arity: inner.arity, coeff: inner.coeff }
            }
            crate::syntax::ty::GenKind::Arrow(phi, tau) => {
                let WebPoint::Pair(b, c) = a else { unreachable!("membership checked") };
                let ab = self.plus_gen(b, &phi.general());
                let tc = self.minus(c, tau);
                // λZ. λf:!(φ->τ). Testt c ⟨win1⟩ (thunk (force f (Testa b ⟨win0⟩)))
                let arg = Term::thunk(Term::app(
                    Term::force(Term::var(0)),
                    Term::app(ab.term.clone(), windowed_stream(1, 0, ab.arity)),
                ));
                let term = Term::lam(
                    "Z",
                    bang_nat(),
                    Term::lam(
                        "f",
                        PosType::bang(sigma.clone()),
                        Term::app(
                            Term::app(
                                tc.term.clone(),
                                windowed_stream(1, ab.arity, tc.arity),
                            ),
                            arg,
                        ),
                    ),
                );
                TesterBundle {
                    term,
                    arity: ab.arity + tc.arity,
                    coeff: ab.coeff * tc.coeff,
                }
            }
        };
        self.minus_memo.insert(key, bundle.clone());
        bundle
    }
}

/// The stated type of a tester at `ty` with the given flavor.
pub fn tester_type(ty: &GenType, flavor: TesterFlavor) -> Result<GenType, StdlibError> {
    let unit = PosType::unit().general();
    Ok(match flavor {
        TesterFlavor::Value => {
            let phi = ty
                .as_pos()
                .ok_or_else(|| StdlibError::TesterNeedsPositive(ty.clone()))?;
            GenType::arrow(bang_nat(), GenType::arrow(phi.clone(), unit))
        }
        TesterFlavor::Plus => GenType::arrow(bang_nat(), ty.clone()),
        TesterFlavor::Minus => GenType::arrow(
            bang_nat(),
            GenType::arrow(PosType::bang(ty.clone()), unit),
        ),
    })
}
