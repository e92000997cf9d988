//! Terms of the calculus.
//!
//! Binding is de Bruijn (alpha-equivalent terms compare equal); binders carry
//! a name hint used only for printing. Nodes are reference-counted and cache
//! a structural hash, the number of free indices and the value flag, so the
//! evaluator can merge states, skip closed subterms during substitution and
//! test valuehood in O(1).

use crate::rational::Rat;
use crate::syntax::ty::{GenType, PosType};
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

pub type Hint = Rc<str>;

#[derive(Clone)]
pub struct Term(Rc<Node>);

struct Node {
    kind: TermKind,
    hash: u64,
    /// largest free de Bruijn index + 1 (0 = closed)
    free: u32,
    value: bool,
}

#[derive(Clone)]
pub enum TermKind {
    Var(u32),
    One,
    Thunk(Term),
    Pair(Term, Term),
    Inl(Term),
    Inr(Term),
    Lam { hint: Hint, annot: PosType, body: Term },
    App(Term, Term),
    Case { scrut: Term, lhint: Hint, left: Term, rhint: Hint, right: Term },
    PrL(Term),
    PrR(Term),
    Force(Term),
    Fix { hint: Hint, annot: GenType, body: Term },
    Fold(Term),
    Unfold(Term),
    Coin(Rat),
    /// `M : T` — checked then erased; never reaches the evaluator.
    Ascribe(Term, GenType),
}

fn mix(seed: u64, x: u64) -> u64 {
    // splitmix64-style finalizer, good enough for structural hashing
    let mut z = seed ^ x.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_type_pos(t: &PosType) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    t.hash(&mut h);
    h.finish()
}

fn hash_type_gen(t: &GenType) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    t.hash(&mut h);
    h.finish()
}

impl Term {
    fn build(kind: TermKind) -> Term {
        let (hash, free, value) = match &kind {
            TermKind::Var(i) => (mix(1, *i as u64), i + 1, true),
            TermKind::One => (mix(2, 0), 0, true),
            TermKind::Thunk(t) => (mix(3, t.hash()), t.free(), true),
            TermKind::Pair(l, r) => {
                (mix(4, mix(l.hash(), r.hash())), l.free().max(r.free()), l.is_value() && r.is_value())
            }
            TermKind::Inl(t) => (mix(5, t.hash()), t.free(), t.is_value()),
            TermKind::Inr(t) => (mix(6, t.hash()), t.free(), t.is_value()),
            TermKind::Lam { annot, body, .. } => (
                mix(7, mix(hash_type_pos(annot), body.hash())),
                body.free().saturating_sub(1),
                false,
            ),
            TermKind::App(f, a) => (mix(8, mix(f.hash(), a.hash())), f.free().max(a.free()), false),
            TermKind::Case { scrut, left, right, .. } => (
                mix(9, mix(scrut.hash(), mix(left.hash(), right.hash()))),
                scrut
                    .free()
                    .max(left.free().saturating_sub(1))
                    .max(right.free().saturating_sub(1)),
                false,
            ),
            TermKind::PrL(t) => (mix(10, t.hash()), t.free(), false),
            TermKind::PrR(t) => (mix(11, t.hash()), t.free(), false),
            TermKind::Force(t) => (mix(12, t.hash()), t.free(), false),
            TermKind::Fix { annot, body, .. } => (
                mix(13, mix(hash_type_gen(annot), body.hash())),
                body.free().saturating_sub(1),
                false,
            ),
            TermKind::Fold(t) => (mix(14, t.hash()), t.free(), t.is_value()),
            TermKind::Unfold(t) => (mix(15, t.hash()), t.free(), false),
            TermKind::Coin(p) => {
                let mut h = std::collections::hash_map::DefaultHasher::new();
                p.hash(&mut h);
                (mix(16, h.finish()), 0, false)
            }
            TermKind::Ascribe(t, ty) => {
                (mix(17, mix(t.hash(), hash_type_gen(ty))), t.free(), false)
            }
        };
        Term(Rc::new(Node { kind, hash, free, value }))
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    pub fn hash(&self) -> u64 {
        self.0.hash
    }

    pub fn free(&self) -> u32 {
        self.0.free
    }

    pub fn is_closed(&self) -> bool {
        self.0.free == 0
    }

    /// The value grammar: variables, `()`, thunks, pairs of values,
    /// injections of values, folds of values.
    pub fn is_value(&self) -> bool {
        self.0.value
    }

    /// Weak-normal for closed terms: a value or an abstraction.
    pub fn is_weak_normal_closed(&self) -> bool {
        self.0.value || matches!(self.0.kind, TermKind::Lam { .. })
    }

    pub fn ptr_eq(&self, other: &Term) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    // constructors

    pub fn var(i: u32) -> Term {
        Term::build(TermKind::Var(i))
    }

    pub fn one() -> Term {
        Term::build(TermKind::One)
    }

    pub fn thunk(t: Term) -> Term {
        Term::build(TermKind::Thunk(t))
    }

    pub fn pair(l: Term, r: Term) -> Term {
        Term::build(TermKind::Pair(l, r))
    }

    pub fn inl(t: Term) -> Term {
        Term::build(TermKind::Inl(t))
    }

    pub fn inr(t: Term) -> Term {
        Term::build(TermKind::Inr(t))
    }

    pub fn lam(hint: impl Into<Hint>, annot: PosType, body: Term) -> Term {
        Term::build(TermKind::Lam { hint: hint.into(), annot, body })
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::build(TermKind::App(f, a))
    }

    pub fn case(
        scrut: Term,
        lhint: impl Into<Hint>,
        left: Term,
        rhint: impl Into<Hint>,
        right: Term,
    ) -> Term {
        Term::build(TermKind::Case {
            scrut,
            lhint: lhint.into(),
            left,
            rhint: rhint.into(),
            right,
        })
    }

    pub fn prl(t: Term) -> Term {
        Term::build(TermKind::PrL(t))
    }

    pub fn prr(t: Term) -> Term {
        Term::build(TermKind::PrR(t))
    }

    pub fn force(t: Term) -> Term {
        Term::build(TermKind::Force(t))
    }

    pub fn fix(hint: impl Into<Hint>, annot: GenType, body: Term) -> Term {
        Term::build(TermKind::Fix { hint: hint.into(), annot, body })
    }

    pub fn fold(t: Term) -> Term {
        Term::build(TermKind::Fold(t))
    }

    pub fn unfold(t: Term) -> Term {
        Term::build(TermKind::Unfold(t))
    }

    pub fn coin(p: Rat) -> Term {
        Term::build(TermKind::Coin(p))
    }

    pub fn ascribe(t: Term, ty: GenType) -> Term {
        Term::build(TermKind::Ascribe(t, ty))
    }

    /// Shifts free indices ≥ `cutoff` up by `d`. Shares subtrees with no
    /// affected variables.
    pub fn shift(&self, d: u32, cutoff: u32) -> Term {
        if d == 0 || self.free() <= cutoff {
            return self.clone();
        }
        match self.kind() {
            TermKind::Var(i) => Term::var(if *i >= cutoff { i + d } else { *i }),
            TermKind::One | TermKind::Coin(_) => self.clone(),
            TermKind::Thunk(t) => Term::thunk(t.shift(d, cutoff)),
            TermKind::Pair(l, r) => Term::pair(l.shift(d, cutoff), r.shift(d, cutoff)),
            TermKind::Inl(t) => Term::inl(t.shift(d, cutoff)),
            TermKind::Inr(t) => Term::inr(t.shift(d, cutoff)),
            TermKind::Lam { hint, annot, body } => {
                Term::lam(hint.clone(), annot.clone(), body.shift(d, cutoff + 1))
            }
            TermKind::App(f, a) => Term::app(f.shift(d, cutoff), a.shift(d, cutoff)),
            TermKind::Case { scrut, lhint, left, rhint, right } => Term::case(
                scrut.shift(d, cutoff),
                lhint.clone(),
                left.shift(d, cutoff + 1),
                rhint.clone(),
                right.shift(d, cutoff + 1),
            ),
            TermKind::PrL(t) => Term::prl(t.shift(d, cutoff)),
            TermKind::PrR(t) => Term::prr(t.shift(d, cutoff)),
            TermKind::Force(t) => Term::force(t.shift(d, cutoff)),
            TermKind::Fix { hint, annot, body } => {
                Term::fix(hint.clone(), annot.clone(), body.shift(d, cutoff + 1))
            }
            TermKind::Fold(t) => Term::fold(t.shift(d, cutoff)),
            TermKind::Unfold(t) => Term::unfold(t.shift(d, cutoff)),
            TermKind::Ascribe(t, ty) => Term::ascribe(t.shift(d, cutoff), ty.clone()),
        }
    }

    /// Capture-avoiding substitution of `v` for index `j` in `self`.
    /// The calculus only substitutes values at runtime, but any term is
    /// accepted here.
    pub fn subst(&self, v: &Term, j: u32) -> Term {
        if self.free() <= j {
            // index j does not occur
            return self.clone();
        }
        match self.kind() {
            TermKind::Var(i) => {
                if *i == j {
                    v.clone()
                } else if *i > j {
                    Term::var(i - 1)
                } else {
                    self.clone()
                }
            }
            TermKind::One | TermKind::Coin(_) => self.clone(),
            TermKind::Thunk(t) => Term::thunk(t.subst(v, j)),
            TermKind::Pair(l, r) => Term::pair(l.subst(v, j), r.subst(v, j)),
            TermKind::Inl(t) => Term::inl(t.subst(v, j)),
            TermKind::Inr(t) => Term::inr(t.subst(v, j)),
            TermKind::Lam { hint, annot, body } => {
                Term::lam(hint.clone(), annot.clone(), body.subst(&v.shift(1, 0), j + 1))
            }
            TermKind::App(f, a) => Term::app(f.subst(v, j), a.subst(v, j)),
            TermKind::Case { scrut, lhint, left, rhint, right } => {
                let v1 = v.shift(1, 0);
                Term::case(
                    scrut.subst(v, j),
                    lhint.clone(),
                    left.subst(&v1, j + 1),
                    rhint.clone(),
                    right.subst(&v1, j + 1),
                )
            }
            TermKind::PrL(t) => Term::prl(t.subst(v, j)),
            TermKind::PrR(t) => Term::prr(t.subst(v, j)),
            TermKind::Force(t) => Term::force(t.subst(v, j)),
            TermKind::Fix { hint, annot, body } => {
                Term::fix(hint.clone(), annot.clone(), body.subst(&v.shift(1, 0), j + 1))
            }
            TermKind::Fold(t) => Term::fold(t.subst(v, j)),
            TermKind::Unfold(t) => Term::unfold(t.subst(v, j)),
            TermKind::Ascribe(t, ty) => Term::ascribe(t.subst(v, j), ty.clone()),
        }
    }

    /// Strips ascriptions (they are typechecking artifacts).
    pub fn erase_ascriptions(&self) -> Term {
        match self.kind() {
            TermKind::Ascribe(t, _) => t.erase_ascriptions(),
            TermKind::Var(_) | TermKind::One | TermKind::Coin(_) => self.clone(),
            TermKind::Thunk(t) => Term::thunk(t.erase_ascriptions()),
            TermKind::Pair(l, r) => Term::pair(l.erase_ascriptions(), r.erase_ascriptions()),
            TermKind::Inl(t) => Term::inl(t.erase_ascriptions()),
            TermKind::Inr(t) => Term::inr(t.erase_ascriptions()),
            TermKind::Lam { hint, annot, body } => {
                Term::lam(hint.clone(), annot.clone(), body.erase_ascriptions())
            }
            TermKind::App(f, a) => Term::app(f.erase_ascriptions(), a.erase_ascriptions()),
            TermKind::Case { scrut, lhint, left, rhint, right } => Term::case(
                scrut.erase_ascriptions(),
                lhint.clone(),
                left.erase_ascriptions(),
                rhint.clone(),
                right.erase_ascriptions(),
            ),
            TermKind::PrL(t) => Term::prl(t.erase_ascriptions()),
            TermKind::PrR(t) => Term::prr(t.erase_ascriptions()),
            TermKind::Force(t) => Term::force(t.erase_ascriptions()),
            TermKind::Fix { hint, annot, body } => {
                Term::fix(hint.clone(), annot.clone(), body.erase_ascriptions())
            }
            TermKind::Fold(t) => Term::fold(t.erase_ascriptions()),
            TermKind::Unfold(t) => Term::unfold(t.erase_ascriptions()),
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 1;
        match self.kind() {
            TermKind::Var(_) | TermKind::One | TermKind::Coin(_) => {}
            TermKind::Thunk(t)
            | TermKind::Inl(t)
            | TermKind::Inr(t)
            | TermKind::PrL(t)
            | TermKind::PrR(t)
            | TermKind::Force(t)
            | TermKind::Fold(t)
            | TermKind::Unfold(t) => n += t.node_count(),
            TermKind::Pair(l, r) | TermKind::App(l, r) => n += l.node_count() + r.node_count(),
            TermKind::Lam { body, .. } | TermKind::Fix { body, .. } => n += body.node_count(),
            TermKind::Case { scrut, left, right, .. } => {
                n += scrut.node_count() + left.node_count() + right.node_count()
            }
            TermKind::Ascribe(t, _) => n += t.node_count(),
        }
        n
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        if Rc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.hash != other.0.hash || self.0.free != other.0.free {
            return false;
        }
        match (self.kind(), other.kind()) {
            (TermKind::Var(i), TermKind::Var(j)) => i == j,
            (TermKind::One, TermKind::One) => true,
            (TermKind::Thunk(a), TermKind::Thunk(b))
            | (TermKind::Inl(a), TermKind::Inl(b))
            | (TermKind::Inr(a), TermKind::Inr(b))
            | (TermKind::PrL(a), TermKind::PrL(b))
            | (TermKind::PrR(a), TermKind::PrR(b))
            | (TermKind::Force(a), TermKind::Force(b))
            | (TermKind::Fold(a), TermKind::Fold(b))
            | (TermKind::Unfold(a), TermKind::Unfold(b)) => a == b,
            (TermKind::Pair(a, b), TermKind::Pair(c, d))
            | (TermKind::App(a, b), TermKind::App(c, d)) => a == c && b == d,
            (
                TermKind::Lam { annot: t1, body: b1, .. },
                TermKind::Lam { annot: t2, body: b2, .. },
            ) => t1 == t2 && b1 == b2,
            (
                TermKind::Case { scrut: s1, left: l1, right: r1, .. },
                TermKind::Case { scrut: s2, left: l2, right: r2, .. },
            ) => s1 == s2 && l1 == l2 && r1 == r2,
            (
                TermKind::Fix { annot: t1, body: b1, .. },
                TermKind::Fix { annot: t2, body: b2, .. },
            ) => t1 == t2 && b1 == b2,
            (TermKind::Coin(p), TermKind::Coin(q)) => p == q,
            (TermKind::Ascribe(a, t1), TermKind::Ascribe(b, t2)) => t1 == t2 && a == b,
            _ => false,
        }
    }
}
impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

fn kind_rank(t: &TermKind) -> u8 {
    match t {
        TermKind::Var(_) => 0,
        TermKind::One => 1,
        TermKind::Thunk(_) => 2,
        TermKind::Pair(..) => 3,
        TermKind::Inl(_) => 4,
        TermKind::Inr(_) => 5,
        TermKind::Lam { .. } => 6,
        TermKind::App(..) => 7,
        TermKind::Case { .. } => 8,
        TermKind::PrL(_) => 9,
        TermKind::PrR(_) => 10,
        TermKind::Force(_) => 11,
        TermKind::Fix { .. } => 12,
        TermKind::Fold(_) => 13,
        TermKind::Unfold(_) => 14,
        TermKind::Coin(_) => 15,
        TermKind::Ascribe(..) => 16,
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        if Rc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        kind_rank(self.kind()).cmp(&kind_rank(other.kind())).then_with(|| {
            match (self.kind(), other.kind()) {
                (TermKind::Var(i), TermKind::Var(j)) => i.cmp(j),
                (TermKind::One, TermKind::One) => Ordering::Equal,
                (TermKind::Thunk(a), TermKind::Thunk(b))
                | (TermKind::Inl(a), TermKind::Inl(b))
                | (TermKind::Inr(a), TermKind::Inr(b))
                | (TermKind::PrL(a), TermKind::PrL(b))
                | (TermKind::PrR(a), TermKind::PrR(b))
                | (TermKind::Force(a), TermKind::Force(b))
                | (TermKind::Fold(a), TermKind::Fold(b))
                | (TermKind::Unfold(a), TermKind::Unfold(b)) => a.cmp(b),
                (TermKind::Pair(a, b), TermKind::Pair(c, d))
                | (TermKind::App(a, b), TermKind::App(c, d)) => a.cmp(c).then_with(|| b.cmp(d)),
                (
                    TermKind::Lam { body: b1, .. },
                    TermKind::Lam { body: b2, .. },
                )
                | (
                    TermKind::Fix { body: b1, .. },
                    TermKind::Fix { body: b2, .. },
                ) => b1.cmp(b2),
                (
                    TermKind::Case { scrut: s1, left: l1, right: r1, .. },
                    TermKind::Case { scrut: s2, left: l2, right: r2, .. },
                ) => s1.cmp(s2).then_with(|| l1.cmp(l2)).then_with(|| r1.cmp(r2)),
                (TermKind::Coin(p), TermKind::Coin(q)) => p.cmp(q),
                (TermKind::Ascribe(a, _), TermKind::Ascribe(b, _)) => a.cmp(b),
                _ => unreachable!("rank already discriminated"),
            }
        })
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
