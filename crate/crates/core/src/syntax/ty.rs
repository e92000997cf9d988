//! Positive and general types.
//!
//! Type variables are de Bruijn indices bound by `rec`; binders keep a name
//! hint for printing only. Equality is alpha (structural on indices, hints
//! ignored), with no implicit unfolding of `rec` — fold/unfold mediate.

use std::fmt;
use std::rc::Rc;

#[derive(Clone)]
pub struct PosType(Rc<PosNode>);

#[derive(Clone)]
pub struct GenType(Rc<GenNode>);

struct PosNode {
    kind: PosKind,
}

struct GenNode {
    kind: GenKind,
}

#[derive(Clone)]
pub enum PosKind {
    Unit,
    Bang(GenType),
    Tensor(PosType, PosType),
    Sum(PosType, PosType),
    /// de Bruijn index into enclosing `Mu` binders
    Var(u32),
    Mu { hint: Rc<str>, body: PosType },
}

#[derive(Clone)]
pub enum GenKind {
    Pos(PosType),
    Arrow(PosType, GenType),
}

impl PosType {
    fn new(kind: PosKind) -> Self {
        PosType(Rc::new(PosNode { kind }))
    }

    pub fn kind(&self) -> &PosKind {
        &self.0.kind
    }

    pub fn unit() -> Self {
        Self::new(PosKind::Unit)
    }

    pub fn bang(t: GenType) -> Self {
        Self::new(PosKind::Bang(t))
    }

    pub fn tensor(l: PosType, r: PosType) -> Self {
        Self::new(PosKind::Tensor(l, r))
    }

    pub fn sum(l: PosType, r: PosType) -> Self {
        Self::new(PosKind::Sum(l, r))
    }

    pub fn var(i: u32) -> Self {
        Self::new(PosKind::Var(i))
    }

    pub fn mu(hint: impl Into<Rc<str>>, body: PosType) -> Self {
        Self::new(PosKind::Mu { hint: hint.into(), body })
    }

    pub fn general(&self) -> GenType {
        GenType::pos(self.clone())
    }

    /// Largest free de Bruijn index plus one; 0 for closed types.
    pub fn free_depth(&self) -> u32 {
        match self.kind() {
            PosKind::Unit => 0,
            PosKind::Bang(t) => t.free_depth(),
            PosKind::Tensor(l, r) | PosKind::Sum(l, r) => l.free_depth().max(r.free_depth()),
            PosKind::Var(i) => i + 1,
            PosKind::Mu { body, .. } => body.free_depth().saturating_sub(1),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_depth() == 0
    }

    /// `self[replacement / var j]`, capture-avoiding.
    pub fn subst(&self, replacement: &PosType, j: u32) -> PosType {
        match self.kind() {
            PosKind::Unit => self.clone(),
            PosKind::Bang(t) => PosType::bang(t.subst(replacement, j)),
            PosKind::Tensor(l, r) => {
                PosType::tensor(l.subst(replacement, j), r.subst(replacement, j))
            }
            PosKind::Sum(l, r) => PosType::sum(l.subst(replacement, j), r.subst(replacement, j)),
            PosKind::Var(i) => {
                if *i == j {
                    replacement.clone()
                } else if *i > j {
                    PosType::var(i - 1)
                } else {
                    self.clone()
                }
            }
            PosKind::Mu { hint, body } => {
                PosType::mu(hint.clone(), body.subst(&replacement.shift(1, 0), j + 1))
            }
        }
    }

    fn shift(&self, d: u32, cutoff: u32) -> PosType {
        if self.free_depth() <= cutoff {
            return self.clone();
        }
        match self.kind() {
            PosKind::Unit => self.clone(),
            PosKind::Bang(t) => PosType::bang(t.shift(d, cutoff)),
            PosKind::Tensor(l, r) => PosType::tensor(l.shift(d, cutoff), r.shift(d, cutoff)),
            PosKind::Sum(l, r) => PosType::sum(l.shift(d, cutoff), r.shift(d, cutoff)),
            PosKind::Var(i) => PosType::var(if *i >= cutoff { i + d } else { *i }),
            PosKind::Mu { hint, body } => PosType::mu(hint.clone(), body.shift(d, cutoff + 1)),
        }
    }

    /// One unfolding of a `rec` type: `rec z. P  ↦  P[rec z. P / z]`.
    /// Returns `None` when the type is not recursive.
    pub fn unfold_mu(&self) -> Option<PosType> {
        match self.kind() {
            PosKind::Mu { body, .. } => Some(body.subst(self, 0)),
            _ => None,
        }
    }
}

impl GenType {
    fn new(kind: GenKind) -> Self {
        GenType(Rc::new(GenNode { kind }))
    }

    pub fn kind(&self) -> &GenKind {
        &self.0.kind
    }

    pub fn pos(p: PosType) -> Self {
        Self::new(GenKind::Pos(p))
    }

    pub fn arrow(arg: PosType, result: GenType) -> Self {
        Self::new(GenKind::Arrow(arg, result))
    }

    pub fn as_pos(&self) -> Option<&PosType> {
        match self.kind() {
            GenKind::Pos(p) => Some(p),
            GenKind::Arrow(..) => None,
        }
    }

    pub fn free_depth(&self) -> u32 {
        match self.kind() {
            GenKind::Pos(p) => p.free_depth(),
            GenKind::Arrow(a, r) => a.free_depth().max(r.free_depth()),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_depth() == 0
    }

    pub fn subst(&self, replacement: &PosType, j: u32) -> GenType {
        match self.kind() {
            GenKind::Pos(p) => GenType::pos(p.subst(replacement, j)),
            GenKind::Arrow(a, r) => {
                GenType::arrow(a.subst(replacement, j), r.subst(replacement, j))
            }
        }
    }

    fn shift(&self, d: u32, cutoff: u32) -> GenType {
        match self.kind() {
            GenKind::Pos(p) => GenType::pos(p.shift(d, cutoff)),
            GenKind::Arrow(a, r) => GenType::arrow(a.shift(d, cutoff), r.shift(d, cutoff)),
        }
    }
}

// Alpha-equality: structural on de Bruijn skeletons, name hints ignored.
impl PartialEq for PosType {
    fn eq(&self, other: &Self) -> bool {
        if Rc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (self.kind(), other.kind()) {
            (PosKind::Unit, PosKind::Unit) => true,
            (PosKind::Bang(a), PosKind::Bang(b)) => a == b,
            (PosKind::Tensor(a, b), PosKind::Tensor(c, d))
            | (PosKind::Sum(a, b), PosKind::Sum(c, d)) => a == c && b == d,
            (PosKind::Var(i), PosKind::Var(j)) => i == j,
            (PosKind::Mu { body: a, .. }, PosKind::Mu { body: b, .. }) => a == b,
            _ => false,
        }
    }
}
impl Eq for PosType {}

impl PartialEq for GenType {
    fn eq(&self, other: &Self) -> bool {
        if Rc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (self.kind(), other.kind()) {
            (GenKind::Pos(a), GenKind::Pos(b)) => a == b,
            (GenKind::Arrow(a, b), GenKind::Arrow(c, d)) => a == c && b == d,
            _ => false,
        }
    }
}
impl Eq for GenType {}

impl std::hash::Hash for PosType {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self.kind() {
            PosKind::Unit => state.write_u8(0),
            PosKind::Bang(t) => {
                state.write_u8(1);
                t.hash(state);
            }
            PosKind::Tensor(l, r) => {
                state.write_u8(2);
                l.hash(state);
                r.hash(state);
            }
            PosKind::Sum(l, r) => {
                state.write_u8(3);
                l.hash(state);
                r.hash(state);
            }
            PosKind::Var(i) => {
                state.write_u8(4);
                state.write_u32(*i);
            }
            PosKind::Mu { body, .. } => {
                state.write_u8(5);
                body.hash(state);
            }
        }
    }
}

impl std::hash::Hash for GenType {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self.kind() {
            GenKind::Pos(p) => {
                state.write_u8(0);
                p.hash(state);
            }
            GenKind::Arrow(a, r) => {
                state.write_u8(1);
                a.hash(state);
                r.hash(state);
            }
        }
    }
}

impl fmt::Debug for PosType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Debug for GenType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `type_equal` from the surface API: alpha-equivalence, no μ-unfolding.
pub fn type_equal(a: &GenType, b: &GenType) -> bool {
    a == b
}
