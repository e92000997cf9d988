//! Weak reduction as a Markov chain.
//!
//! The strategy is the deterministic one of the reduction figure: the unique
//! active position is found by descending arguments before functions, left
//! pair components before right ones, and scrutinees/projectees/unfoldees to
//! values. One chain step is one axiom firing (force-thunk, beta on a value,
//! projection, fix unrolling, case on an injected value, unfold-fold) or a
//! coin flip; congruence descent is administrative and free.
//!
//! Two implementations coexist on purpose: [`step`] is a direct recursive
//! transcription of the reduction rules, used by tests and available to
//! callers; exploration and sampling run on a zipper machine (frame stack +
//! focus) whose states reassemble to terms. The two are differentially
//! tested against each other.

use crate::rational::{one, zero, Rat};
use crate::syntax::term::{Hint, Term, TermKind};
use num::{BigInt, One as _, Zero as _};
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    /// A closed term that is neither weak-normal nor reducible: impossible on
    /// typed input, so surfacing one means the evaluator or typechecker is
    /// wrong.
    #[error("stuck non-weak-normal term (soundness defect): {0}")]
    Stuck(Term),
    #[error("ascription reached the evaluator; erase_ascriptions first")]
    Ascription,
    #[error("state budget exceeded ({states} live states)")]
    StateBudget { states: usize, partial: TermDistribution },
}

/// One-step outcome of the stochastic matrix at a term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    WeakNormal,
    Det(Term),
    /// Coin in strategy position: left successor with probability `p`,
    /// right with `1 - p`.
    Branch(Rat, Term, Term),
}

/// Direct implementation of the one-step reduction.
pub fn step(t: &Term) -> Result<StepOutcome, EvalError> {
    if t.is_weak_normal_closed() {
        return Ok(StepOutcome::WeakNormal);
    }
    fn under(
        out: StepOutcome,
        whole: &Term,
        wrap: impl Fn(Term) -> Term,
    ) -> Result<StepOutcome, EvalError> {
        match out {
            // inner weak-normal but the context demanded a value: stuck
            StepOutcome::WeakNormal => Err(EvalError::Stuck(whole.clone())),
            StepOutcome::Det(n) => Ok(StepOutcome::Det(wrap(n))),
            StepOutcome::Branch(p, a, b) => Ok(StepOutcome::Branch(p, wrap(a), wrap(b))),
        }
    }
    match t.kind() {
        TermKind::Coin(p) => Ok(StepOutcome::Branch(
            p.clone(),
            Term::inl(Term::one()),
            Term::inr(Term::one()),
        )),
        TermKind::Force(m) => match m.kind() {
            TermKind::Thunk(n) => Ok(StepOutcome::Det(n.clone())),
            _ if !m.is_value() => under(step(m)?, t, Term::force),
            _ => Err(EvalError::Stuck(t.clone())),
        },
        TermKind::App(f, a) => {
            if !a.is_value() {
                let f = f.clone();
                under(step(a)?, t, move |a| Term::app(f.clone(), a))
            } else if let TermKind::Lam { body, .. } = f.kind() {
                Ok(StepOutcome::Det(body.subst(a, 0)))
            } else {
                let a = a.clone();
                under(step(f)?, t, move |f| Term::app(f, a.clone()))
            }
        }
        TermKind::Pair(l, r) => {
            if !l.is_value() {
                let r = r.clone();
                under(step(l)?, t, move |l| Term::pair(l, r.clone()))
            } else {
                let l = l.clone();
                under(step(r)?, t, move |r| Term::pair(l.clone(), r))
            }
        }
        TermKind::Inl(m) => under(step(m)?, t, Term::inl),
        TermKind::Inr(m) => under(step(m)?, t, Term::inr),
        TermKind::Fold(m) => under(step(m)?, t, Term::fold),
        TermKind::Unfold(m) => match m.kind() {
            TermKind::Fold(v) if v.is_value() => Ok(StepOutcome::Det(v.clone())),
            _ if !m.is_value() => under(step(m)?, t, Term::unfold),
            _ => Err(EvalError::Stuck(t.clone())),
        },
        TermKind::PrL(m) | TermKind::PrR(m) => {
            let left = matches!(t.kind(), TermKind::PrL(_));
            if m.is_value() {
                match m.kind() {
                    TermKind::Pair(vl, vr) => {
                        Ok(StepOutcome::Det(if left { vl.clone() } else { vr.clone() }))
                    }
                    _ => Err(EvalError::Stuck(t.clone())),
                }
            } else {
                under(step(m)?, t, move |m| if left { Term::prl(m) } else { Term::prr(m) })
            }
        }
        TermKind::Case { scrut, lhint, left, rhint, right } => {
            if scrut.is_value() {
                match scrut.kind() {
                    TermKind::Inl(v) => Ok(StepOutcome::Det(left.subst(v, 0))),
                    TermKind::Inr(v) => Ok(StepOutcome::Det(right.subst(v, 0))),
                    _ => Err(EvalError::Stuck(t.clone())),
                }
            } else {
                let (lh, l, rh, r) = (lhint.clone(), left.clone(), rhint.clone(), right.clone());
                under(step(scrut)?, t, move |s| {
                    Term::case(s, lh.clone(), l.clone(), rh.clone(), r.clone())
                })
            }
        }
        TermKind::Fix { body, .. } => {
            Ok(StepOutcome::Det(body.subst(&Term::thunk(t.clone()), 0)))
        }
        TermKind::Ascribe(..) => Err(EvalError::Ascription),
        // values and abstractions were already filtered; a free variable is a
        // value and also filtered
        TermKind::Var(_) | TermKind::One | TermKind::Thunk(_) | TermKind::Lam { .. } => {
            unreachable!("weak-normal cases handled above")
        }
    }
}

// ---- zipper machine ----

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^ (z >> 31)
}

#[derive(Clone)]
enum Frame {
    /// evaluating the argument; the function waits
    AppArg { fun: Term },
    /// argument is a value; evaluating the function
    AppFun { arg: Term },
    PairL { right: Term },
    PairR { left: Term },
    Inl,
    Inr,
    Fold,
    Unfold,
    Force,
    PrL,
    PrR,
    Case { lhint: Hint, left: Term, rhint: Hint, right: Term },
}

impl Frame {
    fn hash(&self) -> u64 {
        match self {
            Frame::AppArg { fun } => mix(101, fun.hash()),
            Frame::AppFun { arg } => mix(102, arg.hash()),
            Frame::PairL { right } => mix(103, right.hash()),
            Frame::PairR { left } => mix(104, left.hash()),
            Frame::Inl => mix(105, 0),
            Frame::Inr => mix(106, 0),
            Frame::Fold => mix(107, 0),
            Frame::Unfold => mix(108, 0),
            Frame::Force => mix(109, 0),
            Frame::PrL => mix(110, 0),
            Frame::PrR => mix(111, 0),
            Frame::Case { left, right, .. } => mix(112, mix(left.hash(), right.hash())),
        }
    }

    fn plug(&self, t: Term) -> Term {
        match self {
            Frame::AppArg { fun } => Term::app(fun.clone(), t),
            Frame::AppFun { arg } => Term::app(t, arg.clone()),
            Frame::PairL { right } => Term::pair(t, right.clone()),
            Frame::PairR { left } => Term::pair(left.clone(), t),
            Frame::Inl => Term::inl(t),
            Frame::Inr => Term::inr(t),
            Frame::Fold => Term::fold(t),
            Frame::Unfold => Term::unfold(t),
            Frame::Force => Term::force(t),
            Frame::PrL => Term::prl(t),
            Frame::PrR => Term::prr(t),
            Frame::Case { lhint, left, rhint, right } => Term::case(
                t,
                lhint.clone(),
                left.clone(),
                rhint.clone(),
                right.clone(),
            ),
        }
    }
}

impl PartialEq for Frame {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Frame::AppArg { fun: a }, Frame::AppArg { fun: b }) => a == b,
            (Frame::AppFun { arg: a }, Frame::AppFun { arg: b }) => a == b,
            (Frame::PairL { right: a }, Frame::PairL { right: b }) => a == b,
            (Frame::PairR { left: a }, Frame::PairR { left: b }) => a == b,
            (Frame::Inl, Frame::Inl)
            | (Frame::Inr, Frame::Inr)
            | (Frame::Fold, Frame::Fold)
            | (Frame::Unfold, Frame::Unfold)
            | (Frame::Force, Frame::Force)
            | (Frame::PrL, Frame::PrL)
            | (Frame::PrR, Frame::PrR) => true,
            (
                Frame::Case { left: l1, right: r1, .. },
                Frame::Case { left: l2, right: r2, .. },
            ) => l1 == l2 && r1 == r2,
            _ => false,
        }
    }
}
impl Eq for Frame {}

struct StackNode {
    frame: Frame,
    next: Stack,
    hash: u64,
    len: u32,
}

#[derive(Clone)]
struct Stack(Option<Rc<StackNode>>);

impl Stack {
    fn empty() -> Stack {
        Stack(None)
    }

    fn hash(&self) -> u64 {
        self.0.as_ref().map_or(0x5bd1_e995, |n| n.hash)
    }

    fn len(&self) -> u32 {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    fn push(&self, frame: Frame) -> Stack {
        let hash = mix(self.hash(), frame.hash());
        Stack(Some(Rc::new(StackNode { frame, next: self.clone(), hash, len: self.len() + 1 })))
    }

    fn top(&self) -> Option<&Frame> {
        self.0.as_ref().map(|n| &n.frame)
    }

    fn pop(&self) -> Stack {
        self.0.as_ref().map_or_else(Stack::empty, |n| n.next.clone())
    }
}

impl PartialEq for Stack {
    fn eq(&self, other: &Self) -> bool {
        let (mut a, mut b) = (self, other);
        loop {
            match (&a.0, &b.0) {
                (None, None) => return true,
                (Some(x), Some(y)) => {
                    if Rc::ptr_eq(x, y) {
                        return true;
                    }
                    if x.hash != y.hash || x.len != y.len || x.frame != y.frame {
                        return false;
                    }
                    a = &x.next;
                    b = &y.next;
                }
                _ => return false,
            }
        }
    }
}
impl Eq for Stack {}

/// A machine configuration at a canonical point: either the whole term is
/// weak-normal, or the focus (with its top frame) is exactly the next redex.
#[derive(Clone)]
struct Config {
    stack: Stack,
    focus: Term,
}

impl Config {
    fn hash(&self) -> u64 {
        mix(self.stack.hash(), self.focus.hash())
    }

    fn reassemble(&self) -> Term {
        let mut t = self.focus.clone();
        let mut s = self.stack.clone();
        while let Some(node) = s.0 {
            t = node.frame.plug(t);
            s = node.next.clone();
        }
        t
    }
}

impl PartialEq for Config {
    fn eq(&self, other: &Self) -> bool {
        self.focus == other.focus && self.stack == other.stack
    }
}
impl Eq for Config {}

impl std::hash::Hash for Config {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(Config::hash(self));
    }
}

enum Canon {
    Normal(Term),
    AtRedex(Config),
}

/// Runs administrative moves (descent and value returns) until the
/// configuration is weak-normal or sits at the next redex. Never counts as a
/// chain step.
fn canonicalize(mut cfg: Config) -> Result<Canon, EvalError> {
    loop {
        if cfg.focus.is_value() {
            let Some(top) = cfg.stack.top() else {
                return Ok(Canon::Normal(cfg.focus));
            };
            match top {
                Frame::AppArg { fun } => {
                    let fun = fun.clone();
                    let arg = cfg.focus;
                    cfg = Config {
                        stack: cfg.stack.pop().push(Frame::AppFun { arg }),
                        focus: fun,
                    };
                }
                Frame::PairL { right } => {
                    let right = right.clone();
                    let left = cfg.focus;
                    let popped = cfg.stack.pop();
                    if right.is_value() {
                        cfg = Config { stack: popped, focus: Term::pair(left, right) };
                    } else {
                        cfg = Config {
                            stack: popped.push(Frame::PairR { left }),
                            focus: right,
                        };
                    }
                }
                Frame::PairR { left } => {
                    let t = Term::pair(left.clone(), cfg.focus);
                    cfg = Config { stack: cfg.stack.pop(), focus: t };
                }
                Frame::Inl => {
                    cfg = Config { stack: cfg.stack.pop(), focus: Term::inl(cfg.focus) };
                }
                Frame::Inr => {
                    cfg = Config { stack: cfg.stack.pop(), focus: Term::inr(cfg.focus) };
                }
                Frame::Fold => {
                    cfg = Config { stack: cfg.stack.pop(), focus: Term::fold(cfg.focus) };
                }
                // a value under one of these frames is the next redex
                Frame::AppFun { .. }
                | Frame::Force
                | Frame::PrL
                | Frame::PrR
                | Frame::Unfold
                | Frame::Case { .. } => return Ok(Canon::AtRedex(cfg)),
            }
            continue;
        }
        // focus is not a value
        match cfg.focus.kind() {
            TermKind::Lam { .. } => match cfg.stack.top() {
                None => return Ok(Canon::Normal(cfg.focus)),
                // beta is ready (or the configuration is stuck; fire reports)
                Some(_) => return Ok(Canon::AtRedex(cfg)),
            },
            TermKind::App(f, a) => {
                let (f, a) = (f.clone(), a.clone());
                cfg = if a.is_value() {
                    Config { stack: cfg.stack.push(Frame::AppFun { arg: a }), focus: f }
                } else {
                    Config { stack: cfg.stack.push(Frame::AppArg { fun: f }), focus: a }
                };
            }
            TermKind::Pair(l, r) => {
                let (l, r) = (l.clone(), r.clone());
                cfg = if l.is_value() {
                    Config { stack: cfg.stack.push(Frame::PairR { left: l }), focus: r }
                } else {
                    Config { stack: cfg.stack.push(Frame::PairL { right: r }), focus: l }
                };
            }
            TermKind::Inl(m) => {
                let m = m.clone();
                cfg = Config { stack: cfg.stack.push(Frame::Inl), focus: m };
            }
            TermKind::Inr(m) => {
                let m = m.clone();
                cfg = Config { stack: cfg.stack.push(Frame::Inr), focus: m };
            }
            TermKind::Fold(m) => {
                let m = m.clone();
                cfg = Config { stack: cfg.stack.push(Frame::Fold), focus: m };
            }
            TermKind::Unfold(m) => {
                let m = m.clone();
                cfg = Config { stack: cfg.stack.push(Frame::Unfold), focus: m };
            }
            TermKind::Force(m) => {
                let m = m.clone();
                cfg = Config { stack: cfg.stack.push(Frame::Force), focus: m };
            }
            TermKind::PrL(m) => {
                let m = m.clone();
                cfg = Config { stack: cfg.stack.push(Frame::PrL), focus: m };
            }
            TermKind::PrR(m) => {
                let m = m.clone();
                cfg = Config { stack: cfg.stack.push(Frame::PrR), focus: m };
            }
            TermKind::Case { scrut, lhint, left, rhint, right } => {
                let frame = Frame::Case {
                    lhint: lhint.clone(),
                    left: left.clone(),
                    rhint: rhint.clone(),
                    right: right.clone(),
                };
                let scrut = scrut.clone();
                cfg = Config { stack: cfg.stack.push(frame), focus: scrut };
            }
            TermKind::Fix { .. } | TermKind::Coin(_) => return Ok(Canon::AtRedex(cfg)),
            TermKind::Ascribe(..) => return Err(EvalError::Ascription),
            TermKind::Var(_) | TermKind::One | TermKind::Thunk(_) => {
                unreachable!("values handled above")
            }
        }
    }
}

enum Fired {
    Det(Config),
    Branch(Rat, Config, Config),
}

/// Applies exactly one reduction axiom at a canonical redex configuration.
fn fire(cfg: Config) -> Result<Fired, EvalError> {
    let stuck = |cfg: &Config| EvalError::Stuck(cfg.reassemble());
    match cfg.focus.kind() {
        TermKind::Fix { body, .. } => {
            let unrolled = body.subst(&Term::thunk(cfg.focus.clone()), 0);
            Ok(Fired::Det(Config { stack: cfg.stack, focus: unrolled }))
        }
        TermKind::Coin(p) => Ok(Fired::Branch(
            p.clone(),
            Config { stack: cfg.stack.clone(), focus: Term::inl(Term::one()) },
            Config { stack: cfg.stack, focus: Term::inr(Term::one()) },
        )),
        TermKind::Lam { body, .. } => match cfg.stack.top() {
            Some(Frame::AppFun { arg }) => {
                let reduct = body.subst(arg, 0);
                Ok(Fired::Det(Config { stack: cfg.stack.pop(), focus: reduct }))
            }
            _ => Err(stuck(&cfg)),
        },
        _ => {
            let top = cfg.stack.top().ok_or_else(|| stuck(&cfg))?;
            let popped = cfg.stack.pop();
            let focus = &cfg.focus;
            let next = match (top, focus.kind()) {
                (Frame::Force, TermKind::Thunk(n)) => n.clone(),
                (Frame::PrL, TermKind::Pair(vl, _)) => vl.clone(),
                (Frame::PrR, TermKind::Pair(_, vr)) => vr.clone(),
                (Frame::Unfold, TermKind::Fold(v)) => v.clone(),
                (Frame::Case { left, .. }, TermKind::Inl(v)) => left.subst(v, 0),
                (Frame::Case { right, .. }, TermKind::Inr(v)) => right.subst(v, 0),
                (Frame::AppFun { .. }, _) => return Err(stuck(&cfg)),
                _ => return Err(stuck(&cfg)),
            };
            Ok(Fired::Det(Config { stack: popped, focus: next }))
        }
    }
}

// ---- exploration ----

/// Sparse sub-distribution over weak-normal terms, plus the residual mass
/// (pruned or still in flight at the horizon). Entries plus residual sum to
/// one exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermDistribution {
    pub entries: BTreeMap<Term, Rat>,
    pub residual: Rat,
}

impl TermDistribution {
    pub fn mass(&self) -> Rat {
        self.entries.values().fold(zero(), |a, b| a + b)
    }

    pub fn probability_of(&self, t: &Term) -> Rat {
        self.entries.get(t).cloned().unwrap_or_else(zero)
    }
}

#[derive(Debug, Clone)]
pub struct ExploreOpts {
    /// Markov-chain depth bound (number of Red applications).
    pub max_steps: u64,
    /// Branch masses below this are moved to the residual.
    pub mass_floor: Rat,
    /// Guard against state-space explosion; exceeded budgets fail with the
    /// partial distribution.
    pub max_states: Option<usize>,
    /// When false, terminated mass is accumulated without retaining the
    /// normal forms (the entries map stays empty).
    pub retain_outcomes: bool,
}

impl ExploreOpts {
    pub fn exact(max_steps: u64) -> Self {
        ExploreOpts { max_steps, mass_floor: zero(), max_states: None, retain_outcomes: true }
    }
}

pub struct ExploreSummary {
    pub distribution: TermDistribution,
    /// Total terminated mass (equals `distribution.mass()` when outcomes are
    /// retained).
    pub terminated: Rat,
    /// Depth at which the frontier emptied, if it did.
    pub exhausted_at: Option<u64>,
    /// Mass proven divergent: the frontier state set recurred with no
    /// absorption or pruning in between, so its dynamics cycle without ever
    /// producing a normal form. Always a part of the residual.
    pub divergent: Rat,
}

/// Exhaustive weighted exploration of the reduction tree to the given depth,
/// merging identical states and absorbing weak-normal forms.
pub fn explore_with(t: &Term, opts: &ExploreOpts) -> Result<ExploreSummary, EvalError> {
    let mut entries: BTreeMap<Term, Rat> = BTreeMap::new();
    let mut terminated = zero();
    let mut residual = zero();
    let mut frontier: HashMap<Config, Rat> = HashMap::new();

    let absorb = |entries: &mut BTreeMap<Term, Rat>, terminated: &mut Rat, term: Term, p: Rat| {
        *terminated += p.clone();
        if opts.retain_outcomes {
            *entries.entry(term).or_insert_with(zero) += p;
        }
    };

    match canonicalize(Config { stack: Stack::empty(), focus: t.clone() })? {
        Canon::Normal(v) => absorb(&mut entries, &mut terminated, v, one()),
        Canon::AtRedex(cfg) => {
            frontier.insert(cfg, one());
        }
    }

    let mut exhausted_at = None;
    let mut divergent = zero();
    // frontier-set recurrence detection: the set dynamics are deterministic,
    // so a repeated state set with no absorption or pruning in the window
    // proves the trapped mass can never reach a normal form
    const SIG_LIMIT: usize = 64;
    let mut seen_sets: HashMap<u64, (u64, Vec<u64>)> = HashMap::new();
    let mut last_event: u64 = 0;
    for depth in 0..opts.max_steps {
        if frontier.is_empty() {
            exhausted_at = Some(depth);
            break;
        }
        if frontier.len() <= SIG_LIMIT {
            let mut sig: Vec<u64> = frontier.keys().map(Config::hash).collect();
            sig.sort_unstable();
            let mut key = 0xcbf2_9ce4_8422_2325u64;
            for x in &sig {
                key = mix(key, *x);
            }
            match seen_sets.get(&key) {
                Some((d0, prev)) if *prev == sig && last_event <= *d0 => {
                    for (_, p) in frontier.drain() {
                        divergent += p;
                    }
                    exhausted_at = Some(depth);
                    break;
                }
                _ => {
                    seen_sets.insert(key, (depth, sig));
                }
            }
        }
        let mut next: HashMap<Config, Rat> = HashMap::with_capacity(frontier.len());
        for (cfg, p) in frontier.drain() {
            if p.is_zero() {
                continue;
            }
            if !opts.mass_floor.is_zero() && p < opts.mass_floor {
                residual += p;
                last_event = depth;
                continue;
            }
            let mut push = |succ: Config,
                            mass: Rat,
                            last_event: &mut u64|
             -> Result<(), EvalError> {
                match canonicalize(succ)? {
                    Canon::Normal(v) => {
                        absorb(&mut entries, &mut terminated, v, mass);
                        *last_event = depth;
                    }
                    Canon::AtRedex(c) => {
                        *next.entry(c).or_insert_with(zero) += mass;
                    }
                }
                Ok(())
            };
            match fire(cfg)? {
                Fired::Det(c) => push(c, p, &mut last_event)?,
                Fired::Branch(q, a, b) => {
                    let right = one() - q.clone();
                    if !q.is_zero() {
                        push(a, p.clone() * q, &mut last_event)?;
                    }
                    if !right.is_zero() {
                        push(b, p * right, &mut last_event)?;
                    }
                }
            }
        }
        frontier = next;
        if let Some(max) = opts.max_states {
            if frontier.len() > max {
                let states = frontier.len();
                for (_, p) in frontier.drain() {
                    residual += p;
                }
                let partial = TermDistribution { entries, residual };
                return Err(EvalError::StateBudget { states, partial });
            }
        }
    }
    if frontier.is_empty() && exhausted_at.is_none() {
        exhausted_at = Some(opts.max_steps);
    }
    for (_, p) in frontier.drain() {
        residual += p;
    }
    residual += divergent.clone();
    Ok(ExploreSummary {
        distribution: TermDistribution { entries, residual },
        terminated,
        exhausted_at,
        divergent,
    })
}

/// [`explore_with`] with outcome retention; the common entry point.
pub fn explore(t: &Term, max_steps: u64, mass_floor: Rat) -> Result<TermDistribution, EvalError> {
    let opts = ExploreOpts {
        max_steps,
        mass_floor,
        max_states: None,
        retain_outcomes: true,
    };
    Ok(explore_with(t, &opts)?.distribution)
}

/// `Red^n_{t,()}` exactly: the probability of reaching `()` within `n` steps.
/// The caller is responsible for `t : unit`.
pub fn prob_unit(t: &Term, n: u64) -> Result<Rat, EvalError> {
    Ok(explore(t, n, zero())?.probability_of(&Term::one()))
}

// ---- sampling ----

/// SplitMix64: the fixed 64-bit generator behind `sample`. Splitting gives
/// independent streams for parallel runs; sequences are identical on every
/// platform.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn split(&mut self) -> SplitMix64 {
        SplitMix64 { state: self.next_u64() }
    }

    /// True with probability exactly `p`: compares the draw against
    /// `p * 2^64` in exact integer arithmetic.
    pub fn bernoulli(&mut self, p: &Rat) -> bool {
        let u = BigInt::from(self.next_u64());
        u * p.denom() < p.numer() * (BigInt::one() << 64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleResult {
    Normal(Term),
    Timeout,
}

/// One trajectory of the chain under a seeded deterministic stream.
pub fn sample(t: &Term, seed: u64, max_steps: u64) -> Result<SampleResult, EvalError> {
    let mut rng = SplitMix64::new(seed);
    let mut cfg = match canonicalize(Config { stack: Stack::empty(), focus: t.clone() })? {
        Canon::Normal(v) => return Ok(SampleResult::Normal(v)),
        Canon::AtRedex(c) => c,
    };
    for _ in 0..max_steps {
        let succ = match fire(cfg)? {
            Fired::Det(c) => c,
            Fired::Branch(p, a, b) => {
                if rng.bernoulli(&p) {
                    a
                } else {
                    b
                }
            }
        };
        match canonicalize(succ)? {
            Canon::Normal(v) => return Ok(SampleResult::Normal(v)),
            Canon::AtRedex(c) => cfg = c,
        }
    }
    Ok(SampleResult::Timeout)
}

/// Machine-backed single step, for differential testing against [`step`]:
/// canonicalizes, fires once, and reassembles.
pub fn machine_step(t: &Term) -> Result<StepOutcome, EvalError> {
    match canonicalize(Config { stack: Stack::empty(), focus: t.clone() })? {
        Canon::Normal(_) => Ok(StepOutcome::WeakNormal),
        Canon::AtRedex(cfg) => match fire(cfg)? {
            Fired::Det(c) => Ok(StepOutcome::Det(c.reassemble())),
            Fired::Branch(p, a, b) => Ok(StepOutcome::Branch(p, a.reassemble(), b.reassemble())),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::syntax::parse::parse_term;
    use crate::syntax::ty::{GenType, PosType};

    fn loop1() -> Term {
        Term::fix("x", PosType::unit().general(), Term::force(Term::var(0)))
    }

    #[test]
    fn force_thunk_fires() {
        let t = parse_term("force thunk coin(1/2)").unwrap();
        assert_eq!(step(&t).unwrap(), StepOutcome::Det(Term::coin(rat(1, 2))));
    }

    #[test]
    fn coin_branches() {
        let t = Term::coin(rat(1, 4));
        match step(&t).unwrap() {
            StepOutcome::Branch(p, l, r) => {
                assert_eq!(p, rat(1, 4));
                assert_eq!(l, Term::inl(Term::one()));
                assert_eq!(r, Term::inr(Term::one()));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn abstraction_is_weak_normal() {
        let t = parse_term(r"\x:unit + unit. x").unwrap();
        assert_eq!(step(&t).unwrap(), StepOutcome::WeakNormal);
    }

    #[test]
    fn argument_reduces_before_function() {
        // (force (thunk \x:unit.x)) (force (thunk ())) — the argument fires first
        let t = parse_term(r"(force thunk (\x:unit. x)) (force thunk ())").unwrap();
        match step(&t).unwrap() {
            StepOutcome::Det(n) => {
                assert_eq!(n, parse_term(r"(force thunk (\x:unit. x)) ()").unwrap())
            }
            _ => panic!(),
        }
    }

    #[test]
    fn explore_coin_is_exact() {
        let d = explore(&Term::coin(rat(1, 2)), 1, zero()).unwrap();
        assert_eq!(d.probability_of(&Term::inl(Term::one())), rat(1, 2));
        assert_eq!(d.probability_of(&Term::inr(Term::one())), rat(1, 2));
        assert_eq!(d.residual, zero());
    }

    #[test]
    fn explore_loop_has_full_residual() {
        for n in [1u64, 10, 50] {
            let d = explore(&loop1(), n, zero()).unwrap();
            assert!(d.entries.is_empty());
            assert_eq!(d.residual, one());
        }
    }

    #[test]
    fn prob_unit_base_cases() {
        assert_eq!(prob_unit(&Term::one(), 0).unwrap(), one());
        assert_eq!(prob_unit(&loop1(), 1000).unwrap(), zero());
    }

    #[test]
    fn fix_unrolls_with_thunk() {
        let l = loop1();
        match step(&l).unwrap() {
            StepOutcome::Det(n) => assert_eq!(n, Term::force(Term::thunk(l.clone()))),
            _ => panic!(),
        }
    }

    #[test]
    fn distribution_mass_plus_residual_is_one() {
        // nested coins with a diverging arm
        let t = parse_term(
            "case coin(1/3) of { inl a -> coin(1/5) | inr b -> fix x:unit + unit. force x }",
        )
        .unwrap();
        let d = explore(&t, 100, zero()).unwrap();
        assert_eq!(d.mass() + d.residual.clone(), one());
        assert_eq!(d.probability_of(&Term::inl(Term::one())), rat(1, 15));
        assert_eq!(d.residual, rat(2, 3));
    }

    #[test]
    fn sampling_is_deterministic_and_exact_on_sure_coins() {
        let t = Term::coin(rat(1, 1));
        for seed in 0..32 {
            assert_eq!(
                sample(&t, seed, 2).unwrap(),
                SampleResult::Normal(Term::inl(Term::one()))
            );
        }
        let t = Term::coin(rat(0, 1));
        for seed in 0..32 {
            assert_eq!(
                sample(&t, seed, 2).unwrap(),
                SampleResult::Normal(Term::inr(Term::one()))
            );
        }
        assert_eq!(sample(&loop1(), 7, 100).unwrap(), SampleResult::Timeout);
    }

    #[test]
    fn machine_agrees_with_direct_step_along_traces() {
        let progs = [
            "force thunk coin(1/2)",
            r"(\x:unit + unit. case x of { inl a -> () | inr b -> () }) coin(1/3)",
            r"fst <force thunk (), thunk coin(1/2)>",
            "unfold (fold coin(1/2) : rec z. unit + unit)",
            r"(fix f:unit -> unit. \x:unit. x) ()",
        ];
        for src in progs {
            let mut t = parse_term(src).unwrap().erase_ascriptions();
            for _ in 0..60 {
                let a = step(&t).unwrap();
                let b = machine_step(&t).unwrap();
                assert_eq!(a, b, "divergence at {t}");
                match a {
                    StepOutcome::WeakNormal => break,
                    StepOutcome::Det(n) => t = n,
                    StepOutcome::Branch(_, l, _) => t = l,
                }
            }
        }
    }

    #[test]
    fn stochasticity_of_outcomes() {
        // Det edges carry 1, branches carry p + (1-p), normals self-loop
        let t = Term::coin(rat(2, 7));
        match step(&t).unwrap() {
            StepOutcome::Branch(p, _, _) => assert_eq!(p.clone() + (one() - p), one()),
            _ => panic!(),
        }
    }

    #[test]
    fn splitmix_reference_vector() {
        // first outputs for seed 1234567, cross-checked against the
        // published splitmix64 reference implementation
        let mut r = SplitMix64::new(1234567);
        let xs: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(xs, vec![6457827717110365317, 3203168211198807973, 9817491932198370423]);
    }

    #[test]
    fn state_budget_reports_partial() {
        let t = parse_term("case coin(1/2) of { inl a -> coin(1/2) | inr b -> coin(1/3) }")
            .unwrap();
        let opts = ExploreOpts {
            max_steps: 100,
            mass_floor: zero(),
            max_states: Some(1),
            retain_outcomes: true,
        };
        match explore_with(&t, &opts) {
            Err(EvalError::StateBudget { states, partial }) => {
                assert!(states > 1);
                assert_eq!(partial.mass() + partial.residual.clone(), one());
            }
            other => panic!("expected budget failure, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn ascription_rejected_by_evaluator() {
        let t = Term::ascribe(Term::one(), GenType::pos(PosType::unit()));
        assert!(matches!(step(&t), Err(EvalError::Ascription)));
    }
}
