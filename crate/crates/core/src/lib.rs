//! Probabilistic call-by-push-value, end to end.
//!
//! The crate is organised as a pipeline:
//!
//! * [`syntax`] — types and terms (de Bruijn internally, named surface
//!   syntax), values, substitution, parser and printer;
//! * [`typecheck`] — the syntax-directed typing judgment over positive
//!   contexts, with iso-recursive fold/unfold;
//! * [`eval`] — deterministic-strategy weak reduction as a Markov chain:
//!   one-step outcomes, exhaustive exact exploration, and seeded sampling;
//! * [`stdlib`] — generators for the derived constructs (booleans, naturals,
//!   streams, lists, dice, random naturals, probes, product/choice/extraction
//!   combinators), restriction operators and testing terms;
//! * [`pcs`] — truncated-web probabilistic coherence spaces: web enumeration,
//!   exponential structure (dereliction, digging, promotion), structural
//!   maps, and a compositional matrix interpreter over exact rationals;
//! * [`pcf`] — a call-by-name PCF with products, its translation into the
//!   core calculus, and a reference evaluator for differential testing;
//! * [`harness`] — experiment orchestration (adequacy sweeps, separation
//!   search) and deterministic JSON reports.

pub mod eval;
pub mod harness;
pub mod pcf;
pub mod pcs;
pub mod rational;
pub mod stdlib;
pub mod syntax;
pub mod typecheck;

pub use eval::{explore, prob_unit, sample, step, ExploreOpts, StepOutcome, TermDistribution};
pub use pcs::{SemMatrix, SemVector, TruncParams, WebPoint};
pub use rational::Rat;
pub use syntax::{GenType, PosType, Term};
pub use typecheck::TypingContext;
