//! Experiment orchestration: adequacy sweeps and observational separation,
//! with deterministic JSON-serializable reports.
//!
//! Probabilities carry interval semantics: the operational side reports
//! `[lower, lower + residual]` at its step budget, the denotational side
//! `[truncated value, 1]`. A separation is only claimed when exact
//! operational intervals are disjoint, which is sound unconditionally.

use crate::eval::{explore_with, prob_unit, EvalError, ExploreOpts};
use crate::pcs::interpret::{sem_vector, unit_value};
use crate::pcs::matrix::SemError;
use crate::pcs::web::{in_web_gen, TruncParams, WebPoint};
use crate::rational::{Frac, Rat};
use crate::stdlib::{ran, tester, StdlibError, TesterFlavor};
use crate::syntax::term::Term;
use crate::syntax::ty::{GenType, PosKind};
use crate::typecheck::{infer_closed, TypeError};
use num::{BigInt, Zero as _};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("typing: {0}")]
    Typing(#[from] TypeError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("semantics: {0}")]
    Sem(#[from] SemError),
    #[error("generator: {0}")]
    Stdlib(#[from] StdlibError),
    #[error("the two terms have different types: {0} vs {1}")]
    TypeDisagreement(GenType, GenType),
    #[error("term is not of unit type")]
    NotUnit,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// The envelope every command writes. Reports are byte-identical across
/// runs given identical inputs, parameters and seeds; wall-clock is only
/// present when explicitly requested.
#[derive(Debug, Serialize)]
pub struct ExperimentReport<R: Serialize> {
    pub schema: &'static str,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub params: serde_json::Value,
    pub results: R,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

pub const REPORT_SCHEMA: &str = "pcbpv-report/1";

impl<R: Serialize> ExperimentReport<R> {
    pub fn new(command: impl Into<String>, results: R) -> Self {
        ExperimentReport {
            schema: REPORT_SCHEMA,
            command: command.into(),
            inputs: Vec::new(),
            params: serde_json::Value::Null,
            results,
            wall_clock_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

// ---- adequacy ----

#[derive(Debug, Clone, Serialize)]
pub struct AdequacyStage {
    pub steps: u64,
    pub trunc: TruncParams,
    pub operational: Frac,
    pub denotational: Frac,
}

#[derive(Debug, Serialize)]
pub struct AdequacyResults {
    pub stages: Vec<AdequacyStage>,
    pub operational_monotone: bool,
    pub denotational_monotone: bool,
    /// both endpoints within the requested tolerance of each other
    pub converged: bool,
    pub tolerance: Frac,
}

/// Tables `Red^n(t, ⋆)` against the truncated star entry along a schedule.
pub fn adequacy(
    t: &Term,
    schedule: &[(u64, TruncParams)],
    tolerance: &Rat,
) -> Result<AdequacyResults, HarnessError> {
    let ty = infer_closed(t)?;
    if !matches!(ty.as_pos().map(|p| p.kind()), Some(PosKind::Unit)) {
        return Err(HarnessError::NotUnit);
    }
    let erased = t.erase_ascriptions();
    let mut stages = Vec::with_capacity(schedule.len());
    for (steps, tr) in schedule {
        let operational = prob_unit(&erased, *steps)?;
        let denotational = unit_value(t, tr)?;
        stages.push(AdequacyStage {
            steps: *steps,
            trunc: tr.clone(),
            operational: Frac(operational),
            denotational: Frac(denotational),
        });
    }
    let operational_monotone =
        stages.windows(2).all(|w| w[0].operational.0 <= w[1].operational.0);
    let denotational_monotone =
        stages.windows(2).all(|w| w[0].denotational.0 <= w[1].denotational.0);
    let converged = match stages.last() {
        None => false,
        Some(last) => {
            let diff = if last.operational.0 >= last.denotational.0 {
                last.operational.0.clone() - last.denotational.0.clone()
            } else {
                last.denotational.0.clone() - last.operational.0.clone()
            };
            diff <= *tolerance
        }
    };
    Ok(AdequacyResults {
        stages,
        operational_monotone,
        denotational_monotone,
        converged,
        tolerance: Frac(tolerance.clone()),
    })
}

/// A geometric default schedule.
pub fn default_schedule() -> Vec<(u64, TruncParams)> {
    vec![
        (8, TruncParams::new(2, 2, 4)),
        (32, TruncParams::new(4, 3, 8)),
        (128, TruncParams::new(6, 3, 16)),
        (512, TruncParams::new(8, 4, 32)),
    ]
}

// ---- separation ----

#[derive(Debug, Clone, Serialize)]
pub struct Interval {
    pub lower: Frac,
    pub upper: Frac,
}

impl Interval {
    fn disjoint(&self, other: &Interval) -> bool {
        self.lower.0 > other.upper.0 || other.lower.0 > self.upper.0
    }
}

#[derive(Debug, Serialize)]
pub struct SeparationResults {
    pub point: String,
    pub tester_arity: u32,
    pub tester_coeff: String,
    pub semantic_entry_left: Frac,
    pub semantic_entry_right: Frac,
    /// witness parameter vector, when the search found one
    pub witness: Option<Vec<Frac>>,
    pub semantic_value_left: Option<Frac>,
    pub semantic_value_right: Option<Frac>,
    pub operational_left: Option<Interval>,
    pub operational_right: Option<Interval>,
    pub candidates_tried: u64,
    pub separated: bool,
    pub note: String,
}

pub struct SeparationOpts {
    pub tr: TruncParams,
    /// maximum number of parameter vectors to try
    pub budget: u64,
    /// chain depth for the operational confirmation
    pub steps: u64,
}

impl Default for SeparationOpts {
    fn default() -> Self {
        SeparationOpts { tr: TruncParams::new(5, 2, 16), budget: 4096, steps: 4096 }
    }
}

/// Builds the testing term for the point, searches small-denominator
/// parameter vectors for one where the truncated semantics of the two
/// applications differ, then confirms operationally: separation is reported
/// only when the exact `[lower, lower+residual]` intervals are disjoint.
pub fn separate(
    m1: &Term,
    m2: &Term,
    point: &WebPoint,
    opts: &SeparationOpts,
) -> Result<SeparationResults, HarnessError> {
    let ty1 = infer_closed(m1)?;
    let ty2 = infer_closed(m2)?;
    if ty1 != ty2 {
        return Err(HarnessError::TypeDisagreement(ty1, ty2));
    }
    if !in_web_gen(point, &ty1) {
        return Err(HarnessError::Stdlib(StdlibError::PointNotInWeb(
            point.clone(),
            ty1,
        )));
    }
    let bundle = tester(point, &ty1, TesterFlavor::Minus)?;
    let v1 = sem_vector(m1, &opts.tr)?;
    let v2 = sem_vector(m2, &opts.tr)?;
    let e1 = v1.get(point);
    let e2 = v2.get(point);

    let mut results = SeparationResults {
        point: point.to_string(),
        tester_arity: bundle.arity,
        tester_coeff: bundle.coeff.to_string(),
        semantic_entry_left: Frac(e1.clone()),
        semantic_entry_right: Frac(e2.clone()),
        witness: None,
        semantic_value_left: None,
        semantic_value_right: None,
        operational_left: None,
        operational_right: None,
        candidates_tried: 0,
        separated: false,
        note: String::new(),
    };

    if v1 == v2 {
        results.note =
            "truncated semantics of the two terms agree everywhere; no separation claimed".into();
        return Ok(results);
    }

    // returns (semantic value, operational lower bound, sound upper slack):
    // the slack excludes mass proven divergent by frontier recurrence
    let apply = |zeta: &[Rat], m: &Term| -> Result<(Rat, Rat, Rat), HarnessError> {
        let r = ran(zeta)?;
        let term = Term::app(
            Term::app(bundle.term.clone(), Term::thunk(r)),
            Term::thunk(m.clone()),
        );
        let sem = unit_value(&term, &opts.tr)?;
        let summary = explore_with(
            &term.erase_ascriptions(),
            &ExploreOpts::exact(opts.steps),
        )?;
        let low = summary.distribution.probability_of(&Term::one());
        let slack = summary.distribution.residual.clone() - summary.divergent.clone();
        Ok((sem, low, slack))
    };

    let mut tried = 0u64;
    'search: for denom in [2u64, 4, 8, 16] {
        for zeta in grids(bundle.arity as usize, denom) {
            if tried >= opts.budget {
                break 'search;
            }
            tried += 1;
            let (s1, low1, res1) = apply(&zeta, m1)?;
            let (s2, low2, res2) = apply(&zeta, m2)?;
            if s1 == s2 {
                continue;
            }
            let left = Interval {
                lower: Frac(low1.clone()),
                upper: Frac(low1.clone() + res1.clone()),
            };
            let right = Interval {
                lower: Frac(low2.clone()),
                upper: Frac(low2.clone() + res2.clone()),
            };
            let separated = left.disjoint(&right);
            results.witness = Some(zeta.iter().map(|q| Frac(q.clone())).collect());
            results.semantic_value_left = Some(Frac(s1));
            results.semantic_value_right = Some(Frac(s2));
            results.operational_left = Some(left);
            results.operational_right = Some(right);
            results.candidates_tried = tried;
            results.separated = separated;
            results.note = if separated {
                "operational intervals disjoint: observably separated".into()
            } else {
                "semantic gap found but operational intervals overlap at this budget".into()
            };
            if separated {
                return Ok(results);
            }
        }
        if bundle.arity == 0 {
            break;
        }
    }
    results.candidates_tried = tried;
    if results.witness.is_none() {
        results.note = format!(
            "search exhausted after {tried} candidates; semantics may agree at this point"
        );
    }
    Ok(results)
}

/// Parameter grids: vectors of the given arity with entries `k/denom`
/// summing to at most 1, ordered deterministically. The empty vector is the
/// sole candidate at arity 0.
fn grids(arity: usize, denom: u64) -> Vec<Vec<Rat>> {
    let mut out = Vec::new();
    let mut current: Vec<u64> = Vec::new();
    fn rec(arity: usize, denom: u64, left: u64, current: &mut Vec<u64>, out: &mut Vec<Vec<Rat>>) {
        if current.len() == arity {
            out.push(
                current
                    .iter()
                    .map(|k| Rat::new(BigInt::from(*k), BigInt::from(denom)))
                    .collect(),
            );
            return;
        }
        for k in 0..=left {
            current.push(k);
            rec(arity, denom, left - k, current, out);
            current.pop();
        }
    }
    rec(arity, denom, denom, &mut current, &mut out);
    // prefer interior points: all-zero vectors make every monomial vanish
    out.retain(|v| v.is_empty() || v.iter().any(|q| !q.is_zero()));
    out
}
