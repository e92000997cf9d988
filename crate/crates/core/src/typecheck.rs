//! The typing judgment over positive-type contexts.
//!
//! Checking is syntax-directed and bidirectional: annotations on `\` and
//! `fix` make most terms inferable; `fold` and bare injections are
//! check-mode-only (their rules are not inference-directed), so standalone
//! occurrences need an `: T` ascription.

use crate::syntax::term::{Term, TermKind};
use crate::syntax::ty::{GenKind, GenType, PosKind, PosType};
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("unbound variable index {0}")]
    UnboundVar(u32),
    #[error("unbound type variable (index {0} at binder depth {1})")]
    UnboundTypeVar(u32, u32),
    #[error("applied a term of non-arrow type {0}")]
    ApplyNonArrow(GenType),
    #[error("argument has type {actual}, function expects {expected}")]
    ArgMismatch { expected: PosType, actual: PosType },
    #[error("case scrutinee has non-sum type {0}")]
    CaseNonSum(PosType),
    #[error("projection from non-tensor type {0}")]
    ProjectNonTensor(PosType),
    #[error("force of non-thunk type {0}")]
    ForceNonBang(GenType),
    #[error("unfold of non-recursive type {0}")]
    UnfoldNonMu(PosType),
    #[error("fold expects a recursive type, got {0}")]
    FoldNonMu(GenType),
    #[error("term has type {actual}, expected {expected}")]
    Mismatch { expected: GenType, actual: GenType },
    #[error("expected a positive type, got {0}")]
    NotPositive(GenType),
    #[error("cannot infer a type for `{0}`; add an ascription `: T`")]
    NeedAscription(String),
    #[error("type annotation is not closed: {0}")]
    OpenAnnotation(GenType),
}

/// An ordered list of (name hint, positive type); innermost binding last.
#[derive(Debug, Clone, Default)]
pub struct TypingContext {
    entries: Vec<(Rc<str>, PosType)>,
}

impl TypingContext {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, hint: impl Into<Rc<str>>, ty: PosType) {
        self.entries.push((hint.into(), ty));
    }

    pub fn pop(&mut self) {
        self.entries.pop();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// de Bruijn lookup: index 0 is the innermost binding.
    pub fn lookup(&self, index: u32) -> Option<&PosType> {
        let i = self.entries.len().checked_sub(1 + index as usize)?;
        Some(&self.entries[i].1)
    }

    pub fn types_outermost_first(&self) -> Vec<PosType> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn from_types(types: &[PosType]) -> Self {
        let mut ctx = Self::empty();
        for (i, t) in types.iter().enumerate() {
            ctx.push(format!("x{i}").as_str(), t.clone());
        }
        ctx
    }
}

/// Well-formedness: every free type variable is bound among `tyvars` binders.
/// (Arrow left sides and `rec` bodies are positive by construction of the
/// syntax tree.)
pub fn check_type_wf(t: &GenType, tyvars: u32) -> Result<(), TypeError> {
    let depth = t.free_depth();
    if depth > tyvars {
        Err(TypeError::UnboundTypeVar(depth - 1, tyvars))
    } else {
        Ok(())
    }
}

pub fn check_pos_type_wf(t: &PosType, tyvars: u32) -> Result<(), TypeError> {
    check_type_wf(&t.general(), tyvars)
}

fn closed_annot(t: &GenType) -> Result<(), TypeError> {
    if t.is_closed() {
        Ok(())
    } else {
        Err(TypeError::OpenAnnotation(t.clone()))
    }
}

/// Infers the unique type of `t` in `ctx`, or fails.
pub fn infer(ctx: &mut TypingContext, t: &Term) -> Result<GenType, TypeError> {
    match t.kind() {
        TermKind::Var(i) => {
            ctx.lookup(*i).map(|p| p.general()).ok_or(TypeError::UnboundVar(*i))
        }
        TermKind::One => Ok(PosType::unit().general()),
        TermKind::Coin(_) => Ok(PosType::sum(PosType::unit(), PosType::unit()).general()),
        TermKind::Thunk(m) => Ok(PosType::bang(infer(ctx, m)?).general()),
        TermKind::Pair(l, r) => {
            let lt = positive(infer(ctx, l)?)?;
            let rt = positive(infer(ctx, r)?)?;
            Ok(PosType::tensor(lt, rt).general())
        }
        TermKind::Inl(_) | TermKind::Inr(_) => Err(TypeError::NeedAscription(short(t))),
        TermKind::Fold(_) => Err(TypeError::NeedAscription(short(t))),
        TermKind::Lam { hint, annot, body } => {
            closed_annot(&annot.general())?;
            ctx.push(hint.clone(), annot.clone());
            let r = infer(ctx, body);
            ctx.pop();
            Ok(GenType::arrow(annot.clone(), r?))
        }
        TermKind::App(f, a) => {
            let ft = infer(ctx, f)?;
            match ft.kind() {
                GenKind::Arrow(arg, res) => {
                    check(ctx, a, &arg.general()).map_err(|e| match e {
                        TypeError::Mismatch { actual, .. } => match actual.as_pos() {
                            Some(p) => TypeError::ArgMismatch {
                                expected: arg.clone(),
                                actual: p.clone(),
                            },
                            None => TypeError::NotPositive(actual),
                        },
                        e => e,
                    })?;
                    Ok(res.clone())
                }
                GenKind::Pos(_) => Err(TypeError::ApplyNonArrow(ft)),
            }
        }
        TermKind::Case { scrut, lhint, left, rhint, right } => {
            let st = positive(infer(ctx, scrut)?)?;
            let (lt, rt) = match st.kind() {
                PosKind::Sum(l, r) => (l.clone(), r.clone()),
                _ => return Err(TypeError::CaseNonSum(st)),
            };
            ctx.push(lhint.clone(), lt.clone());
            let left_inferred = infer(ctx, left);
            ctx.pop();
            match left_inferred {
                Ok(sigma) => {
                    ctx.push(rhint.clone(), rt);
                    let r = check(ctx, right, &sigma);
                    ctx.pop();
                    r?;
                    Ok(sigma)
                }
                Err(left_err) => {
                    // the left branch may be check-only (fold/inj); try the right
                    ctx.push(rhint.clone(), rt.clone());
                    let right_inferred = infer(ctx, right);
                    ctx.pop();
                    let sigma = right_inferred.map_err(|_| left_err)?;
                    ctx.push(lhint.clone(), lt);
                    let r = check(ctx, left, &sigma);
                    ctx.pop();
                    r?;
                    Ok(sigma)
                }
            }
        }
        TermKind::PrL(m) | TermKind::PrR(m) => {
            let mt = positive(infer(ctx, m)?)?;
            match mt.kind() {
                PosKind::Tensor(l, r) => Ok(if matches!(t.kind(), TermKind::PrL(_)) {
                    l.general()
                } else {
                    r.general()
                }),
                _ => Err(TypeError::ProjectNonTensor(mt)),
            }
        }
        TermKind::Force(m) => {
            let mt = infer(ctx, m)?;
            match mt.kind() {
                GenKind::Pos(p) => match p.kind() {
                    PosKind::Bang(inner) => Ok(inner.clone()),
                    _ => Err(TypeError::ForceNonBang(mt.clone())),
                },
                GenKind::Arrow(..) => Err(TypeError::ForceNonBang(mt)),
            }
        }
        TermKind::Fix { hint, annot, body } => {
            closed_annot(annot)?;
            ctx.push(hint.clone(), PosType::bang(annot.clone()));
            let r = check(ctx, body, annot);
            ctx.pop();
            r?;
            Ok(annot.clone())
        }
        TermKind::Unfold(m) => {
            let mt = positive(infer(ctx, m)?)?;
            match mt.unfold_mu() {
                Some(u) => Ok(u.general()),
                None => Err(TypeError::UnfoldNonMu(mt)),
            }
        }
        TermKind::Ascribe(m, ty) => {
            closed_annot(ty)?;
            check(ctx, m, ty)?;
            Ok(ty.clone())
        }
    }
}

/// Checks `t` against `expected`, pushing the expectation through
/// introduction forms whose rules are not inference-directed.
pub fn check(ctx: &mut TypingContext, t: &Term, expected: &GenType) -> Result<(), TypeError> {
    match (t.kind(), expected.as_pos().map(PosType::kind)) {
        (TermKind::Inl(m), Some(PosKind::Sum(l, _))) => check(ctx, m, &l.general()),
        (TermKind::Inr(m), Some(PosKind::Sum(_, r))) => check(ctx, m, &r.general()),
        (TermKind::Fold(m), Some(PosKind::Mu { .. })) => {
            let phi = expected.as_pos().unwrap();
            let unfolded = phi.unfold_mu().expect("mu unfolds");
            check(ctx, m, &unfolded.general())
        }
        (TermKind::Fold(_), _) => Err(TypeError::FoldNonMu(expected.clone())),
        (TermKind::Pair(a, b), Some(PosKind::Tensor(l, r))) => {
            check(ctx, a, &l.general())?;
            check(ctx, b, &r.general())
        }
        (TermKind::Thunk(m), Some(PosKind::Bang(inner))) => check(ctx, m, inner),
        (TermKind::Lam { hint, annot, body }, _) => match expected.kind() {
            GenKind::Arrow(arg, res) => {
                closed_annot(&annot.general())?;
                if annot != arg {
                    return Err(TypeError::Mismatch {
                        expected: expected.clone(),
                        actual: GenType::arrow(annot.clone(), res.clone()),
                    });
                }
                ctx.push(hint.clone(), annot.clone());
                let r = check(ctx, body, res);
                ctx.pop();
                r
            }
            GenKind::Pos(_) => {
                let actual = infer(ctx, t)?;
                Err(TypeError::Mismatch { expected: expected.clone(), actual })
            }
        },
        (TermKind::Case { scrut, lhint, left, rhint, right }, _) => {
            let st = positive(infer(ctx, scrut)?)?;
            let (lt, rt) = match st.kind() {
                PosKind::Sum(l, r) => (l.clone(), r.clone()),
                _ => return Err(TypeError::CaseNonSum(st)),
            };
            ctx.push(lhint.clone(), lt);
            let r = check(ctx, left, expected);
            ctx.pop();
            r?;
            ctx.push(rhint.clone(), rt);
            let r = check(ctx, right, expected);
            ctx.pop();
            r
        }
        _ => {
            let actual = infer(ctx, t)?;
            if actual == *expected {
                Ok(())
            } else {
                Err(TypeError::Mismatch { expected: expected.clone(), actual })
            }
        }
    }
}

fn positive(t: GenType) -> Result<PosType, TypeError> {
    match t.as_pos() {
        Some(p) => Ok(p.clone()),
        None => Err(TypeError::NotPositive(t)),
    }
}

fn short(t: &Term) -> String {
    let s = t.to_string();
    if s.len() > 40 {
        let cut = s.char_indices().take_while(|(i, _)| *i < 40).last().map(|(i, c)| i + c.len_utf8()).unwrap_or(0);
        format!("{}…", &s[..cut])
    } else {
        s
    }
}

/// Convenience: infer the type of a closed term.
pub fn infer_closed(t: &Term) -> Result<GenType, TypeError> {
    infer(&mut TypingContext::empty(), t)
}

/// Convenience: check a closed term against a type.
pub fn check_closed(t: &Term, expected: &GenType) -> Result<(), TypeError> {
    check(&mut TypingContext::empty(), t, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::syntax::parse::{parse_gen_type, parse_term};

    fn nat() -> PosType {
        PosType::mu("z", PosType::sum(PosType::unit(), PosType::var(0)))
    }

    #[test]
    fn coin_is_boolean() {
        let t = Term::coin(rat(1, 3));
        assert_eq!(
            infer_closed(&t).unwrap(),
            PosType::sum(PosType::unit(), PosType::unit()).general()
        );
    }

    #[test]
    fn variable_axiom() {
        let mut ctx = TypingContext::empty();
        ctx.push("x", nat());
        assert_eq!(infer(&mut ctx, &Term::var(0)).unwrap(), nat().general());
    }

    #[test]
    fn fix_rule_gives_annotated_type() {
        // fix f:(Nat -> Nat). force f  :  Nat -> Nat
        let arrow = GenType::arrow(nat(), nat().general());
        let t = Term::fix("f", arrow.clone(), Term::force(Term::var(0)));
        assert_eq!(infer_closed(&t).unwrap(), arrow);
    }

    #[test]
    fn fold_checks_against_unfolding() {
        // fold (inl ()) : Nat
        let t = Term::fold(Term::inl(Term::one()));
        assert!(check_closed(&t, &nat().general()).is_ok());
        assert!(matches!(infer_closed(&t), Err(TypeError::NeedAscription(_))));
        // fold (inr (fold (inl ()))) : Nat
        let two = Term::fold(Term::inr(Term::fold(Term::inl(Term::one()))));
        assert!(check_closed(&two, &nat().general()).is_ok());
        // wrong shape rejected
        let bad = Term::fold(Term::pair(Term::one(), Term::one()));
        assert!(check_closed(&bad, &nat().general()).is_err());
    }

    #[test]
    fn application_checks_argument() {
        let id = Term::lam("x", PosType::unit(), Term::var(0));
        assert!(infer_closed(&Term::app(id.clone(), Term::one())).is_ok());
        let bad = Term::app(id, Term::thunk(Term::one()));
        assert!(matches!(infer_closed(&bad), Err(TypeError::ArgMismatch { .. })));
        let nonfun = Term::app(Term::one(), Term::one());
        assert!(matches!(infer_closed(&nonfun), Err(TypeError::ApplyNonArrow(_))));
    }

    #[test]
    fn weakening_holds() {
        let t = parse_term(r"\x:unit. x").unwrap();
        let ty = infer_closed(&t).unwrap();
        let mut ctx = TypingContext::empty();
        ctx.push("fresh", nat());
        assert_eq!(infer(&mut ctx, &t).unwrap(), ty);
    }

    #[test]
    fn ascription_enables_inference() {
        let t = parse_term("fold inl () : rec z. unit + z").unwrap();
        assert_eq!(infer_closed(&t).unwrap(), nat().general());
        let bad = parse_term("fold inl () : unit").unwrap();
        assert!(infer_closed(&bad).is_err());
    }

    #[test]
    fn case_with_checkable_branches() {
        let t = parse_term(
            "\\b:unit + unit. case b of { inl x -> fold inl () | inr y -> fold inr fold inl () } \
             : rec z. unit + z",
        )
        .unwrap();
        let ty = infer_closed(&t).unwrap();
        assert_eq!(
            ty,
            GenType::arrow(PosType::sum(PosType::unit(), PosType::unit()), nat().general())
        );
    }

    #[test]
    fn force_and_thunk() {
        let t = parse_term("force thunk coin(1/2)").unwrap();
        assert_eq!(infer_closed(&t).unwrap(), parse_gen_type("unit + unit").unwrap());
        let bad = parse_term("force ()").unwrap();
        assert!(matches!(infer_closed(&bad), Err(TypeError::ForceNonBang(_))));
    }

    #[test]
    fn projections() {
        let t = parse_term("fst <(), thunk ()>").unwrap();
        assert_eq!(infer_closed(&t).unwrap(), PosType::unit().general());
        let bad = parse_term("fst ()").unwrap();
        assert!(matches!(infer_closed(&bad), Err(TypeError::ProjectNonTensor(_))));
    }

    #[test]
    fn recursive_type_wf_example() {
        let t = parse_gen_type("rec z. !(z -> z)").unwrap();
        assert!(check_type_wf(&t, 0).is_ok());
        assert!(check_pos_type_wf(&PosType::var(0), 0).is_err());
        assert!(check_pos_type_wf(&PosType::var(0), 1).is_ok());
    }
}
