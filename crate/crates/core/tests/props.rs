//! Property tests: grammar/printer round-trips, chain stochasticity,
//! subject reduction along explored edges, machine-vs-rules agreement,
//! monotonicity of step and truncation bounds, promotion functoriality.

use num::Zero;
use pcbpv_core::eval::{explore, machine_step, prob_unit, step, StepOutcome};
use pcbpv_core::pcs::interpret::unit_value;
use pcbpv_core::pcs::matrix::{promote, Row, SemMatrix, SemVector};
use pcbpv_core::pcs::web::{TruncParams, WebPoint};
use pcbpv_core::rational::{one, rat, zero, Rat};
use pcbpv_core::stdlib;
use pcbpv_core::syntax::parse::parse_term;
use pcbpv_core::syntax::term::Term;
use pcbpv_core::syntax::ty::{GenType, PosType};
use pcbpv_core::typecheck::{check_closed, infer_closed};
use proptest::prelude::*;

// ---- generators ----

fn arb_prob() -> impl Strategy<Value = Rat> {
    (0u32..=8).prop_map(|n| rat(n as i64, 8))
}

/// Closed unit-typed programs assembled from coins, dice, probes, random
/// naturals and unit combinators — the desk corpus shape.
fn arb_unit_program() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::one()),
        Just(stdlib::loop_unit()),
        arb_prob().prop_map(|p| stdlib::dice(p, Term::one(), stdlib::loop_unit()).unwrap()),
        (arb_prob(), arb_prob()).prop_map(|(p, q)| {
            let clipped = if p.clone() + q.clone() > one() { (p.clone(), one() - p) } else { (p, q) };
            Term::app(
                stdlib::probe(1),
                stdlib::ran(&[clipped.0, clipped.1]).unwrap(),
            )
        }),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (arb_prob(), inner.clone(), inner.clone())
                .prop_map(|(p, a, b)| stdlib::dice(p, a, b).unwrap()),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| stdlib::and_chain(&[a, b])),
            inner.clone().prop_map(|a| Term::force(Term::thunk(a))),
            inner
                .clone()
                .prop_map(|a| Term::app(Term::lam("x", PosType::unit(), Term::var(0)), a)),
        ]
    })
}

/// Well-scoped (not necessarily typed) terms for printer round-trips.
fn arb_term(depth: u32) -> BoxedStrategy<Term> {
    fn ty() -> BoxedStrategy<PosType> {
        prop_oneof![
            Just(PosType::unit()),
            Just(stdlib::bool_ty()),
            Just(stdlib::nat_ty()),
            Just(PosType::bang(PosType::unit().general())),
        ]
        .boxed()
    }
    fn go(depth: u32, scope: u32) -> BoxedStrategy<Term> {
        let mut leaves = vec![Just(Term::one()).boxed(), arb_prob().prop_map(Term::coin).boxed()];
        if scope > 0 {
            leaves.push((0..scope).prop_map(Term::var).boxed());
        }
        let leaf = proptest::strategy::Union::new(leaves);
        if depth == 0 {
            return leaf.boxed();
        }
        let sub = go(depth - 1, scope);
        let sub_b = go(depth - 1, scope + 1);
        prop_oneof![
            leaf,
            sub.clone().prop_map(Term::thunk),
            sub.clone().prop_map(Term::force),
            sub.clone().prop_map(Term::inl),
            sub.clone().prop_map(Term::inr),
            sub.clone().prop_map(Term::fold),
            sub.clone().prop_map(Term::unfold),
            sub.clone().prop_map(Term::prl),
            (sub.clone(), sub.clone()).prop_map(|(a, b)| Term::pair(a, b)),
            (sub.clone(), sub.clone()).prop_map(|(a, b)| Term::app(a, b)),
            (ty(), sub_b.clone()).prop_map(|(t, b)| Term::lam("x", t, b)),
            (ty(), sub_b.clone()).prop_map(|(t, b)| Term::fix("f", t.general(), b)),
            (sub.clone(), sub_b.clone(), sub_b.clone())
                .prop_map(|(s, l, r)| Term::case(s, "a", l, "b", r)),
            (sub, ty()).prop_map(|(a, t)| Term::ascribe(a, t.general())),
        ]
        .boxed()
    }
    go(depth, 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn printer_parser_roundtrip(t in arb_term(3)) {
        let printed = t.to_string();
        let back = parse_term(&printed)
            .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
        prop_assert_eq!(t, back);
    }

    #[test]
    fn chain_edges_are_stochastic_and_type_preserving(t in arb_unit_program()) {
        // Walk the leftmost trace; every step outcome has total probability
        // one and preserves the type. Reduction creates bare injections
        // (coin reducts) whose sum type the syntax-directed checker cannot
        // re-infer until the surrounding destructor fires; those transient
        // states may report NeedAscription for a bounded window but any
        // other checker error is a preservation failure.
        use pcbpv_core::typecheck::TypeError;
        let ty = infer_closed(&t).unwrap();
        let mut cur = t;
        let mut unresolved = 0u32;
        for _ in 0..60 {
            let verify = |n: &Term, unresolved: &mut u32| -> Result<(), TestCaseError> {
                match check_closed(n, &ty) {
                    Ok(()) => {
                        *unresolved = 0;
                        Ok(())
                    }
                    Err(TypeError::NeedAscription(_)) => {
                        *unresolved += 1;
                        prop_assert!(*unresolved <= 16, "ascription window never resolved at {n}");
                        Ok(())
                    }
                    Err(e) => {
                        prop_assert!(false, "preservation failed at {n}: {e}");
                        Ok(())
                    }
                }
            };
            match step(&cur).unwrap() {
                StepOutcome::WeakNormal => {
                    check_closed(&cur, &ty).unwrap();
                    break;
                }
                StepOutcome::Det(n) => {
                    verify(&n, &mut unresolved)?;
                    cur = n;
                }
                StepOutcome::Branch(p, a, b) => {
                    prop_assert!(p >= zero() && p <= one());
                    let next = if p.is_zero() { b.clone() } else { a.clone() };
                    verify(&a, &mut unresolved.clone())?;
                    verify(&b, &mut unresolved.clone())?;
                    verify(&next, &mut unresolved)?;
                    cur = next;
                }
            }
        }
        // every outcome the exploration reaches checks at the program type
        let d = explore(&cur, 60, zero()).unwrap();
        for outcome in d.entries.keys() {
            check_closed(outcome, &ty).unwrap();
        }
    }

    #[test]
    fn machine_agrees_with_rules(t in arb_unit_program()) {
        let mut cur = t;
        for _ in 0..60 {
            let direct = step(&cur).unwrap();
            let machine = machine_step(&cur).unwrap();
            prop_assert_eq!(&direct, &machine, "at {}", cur);
            match direct {
                StepOutcome::WeakNormal => break,
                StepOutcome::Det(n) => cur = n,
                StepOutcome::Branch(_, a, _) => cur = a,
            }
        }
    }

    #[test]
    fn distribution_mass_is_conserved(t in arb_unit_program()) {
        let d = explore(&t, 80, zero()).unwrap();
        prop_assert_eq!(d.mass() + d.residual.clone(), one());
    }

    #[test]
    fn prob_unit_is_monotone_in_steps(t in arb_unit_program()) {
        let mut prev = zero();
        for n in [0u64, 5, 20, 60, 120] {
            let p = prob_unit(&t, n).unwrap();
            prop_assert!(p >= prev, "drop at n={n}");
            prev = p;
        }
    }

    #[test]
    fn unit_value_is_monotone_in_truncation_and_bounded(t in arb_unit_program()) {
        let coarse = unit_value(&t, &TruncParams::new(2, 1, 3)).unwrap();
        let fine = unit_value(&t, &TruncParams::new(4, 2, 10)).unwrap();
        prop_assert!(coarse <= fine);
        prop_assert!(fine <= one());
        // soundness direction at matching budgets: the chain lower bound
        // stays below the interpretation computed with enough iterations
        let op = prob_unit(&t, 200).unwrap();
        let den = unit_value(&t, &TruncParams::new(6, 2, 64)).unwrap();
        // both approach the same limit; on this corpus 200 steps and 64
        // iterations are exhaustive, so they agree exactly
        prop_assert_eq!(op, den);
    }
}

// ---- promotion laws on random sparse matrices ----

fn arb_small_matrix() -> impl Strategy<Value = SemMatrix> {
    let pts: Vec<WebPoint> = vec![
        WebPoint::inl(WebPoint::Star),
        WebPoint::inr(WebPoint::Star),
        WebPoint::inl(WebPoint::inl(WebPoint::Star)),
    ];
    proptest::collection::vec((0usize..3, 0usize..3, 1u32..4), 1..5).prop_map(move |cells| {
        let mut m = SemMatrix::new(1);
        for (i, j, w) in cells {
            // keep column masses below one so everything stays in the cone
            m.add(Row::single(pts[i].clone()), pts[j].clone(), rat(w as i64, 12));
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn promotion_is_functorial_on_vectors(t in arb_small_matrix(), num in 0u32..5) {
        // !t · u^! = (t·u)^! on bags within the truncation
        let u = {
            let mut v = SemVector::new();
            v.add(WebPoint::inl(WebPoint::Star), rat(num as i64, 8));
            v.add(WebPoint::inr(WebPoint::Star), rat(1, 4));
            v
        };
        let deg = 3;
        let lhs = promote(&t, deg).unwrap().apply(&[u.promote(deg)], &[false], deg).unwrap();
        let rhs = t.apply(&[u.clone()], &[false], deg).unwrap().promote(deg);
        for (p, v) in rhs.iter() {
            prop_assert_eq!(&lhs.get(p), v, "at {}", p);
        }
        for (p, v) in lhs.iter() {
            prop_assert_eq!(&rhs.get(p), v, "at {}", p);
        }
    }

    #[test]
    fn tester_coefficients_agree_with_independent_recurrences(
        tag in 0u32..6,
    ) {
        use pcbpv_core::stdlib::{tester, tester_stats, TesterFlavor};
        let bool_g = stdlib::bool_ty().general();
        let nat_g = stdlib::nat_ty().general();
        let bang_bool: GenType = PosType::bang(bool_g.clone()).general();
        let (point, ty): (WebPoint, GenType) = match tag {
            0 => (WebPoint::inl(WebPoint::Star), bool_g.clone()),
            1 => (WebPoint::inr(WebPoint::Star), bool_g.clone()),
            2 => (WebPoint::num(2), nat_g.clone()),
            3 => (WebPoint::bag(vec![WebPoint::inl(WebPoint::Star)]), bang_bool.clone()),
            4 => (
                WebPoint::bag(vec![
                    WebPoint::inl(WebPoint::Star),
                    WebPoint::inr(WebPoint::Star),
                ]),
                bang_bool,
            ),
            _ => (
                WebPoint::pair(WebPoint::bag(vec![WebPoint::num(0)]), WebPoint::num(1)),
                GenType::arrow(PosType::bang(nat_g.clone()), nat_g),
            ),
        };
        for flavor in [TesterFlavor::Plus, TesterFlavor::Minus] {
            let bundle = tester(&point, &ty, flavor).unwrap();
            let (arity, coeff) = tester_stats(&point, &ty, flavor).unwrap();
            prop_assert_eq!(bundle.arity, arity);
            prop_assert_eq!(bundle.coeff, coeff);
        }
    }
}
