//! Acceptance suite: one test per criterion, each printing a PASS line and
//! enforcing its runtime budget. Everything asserted here is exact rational
//! arithmetic unless a tolerance is stated explicitly.

use pcbpv_core::eval::{explore, explore_with, ExploreOpts, SplitMix64};
use pcbpv_core::harness::{adequacy, separate, SeparationOpts};
use pcbpv_core::pcf::{self, CbnResult};
use pcbpv_core::pcs::interpret::interpret_closed;
use pcbpv_core::pcs::matrix::{
    der_digg, identity_matrix, promote, DerDigg, Row, SemMatrix,
};
use pcbpv_core::pcs::web::{in_srestr_pos, TruncParams, WebCache, WebPoint};
use pcbpv_core::rational::{one, rat, zero, Rat};
use pcbpv_core::stdlib::{
    self, and_chain, bool_ty, dice, ff, loop_unit, nat_ty, num, pext, probe, ran, random_list,
    restrv, tester, tester_stats, tt, TesterFlavor,
};
use pcbpv_core::syntax::parse::{parse_gen_type, parse_term};
use pcbpv_core::syntax::term::Term;
use pcbpv_core::syntax::ty::{GenType, PosType};
use pcbpv_core::typecheck::{check_closed, infer_closed};
use std::time::Instant;

struct Budget {
    name: &'static str,
    started: Instant,
    limit_s: u64,
}

impl Budget {
    fn start(name: &'static str, limit_s: u64) -> Budget {
        Budget { name, started: Instant::now(), limit_s }
    }

    fn pass(self) {
        let elapsed = self.started.elapsed();
        assert!(
            elapsed.as_secs() < self.limit_s,
            "{} exceeded its {}s budget ({:?})",
            self.name,
            self.limit_s,
            elapsed
        );
        println!("{}: PASS ({:.2}s of {}s)", self.name, elapsed.as_secs_f64(), self.limit_s);
    }
}

fn erased(t: &Term) -> Term {
    t.erase_ascriptions()
}

#[test]
fn criterion_01_typing_corpus() {
    let b = Budget::start("criterion 1 (typing corpus)", 5);
    // every library construct checks at its stated type
    for item in stdlib::corpus() {
        let ty = infer_closed(&item.term)
            .unwrap_or_else(|e| panic!("{} failed to typecheck: {e}", item.name));
        assert_eq!(ty, item.ty, "{} typed differently", item.name);
    }
    // probes at several indices
    for k in 0..4 {
        let expected = GenType::arrow(nat_ty(), PosType::unit().general());
        check_closed(&probe(k), &expected).unwrap();
    }
    // twenty ill-typed mutants are rejected
    let mutants = [
        "force ()",
        "fst ()",
        "() ()",
        "case () of { inl x -> () | inr y -> () }",
        "unfold ()",
        r"(\x:unit. x) coin(1/2)",
        "coin(1/2) : unit",
        "fold () : unit",
        "thunk () : unit",
        "<(), ()> : unit",
        r"(\x:!unit. force x) ()",
        "fix x:unit. x",
        "force thunk () : unit + unit",
        "case coin(1/2) of { inl a -> a | inr b -> thunk b }",
        "snd <(), thunk ()> : unit",
        "inl () : unit",
        "unfold (fold inl () : rec z. unit + z) : unit",
        r"(fix f:unit -> unit. \x:unit. x) (thunk ())",
        r"\x:rec z. unit + z. case x of { inl a -> () | inr b -> () }",
        r"(\x:!(unit -> unit). x) (thunk ())",
    ];
    for src in mutants {
        let t = parse_term(src).unwrap_or_else(|e| panic!("mutant `{src}` should parse: {e}"));
        assert!(infer_closed(&t).is_err(), "mutant `{src}` was accepted");
    }
    b.pass();
}

#[test]
fn criterion_02_exact_operational_facts() {
    let b = Budget::start("criterion 2 (exact operational facts)", 10);
    // coin distributions
    for p in [rat(0, 1), rat(1, 7), rat(1, 2), rat(5, 6), rat(1, 1)] {
        let d = explore(&Term::coin(p.clone()), 2, zero()).unwrap();
        assert_eq!(d.probability_of(&tt()), p);
        assert_eq!(d.probability_of(&ff()), one() - p);
        assert_eq!(d.residual, zero());
    }
    // the random list gives exactly 1/4 to the empty list at the first decision
    let d = explore(&random_list(), 6, zero()).unwrap();
    assert_eq!(d.probability_of(&Term::fold(Term::inl(Term::one()))), rat(1, 4));
    // random-natural distributions are reproduced exactly
    for ps in [
        vec![rat(1, 4), rat(3, 4)],
        vec![rat(1, 3), rat(1, 3), rat(1, 3)],
        vec![rat(1, 2), rat(1, 8), rat(1, 8)],
        vec![rat(2, 7), rat(3, 7), rat(2, 7)],
    ] {
        let d = explore(&ran(&ps).unwrap(), 200, zero()).unwrap();
        for (i, p) in ps.iter().enumerate() {
            assert_eq!(&d.probability_of(&num(i as u32)), p, "ran{ps:?} at {i}");
        }
    }
    // dice multiplication law on ten cases with distinct target values
    let cases = [
        (rat(1, 2), rat(1, 2), rat(1, 2)),
        (rat(1, 3), rat(1, 4), rat(1, 5)),
        (rat(2, 3), rat(3, 4), rat(4, 5)),
        (rat(1, 7), rat(1, 2), rat(5, 6)),
        (rat(0, 1), rat(1, 3), rat(1, 2)),
        (rat(1, 1), rat(1, 3), rat(1, 2)),
        (rat(3, 8), rat(7, 8), rat(1, 8)),
        (rat(5, 9), rat(2, 9), rat(8, 9)),
        (rat(1, 16), rat(15, 16), rat(1, 2)),
        (rat(9, 10), rat(1, 10), rat(3, 10)),
    ];
    for (p, q1, q2) in cases {
        // M1 reaches num 0 with q1; M2 reaches num 1 with q2
        let m1 = ran(&[q1.clone()]).unwrap();
        let m2 = ran(&[zero(), q2.clone()]).unwrap();
        let d = explore(&dice(p.clone(), m1, m2).unwrap(), 400, zero()).unwrap();
        assert_eq!(d.probability_of(&num(0)), p.clone() * q1.clone());
        assert_eq!(d.probability_of(&num(1)), (one() - p) * q2);
    }
    b.pass();
}

#[test]
fn criterion_03_termination_mass() {
    let b = Budget::start("criterion 3 (termination mass of list forcing)", 60);
    let t = erased(&Term::app(stdlib::force_list(), random_list()));
    let opts = ExploreOpts {
        max_steps: 10_000,
        mass_floor: rat(1, 1 << 25),
        max_states: None,
        retain_outcomes: false,
    };
    let summary = explore_with(&t, &opts).unwrap();
    assert!(
        summary.terminated >= rat(99, 100),
        "terminated mass {} below 0.99",
        summary.terminated
    );
    b.pass();
}

#[test]
fn criterion_04_adequacy_at_desk_scale() {
    let b = Budget::start("criterion 4 (adequacy on a 12-program corpus)", 120);
    let corpus: Vec<(Term, Rat)> = vec![
        (Term::one(), one()),
        (loop_unit(), zero()),
        (dice(rat(1, 2), Term::one(), Term::one()).unwrap(), one()),
        (dice(rat(1, 3), Term::one(), loop_unit()).unwrap(), rat(1, 3)),
        (
            and_chain(&[
                dice(rat(1, 2), Term::one(), loop_unit()).unwrap(),
                dice(rat(1, 2), Term::one(), loop_unit()).unwrap(),
            ]),
            rat(1, 4),
        ),
        (Term::app(probe(0), ran(&[rat(1, 4), rat(3, 4)]).unwrap()), rat(1, 4)),
        (Term::app(probe(1), ran(&[rat(1, 4), rat(3, 4)]).unwrap()), rat(3, 4)),
        (
            Term::app(probe(2), ran(&[rat(1, 3), rat(1, 3), rat(1, 3)]).unwrap()),
            rat(1, 3),
        ),
        (Term::app(probe(0), ran(&[rat(2, 5), rat(3, 5)]).unwrap()), rat(2, 5)),
        (
            dice(rat(1, 2), dice(rat(1, 2), Term::one(), loop_unit()).unwrap(), Term::one())
                .unwrap(),
            rat(3, 4),
        ),
        (
            Term::app(
                probe(1),
                Term::app(pext(1, 1).unwrap(), ran(&[rat(1, 2), rat(1, 4), rat(1, 4)]).unwrap()),
            ),
            rat(1, 4),
        ),
        (
            Term::force(Term::thunk(dice(rat(1, 5), Term::one(), loop_unit()).unwrap())),
            rat(1, 5),
        ),
    ];
    assert_eq!(corpus.len(), 12);
    let schedule = vec![
        (8u64, TruncParams::new(2, 1, 4)),
        (64, TruncParams::new(4, 2, 8)),
        (256, TruncParams::new(6, 3, 16)),
        (1024, TruncParams::new(7, 3, 24)),
    ];
    let tol = rat(1, 1_000_000);
    for (i, (term, exact)) in corpus.iter().enumerate() {
        let r = adequacy(term, &schedule, &tol).unwrap();
        assert!(r.operational_monotone, "program {i}: operational not monotone");
        assert!(r.denotational_monotone, "program {i}: denotational not monotone");
        let last = r.stages.last().unwrap();
        let op_err = abs_diff(&last.operational.0, exact);
        let den_err = abs_diff(&last.denotational.0, exact);
        assert!(op_err <= tol, "program {i}: |operational - exact| = {op_err}");
        assert!(den_err <= tol, "program {i}: |denotational - exact| = {den_err}");
    }
    b.pass();
}

fn abs_diff(a: &Rat, b: &Rat) -> Rat {
    if a >= b {
        a.clone() - b.clone()
    } else {
        b.clone() - a.clone()
    }
}

#[test]
fn criterion_05_restriction_projector_exactness() {
    let b = Budget::start("criterion 5 (restriction projectors)", 60);
    let phis: Vec<(&str, PosType)> = vec![
        ("unit", PosType::unit()),
        ("bool", bool_ty()),
        ("nat", nat_ty()),
        ("!unit", PosType::bang(PosType::unit().general())),
        ("bool*bool", PosType::tensor(bool_ty(), bool_ty())),
    ];
    let tr = TruncParams::new(5, 3, 8);
    let mut cache = WebCache::new();
    for (name, phi) in &phis {
        let web = cache.pos_points(phi, tr.depth, tr.degree);
        for n in 0..=3u32 {
            let term = restrv(n, phi);
            let m = interpret_closed(&term, &tr)
                .unwrap_or_else(|e| panic!("interpret Restrv {n} {name}: {e}"));
            // matrix equals the diagonal of the restriction set, entrywise
            // over the full truncated web
            for a in web.iter() {
                for bpt in web.iter() {
                    let got = m.get(&Row::empty(), &WebPoint::pair(a.clone(), bpt.clone()));
                    let expected = if a == bpt && in_srestr_pos(a, n, phi) {
                        one()
                    } else {
                        zero()
                    };
                    assert_eq!(
                        got, expected,
                        "Restrv {n} {name} at ({a},{bpt})"
                    );
                }
            }
        }
    }
    b.pass();
}

#[test]
fn criterion_06_testing_term_coefficient_law() {
    let b = Budget::start("criterion 6 (testing-term coefficient law)", 120);
    let bool_g = bool_ty().general();
    let nat_g = nat_ty().general();
    let bang_bool = PosType::bang(bool_g.clone()).general();
    let tt_p = WebPoint::inl(WebPoint::Star);
    let ff_p = WebPoint::inr(WebPoint::Star);
    let mut points: Vec<(WebPoint, GenType)> = vec![
        (tt_p.clone(), bool_g.clone()),
        (ff_p.clone(), bool_g.clone()),
        (WebPoint::num(0), nat_g.clone()),
        (WebPoint::num(1), nat_g.clone()),
        (WebPoint::num(2), nat_g.clone()),
        (WebPoint::bag(vec![]), bang_bool.clone()),
        (WebPoint::bag(vec![tt_p.clone()]), bang_bool.clone()),
        (WebPoint::bag(vec![ff_p.clone()]), bang_bool.clone()),
        (WebPoint::bag(vec![tt_p.clone(), tt_p.clone()]), bang_bool.clone()),
        (WebPoint::bag(vec![tt_p.clone(), ff_p.clone()]), bang_bool.clone()),
        (WebPoint::bag(vec![ff_p.clone(), ff_p.clone()]), bang_bool.clone()),
    ];
    // nonzero-arity coverage: an arrow point exercises the window plumbing
    points.push((
        WebPoint::pair(WebPoint::bag(vec![WebPoint::num(0)]), WebPoint::num(1)),
        GenType::arrow(PosType::bang(nat_g.clone()), nat_g.clone()),
    ));
    let tr = TruncParams::new(5, 2, 12);
    for (a, ty) in &points {
        let bundle = tester(a, ty, TesterFlavor::Minus).unwrap();
        let (arity, coeff) = tester_stats(a, ty, TesterFlavor::Minus).unwrap();
        assert_eq!(bundle.arity, arity, "{a}: builders disagree on arity");
        assert_eq!(bundle.coeff, coeff, "{a}: builders disagree on coeff");
        let m = interpret_closed(&bundle.term, &tr)
            .unwrap_or_else(|e| panic!("interpret Testt {a}: {e}"));
        // the unitary row: the bag {num 0, …, num (arity-1)}, each once
        let unitary = WebPoint::bag((0..arity).map(WebPoint::num).collect());
        let target = WebPoint::bag(vec![a.clone()]);
        let mut seen_target = false;
        for ((row, col), v) in m.iter() {
            assert!(row.is_empty());
            let WebPoint::Pair(c, rest) = col else { panic!("tester column shape") };
            let WebPoint::Pair(mm, star) = rest.as_ref() else { panic!("tester column shape") };
            assert_eq!(**star, WebPoint::Star);
            if **c != unitary {
                continue;
            }
            if **mm == target {
                assert_eq!(
                    *v,
                    Rat::new(coeff.clone(), 1.into()),
                    "{a}: unitary coefficient"
                );
                seen_target = true;
            } else {
                panic!(
                    "{a}: unitary row has a spurious entry at {mm} = {v} \
                     (must vanish at singleton [a'] with a' ≠ a and at bags of size ≠ 1)"
                );
            }
        }
        assert!(seen_target, "{a}: unitary coefficient entry missing");
    }
    b.pass();
}

#[test]
fn criterion_07_separation() {
    let b = Budget::start("criterion 7 (full-abstraction separation)", 120);
    let opts = SeparationOpts::default();
    // distinct coins at (l,*)
    let r = separate(
        &Term::coin(rat(1, 3)),
        &Term::coin(rat(2, 3)),
        &WebPoint::inl(WebPoint::Star),
        &opts,
    )
    .unwrap();
    assert!(r.separated, "coins not separated: {}", r.note);
    let (l, rr) = (r.operational_left.unwrap(), r.operational_right.unwrap());
    assert!(l.upper.0 < rr.lower.0, "gap does not exceed the error bars");
    // Nat programs differing exactly at num 2
    let m1 = Term::ascribe(ran(&[rat(1, 2), zero(), rat(1, 2)]).unwrap(), nat_ty().general());
    let m2 = Term::ascribe(ran(&[rat(1, 2), rat(1, 2)]).unwrap(), nat_ty().general());
    let r = separate(&m1, &m2, &WebPoint::num(2), &opts).unwrap();
    assert!(r.separated, "nat programs not separated: {}", r.note);
    // five semantically-equal pairs yield no separation
    let equal_pairs: Vec<(Term, Term, WebPoint)> = vec![
        (
            Term::ascribe(dice(rat(1, 2), tt(), ff()).unwrap(), bool_ty().general()),
            Term::coin(rat(1, 2)),
            WebPoint::inl(WebPoint::Star),
        ),
        (
            Term::force(Term::thunk(Term::coin(rat(1, 3)))),
            Term::coin(rat(1, 3)),
            WebPoint::inl(WebPoint::Star),
        ),
        (
            stdlib::ifb(
                Term::ascribe(tt(), bool_ty().general()),
                Term::one(),
                loop_unit(),
            ),
            Term::one(),
            WebPoint::Star,
        ),
        (Term::app(probe(0), num(0)), Term::one(), WebPoint::Star),
        (loop_unit(), Term::app(probe(0), num(1)), WebPoint::Star),
    ];
    for (m1, m2, point) in &equal_pairs {
        let r = separate(m1, m2, point, &opts).unwrap();
        assert!(!r.separated, "spurious separation of equal pair at {point}: {}", r.note);
    }
    b.pass();
}

#[test]
fn criterion_08_promotion_comonad_laws() {
    let b = Budget::start("criterion 8 (promotion and comonad laws)", 30);
    // the four-point web of (unit+unit) + (unit+unit)
    let pts: Vec<WebPoint> = vec![
        WebPoint::inl(WebPoint::inl(WebPoint::Star)),
        WebPoint::inl(WebPoint::inr(WebPoint::Star)),
        WebPoint::inr(WebPoint::inl(WebPoint::Star)),
        WebPoint::inr(WebPoint::inr(WebPoint::Star)),
    ];
    let degree = 3u32;
    let mut rng = SplitMix64::new(20260809);
    let mut random_matrix = || {
        let mut m = SemMatrix::new(1);
        for _ in 0..5 {
            let i = (rng.next_u64() % 4) as usize;
            let j = (rng.next_u64() % 4) as usize;
            let w = 1 + (rng.next_u64() % 3) as i64;
            m.add(Row::single(pts[i].clone()), pts[j].clone(), rat(w, 16));
        }
        m
    };
    let id = identity_matrix(&pts);
    let bang_id = promote(&id, degree).unwrap();
    // !id = id on every bag within the truncation
    for ((r, c), v) in bang_id.iter() {
        assert_eq!(r.points()[0], *c);
        assert_eq!(*v, one());
    }
    for _ in 0..3 {
        let s = random_matrix();
        let t = random_matrix();
        // functoriality: !(s∘t) = !s ∘ !t  (bags never grow under promotion,
        // so the truncated comparison is exact)
        let st = t.then(&s).unwrap();
        let lhs = promote(&st, degree).unwrap();
        let rhs = promote(&t, degree).unwrap().then(&promote(&s, degree).unwrap()).unwrap();
        assert_matrices_equal(&lhs, &rhs, "!(s∘t) vs !s∘!t");
        // dereliction naturality: der ∘ !t = t ∘ der
        let gen_ty = parse_gen_type("(unit + unit) + (unit + unit)").unwrap();
        let mut cache = WebCache::new();
        let tr = TruncParams::new(4, degree, 8);
        let der = der_digg(DerDigg::Der, &gen_ty, &tr, &mut cache);
        let lhs = promote(&t, degree).unwrap().then(&der).unwrap();
        let rhs = der.then(&t).unwrap();
        assert_matrices_equal(&lhs, &rhs, "der∘!t vs t∘der");
        // digging naturality: digg ∘ !t = !!t ∘ digg
        let digg = der_digg(DerDigg::Digg, &gen_ty, &tr, &mut cache);
        let lhs = promote(&t, degree).unwrap().then(&digg).unwrap();
        let rhs = digg.then(&promote(&promote(&t, degree).unwrap(), degree).unwrap()).unwrap();
        assert_matrices_equal(&lhs, &rhs, "digg∘!t vs !!t∘digg");
        // counit laws: der ∘ digg = id and !der ∘ digg = id on !X
        let bang_pts: Vec<WebPoint> = {
            let mut cache = WebCache::new();
            cache
                .pos_points(
                    &PosType::bang(gen_ty.clone()),
                    tr.depth,
                    tr.degree,
                )
                .as_ref()
                .clone()
        };
        let der_bang = der_digg(
            DerDigg::Der,
            &PosType::bang(gen_ty.clone()).general(),
            &tr,
            &mut cache,
        );
        let lhs = digg.then(&der_bang).unwrap();
        assert_matrices_equal(&lhs, &identity_matrix(&bang_pts), "der∘digg vs id");
        let bang_der = promote(&der, degree).unwrap();
        let lhs = digg.then(&bang_der).unwrap();
        assert_matrices_equal(&lhs, &identity_matrix(&bang_pts), "!der∘digg vs id");
    }
    b.pass();
}

fn assert_matrices_equal(a: &SemMatrix, b: &SemMatrix, what: &str) {
    for ((r, c), v) in a.iter() {
        assert_eq!(b.get(r, c), *v, "{what} differs at ({r},{c})");
    }
    for ((r, c), v) in b.iter() {
        assert_eq!(a.get(r, c), *v, "{what} differs at ({r},{c})");
    }
}

fn pcf_add() -> &'static str {
    r"(fix add:nat => nat => nat. \x:nat. \y:nat. ifz x then y else succ (add (pred x) y))"
}

fn pcf_mult() -> String {
    format!(
        r"(fix mult:nat => nat => nat. \a:nat. \b:nat. ifz a then 0 else {} b (mult (pred a) b))",
        pcf_add()
    )
}

fn pcf_fact() -> String {
    format!(
        r"(fix fact:nat => nat. \n:nat. ifz n then succ 0 else {} n (fact (pred n)))",
        pcf_mult()
    )
}

fn has_coin(t: &Term) -> bool {
    use pcbpv_core::syntax::term::TermKind;
    match t.kind() {
        TermKind::Coin(_) => true,
        TermKind::Var(_) | TermKind::One => false,
        TermKind::Thunk(m)
        | TermKind::Inl(m)
        | TermKind::Inr(m)
        | TermKind::PrL(m)
        | TermKind::PrR(m)
        | TermKind::Force(m)
        | TermKind::Fold(m)
        | TermKind::Unfold(m) => has_coin(m),
        TermKind::Pair(a, b) | TermKind::App(a, b) => has_coin(a) || has_coin(b),
        TermKind::Lam { body, .. } | TermKind::Fix { body, .. } => has_coin(body),
        TermKind::Case { scrut, left, right, .. } => {
            has_coin(scrut) || has_coin(left) || has_coin(right)
        }
        TermKind::Ascribe(m, _) => has_coin(m),
    }
}

/// Differential check of one program: the reference evaluator and the
/// translated chain agree on the numeral. Translations are coin-free, so
/// the chain is deterministic; cheap programs are explored exhaustively
/// (probability exactly one), deep ones follow the single trajectory,
/// which for a deterministic chain carries the whole distribution.
fn differential(src: &str, expected: u64, exhaustive: bool) {
    let t = pcf::parse_pcf(src).unwrap_or_else(|e| panic!("{src}: {e}"));
    let got = pcf::cbn_eval(&t, 2_000_000_000);
    assert_eq!(got, CbnResult::Num(expected), "cbn {src}");
    let (components, ty) = pcf::translate(&[], &t).unwrap();
    assert_eq!(ty, pcf::PcfType::Nat, "{src}");
    let compiled = erased(&components[0]);
    assert!(!has_coin(&compiled), "translations never contain coins");
    if exhaustive {
        let d = explore(&compiled, 10_000_000, zero()).unwrap();
        assert_eq!(d.probability_of(&num(expected as u32)), one(), "translated {src}");
    } else {
        use pcbpv_core::eval::{sample, SampleResult};
        match sample(&compiled, 0, 10_000_000_000).unwrap() {
            SampleResult::Normal(v) => {
                assert_eq!(v, num(expected as u32), "translated {src}")
            }
            SampleResult::Timeout => panic!("translated {src} timed out"),
        }
    }
}

#[test]
fn criterion_09_pcf_differential() {
    let b = Budget::start("criterion 9 (PCF differential)", 60);
    let add = pcf_add();
    let mult = pcf_mult();
    let fact = pcf_fact();
    let programs: Vec<(String, u64)> = vec![
        ("0".into(), 0),
        ("succ (succ (succ 0))".into(), 3),
        ("pred 0".into(), 0),
        ("pred (succ (succ 0))".into(), 1),
        ("ifz 0 then 7 else 9".into(), 7),
        ("ifz 3 then 7 else 9".into(), 9),
        ("fst <4, 9>".into(), 4),
        ("snd <4, 9>".into(), 9),
        (r"(\x:nat. succ (succ x)) 5".into(), 7),
        (r"(\p:nat * nat. fst p) <1, 2>".into(), 1),
        (r"(\f:nat => nat. f (f 2)) (\x:nat. succ x)".into(), 4),
        ("snd (fix p:nat * nat. <0, succ (fst p)>)".into(), 1),
        (format!("{add} 2 3"), 5),
        (format!("{add} 0 7"), 7),
        (format!("{add} 10 11"), 21),
        (format!("{mult} 3 4"), 12),
        (format!("{fact} 0"), 1),
        (format!("{fact} 3"), 6),
        (format!("{fact} 4"), 24),
        (format!("{fact} 5"), 120),
    ];
    assert_eq!(programs.len(), 20);
    for (src, expected) in &programs {
        // factorial 5 runs millions of chain steps; follow the single
        // deterministic trajectory there, explore exhaustively elsewhere
        let exhaustive = *expected < 100;
        differential(src, *expected, exhaustive);
    }
    b.pass();
}

/// Factorial of 6 under call-by-name costs billions of chain steps: with no
/// sharing in the calculus, every use of the computed factor re-runs it, so
/// the step count compounds factorially (measured ~2e5 steps at 4, ~2e7 at
/// 5, extrapolating ~5e9 at 6 — about twenty minutes of pure stepping).
/// The differential law itself is exercised here too; run with
/// `cargo test -- --ignored` when the time budget allows.
#[test]
#[ignore = "factorial 6 needs ~5e9 deterministic chain steps (~20 min)"]
fn pcf_differential_factorial_six() {
    differential(&format!("{} 6", pcf_fact()), 720, false);
}

#[test]
fn criterion_10_determinism() {
    let b = Budget::start("criterion 10 (byte-identical reports)", 120);
    let dir = std::env::temp_dir().join(format!("pcbpv-acc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, contents: &str| {
        let p = dir.join(name);
        std::fs::write(&p, contents).unwrap();
        p
    };
    let coin = write("coin.cbpv", "coin(1/3)\n");
    let prog = write(
        "prog.cbpv",
        "case coin(2/5) of { inl a -> () | inr b -> fix x:unit. force x }\n",
    );
    let coin23 = write("coin23.cbpv", "coin(2/3)\n");
    let pcf_prog = write("add.pcf", "ifz 1 then 3 else succ 4\n");
    let bin = env!("CARGO_BIN_EXE_pcbpv");
    let invocations: Vec<Vec<String>> = vec![
        vec!["check".into(), coin.display().to_string()],
        vec![
            "run".into(),
            coin.display().to_string(),
            "--samples".into(),
            "500".into(),
            "--seed".into(),
            "7".into(),
            "--max-steps".into(),
            "50".into(),
        ],
        vec![
            "prob".into(),
            prog.display().to_string(),
            "--steps".into(),
            "200".into(),
        ],
        vec![
            "prob".into(),
            prog.display().to_string(),
            "--steps".into(),
            "200".into(),
            "--floor".into(),
            "1/1024".into(),
        ],
        vec![
            "sem".into(),
            coin.display().to_string(),
            "--depth".into(),
            "4".into(),
            "--degree".into(),
            "2".into(),
            "--iters".into(),
            "8".into(),
        ],
        vec!["adequacy".into(), prog.display().to_string()],
        vec![
            "separate".into(),
            coin.display().to_string(),
            coin23.display().to_string(),
            "--point".into(),
            "l.*".into(),
        ],
        vec!["gen".into(), "ran".into(), "1/4,3/4".into()],
        vec![
            "gen".into(),
            "tester".into(),
            "l.*".into(),
            "unit + unit".into(),
            "minus".into(),
        ],
        vec!["gen".into(), "restr".into(), "2".into(), "rec z. unit + z".into()],
        vec!["pcf".into(), "check".into(), pcf_prog.display().to_string()],
        vec!["pcf".into(), "run".into(), pcf_prog.display().to_string()],
        vec!["pcf".into(), "compile".into(), pcf_prog.display().to_string()],
    ];
    for args in &invocations {
        let run = || {
            let out = std::process::Command::new(bin)
                .arg("--json")
                .args(args)
                .output()
                .expect("spawn pcbpv");
            assert!(
                out.status.success(),
                "`pcbpv --json {}` failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr)
            );
            out.stdout
        };
        let first = run();
        let second = run();
        assert_eq!(
            first,
            second,
            "pcbpv --json {} is not byte-deterministic",
            args.join(" ")
        );
        assert!(!first.is_empty());
    }
    std::fs::remove_dir_all(&dir).ok();
    b.pass();
}
