use criterion::{criterion_group, criterion_main, Criterion};
use pcbpv_core::eval::{explore, prob_unit};
use pcbpv_core::pcs::interpret::unit_value;
use pcbpv_core::pcs::matrix::{promote, Row, SemMatrix};
use pcbpv_core::pcs::web::{TruncParams, WebPoint};
use pcbpv_core::rational::{rat, zero};
use pcbpv_core::stdlib::{force_list, probe, ran, random_list};
use pcbpv_core::syntax::term::Term;

fn bench_explore(c: &mut Criterion) {
    let probe_ran = Term::app(probe(2), ran(&[rat(1, 4), rat(1, 4), rat(1, 2)]).unwrap());
    c.bench_function("explore probe(2) ran", |b| {
        b.iter(|| explore(&probe_ran, 256, zero()).unwrap())
    });

    let rl = Term::app(force_list(), random_list()).erase_ascriptions();
    c.bench_function("explore list forcing (floor 1/2^20)", |b| {
        b.iter(|| explore(&rl, 2_000, rat(1, 1 << 20)).unwrap())
    });

    let loopy = Term::fix(
        "x",
        pcbpv_core::syntax::ty::GenType::pos(pcbpv_core::syntax::ty::PosType::unit()),
        Term::force(Term::var(0)),
    );
    c.bench_function("prob_unit diverging 10k steps", |b| {
        b.iter(|| prob_unit(&loopy, 10_000).unwrap())
    });
}

fn bench_interpret(c: &mut Criterion) {
    let t = Term::app(probe(1), ran(&[rat(1, 3), rat(2, 3)]).unwrap());
    let t = Term::ascribe(t, pcbpv_core::syntax::ty::GenType::pos(pcbpv_core::syntax::ty::PosType::unit()));
    let tr = TruncParams::new(6, 3, 16);
    c.bench_function("unit_value probe(1) ran", |b| {
        b.iter(|| unit_value(&t, &tr).unwrap())
    });
}

fn bench_promotion(c: &mut Criterion) {
    let a = WebPoint::inl(WebPoint::Star);
    let bpt = WebPoint::inr(WebPoint::Star);
    let mut t = SemMatrix::new(1);
    t.add(Row::single(a.clone()), a.clone(), rat(1, 3));
    t.add(Row::single(a.clone()), bpt.clone(), rat(1, 5));
    t.add(Row::single(bpt.clone()), bpt.clone(), rat(1, 2));
    c.bench_function("promote 3-cell matrix to degree 4", |b| {
        b.iter(|| promote(&t, 4).unwrap())
    });
}

criterion_group!(benches, bench_explore, bench_interpret, bench_promotion);
criterion_main!(benches);
