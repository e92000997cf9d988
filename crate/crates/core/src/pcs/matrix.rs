//! Sparse matrices over truncated webs, with exact non-negative rational
//! entries. A matrix with row arity k represents a morphism from a k-fold
//! tensor of positive interpretations into a type interpretation; vectors
//! are elements.

use crate::pcs::web::{
    coalg_bags, discardable, TruncParams, WebCache, WebPoint,
};
use crate::rational::{one, zero, Rat};
use crate::syntax::ty::{GenType, PosKind, PosType};
use num::{BigInt, One as _, Zero as _};
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemError {
    #[error("typing failure in semantics: {0}")]
    Typing(#[from] crate::typecheck::TypeError),
    #[error("arity mismatch: matrix has {expected} row slots, got {actual} arguments")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("expected a sum type, got {0}")]
    ExpectedSum(PosType),
    #[error("expected a `!` type, got {0}")]
    ExpectedBang(GenType),
    #[error("term is not closed of unit type")]
    NotUnitTyped,
}

/// A row key: one web point per context slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Row(Rc<[WebPoint]>);

impl Row {
    pub fn empty() -> Row {
        Row(Rc::from(Vec::new()))
    }

    pub fn single(p: WebPoint) -> Row {
        Row(Rc::from(vec![p]))
    }

    pub fn from_vec(v: Vec<WebPoint>) -> Row {
        Row(Rc::from(v))
    }

    pub fn points(&self) -> &[WebPoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&self, p: WebPoint) -> Row {
        let mut v: Vec<WebPoint> = self.0.to_vec();
        v.push(p);
        Row(Rc::from(v))
    }

    /// Splits off the last coordinate.
    pub fn split_last(&self) -> Option<(Row, WebPoint)> {
        let (last, init) = self.0.split_last()?;
        Some((Row(Rc::from(init.to_vec())), last.clone()))
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// Sparse non-negative vector over a web.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SemVector {
    entries: BTreeMap<WebPoint, Rat>,
}

impl SemVector {
    pub fn new() -> SemVector {
        SemVector::default()
    }

    pub fn unit(p: WebPoint) -> SemVector {
        let mut v = SemVector::new();
        v.add(p, one());
        v
    }

    pub fn add(&mut self, p: WebPoint, value: Rat) {
        if value.is_zero() {
            return;
        }
        let slot = self.entries.entry(p).or_insert_with(zero);
        *slot += value;
        if slot.is_zero() {
            // keep sparsity if a caller ever adds a negative correction
            self.entries.retain(|_, v| !v.is_zero());
        }
    }

    pub fn get(&self, p: &WebPoint) -> Rat {
        self.entries.get(p).cloned().unwrap_or_else(zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WebPoint, &Rat)> {
        self.entries.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &WebPoint> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> Rat {
        self.entries.values().fold(zero(), |a, b| a + b)
    }

    pub fn scale(&self, c: &Rat) -> SemVector {
        let mut out = SemVector::new();
        for (p, v) in self.iter() {
            out.add(p.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn plus(&self, other: &SemVector) -> SemVector {
        let mut out = self.clone();
        for (p, v) in other.iter() {
            out.add(p.clone(), v.clone());
        }
        out
    }

    /// The promotion `u^!` truncated to bags of size ≤ `degree`:
    /// `(u^!)_m = Π u_a^{m(a)}`.
    pub fn promote(&self, degree: u32) -> SemVector {
        let support: Vec<(WebPoint, Rat)> =
            self.iter().map(|(p, v)| (p.clone(), v.clone())).collect();
        let mut out = SemVector::new();
        let mut stack: Vec<WebPoint> = Vec::new();
        fn rec(
            support: &[(WebPoint, Rat)],
            start: usize,
            left: u32,
            acc: Rat,
            stack: &mut Vec<WebPoint>,
            out: &mut SemVector,
        ) {
            out.add(WebPoint::bag(stack.clone()), acc.clone());
            if left == 0 {
                return;
            }
            for i in start..support.len() {
                let (p, v) = &support[i];
                stack.push(p.clone());
                rec(support, i, left - 1, acc.clone() * v.clone(), stack, out);
                stack.pop();
            }
        }
        rec(&support, 0, degree, one(), &mut stack, &mut out);
        out
    }
}

/// Sparse matrix with `arity` row slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemMatrix {
    arity: usize,
    entries: BTreeMap<(Row, WebPoint), Rat>,
}

impl SemMatrix {
    pub fn new(arity: usize) -> SemMatrix {
        SemMatrix { arity, entries: BTreeMap::new() }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn add(&mut self, row: Row, col: WebPoint, value: Rat) {
        debug_assert_eq!(row.len(), self.arity);
        if value.is_zero() {
            return;
        }
        *self.entries.entry((row, col)).or_insert_with(zero) += value;
    }

    pub fn get(&self, row: &Row, col: &WebPoint) -> Rat {
        self.entries.get(&(row.clone(), col.clone())).cloned().unwrap_or_else(zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Row, WebPoint), &Rat)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct column points with a nonzero entry.
    pub fn column_support(&self) -> Vec<WebPoint> {
        let mut cols: Vec<WebPoint> = self.entries.keys().map(|(_, c)| c.clone()).collect();
        cols.sort();
        cols.dedup();
        cols
    }

    /// Groups entries by column.
    pub fn cells_by_column(&self) -> BTreeMap<WebPoint, Vec<(Row, Rat)>> {
        let mut out: BTreeMap<WebPoint, Vec<(Row, Rat)>> = BTreeMap::new();
        for ((r, c), v) in self.iter() {
            out.entry(c.clone()).or_default().push((r.clone(), v.clone()));
        }
        out
    }

    /// For an arity-1 matrix, the vector view of a fixed column.
    pub fn as_vector(&self) -> Result<SemVector, SemError> {
        if self.arity != 0 {
            return Err(SemError::ArityMismatch { expected: 0, actual: self.arity });
        }
        let mut v = SemVector::new();
        for ((_, c), val) in self.iter() {
            v.add(c.clone(), val.clone());
        }
        Ok(v)
    }

    /// Matrix–vector application with optional promotion of arguments:
    /// flagged arguments are replaced by `arg^!` truncated at `degree`.
    pub fn apply(
        &self,
        args: &[SemVector],
        promote_flags: &[bool],
        degree: u32,
    ) -> Result<SemVector, SemError> {
        if args.len() != self.arity || promote_flags.len() != self.arity {
            return Err(SemError::ArityMismatch { expected: self.arity, actual: args.len() });
        }
        let prepared: Vec<SemVector> = args
            .iter()
            .zip(promote_flags)
            .map(|(a, flag)| if *flag { a.promote(degree) } else { a.clone() })
            .collect();
        let mut out = SemVector::new();
        'entry: for ((row, col), v) in self.iter() {
            let mut acc = v.clone();
            for (p, arg) in row.points().iter().zip(&prepared) {
                let w = arg.get(p);
                if w.is_zero() {
                    continue 'entry;
                }
                acc *= w;
            }
            out.add(col.clone(), acc);
        }
        Ok(out)
    }

    /// Composition `other ∘ self` where `other` is arity-1: sums over this
    /// matrix's columns.
    pub fn then(&self, other: &SemMatrix) -> Result<SemMatrix, SemError> {
        if other.arity != 1 {
            return Err(SemError::ArityMismatch { expected: 1, actual: other.arity });
        }
        let mut out = SemMatrix::new(self.arity);
        let by_row: BTreeMap<&WebPoint, Vec<(&WebPoint, &Rat)>> = {
            let mut m: BTreeMap<&WebPoint, Vec<(&WebPoint, &Rat)>> = BTreeMap::new();
            for ((r, c), v) in other.iter() {
                m.entry(&r.points()[0]).or_default().push((c, v));
            }
            m
        };
        for ((row, mid), v) in self.iter() {
            if let Some(cells) = by_row.get(mid) {
                for (col, w) in cells {
                    out.add(row.clone(), (*col).clone(), v.clone() * (*w).clone());
                }
            }
        }
        Ok(out)
    }

    /// Entrywise `self ≤ other`.
    pub fn dominated_by(&self, other: &SemMatrix) -> bool {
        self.iter().all(|((r, c), v)| *v <= other.get(r, c))
    }
}

pub fn big_factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `m!` for a sorted bag: the product of the factorials of multiplicities.
pub fn bag_factorial(elems: &[WebPoint]) -> BigInt {
    let mut acc = BigInt::one();
    let mut i = 0;
    while i < elems.len() {
        let mut j = i + 1;
        while j < elems.len() && elems[j] == elems[i] {
            j += 1;
        }
        acc *= big_factorial((j - i) as u32);
        i = j;
    }
    acc
}

/// Identity on a set of points, arity 1.
pub fn identity_matrix(points: &[WebPoint]) -> SemMatrix {
    let mut m = SemMatrix::new(1);
    for p in points {
        m.add(Row::single(p.clone()), p.clone(), one());
    }
    m
}

/// Dereliction and digging on the truncated web of `σ`.
pub enum DerDigg {
    Der,
    Digg,
}

pub fn der_digg(
    kind: DerDigg,
    sigma: &GenType,
    tr: &TruncParams,
    cache: &mut WebCache,
) -> SemMatrix {
    let web = cache.gen_points(sigma, tr.depth, tr.degree);
    let mut m = SemMatrix::new(1);
    match kind {
        DerDigg::Der => {
            for a in web.iter() {
                m.add(
                    Row::single(WebPoint::bag(vec![a.clone()])),
                    a.clone(),
                    one(),
                );
            }
        }
        DerDigg::Digg => {
            let bags = cache.pos_points(&PosType::bang(sigma.clone()), tr.depth, tr.degree);
            for b in bags.iter() {
                let elems = b.bag_elems().expect("bang web is bags");
                for split in splittings(elems, tr.degree as usize) {
                    m.add(Row::single(b.clone()), WebPoint::bag(split), one());
                }
            }
        }
    }
    m
}

/// Multisets of (possibly empty) bags summing to `total`, at most `max`
/// parts — the digging columns of a bag.
pub fn splittings(total: &[WebPoint], max: usize) -> Vec<Vec<WebPoint>> {
    let mut out: Vec<Vec<WebPoint>> = Vec::new();
    for parts in 0..=max {
        if parts == 0 {
            if total.is_empty() {
                out.push(Vec::new());
            }
            continue;
        }
        let mut buckets: Vec<Vec<WebPoint>> = vec![Vec::new(); parts];
        fn rec(
            total: &[WebPoint],
            i: usize,
            buckets: &mut Vec<Vec<WebPoint>>,
            out: &mut Vec<Vec<WebPoint>>,
        ) {
            if i == total.len() {
                let mut bags: Vec<WebPoint> =
                    buckets.iter().map(|b| WebPoint::bag(b.clone())).collect();
                bags.sort();
                out.push(bags);
                return;
            }
            for j in 0..buckets.len() {
                buckets[j].push(total[i].clone());
                rec(total, i + 1, buckets, out);
                buckets[j].pop();
            }
        }
        rec(total, 0, &mut buckets, &mut out);
    }
    out.sort();
    out.dedup();
    out
}

/// The exponential functor on an arity-1 matrix:
/// `(!t)_{c,d} = Σ_{r ∈ L(c,d)} (d!/r!) · t^r`, truncated to `|d| ≤ degree`.
pub fn promote(t: &SemMatrix, degree: u32) -> Result<SemMatrix, SemError> {
    if t.arity() != 1 {
        return Err(SemError::ArityMismatch { expected: 1, actual: t.arity() });
    }
    let cols = t.cells_by_column();
    let col_points: Vec<&WebPoint> = cols.keys().collect();
    let mut out = SemMatrix::new(1);
    out.add(Row::single(WebPoint::empty_bag()), WebPoint::empty_bag(), one());

    // enumerate output columns d as multisets over the column support
    let mut d_elems: Vec<usize> = Vec::new();
    enumerate_multisets(col_points.len(), degree as usize, &mut d_elems, &mut |d_idx| {
        if d_idx.is_empty() {
            return;
        }
        // group d by distinct column
        let mut groups: Vec<(usize, u32)> = Vec::new();
        for &i in d_idx {
            match groups.last_mut() {
                Some((j, k)) if *j == i => *k += 1,
                _ => groups.push((i, 1)),
            }
        }
        // per distinct column with multiplicity k: multisets of k cells
        let per_group: Vec<Vec<Vec<(usize, u32)>>> = groups
            .iter()
            .map(|(col_i, k)| {
                let ncells = cols[col_points[*col_i]].len();
                multiset_counts(ncells, *k as usize)
            })
            .collect();
        // cartesian product over groups
        let mut choice: Vec<usize> = vec![0; groups.len()];
        loop {
            // assemble r and compute the term
            let mut coeff_den = BigInt::one(); // r!
            let mut term = one(); // t^r
            let mut c_elems: Vec<WebPoint> = Vec::new();
            for (g, (col_i, _)) in groups.iter().enumerate() {
                let cells = &cols[col_points[*col_i]];
                for (cell_i, count) in &per_group[g][choice[g]] {
                    let (row, v) = &cells[*cell_i];
                    coeff_den *= big_factorial(*count);
                    for _ in 0..*count {
                        term *= v.clone();
                        c_elems.push(row.points()[0].clone());
                    }
                }
            }
            let d_bag: Vec<WebPoint> =
                d_idx.iter().map(|&i| col_points[i].clone()).collect();
            let d_point = WebPoint::bag(d_bag.clone());
            let coeff_num = bag_factorial(d_point.bag_elems().unwrap());
            let coeff = Rat::new(coeff_num, coeff_den);
            out.add(
                Row::single(WebPoint::bag(c_elems)),
                d_point,
                coeff * term,
            );
            // next choice
            let mut g = 0;
            loop {
                if g == groups.len() {
                    return;
                }
                choice[g] += 1;
                if choice[g] < per_group[g].len() {
                    break;
                }
                choice[g] = 0;
                g += 1;
            }
        }
    });
    Ok(out)
}

/// Visits every multiset (as a nondecreasing index sequence) over
/// `0..n` of size 1..=max.
fn enumerate_multisets(n: usize, max: usize, current: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    visit(current);
    if current.len() == max {
        return;
    }
    let start = current.last().copied().unwrap_or(0);
    for i in start..n {
        current.push(i);
        enumerate_multisets(n, max, current, visit);
        current.pop();
    }
}

/// All multisets of size `k` over `0..n`, as (index, count) groups.
fn multiset_counts(n: usize, k: usize) -> Vec<Vec<(usize, u32)>> {
    let mut out = Vec::new();
    let mut current: Vec<(usize, u32)> = Vec::new();
    fn rec(n: usize, start: usize, left: usize, current: &mut Vec<(usize, u32)>, out: &mut Vec<Vec<(usize, u32)>>) {
        if left == 0 {
            out.push(current.clone());
            return;
        }
        if start >= n {
            return;
        }
        // count of item `start`: 0..=left
        for c in (0..=left).rev() {
            if c > 0 {
                current.push((start, c as u32));
            }
            rec(n, start + 1, left - c, current, out);
            if c > 0 {
                current.pop();
            }
        }
    }
    rec(n, 0, k, &mut current, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralKind {
    Weakening,
    Contraction,
    Coalgebra,
    ProjectionL,
    ProjectionR,
    InjectionL,
    InjectionR,
}

/// Structural maps of a positive type over its truncated web.
pub fn structural_matrix(
    kind: StructuralKind,
    phi: &PosType,
    tr: &TruncParams,
    cache: &mut WebCache,
) -> Result<SemMatrix, SemError> {
    let web = cache.pos_points(phi, tr.depth, tr.degree);
    let mut m = SemMatrix::new(1);
    match kind {
        StructuralKind::Weakening => {
            for a in web.iter() {
                if discardable(phi, a) {
                    m.add(Row::single(a.clone()), WebPoint::Star, one());
                }
            }
        }
        StructuralKind::Contraction => {
            for a in web.iter() {
                for bag in coalg_bags(phi, a, 2) {
                    if bag.len() != 2 {
                        continue;
                    }
                    let (b, c) = (bag[0].clone(), bag[1].clone());
                    m.add(Row::single(a.clone()), WebPoint::pair(b.clone(), c.clone()), one());
                    if b != c {
                        m.add(Row::single(a.clone()), WebPoint::pair(c, b), one());
                    }
                }
            }
        }
        StructuralKind::Coalgebra => {
            for a in web.iter() {
                for bag in coalg_bags(phi, a, tr.degree as usize) {
                    m.add(Row::single(a.clone()), WebPoint::bag(bag), one());
                }
            }
        }
        StructuralKind::ProjectionL
        | StructuralKind::ProjectionR
        | StructuralKind::InjectionL
        | StructuralKind::InjectionR => {
            let head = crate::pcs::web::head_constructor(phi)
                .ok_or_else(|| SemError::ExpectedSum(phi.clone()))?;
            let PosKind::Sum(l, r) = head.kind() else {
                return Err(SemError::ExpectedSum(phi.clone()));
            };
            match kind {
                StructuralKind::ProjectionL => {
                    for a in cache.pos_points(l, tr.depth, tr.degree).iter() {
                        m.add(Row::single(WebPoint::inl(a.clone())), a.clone(), one());
                    }
                }
                StructuralKind::ProjectionR => {
                    for a in cache.pos_points(r, tr.depth, tr.degree).iter() {
                        m.add(Row::single(WebPoint::inr(a.clone())), a.clone(), one());
                    }
                }
                StructuralKind::InjectionL => {
                    for a in cache.pos_points(l, tr.depth, tr.degree).iter() {
                        m.add(Row::single(a.clone()), WebPoint::inl(a.clone()), one());
                    }
                }
                StructuralKind::InjectionR => {
                    for a in cache.pos_points(r, tr.depth, tr.degree).iter() {
                        m.add(Row::single(a.clone()), WebPoint::inr(a.clone()), one());
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    Ok(m)
}
