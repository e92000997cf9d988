//! Compositional matrix interpretation of typed terms.
//!
//! A term in a context of positive types denotes a matrix whose rows are
//! tuples over the context webs. The wiring is fixed: variables weaken the
//! unused slots, thunks promote the sub-matrix against the context
//! coalgebra, pairs/applications/cases/fixpoints duplicate the context
//! through contraction, force post-composes dereliction, fold and unfold
//! are identities (a recursive type shares the web of its unfolding), and
//! fixpoints iterate from the zero matrix. All sums range over truncated
//! webs, so every entry is a certified lower bound of the untruncated
//! value, nondecreasing in the truncation parameters.
//!
//! Rows are kept partial: a slot missing from a row stands for "any
//! discardable point of that coordinate" with coefficient one. Weakening
//! never materializes, so wide contexts of mostly-unused variables stay
//! sparse; expansion only happens at a binder whose body ignores it, or
//! when a caller asks for the fully tabulated matrix.

use crate::pcs::matrix::{bag_factorial, big_factorial, Row, SemError, SemMatrix, SemVector};
use crate::pcs::web::{TruncParams, WebCache, WebPoint};
use crate::rational::{one, Rat};
use crate::syntax::term::{Term, TermKind};
use crate::syntax::ty::{PosKind, PosType};
use crate::typecheck::{infer, TypingContext};
use num::BigInt;
use num::One as _;
use std::collections::BTreeMap;
use std::rc::Rc;

/// Structural merge: the unique point that contracts into the two given
/// ones. Points of positive types determine the rule by their constructor.
fn merge_structural(a: &WebPoint, b: &WebPoint) -> Option<WebPoint> {
    match (a, b) {
        (WebPoint::Star, WebPoint::Star) => Some(WebPoint::Star),
        (WebPoint::Bag(x), WebPoint::Bag(y)) => {
            let mut all: Vec<WebPoint> = x.iter().cloned().collect();
            all.extend(y.iter().cloned());
            Some(WebPoint::bag(all))
        }
        (WebPoint::Pair(x1, y1), WebPoint::Pair(x2, y2)) => Some(WebPoint::pair(
            merge_structural(x1, x2)?,
            merge_structural(y1, y2)?,
        )),
        (WebPoint::Inl(x), WebPoint::Inl(y)) => merge_structural(x, y).map(WebPoint::inl),
        (WebPoint::Inr(x), WebPoint::Inr(y)) => merge_structural(x, y).map(WebPoint::inr),
        _ => None,
    }
}

/// Discardability is structural: every bag in the point is empty.
fn disc_structural(p: &WebPoint) -> bool {
    match p {
        WebPoint::Star => true,
        WebPoint::Pair(a, b) => disc_structural(a) && disc_structural(b),
        WebPoint::Inl(a) | WebPoint::Inr(a) => disc_structural(a),
        WebPoint::Bag(e) => e.is_empty(),
    }
}

/// A partial row: explicit points for the slots a term actually uses.
/// Missing slots read as "any discardable point, coefficient one".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PRow(Rc<BTreeMap<u32, WebPoint>>);

impl PRow {
    fn empty() -> PRow {
        PRow(Rc::new(BTreeMap::new()))
    }

    fn get(&self, j: u32) -> Option<&WebPoint> {
        self.0.get(&j)
    }

    fn single(j: u32, p: WebPoint) -> PRow {
        let mut m = BTreeMap::new();
        m.insert(j, p);
        PRow(Rc::new(m))
    }

    fn with(&self, j: u32, p: WebPoint) -> PRow {
        let mut m = (*self.0).clone();
        m.insert(j, p);
        PRow(Rc::new(m))
    }

    fn without(&self, j: u32) -> (PRow, Option<WebPoint>) {
        if !self.0.contains_key(&j) {
            return (self.clone(), None);
        }
        let mut m = (*self.0).clone();
        let p = m.remove(&j);
        (PRow(Rc::new(m)), p)
    }

    /// Pointwise contraction; defined slots merge, one-sided slots pass
    /// through (merging with an implicit discardable point is the identity).
    fn merge(&self, other: &PRow) -> Option<PRow> {
        let (small, big) =
            if self.0.len() <= other.0.len() { (self, other) } else { (other, self) };
        let mut m = (*big.0).clone();
        for (j, p) in small.0.iter() {
            match m.get(j) {
                None => {
                    m.insert(*j, p.clone());
                }
                Some(q) => {
                    let merged = merge_structural(p, q)?;
                    m.insert(*j, merged);
                }
            }
        }
        Some(PRow(Rc::new(m)))
    }
}

/// Sparse matrix over partial rows.
#[derive(Debug, Clone, PartialEq, Eq)]
struct PMatrix {
    entries: BTreeMap<(PRow, WebPoint), Rat>,
}

impl PMatrix {
    fn new() -> PMatrix {
        PMatrix { entries: BTreeMap::new() }
    }

    fn add(&mut self, row: PRow, col: WebPoint, v: Rat) {
        use num::Zero as _;
        if v.is_zero() {
            return;
        }
        *self.entries.entry((row, col)).or_insert_with(crate::rational::zero) += v;
    }

    fn iter(&self) -> impl Iterator<Item = (&(PRow, WebPoint), &Rat)> {
        self.entries.iter()
    }

    fn cells_by_column(&self) -> BTreeMap<WebPoint, Vec<(PRow, Rat)>> {
        let mut out: BTreeMap<WebPoint, Vec<(PRow, Rat)>> = BTreeMap::new();
        for ((r, c), v) in self.iter() {
            out.entry(c.clone()).or_default().push((r.clone(), v.clone()));
        }
        out
    }
}

pub struct Interpreter {
    pub tr: TruncParams,
    pub cache: WebCache,
}

impl Interpreter {
    pub fn new(tr: TruncParams) -> Self {
        Interpreter { tr, cache: WebCache::new() }
    }

    /// Promotion of a matrix against the coalgebra of its context:
    /// the interpretation of `thunk` and the `prom` step of fixpoints.
    /// Columns of the result are bags over the columns of `m`.
    fn promote_ctx(&mut self, m: &PMatrix) -> PMatrix {
        let mut out = PMatrix::new();
        // the empty bag costs nothing: all slots stay implicit
        out.add(PRow::empty(), WebPoint::empty_bag(), one());
        let cols: BTreeMap<WebPoint, Vec<(PRow, Rat)>> = m.cells_by_column();
        let col_points: Vec<&WebPoint> = cols.keys().collect();
        let n = col_points.len();
        let degree = self.tr.degree as usize;

        // every output column is a multiset d over the column support;
        // for each we enumerate the multisets r of cells with second
        // marginal d, weighting by d!/r!
        let mut d_idx: Vec<usize> = Vec::new();
        let visit = |d_idx: &[usize], out: &mut PMatrix| {
            if d_idx.is_empty() {
                return;
            }
            let mut groups: Vec<(usize, u32)> = Vec::new();
            for &i in d_idx {
                match groups.last_mut() {
                    Some((j, k)) if *j == i => *k += 1,
                    _ => groups.push((i, 1)),
                }
            }
            let per_group: Vec<Vec<Vec<(usize, u32)>>> = groups
                .iter()
                .map(|(col_i, k)| multiset_counts(cols[col_points[*col_i]].len(), *k as usize))
                .collect();
            if per_group.iter().any(|g| g.is_empty()) {
                return;
            }
            let d_point =
                WebPoint::bag(d_idx.iter().map(|&i| col_points[i].clone()).collect());
            let d_fact = bag_factorial(d_point.bag_elems().unwrap());
            let mut choice: Vec<usize> = vec![0; groups.len()];
            loop {
                let mut r_fact = BigInt::one();
                let mut term = one();
                let mut tuples: Vec<(&PRow, u32)> = Vec::new();
                for (g, (col_i, _)) in groups.iter().enumerate() {
                    let cells = &cols[col_points[*col_i]];
                    for (cell_i, count) in &per_group[g][choice[g]] {
                        let (row, v) = &cells[*cell_i];
                        r_fact *= big_factorial(*count);
                        for _ in 0..*count {
                            term *= v.clone();
                        }
                        tuples.push((row, *count));
                    }
                }
                // coordinate-wise co-merge of the row bag: slots defined by
                // no cell stay implicit; implicit occurrences at a defined
                // slot absorb into the merge (a discardable skeleton is the
                // merge unit)
                let mut resolved: Option<PRow> = Some(PRow::empty());
                let mut slots: Vec<u32> =
                    tuples.iter().flat_map(|(r, _)| r.0.keys().copied()).collect();
                slots.sort_unstable();
                slots.dedup();
                'slots: for j in slots {
                    let mut acc: Option<WebPoint> = None;
                    for (r, count) in &tuples {
                        if let Some(p) = r.get(j) {
                            for _ in 0..*count {
                                acc = Some(match acc {
                                    None => p.clone(),
                                    Some(q) => match merge_structural(&q, p) {
                                        Some(m) => m,
                                        None => {
                                            resolved = None;
                                            break 'slots;
                                        }
                                    },
                                });
                            }
                        }
                    }
                    if let (Some(row), Some(p)) = (&resolved, acc) {
                        resolved = Some(row.with(j, p));
                    }
                }
                if let Some(row) = resolved {
                    let coeff = Rat::new(d_fact.clone(), r_fact.clone());
                    out.add(row, d_point.clone(), coeff * term.clone());
                }
                // advance the per-group choice odometer
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
        };
        enumerate_multisets_sized(n, degree, &mut d_idx, &mut |d| visit(d, &mut out));
        out
    }

    fn interpret_p(&mut self, ctx: &[PosType], t: &Term) -> Result<PMatrix, SemError> {
        let k = ctx.len() as u32;
        let mut out = PMatrix::new();
        match t.kind() {
            TermKind::Var(i) => {
                let coord = k
                    .checked_sub(1 + i)
                    .ok_or(crate::typecheck::TypeError::UnboundVar(*i))?;
                let web = self
                    .cache
                    .pos_points(&ctx[coord as usize], self.tr.depth, self.tr.degree);
                for b in web.iter() {
                    out.add(PRow::single(coord, b.clone()), b.clone(), one());
                }
            }
            TermKind::One => {
                out.add(PRow::empty(), WebPoint::Star, one());
            }
            TermKind::Coin(p) => {
                let q = one() - p.clone();
                out.add(PRow::empty(), WebPoint::inl(WebPoint::Star), p.clone());
                out.add(PRow::empty(), WebPoint::inr(WebPoint::Star), q);
            }
            TermKind::Thunk(n) => {
                let inner = self.interpret_p(ctx, n)?;
                out = self.promote_ctx(&inner);
            }
            TermKind::Force(n) => {
                let inner = self.interpret_p(ctx, n)?;
                for ((row, col), v) in inner.iter() {
                    if let Some([b]) = col.bag_elems() {
                        out.add(row.clone(), b.clone(), v.clone());
                    }
                }
            }
            TermKind::Pair(l, r) => {
                let lm = self.interpret_p(ctx, l)?;
                let rm = self.interpret_p(ctx, r)?;
                for ((r1, c1), v1) in lm.iter() {
                    for ((r2, c2), v2) in rm.iter() {
                        if let Some(row) = r1.merge(r2) {
                            out.add(
                                row,
                                WebPoint::pair(c1.clone(), c2.clone()),
                                v1.clone() * v2.clone(),
                            );
                        }
                    }
                }
            }
            TermKind::Inl(n) => {
                let inner = self.interpret_p(ctx, n)?;
                for ((row, col), v) in inner.iter() {
                    out.add(row.clone(), WebPoint::inl(col.clone()), v.clone());
                }
            }
            TermKind::Inr(n) => {
                let inner = self.interpret_p(ctx, n)?;
                for ((row, col), v) in inner.iter() {
                    out.add(row.clone(), WebPoint::inr(col.clone()), v.clone());
                }
            }
            TermKind::PrL(n) | TermKind::PrR(n) => {
                let left = matches!(t.kind(), TermKind::PrL(_));
                let inner = self.interpret_p(ctx, n)?;
                for ((row, col), v) in inner.iter() {
                    if let WebPoint::Pair(a, b) = col {
                        let (keep, drop) = if left { (a, b) } else { (b, a) };
                        if disc_structural(drop) {
                            out.add(row.clone(), (**keep).clone(), v.clone());
                        }
                    }
                }
            }
            TermKind::Lam { annot, body, .. } => {
                let mut inner_ctx = ctx.to_vec();
                inner_ctx.push(annot.clone());
                let bm = self.interpret_p(&inner_ctx, body)?;
                let disc = self.cache.discardable_points(annot, self.tr.depth);
                for ((row, col), v) in bm.iter() {
                    let (rest, bound) = row.without(k);
                    match bound {
                        Some(b) => {
                            out.add(rest, WebPoint::pair(b, col.clone()), v.clone());
                        }
                        None => {
                            // the body ignores the argument: one entry per
                            // discardable point of the annotation
                            for b in disc.iter() {
                                out.add(
                                    rest.clone(),
                                    WebPoint::pair(b.clone(), col.clone()),
                                    v.clone(),
                                );
                            }
                        }
                    }
                }
            }
            TermKind::App(f, a) => {
                let fm = self.interpret_p(ctx, f)?;
                let am = self.interpret_p(ctx, a)?;
                let by_col = am.cells_by_column();
                for ((r1, c1), v1) in fm.iter() {
                    let WebPoint::Pair(b, c) = c1 else { continue };
                    let Some(cells) = by_col.get(b.as_ref()) else { continue };
                    for (r2, v2) in cells {
                        if let Some(row) = r1.merge(r2) {
                            out.add(row, (**c).clone(), v1.clone() * v2.clone());
                        }
                    }
                }
            }
            TermKind::Case { scrut, lhint: _, left, rhint: _, right } => {
                let mut tyctx = TypingContext::from_types(ctx);
                let scrut_ty = infer(&mut tyctx, scrut)?;
                let phi = scrut_ty
                    .as_pos()
                    .ok_or_else(|| crate::typecheck::TypeError::NotPositive(scrut_ty.clone()))?;
                let head = crate::pcs::web::head_constructor(phi)
                    .ok_or_else(|| SemError::ExpectedSum(phi.clone()))?;
                let PosKind::Sum(lt, rt) = head.kind() else {
                    return Err(SemError::ExpectedSum(phi.clone()));
                };
                let sm = self.interpret_p(ctx, scrut)?;
                let mut lctx = ctx.to_vec();
                lctx.push(lt.clone());
                let lm = self.interpret_p(&lctx, left)?;
                let mut rctx = ctx.to_vec();
                rctx.push(rt.clone());
                let rm = self.interpret_p(&rctx, right)?;
                // index scrutinee cells by the injected payload point;
                // disc cells serve the branches that discard their variable
                let mut s_l: BTreeMap<WebPoint, Vec<(PRow, Rat)>> = BTreeMap::new();
                let mut s_r: BTreeMap<WebPoint, Vec<(PRow, Rat)>> = BTreeMap::new();
                let mut s_l_disc: Vec<(PRow, Rat)> = Vec::new();
                let mut s_r_disc: Vec<(PRow, Rat)> = Vec::new();
                for ((row, col), v) in sm.iter() {
                    match col {
                        WebPoint::Inl(b) => {
                            s_l.entry((**b).clone())
                                .or_default()
                                .push((row.clone(), v.clone()));
                            if disc_structural(b) {
                                s_l_disc.push((row.clone(), v.clone()));
                            }
                        }
                        WebPoint::Inr(b) => {
                            s_r.entry((**b).clone())
                                .or_default()
                                .push((row.clone(), v.clone()));
                            if disc_structural(b) {
                                s_r_disc.push((row.clone(), v.clone()));
                            }
                        }
                        _ => continue,
                    };
                }
                let wire = |branch: &PMatrix,
                                index: &BTreeMap<WebPoint, Vec<(PRow, Rat)>>,
                                disc_cells: &[(PRow, Rat)],
                                out: &mut PMatrix| {
                    for ((row, col), v) in branch.iter() {
                        let (rest, bound) = row.without(k);
                        match bound {
                            Some(b) => {
                                let Some(cells) = index.get(&b) else { continue };
                                for (r1, v1) in cells {
                                    if let Some(merged) = r1.merge(&rest) {
                                        out.add(merged, col.clone(), v1.clone() * v.clone());
                                    }
                                }
                            }
                            None => {
                                for (r1, v1) in disc_cells {
                                    if let Some(merged) = r1.merge(&rest) {
                                        out.add(merged, col.clone(), v1.clone() * v.clone());
                                    }
                                }
                            }
                        }
                    }
                };
                wire(&lm, &s_l, &s_l_disc, &mut out);
                wire(&rm, &s_r, &s_r_disc, &mut out);
            }
            TermKind::Fix { annot, body, .. } => {
                let mut inner_ctx = ctx.to_vec();
                inner_ctx.push(PosType::bang(annot.clone()));
                let bm = self.interpret_p(&inner_ctx, body)?;
                let mut current = PMatrix::new();
                for _ in 0..self.tr.fix_iters {
                    let pm = self.promote_ctx(&current);
                    let by_col = pm.cells_by_column();
                    let mut next = PMatrix::new();
                    for ((row, col), v) in bm.iter() {
                        let (rest, bound) = row.without(k);
                        match bound {
                            Some(bag) => {
                                let Some(cells) = by_col.get(&bag) else { continue };
                                for (r2, v2) in cells {
                                    if let Some(merged) = rest.merge(r2) {
                                        next.add(merged, col.clone(), v.clone() * v2.clone());
                                    }
                                }
                            }
                            None => {
                                // recursion variable unused: only the empty
                                // bag of the promotion matches, at cost one
                                next.add(rest, col.clone(), v.clone());
                            }
                        }
                    }
                    if next == current {
                        break;
                    }
                    current = next;
                }
                out = current;
            }
            TermKind::Fold(n) | TermKind::Unfold(n) => {
                out = self.interpret_p(ctx, n)?;
            }
            TermKind::Ascribe(n, _) => {
                out = self.interpret_p(ctx, n)?;
            }
        }
        Ok(out)
    }

    /// Fully tabulated matrix: implicit slots expand over the discardable
    /// points of their coordinate types.
    pub fn interpret(&mut self, ctx: &[PosType], t: &Term) -> Result<SemMatrix, SemError> {
        let pm = self.interpret_p(ctx, t)?;
        let mut out = SemMatrix::new(ctx.len());
        let disc_sets: Vec<Rc<Vec<WebPoint>>> = ctx
            .iter()
            .map(|ty| self.cache.discardable_points(ty, self.tr.depth))
            .collect();
        for ((row, col), v) in pm.iter() {
            // cartesian expansion of the implicit slots
            let mut rows: Vec<Vec<WebPoint>> = vec![Vec::with_capacity(ctx.len())];
            for (j, disc) in disc_sets.iter().enumerate() {
                let mut next = Vec::new();
                match row.get(j as u32) {
                    Some(p) => {
                        for r in &rows {
                            let mut r2 = r.clone();
                            r2.push(p.clone());
                            next.push(r2);
                        }
                    }
                    None => {
                        for r in &rows {
                            for p in disc.iter() {
                                let mut r2 = r.clone();
                                r2.push(p.clone());
                                next.push(r2);
                            }
                        }
                    }
                }
                rows = next;
            }
            for r in rows {
                out.add(Row::from_vec(r), col.clone(), v.clone());
            }
        }
        Ok(out)
    }
}

fn enumerate_multisets_sized(
    n: usize,
    max: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    visit(current);
    if current.len() == max {
        return;
    }
    let start = current.last().copied().unwrap_or(0);
    for i in start..n {
        current.push(i);
        enumerate_multisets_sized(n, max, current, visit);
        current.pop();
    }
}

fn multiset_counts(n: usize, k: usize) -> Vec<Vec<(usize, u32)>> {
    let mut out = Vec::new();
    let mut current: Vec<(usize, u32)> = Vec::new();
    fn rec(
        n: usize,
        start: usize,
        left: usize,
        current: &mut Vec<(usize, u32)>,
        out: &mut Vec<Vec<(usize, u32)>>,
    ) {
        if left == 0 {
            out.push(current.clone());
            return;
        }
        if start >= n {
            return;
        }
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

/// Interprets a closed well-typed term. Ascriptions stay in place: the
/// interpreter treats them as identities and the internal scrutinee-type
/// queries rely on them.
pub fn interpret_closed(t: &Term, tr: &TruncParams) -> Result<SemMatrix, SemError> {
    crate::typecheck::infer_closed(t)?;
    let mut interp = Interpreter::new(tr.clone());
    interp.interpret(&[], t)
}

/// Interprets a term in a context of positive types (outermost first).
pub fn interpret(ctx: &[PosType], t: &Term, tr: &TruncParams) -> Result<SemMatrix, SemError> {
    let mut tyctx = TypingContext::from_types(ctx);
    infer(&mut tyctx, t)?;
    let mut interp = Interpreter::new(tr.clone());
    interp.interpret(ctx, t)
}

/// The star entry of a closed unit-typed term: a lower bound of its
/// convergence probability, converging to it as the truncation grows.
pub fn unit_value(t: &Term, tr: &TruncParams) -> Result<Rat, SemError> {
    let ty = crate::typecheck::infer_closed(t)?;
    let is_unit = matches!(ty.as_pos().map(|p| p.kind()), Some(PosKind::Unit));
    if !is_unit {
        return Err(SemError::NotUnitTyped);
    }
    let m = interpret_closed(t, tr)?;
    Ok(m.get(&Row::empty(), &WebPoint::Star))
}

/// Semantic vector of a closed term (the single row of its matrix).
pub fn sem_vector(t: &Term, tr: &TruncParams) -> Result<SemVector, SemError> {
    let m = interpret_closed(t, tr)?;
    let mut v = SemVector::new();
    for ((_, col), val) in m.iter() {
        v.add(col.clone(), val.clone());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, zero};
    use crate::syntax::parse::parse_term;

    fn tr() -> TruncParams {
        TruncParams::new(5, 3, 12)
    }

    fn uv(src: &str) -> Rat {
        let t = parse_term(src).unwrap();
        unit_value(&t, &tr()).unwrap()
    }

    #[test]
    fn unit_and_coin() {
        assert_eq!(uv("()"), one());
        let t = parse_term("coin(1/3)").unwrap();
        let v = sem_vector(&t, &tr()).unwrap();
        assert_eq!(v.get(&WebPoint::inl(WebPoint::Star)), rat(1, 3));
        assert_eq!(v.get(&WebPoint::inr(WebPoint::Star)), rat(2, 3));
    }

    #[test]
    fn loop_is_zero() {
        assert_eq!(uv("fix x:unit. force x"), zero());
        let t = parse_term("fix x:unit + unit. force x").unwrap();
        assert!(interpret_closed(&t, &tr()).unwrap().is_empty());
    }

    #[test]
    fn beta_preserves_value() {
        assert_eq!(uv(r"(\x:unit. x) ()"), one());
        assert_eq!(uv(r"(\x:unit + unit. ()) coin(1/2)"), one());
        // discarding a diverging thunk costs nothing
        assert_eq!(uv(r"(\x:!unit. ()) (thunk (fix y:unit. force y))"), one());
        // forcing it costs everything
        assert_eq!(uv(r"(\x:!unit. force x) (thunk (fix y:unit. force y))"), zero());
    }

    #[test]
    fn case_mixes_branches() {
        assert_eq!(
            uv("case coin(1/3) of { inl a -> () | inr b -> fix x:unit. force x }"),
            rat(1, 3)
        );
        assert_eq!(uv("case coin(1/3) of { inl a -> a | inr b -> b }"), one());
    }

    #[test]
    fn pair_projections_discard_the_other_leg() {
        assert_eq!(uv("fst <(), ()>"), one());
        assert_eq!(uv("fst <(), thunk (fix x:unit. force x)>"), one());
        // a pair must fully converge before projection
        assert_eq!(
            uv("fst <(), case coin(1/4) of { inl a -> () | inr b -> fix x:unit. force x }>"),
            rat(1, 4)
        );
    }

    #[test]
    fn thunk_force_roundtrip() {
        assert_eq!(uv("force thunk ()"), one());
        let t = parse_term("force thunk coin(2/5)").unwrap();
        let direct = parse_term("coin(2/5)").unwrap();
        assert_eq!(sem_vector(&t, &tr()).unwrap(), sem_vector(&direct, &tr()).unwrap());
    }

    #[test]
    fn contraction_through_pairs() {
        // <x, x> at a boolean: the diagonal, not the product
        let t = parse_term(r"(\x:unit + unit. <x, x>) coin(1/2)").unwrap();
        let v = sem_vector(&t, &tr()).unwrap();
        let tt = WebPoint::inl(WebPoint::Star);
        let ff = WebPoint::inr(WebPoint::Star);
        assert_eq!(v.get(&WebPoint::pair(tt.clone(), tt.clone())), rat(1, 2));
        assert_eq!(v.get(&WebPoint::pair(ff.clone(), ff.clone())), rat(1, 2));
        assert_eq!(v.get(&WebPoint::pair(tt, ff)), zero());
    }

    #[test]
    fn fix_iterates_scott_style() {
        // a fixpoint that terminates after flipping heads: prob 1 in the
        // limit, monotone lower bounds along iterations
        let src = "fix x:unit. case coin(1/2) of { inl a -> () | inr b -> force x }";
        let t = parse_term(src).unwrap();
        let lo = unit_value(&t, &TruncParams::new(4, 2, 4)).unwrap();
        let hi = unit_value(&t, &TruncParams::new(4, 2, 12)).unwrap();
        assert!(lo < hi);
        assert!(hi < one());
        assert_eq!(lo, rat(15, 16)); // 1 - 2^-4
        assert_eq!(hi, rat(4095, 4096));
    }

    /// Every bag anywhere inside the point has at most `degree` elements.
    fn fits_degree(p: &WebPoint, degree: u32) -> bool {
        match p {
            WebPoint::Star => true,
            WebPoint::Pair(a, b) => fits_degree(a, degree) && fits_degree(b, degree),
            WebPoint::Inl(a) | WebPoint::Inr(a) => fits_degree(a, degree),
            WebPoint::Bag(e) => {
                e.len() <= degree as usize && e.iter().all(|x| fits_degree(x, degree))
            }
        }
    }

    #[test]
    fn coalgebraic_value_law() {
        // for closed values V of positive type, h(φ)·⟦V⟧ = ⟦V⟧^! on every
        // entry whose merged row point still fits the truncation; elsewhere
        // the truncated side only loses mass
        use crate::pcs::matrix::{structural_matrix, StructuralKind};
        use crate::pcs::web::{co_merge, CoMerge};
        let t = parse_term("<(inl () : unit + unit), thunk coin(1/2)>").unwrap();
        let ty = crate::typecheck::infer_closed(&t).unwrap();
        let phi = ty.as_pos().unwrap().clone();
        let trp = tr();
        let v = sem_vector(&t, &trp).unwrap();
        let mut cache = WebCache::new();
        let h = structural_matrix(StructuralKind::Coalgebra, &phi, &trp, &mut cache).unwrap();
        let lhs = h.apply(&[v.clone()], &[false], trp.degree).unwrap();
        let rhs = v.promote(trp.degree);
        let mut compared = 0;
        for (p, val) in rhs.iter() {
            let elems = p.bag_elems().unwrap();
            let row_fits = match co_merge(&phi, elems) {
                CoMerge::Empty => true,
                CoMerge::Unique(a) => fits_degree(&a, trp.degree),
                CoMerge::None => false,
            };
            if row_fits {
                assert_eq!(lhs.get(p), *val, "at {p}");
                compared += 1;
            } else {
                assert!(lhs.get(p) <= *val, "truncated side exceeds full value at {p}");
            }
        }
        assert!(compared > 5);
        for (p, val) in lhs.iter() {
            assert_eq!(rhs.get(p), *val, "spurious lhs entry at {p}");
        }
    }

    #[test]
    fn truncation_is_monotone() {
        let src = "fix x:unit. case coin(1/3) of { inl a -> () | inr b -> force x }";
        let t = parse_term(src).unwrap();
        let mut prev = zero();
        for iters in [1u32, 2, 4, 8, 16] {
            let v = unit_value(&t, &TruncParams::new(4, 2, iters)).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}
