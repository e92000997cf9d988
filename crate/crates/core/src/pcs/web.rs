//! Webs of the coherence-space semantics.
//!
//! Points are untyped structural objects (unit, pairs, tags, finite bags);
//! a type selects a subset of them. Recursive types share the web of their
//! unfolding, so enumeration carries a depth budget (the index of the
//! restriction sets) and bags carry a cardinality cap — the truncation that
//! makes every computed value a certified lower bound.

use crate::syntax::ty::{GenKind, GenType, PosKind, PosType};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

/// Truncation parameters: web height bound, bag cardinality cap per `!`
/// layer, and the number of fixpoint iterations. Increasing any of them
/// never decreases a computed entry.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct TruncParams {
    pub depth: u32,
    pub degree: u32,
    pub fix_iters: u32,
}

impl TruncParams {
    pub fn new(depth: u32, degree: u32, fix_iters: u32) -> Self {
        TruncParams { depth, degree, fix_iters }
    }
}

impl Default for TruncParams {
    fn default() -> Self {
        TruncParams { depth: 8, degree: 4, fix_iters: 32 }
    }
}

/// A structural web point. Bags are kept sorted so equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WebPoint {
    Star,
    Pair(Rc<WebPoint>, Rc<WebPoint>),
    Inl(Rc<WebPoint>),
    Inr(Rc<WebPoint>),
    Bag(Rc<[WebPoint]>),
}

impl WebPoint {
    pub fn star() -> WebPoint {
        WebPoint::Star
    }

    pub fn pair(l: WebPoint, r: WebPoint) -> WebPoint {
        WebPoint::Pair(Rc::new(l), Rc::new(r))
    }

    pub fn inl(p: WebPoint) -> WebPoint {
        WebPoint::Inl(Rc::new(p))
    }

    pub fn inr(p: WebPoint) -> WebPoint {
        WebPoint::Inr(Rc::new(p))
    }

    pub fn bag(mut elems: Vec<WebPoint>) -> WebPoint {
        elems.sort();
        WebPoint::Bag(Rc::from(elems))
    }

    pub fn empty_bag() -> WebPoint {
        WebPoint::Bag(Rc::from(Vec::new()))
    }

    pub fn bag_elems(&self) -> Option<&[WebPoint]> {
        match self {
            WebPoint::Bag(e) => Some(e),
            _ => None,
        }
    }

    /// The point of the Nat web with `n` `r`-tags around `(ℓ,⋆)`.
    pub fn num(n: u32) -> WebPoint {
        let mut p = WebPoint::inl(WebPoint::Star);
        for _ in 0..n {
            p = WebPoint::inr(p);
        }
        p
    }

    pub fn as_num(&self) -> Option<u32> {
        match self {
            WebPoint::Inl(p) if **p == WebPoint::Star => Some(0),
            WebPoint::Inr(p) => p.as_num().map(|n| n + 1),
            _ => None,
        }
    }

    /// Height as in the well-foundedness argument for restriction sets.
    pub fn height(&self) -> u32 {
        match self {
            WebPoint::Star => 1,
            WebPoint::Pair(l, r) => 1 + l.height().max(r.height()),
            WebPoint::Inl(p) | WebPoint::Inr(p) => 1 + p.height(),
            WebPoint::Bag(elems) => 1 + elems.iter().map(WebPoint::height).max().unwrap_or(0),
        }
    }
}

impl fmt::Display for WebPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WebPoint::Star => write!(f, "*"),
            WebPoint::Pair(l, r) => write!(f, "({l},{r})"),
            WebPoint::Inl(p) => write!(f, "l.{p}"),
            WebPoint::Inr(p) => write!(f, "r.{p}"),
            WebPoint::Bag(elems) => {
                write!(f, "[")?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Point surface syntax: `*`, `(p,q)`, `l.p`, `r.p`, `[p,q,...]`.
pub fn parse_point(src: &str) -> Result<WebPoint, String> {
    let bytes: Vec<char> = src.chars().filter(|c| !c.is_whitespace()).collect();
    let (p, rest) = parse_point_at(&bytes, 0)?;
    if rest != bytes.len() {
        return Err(format!("trailing input at offset {rest}"));
    }
    Ok(p)
}

fn parse_point_at(s: &[char], mut i: usize) -> Result<(WebPoint, usize), String> {
    match s.get(i) {
        Some('*') => Ok((WebPoint::Star, i + 1)),
        Some('(') => {
            let (l, j) = parse_point_at(s, i + 1)?;
            if s.get(j) != Some(&',') {
                return Err(format!("expected `,` at offset {j}"));
            }
            let (r, k) = parse_point_at(s, j + 1)?;
            if s.get(k) != Some(&')') {
                return Err(format!("expected `)` at offset {k}"));
            }
            Ok((WebPoint::pair(l, r), k + 1))
        }
        Some('l') | Some('r') => {
            let left = s[i] == 'l';
            i += 1;
            if s.get(i) != Some(&'.') {
                return Err(format!("expected `.` at offset {i}"));
            }
            let (p, j) = parse_point_at(s, i + 1)?;
            Ok((if left { WebPoint::inl(p) } else { WebPoint::inr(p) }, j))
        }
        Some('[') => {
            let mut elems = Vec::new();
            let mut j = i + 1;
            if s.get(j) == Some(&']') {
                return Ok((WebPoint::bag(elems), j + 1));
            }
            loop {
                let (p, k) = parse_point_at(s, j)?;
                elems.push(p);
                match s.get(k) {
                    Some(',') => j = k + 1,
                    Some(']') => return Ok((WebPoint::bag(elems), k + 1)),
                    _ => return Err(format!("expected `,` or `]` at offset {k}")),
                }
            }
        }
        Some(('0'..='9')) => {
            // numeric sugar for Nat points
            let start = i;
            while matches!(s.get(i), Some('0'..='9')) {
                i += 1;
            }
            let n: u32 = s[start..i]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| "number too large".to_string())?;
            Ok((WebPoint::num(n), i))
        }
        other => Err(format!("unexpected {other:?} at offset {i}")),
    }
}

/// Strips a prefix of `rec` binders by unfolding; degenerate types whose
/// unfolding never reaches a constructor (e.g. `rec z. z`) have empty webs
/// and yield `None`.
pub fn head_constructor(ty: &PosType) -> Option<PosType> {
    let mut t = ty.clone();
    let mut seen: Vec<PosType> = Vec::new();
    loop {
        match t.kind() {
            PosKind::Mu { .. } => {
                if seen.iter().any(|s| *s == t) {
                    return None;
                }
                seen.push(t.clone());
                t = t.unfold_mu().expect("mu unfolds");
            }
            PosKind::Var(_) => return None,
            _ => return Some(t),
        }
    }
}

/// Decides membership of a point in the (untruncated) web of a positive
/// type. Terminates by point height.
pub fn in_web_pos(p: &WebPoint, ty: &PosType) -> bool {
    let Some(head) = head_constructor(ty) else {
        return false;
    };
    match (head.kind(), p) {
        (PosKind::Unit, WebPoint::Star) => true,
        (PosKind::Tensor(l, r), WebPoint::Pair(a, b)) => in_web_pos(a, l) && in_web_pos(b, r),
        (PosKind::Sum(l, _), WebPoint::Inl(a)) => in_web_pos(a, l),
        (PosKind::Sum(_, r), WebPoint::Inr(a)) => in_web_pos(a, r),
        (PosKind::Bang(inner), WebPoint::Bag(elems)) => {
            elems.iter().all(|e| in_web_gen(e, inner))
        }
        _ => false,
    }
}

pub fn in_web_gen(p: &WebPoint, ty: &GenType) -> bool {
    match ty.kind() {
        GenKind::Pos(phi) => in_web_pos(p, phi),
        GenKind::Arrow(arg, res) => match p {
            WebPoint::Pair(a, c) => in_web_pos(a, arg) && in_web_gen(c, res),
            _ => false,
        },
    }
}

/// Membership in the restriction set at index `n` (value flavor).
pub fn in_srestr_pos(p: &WebPoint, n: u32, ty: &PosType) -> bool {
    match ty.kind() {
        PosKind::Unit => *p == WebPoint::Star,
        PosKind::Tensor(l, r) => match p {
            WebPoint::Pair(a, b) => in_srestr_pos(a, n, l) && in_srestr_pos(b, n, r),
            _ => false,
        },
        PosKind::Sum(l, r) => match p {
            WebPoint::Inl(a) => in_srestr_pos(a, n, l),
            WebPoint::Inr(a) => in_srestr_pos(a, n, r),
            _ => false,
        },
        PosKind::Bang(inner) => match p {
            WebPoint::Bag(elems) => elems.iter().all(|e| in_srestr_gen(e, n, inner)),
            _ => false,
        },
        PosKind::Mu { .. } => {
            if n == 0 {
                false
            } else {
                in_srestr_pos(p, n - 1, &ty.unfold_mu().expect("mu unfolds"))
            }
        }
        PosKind::Var(_) => false,
    }
}

/// Membership in the restriction set at index `n` (general flavor).
pub fn in_srestr_gen(p: &WebPoint, n: u32, ty: &GenType) -> bool {
    match ty.kind() {
        GenKind::Pos(phi) => in_srestr_pos(p, n, phi),
        GenKind::Arrow(arg, res) => match p {
            WebPoint::Pair(a, c) => in_srestr_pos(a, n, arg) && in_srestr_gen(c, n, res),
            _ => false,
        },
    }
}

/// Enumeration of truncated webs, cached per (type, depth).
#[derive(Default)]
pub struct WebCache {
    pos: HashMap<(PosType, u32, u32), Rc<Vec<WebPoint>>>,
    gen: HashMap<(GenType, u32, u32), Rc<Vec<WebPoint>>>,
}

impl WebCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pos_points(&mut self, ty: &PosType, depth: u32, degree: u32) -> Rc<Vec<WebPoint>> {
        let key = (ty.clone(), depth, degree);
        if let Some(v) = self.pos.get(&key) {
            return v.clone();
        }
        let points = match ty.kind() {
            PosKind::Unit => vec![WebPoint::Star],
            PosKind::Tensor(l, r) => {
                let ls = self.pos_points(l, depth, degree);
                let rs = self.pos_points(r, depth, degree);
                let mut out = Vec::with_capacity(ls.len() * rs.len());
                for a in ls.iter() {
                    for b in rs.iter() {
                        out.push(WebPoint::pair(a.clone(), b.clone()));
                    }
                }
                out
            }
            PosKind::Sum(l, r) => {
                let ls = self.pos_points(l, depth, degree);
                let rs = self.pos_points(r, depth, degree);
                let mut out = Vec::with_capacity(ls.len() + rs.len());
                out.extend(ls.iter().cloned().map(WebPoint::inl));
                out.extend(rs.iter().cloned().map(WebPoint::inr));
                out
            }
            PosKind::Bang(inner) => {
                let elems = self.gen_points(inner, depth, degree);
                multisets_up_to(&elems, degree as usize)
            }
            PosKind::Mu { .. } => {
                if depth == 0 {
                    Vec::new()
                } else {
                    let unfolded = ty.unfold_mu().expect("mu unfolds");
                    self.pos_points(&unfolded, depth - 1, degree).as_ref().clone()
                }
            }
            PosKind::Var(_) => Vec::new(),
        };
        let mut points = points;
        points.sort();
        let rc = Rc::new(points);
        self.pos.insert(key, rc.clone());
        rc
    }

    pub fn gen_points(&mut self, ty: &GenType, depth: u32, degree: u32) -> Rc<Vec<WebPoint>> {
        let key = (ty.clone(), depth, degree);
        if let Some(v) = self.gen.get(&key) {
            return v.clone();
        }
        let points = match ty.kind() {
            GenKind::Pos(phi) => self.pos_points(phi, depth, degree).as_ref().clone(),
            GenKind::Arrow(arg, res) => {
                let args = self.pos_points(arg, depth, degree);
                let ress = self.gen_points(res, depth, degree);
                let mut out = Vec::with_capacity(args.len() * ress.len());
                for a in args.iter() {
                    for c in ress.iter() {
                        out.push(WebPoint::pair(a.clone(), c.clone()));
                    }
                }
                out
            }
        };
        let mut points = points;
        points.sort();
        let rc = Rc::new(points);
        self.gen.insert(key, rc.clone());
        rc
    }

    /// Points whose every bag is empty: exactly the points the weakening
    /// map keeps (web enumeration at degree 0).
    pub fn discardable_points(&mut self, ty: &PosType, depth: u32) -> Rc<Vec<WebPoint>> {
        self.pos_points(ty, depth, 0)
    }
}

/// All multisets over `elems` of size at most `max`, as sorted bags.
pub fn multisets_up_to(elems: &[WebPoint], max: usize) -> Vec<WebPoint> {
    let mut out = Vec::new();
    let mut current: Vec<WebPoint> = Vec::new();
    fn rec(
        elems: &[WebPoint],
        start: usize,
        remaining: usize,
        current: &mut Vec<WebPoint>,
        out: &mut Vec<WebPoint>,
    ) {
        out.push(WebPoint::bag(current.clone()));
        if remaining == 0 {
            return;
        }
        for i in start..elems.len() {
            current.push(elems[i].clone());
            rec(elems, i, remaining - 1, current, out);
            current.pop();
        }
    }
    rec(elems, 0, max, &mut current, &mut out);
    out.sort();
    out.dedup();
    out
}

// ---- coalgebra combinatorics ----
//
// The coalgebra h_φ : φ → !φ of a positive type has 0/1 entries. Its three
// derived maps used by the interpreter:
//   weakening  w_φ(a)        = h_φ(a, [])            (a is discardable)
//   contraction c_φ(a,(b,c)) = h_φ(a, [b,c])         (b,c merge back to a)
//   promotion support        = enumeration of h_φ(a)

/// True when the weakening map keeps `a`: every bag inside is empty.
pub fn discardable(ty: &PosType, a: &WebPoint) -> bool {
    let Some(head) = head_constructor(ty) else {
        return false;
    };
    match (head.kind(), a) {
        (PosKind::Unit, WebPoint::Star) => true,
        (PosKind::Tensor(l, r), WebPoint::Pair(x, y)) => discardable(l, x) && discardable(r, y),
        (PosKind::Sum(l, _), WebPoint::Inl(x)) => discardable(l, x),
        (PosKind::Sum(_, r), WebPoint::Inr(x)) => discardable(r, x),
        (PosKind::Bang(_), WebPoint::Bag(elems)) => elems.is_empty(),
        _ => false,
    }
}

/// The contraction inverse: the unique `a` with `h_φ(a, [b,c]) = 1`, if any.
pub fn merge_point(ty: &PosType, b: &WebPoint, c: &WebPoint) -> Option<WebPoint> {
    let head = head_constructor(ty)?;
    match (head.kind(), b, c) {
        (PosKind::Unit, WebPoint::Star, WebPoint::Star) => Some(WebPoint::Star),
        (PosKind::Bang(_), WebPoint::Bag(x), WebPoint::Bag(y)) => {
            let mut all: Vec<WebPoint> = x.iter().cloned().collect();
            all.extend(y.iter().cloned());
            Some(WebPoint::bag(all))
        }
        (PosKind::Tensor(l, r), WebPoint::Pair(x1, y1), WebPoint::Pair(x2, y2)) => {
            let x = merge_point(l, x1, x2)?;
            let y = merge_point(r, y1, y2)?;
            Some(WebPoint::pair(x, y))
        }
        (PosKind::Sum(l, _), WebPoint::Inl(x), WebPoint::Inl(y)) => {
            merge_point(l, x, y).map(WebPoint::inl)
        }
        (PosKind::Sum(_, r), WebPoint::Inr(x), WebPoint::Inr(y)) => {
            merge_point(r, x, y).map(WebPoint::inr)
        }
        _ => None,
    }
}

/// `h_φ(a, m) = 1`?  (m given as a sorted slice of points)
pub fn coalg_contains(ty: &PosType, a: &WebPoint, m: &[WebPoint]) -> bool {
    match co_merge(ty, m) {
        CoMerge::Empty => discardable(ty, a),
        CoMerge::Unique(p) => p == *a,
        CoMerge::None => false,
    }
}

/// Inverse of the coalgebra on a whole bag: for a nonempty `m` there is at
/// most one `a` with `h_φ(a, m) = 1`; the empty bag is absorbed by every
/// discardable point.
pub enum CoMerge {
    /// empty bag: any discardable point
    Empty,
    Unique(WebPoint),
    None,
}

pub fn co_merge(ty: &PosType, m: &[WebPoint]) -> CoMerge {
    if m.is_empty() {
        return CoMerge::Empty;
    }
    let Some(head) = head_constructor(ty) else {
        return CoMerge::None;
    };
    match head.kind() {
        PosKind::Unit => {
            if m.iter().all(|p| *p == WebPoint::Star) {
                CoMerge::Unique(WebPoint::Star)
            } else {
                CoMerge::None
            }
        }
        PosKind::Bang(_) => {
            let mut sum: Vec<WebPoint> = Vec::new();
            for p in m {
                match p.bag_elems() {
                    Some(elems) => sum.extend(elems.iter().cloned()),
                    None => return CoMerge::None,
                }
            }
            CoMerge::Unique(WebPoint::bag(sum))
        }
        PosKind::Tensor(l, r) => {
            let mut lefts = Vec::with_capacity(m.len());
            let mut rights = Vec::with_capacity(m.len());
            for p in m {
                match p {
                    WebPoint::Pair(x, y) => {
                        lefts.push((**x).clone());
                        rights.push((**y).clone());
                    }
                    _ => return CoMerge::None,
                }
            }
            match (co_merge(l, &lefts), co_merge(r, &rights)) {
                (CoMerge::Unique(x), CoMerge::Unique(y)) => {
                    CoMerge::Unique(WebPoint::pair(x, y))
                }
                _ => CoMerge::None,
            }
        }
        PosKind::Sum(l, r) => {
            let all_l = m.iter().all(|p| matches!(p, WebPoint::Inl(_)));
            let all_r = m.iter().all(|p| matches!(p, WebPoint::Inr(_)));
            if all_l {
                let inner: Vec<WebPoint> = m
                    .iter()
                    .map(|p| match p {
                        WebPoint::Inl(x) => (**x).clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                match co_merge(l, &inner) {
                    CoMerge::Unique(x) => CoMerge::Unique(WebPoint::inl(x)),
                    _ => CoMerge::None,
                }
            } else if all_r {
                let inner: Vec<WebPoint> = m
                    .iter()
                    .map(|p| match p {
                        WebPoint::Inr(x) => (**x).clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                match co_merge(r, &inner) {
                    CoMerge::Unique(x) => CoMerge::Unique(WebPoint::inr(x)),
                    _ => CoMerge::None,
                }
            } else {
                CoMerge::None
            }
        }
        PosKind::Mu { .. } | PosKind::Var(_) => unreachable!("head_constructor strips these"),
    }
}

/// Enumerates the support of `h_φ(a)`: all bags `m` with `h_φ(a, m) = 1`
/// and `|m| ≤ max`.
pub fn coalg_bags(ty: &PosType, a: &WebPoint, max: usize) -> Vec<Vec<WebPoint>> {
    let Some(head) = head_constructor(ty) else {
        return Vec::new();
    };
    match (head.kind(), a) {
        (PosKind::Unit, WebPoint::Star) => {
            (0..=max).map(|j| vec![WebPoint::Star; j]).collect()
        }
        (PosKind::Bang(_), WebPoint::Bag(elems)) => {
            // all multisets of (possibly empty) bags summing to `elems`
            let mut out: Vec<Vec<WebPoint>> = Vec::new();
            for parts in 0..=max {
                distribute_bag(elems, parts, &mut out);
            }
            out
        }
        (PosKind::Tensor(l, r), WebPoint::Pair(x, y)) => {
            let mut out = Vec::new();
            for m1 in coalg_bags(l, x, max) {
                for m2 in coalg_bags(r, y, max) {
                    if m1.len() != m2.len() {
                        continue;
                    }
                    // all pairings of m1's elements with m2's, as multisets
                    for zipped in pairings(&m1, &m2) {
                        out.push(zipped);
                    }
                }
            }
            dedup_bags(&mut out);
            out
        }
        (PosKind::Sum(l, _), WebPoint::Inl(x)) => coalg_bags(l, x, max)
            .into_iter()
            .map(|m| m.into_iter().map(WebPoint::inl).collect())
            .collect(),
        (PosKind::Sum(_, r), WebPoint::Inr(x)) => coalg_bags(r, x, max)
            .into_iter()
            .map(|m| m.into_iter().map(WebPoint::inr).collect())
            .collect(),
        _ => Vec::new(),
    }
}

/// Multisets of exactly `parts` (possibly empty) bags summing to `total`.
fn distribute_bag(total: &[WebPoint], parts: usize, out: &mut Vec<Vec<WebPoint>>) {
    if parts == 0 {
        if total.is_empty() {
            out.push(Vec::new());
        }
        return;
    }
    let mut buckets: Vec<Vec<WebPoint>> = vec![Vec::new(); parts];
    let mut results: Vec<Vec<WebPoint>> = Vec::new();
    fn rec(
        total: &[WebPoint],
        i: usize,
        buckets: &mut Vec<Vec<WebPoint>>,
        results: &mut Vec<Vec<WebPoint>>,
    ) {
        if i == total.len() {
            let mut bags: Vec<WebPoint> =
                buckets.iter().map(|b| WebPoint::bag(b.clone())).collect();
            bags.sort();
            results.push(bags);
            return;
        }
        for j in 0..buckets.len() {
            buckets[j].push(total[i].clone());
            rec(total, i + 1, buckets, results);
            buckets[j].pop();
        }
    }
    rec(total, 0, &mut buckets, &mut results);
    dedup_bags(&mut results);
    out.extend(results);
}

/// All multisets of pairs with the given (equal-length) marginals.
fn pairings(m1: &[WebPoint], m2: &[WebPoint]) -> Vec<Vec<WebPoint>> {
    let n = m2.len();
    let mut used = vec![false; n];
    let mut current: Vec<WebPoint> = Vec::new();
    let mut out: Vec<Vec<WebPoint>> = Vec::new();
    fn rec(
        m1: &[WebPoint],
        m2: &[WebPoint],
        i: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<WebPoint>,
        out: &mut Vec<Vec<WebPoint>>,
    ) {
        if i == m1.len() {
            let mut bag = current.clone();
            bag.sort();
            out.push(bag);
            return;
        }
        for j in 0..m2.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            current.push(WebPoint::pair(m1[i].clone(), m2[j].clone()));
            rec(m1, m2, i + 1, used, current, out);
            current.pop();
            used[j] = false;
        }
    }
    rec(m1, m2, 0, &mut used, &mut current, &mut out);
    dedup_bags(&mut out);
    out
}

fn dedup_bags(bags: &mut Vec<Vec<WebPoint>>) {
    bags.sort();
    bags.dedup();
}
