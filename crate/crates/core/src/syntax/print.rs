//! Pretty-printing, the inverse of the parser on closed terms.

use crate::syntax::parse::is_valid_ident;
use crate::syntax::term::{Term, TermKind};
use crate::syntax::ty::{GenKind, GenType, PosKind, PosType};
use std::fmt;
use std::rc::Rc;

fn pos_prec(t: &PosType) -> u8 {
    match t.kind() {
        PosKind::Mu { .. } => 0,
        PosKind::Sum(..) => 1,
        PosKind::Tensor(..) => 2,
        PosKind::Bang(_) => 3,
        PosKind::Unit | PosKind::Var(_) => 4,
    }
}

fn fmt_pos(t: &PosType, level: u8, names: &mut Vec<String>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let parens = pos_prec(t) < level;
    if parens {
        write!(f, "(")?;
    }
    match t.kind() {
        PosKind::Unit => write!(f, "unit")?,
        PosKind::Var(i) => {
            let i = *i as usize;
            if i < names.len() {
                write!(f, "{}", names[names.len() - 1 - i])?;
            } else {
                write!(f, "_t{i}")?;
            }
        }
        PosKind::Bang(inner) => match inner.kind() {
            GenKind::Pos(p) => {
                write!(f, "!")?;
                fmt_pos(p, 3, names, f)?;
            }
            GenKind::Arrow(..) => {
                write!(f, "!(")?;
                fmt_gen(inner, names, f)?;
                write!(f, ")")?;
            }
        },
        PosKind::Tensor(l, r) => {
            fmt_pos(l, 3, names, f)?;
            write!(f, " * ")?;
            fmt_pos(r, 2, names, f)?;
        }
        PosKind::Sum(l, r) => {
            fmt_pos(l, 2, names, f)?;
            write!(f, " + ")?;
            fmt_pos(r, 1, names, f)?;
        }
        PosKind::Mu { hint, body } => {
            let name = fresh_ty(hint, names);
            write!(f, "rec {name}. ")?;
            names.push(name);
            let r = fmt_pos(body, 0, names, f);
            names.pop();
            r?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

fn fmt_gen(t: &GenType, names: &mut Vec<String>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t.kind() {
        GenKind::Pos(p) => fmt_pos(p, 0, names, f),
        GenKind::Arrow(a, r) => {
            fmt_pos(a, 0, names, f)?;
            write!(f, " -> ")?;
            fmt_gen(r, names, f)
        }
    }
}

fn fresh_ty(hint: &str, names: &[String]) -> String {
    let base = if is_valid_ident(hint) { hint } else { "z" };
    let mut name = base.to_string();
    while names.iter().any(|n| *n == name) || KEYWORDS.contains(&name.as_str()) {
        name.push('\'');
    }
    name
}

impl fmt::Display for PosType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_pos(self, 0, &mut Vec::new(), f)
    }
}

impl fmt::Display for GenType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_gen(self, &mut Vec::new(), f)
    }
}

const KEYWORDS: &[&str] = &[
    "unit", "rec", "thunk", "force", "fst", "snd", "inl", "inr", "case", "of", "fix", "fold",
    "unfold", "coin",
];

fn fresh_tm(hint: &str, scope: &[Rc<str>]) -> Rc<str> {
    let base: &str = if is_valid_ident(hint) { hint } else { "x" };
    let mut name = base.to_string();
    while scope.iter().any(|n| **n == name) || KEYWORDS.contains(&name.as_str()) {
        name.push('\'');
    }
    Rc::from(name.as_str())
}

fn tm_prec(t: &Term) -> u8 {
    match t.kind() {
        TermKind::Lam { .. } | TermKind::Fix { .. } | TermKind::Case { .. } | TermKind::Ascribe(..) => 0,
        TermKind::App(..) => 1,
        TermKind::Thunk(_)
        | TermKind::Force(_)
        | TermKind::PrL(_)
        | TermKind::PrR(_)
        | TermKind::Inl(_)
        | TermKind::Inr(_)
        | TermKind::Fold(_)
        | TermKind::Unfold(_)
        | TermKind::Coin(_) => 2,
        TermKind::Var(_) | TermKind::One | TermKind::Pair(..) => 3,
    }
}

fn fmt_term(
    t: &Term,
    level: u8,
    scope: &mut Vec<Rc<str>>,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    let parens = tm_prec(t) < level;
    if parens {
        write!(f, "(")?;
    }
    match t.kind() {
        TermKind::Var(i) => {
            let i = *i as usize;
            if i < scope.len() {
                write!(f, "{}", scope[scope.len() - 1 - i])?;
            } else {
                write!(f, "_v{i}")?;
            }
        }
        TermKind::One => write!(f, "()")?,
        TermKind::Pair(l, r) => {
            write!(f, "<")?;
            fmt_term(l, 0, scope, f)?;
            write!(f, ", ")?;
            fmt_term(r, 0, scope, f)?;
            write!(f, ">")?;
        }
        TermKind::Thunk(m) => {
            write!(f, "thunk ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::Force(m) => {
            write!(f, "force ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::PrL(m) => {
            write!(f, "fst ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::PrR(m) => {
            write!(f, "snd ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::Inl(m) => {
            write!(f, "inl ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::Inr(m) => {
            write!(f, "inr ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::Fold(m) => {
            write!(f, "fold ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::Unfold(m) => {
            write!(f, "unfold ")?;
            fmt_term(m, 2, scope, f)?;
        }
        TermKind::Coin(p) => {
            if p.denom() == &num::BigInt::from(1) {
                write!(f, "coin({})", p.numer())?;
            } else {
                write!(f, "coin({}/{})", p.numer(), p.denom())?;
            }
        }
        TermKind::App(fun, arg) => {
            fmt_term(fun, 1, scope, f)?;
            write!(f, " ")?;
            fmt_term(arg, 2, scope, f)?;
        }
        TermKind::Lam { hint, annot, body } => {
            let name = fresh_tm(hint, scope);
            write!(f, "\\{name}:")?;
            fmt_pos(annot, 1, &mut Vec::new(), f)?;
            write!(f, ". ")?;
            scope.push(name);
            let r = fmt_term(body, 0, scope, f);
            scope.pop();
            r?;
        }
        TermKind::Fix { hint, annot, body } => {
            let name = fresh_tm(hint, scope);
            write!(f, "fix {name}:")?;
            fmt_gen(annot, &mut Vec::new(), f)?;
            write!(f, ". ")?;
            scope.push(name);
            let r = fmt_term(body, 0, scope, f);
            scope.pop();
            r?;
        }
        TermKind::Case { scrut, lhint, left, rhint, right } => {
            write!(f, "case ")?;
            fmt_term(scrut, 0, scope, f)?;
            write!(f, " of {{ inl ")?;
            let lname = fresh_tm(lhint, scope);
            write!(f, "{lname} -> ")?;
            scope.push(lname);
            let r = fmt_term(left, 0, scope, f);
            scope.pop();
            r?;
            write!(f, " | inr ")?;
            let rname = fresh_tm(rhint, scope);
            write!(f, "{rname} -> ")?;
            scope.push(rname);
            let r = fmt_term(right, 0, scope, f);
            scope.pop();
            r?;
            write!(f, " }}")?;
        }
        TermKind::Ascribe(m, ty) => {
            fmt_term(m, 1, scope, f)?;
            write!(f, " : ")?;
            fmt_gen(ty, &mut Vec::new(), f)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, 0, &mut Vec::new(), f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::syntax::parse::{parse_gen_type, parse_term};

    fn roundtrip(src: &str) {
        let t = parse_term(src).unwrap();
        let printed = t.to_string();
        let back = parse_term(&printed).unwrap_or_else(|e| panic!("reparse `{printed}`: {e}"));
        assert_eq!(t, back, "printed as `{printed}`");
    }

    #[test]
    fn print_parse_roundtrips() {
        roundtrip("coin(1/2)");
        roundtrip(r"\x:unit. x");
        roundtrip("case inl () of { inl x -> x | inr y -> y }");
        roundtrip(r"(\f:!(unit -> unit). force f ()) (thunk (\x:unit. x))");
        roundtrip(r"fix x:unit. force x");
        roundtrip("fold inr fold inl () : rec z. unit + z");
        roundtrip(r"<thunk coin(1/3), fst <(), ()>>");
        roundtrip(r"\x:rec z. unit + z. case unfold x of { inl z -> () | inr n -> () }");
    }

    #[test]
    fn shadowed_binders_are_freshened() {
        // \x. \x. <x0, x1> — inner use of the outer variable must not be captured
        let t = Term::lam(
            "x",
            PosType::unit(),
            Term::lam("x", PosType::unit(), Term::pair(Term::var(0), Term::var(1))),
        );
        let printed = t.to_string();
        let back = parse_term(&printed).unwrap();
        assert_eq!(t, back, "printed as `{printed}`");
    }

    #[test]
    fn type_display_roundtrips() {
        for src in [
            "unit",
            "rec z. unit + z",
            "!(unit -> unit) -> unit",
            "!(rec z. unit + z) * unit + unit",
            "rec s. !(unit * s)",
            "!!unit -> unit * unit * unit",
        ] {
            let t = parse_gen_type(src).unwrap();
            let printed = t.to_string();
            assert_eq!(parse_gen_type(&printed).unwrap(), t, "printed as `{printed}`");
        }
    }

    #[test]
    fn coin_display() {
        assert_eq!(Term::coin(rat(1, 2)).to_string(), "coin(1/2)");
        assert_eq!(Term::coin(rat(1, 1)).to_string(), "coin(1)");
        assert_eq!(Term::coin(rat(0, 1)).to_string(), "coin(0)");
    }
}
