//! Abstract and concrete syntax.

pub mod parse;
pub mod print;
pub mod term;
pub mod ty;

pub use parse::{parse_gen_type, parse_pos_type, parse_term, Pos, SyntaxError};
pub use term::{Hint, Term, TermKind};
pub use ty::{type_equal, GenKind, GenType, PosKind, PosType};
