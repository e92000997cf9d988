//! Truncated-web probabilistic coherence space semantics.

pub mod interpret;
pub mod matrix;
pub mod web;

pub use interpret::{interpret, interpret_closed, sem_vector, unit_value, Interpreter};
pub use matrix::{
    der_digg, identity_matrix, promote, structural_matrix, DerDigg, Row, SemError, SemMatrix,
    SemVector, StructuralKind,
};
pub use web::{
    discardable, in_srestr_gen, in_srestr_pos, in_web_gen, in_web_pos, parse_point, TruncParams,
    WebCache, WebPoint,
};
