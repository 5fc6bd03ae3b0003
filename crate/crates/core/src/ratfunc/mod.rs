//! Exact sparse multivariate polynomials and rational functions over ℚ.

mod eval;
mod func;
mod parse;
mod poly;
mod print;
mod vars;

use num_complex::Complex64;
use thiserror::Error;

pub use eval::{eval, CompiledRatFunc};
pub use func::{ArithOp, RatFunc};
pub use parse::{parse_expr, ParseError};
pub use poly::{degree_cap, set_degree_cap, Exponents, Poly, DEFAULT_DEGREE_CAP};
pub use print::{poly_to_string, ratfunc_to_string};
pub use vars::VarTable;

pub(crate) use vars::is_identifier;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatFuncError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("operands are built over different variable tables")]
    TableMismatch,
    #[error("division by zero")]
    DivisionByZero,
    #[error("substitution makes the denominator vanish")]
    SubstitutionPole,
    #[error("total degree {degree} exceeds the cap {cap}")]
    DegreeCap { degree: u64, cap: u32 },
    #[error("denominator vanishes at {point:?}")]
    Pole { point: Vec<Complex64> },
    #[error("evaluation produced a non-finite value")]
    NonFinite,
    #[error("point assigns {got} values, table has {expected}")]
    PointArity { expected: usize, got: usize },
}
