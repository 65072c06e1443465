//! Exact sparse multivariate polynomial and rational-function arithmetic
//! over the rationals, with univariate time polynomials, partial derivatives,
//! evaluation, and exact linear solving.

mod gcd;
mod linsolve;
mod parse;
mod polynomial;
mod ratfunc;
mod timepoly;
mod vars;

pub use gcd::{poly_gcd, poly_lcm};
pub use linsolve::{nullspace, rank, solve_linear, LinearSolution};
pub use parse::{parse_polynomial, parse_rational, parse_rational_function};
pub use polynomial::{Monomial, Polynomial};
pub use ratfunc::RationalFunction;
pub use timepoly::{rational_to_f64, time_var, TimePoly};
pub use vars::Vars;

use num_bigint::BigInt;
use num_rational::BigRational;

/// Shorthand for exact rational constants.
pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}
