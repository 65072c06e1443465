//! Univariate polynomials in the distinguished time symbol `t`.

use std::fmt;
use std::ops::{Add, Mul};

use num_rational::BigRational;
use num_traits::Zero;

use super::parse::parse_polynomial;
use super::polynomial::Polynomial;
use super::vars::Vars;
use crate::error::Result;

pub fn time_var() -> Vars {
    Vars::new(["t"]).expect("static variable list")
}

/// Time-dependent coefficient, restricted to polynomials in `t` so that
/// decomposition over powers of `t` stays exact and finite.
#[derive(Clone, PartialEq, Eq)]
pub struct TimePoly(Polynomial);

impl TimePoly {
    pub fn zero() -> Self {
        TimePoly(Polynomial::zero(&time_var()))
    }

    pub fn one() -> Self {
        TimePoly(Polynomial::one(&time_var()))
    }

    pub fn constant(c: BigRational) -> Self {
        TimePoly(Polynomial::constant(&time_var(), c))
    }

    pub fn t() -> Self {
        TimePoly(Polynomial::var(&time_var(), 0))
    }

    pub fn parse(input: &str) -> Result<Self> {
        Ok(TimePoly(parse_polynomial(input, &time_var())?))
    }

    pub fn from_polynomial(p: Polynomial) -> Result<Self> {
        let projected = p.project(&time_var())?;
        Ok(TimePoly(projected))
    }

    /// Dense coefficient list `[c_0, c_1, ...]` up to the degree.
    pub fn coefficients(&self) -> Vec<BigRational> {
        let deg = self.0.degree_in(0) as usize;
        let mut out = vec![BigRational::zero(); deg + 1];
        for (m, c) in self.0.terms() {
            out[m.0[0] as usize] = c.clone();
        }
        out
    }

    pub fn from_coefficients(coeffs: &[BigRational]) -> Self {
        let v = time_var();
        TimePoly(Polynomial::from_terms(
            &v,
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| (vec![i as u32], c.clone())),
        ))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_constant(&self) -> bool {
        self.0.degree_in(0) == 0
    }

    pub fn degree(&self) -> u32 {
        self.0.degree_in(0)
    }

    /// Exact evaluation at rational time.
    pub fn eval(&self, t: &BigRational) -> BigRational {
        self.0.eval(std::slice::from_ref(t)).expect("univariate eval")
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        // Horner on the dense coefficients
        for c in self.coefficients().iter().rev() {
            acc = acc * t + rational_to_f64(c);
        }
        acc
    }

    pub fn as_polynomial(&self) -> &Polynomial {
        &self.0
    }
}

pub fn rational_to_f64(c: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().unwrap_or(f64::NAN)
}

impl Add for &TimePoly {
    type Output = TimePoly;
    fn add(self, rhs: &TimePoly) -> TimePoly {
        TimePoly(&self.0 + &rhs.0)
    }
}

impl Mul for &TimePoly {
    type Output = TimePoly;
    fn mul(self, rhs: &TimePoly) -> TimePoly {
        TimePoly(&self.0 * &rhs.0)
    }
}

impl fmt::Display for TimePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for TimePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    #[test]
    fn parse_eval_round_trip() {
        let w = TimePoly::parse("1/2*t^2 - t + 3").unwrap();
        assert_eq!(w.eval(&rat(2, 1)), rat(3, 1));
        assert_eq!(w.coefficients(), vec![rat(3, 1), rat(-1, 1), rat(1, 2)]);
        let back = TimePoly::parse(&w.to_string()).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn horner_matches_exact() {
        let w = TimePoly::parse("t^3 - 2t").unwrap();
        let exact = rational_to_f64(&w.eval(&rat(7, 4)));
        assert!((w.eval_f64(1.75) - exact).abs() < 1e-14);
    }
}
