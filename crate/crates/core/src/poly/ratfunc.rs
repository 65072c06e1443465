//! Rational functions in canonical form.
//!
//! Canonical form: numerator and denominator coprime, denominator monic under
//! the graded lex order. Equality is then structural, which keeps every
//! downstream yes/no decision (span membership, closure, conservation) exact.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::gcd::poly_gcd;
use super::polynomial::Polynomial;
use super::vars::Vars;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self::canonical(num, den))
    }

    fn canonical(num: Polynomial, den: Polynomial) -> Self {
        if num.is_zero() {
            return RationalFunction {
                num,
                den: Polynomial::one(den.vars()),
            };
        }
        let g = poly_gcd(&num, &den);
        let (mut num, mut den) = if g.is_one() {
            (num, den)
        } else {
            (num.exact_div(&g), den.exact_div(&g))
        };
        let lc = den.leading_coeff();
        if !lc.is_one() {
            num = num.div_constant(&lc);
            den = den.div_constant(&lc);
        }
        RationalFunction { num, den }
    }

    pub fn from_poly(p: Polynomial) -> Self {
        let one = Polynomial::one(p.vars());
        RationalFunction { num: p, den: one }
    }

    pub fn zero(vars: &Vars) -> Self {
        Self::from_poly(Polynomial::zero(vars))
    }

    pub fn one(vars: &Vars) -> Self {
        Self::from_poly(Polynomial::one(vars))
    }

    pub fn constant(vars: &Vars, c: BigRational) -> Self {
        Self::from_poly(Polynomial::constant(vars, c))
    }

    pub fn var(vars: &Vars, idx: usize) -> Self {
        Self::from_poly(Polynomial::var(vars, idx))
    }

    pub fn vars(&self) -> &Vars {
        self.num.vars()
    }

    pub fn numer(&self) -> &Polynomial {
        &self.num
    }

    pub fn denom(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self::canonical(self.den.clone(), self.num.clone()))
    }

    pub fn scaled(&self, c: &BigRational) -> Self {
        Self::canonical(self.num.scaled(c), self.den.clone())
    }

    pub fn pow(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.recip()?.pow(-n);
        }
        let mut acc = Self::one(self.vars());
        for _ in 0..n {
            acc = &acc * self;
        }
        Ok(acc)
    }

    /// Exact partial derivative by the quotient rule, in canonical form.
    /// The common factor `g = gcd(den, den')` is split off before squaring,
    /// keeping the gcd in the final reduction small.
    pub fn derive(&self, idx: usize) -> Self {
        let dden = self.den.derive(idx);
        if dden.is_zero() {
            return Self::canonical(self.num.derive(idx), self.den.clone());
        }
        let g = poly_gcd(&self.den, &dden);
        let den_red = self.den.exact_div(&g);
        let dden_red = dden.exact_div(&g);
        let n = &(&self.num.derive(idx) * &den_red) - &(&self.num * &dden_red);
        let d = &self.den * &den_red;
        Self::canonical(n, d)
    }

    /// Derivative by variable name; errors when the symbol is not declared.
    pub fn derive_by_name(&self, var: &str) -> Result<Self> {
        let idx = self
            .vars()
            .index_of(var)
            .ok_or_else(|| Error::UnknownSymbol(var.to_string()))?;
        Ok(self.derive(idx))
    }

    /// Exact evaluation; errors when the denominator vanishes at the point.
    pub fn eval(&self, point: &[BigRational]) -> Result<BigRational> {
        let d = self.den.eval(point)?;
        if d.is_zero() {
            return Err(Error::Pole(format!(
                "denominator {} vanishes at the evaluation point",
                self.den
            )));
        }
        Ok(self.num.eval(point)? / d)
    }

    pub fn substitute(&self, target: &Vars, images: &[RationalFunction]) -> Result<Self> {
        // N(g1..gn)/D(g1..gn) with rational images: clear denominators.
        let mut num = RationalFunction::zero(target);
        let mut den = RationalFunction::zero(target);
        for (poly, acc) in [(&self.num, &mut num), (&self.den, &mut den)] {
            for (m, c) in poly.terms() {
                let mut t = RationalFunction::constant(target, c.clone());
                for (i, &e) in m.0.iter().enumerate() {
                    if e > 0 {
                        t = &t * &images[i].pow(e as i32)?;
                    }
                }
                *acc = &*acc + &t;
            }
        }
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        &num / &den
    }

    pub fn embed(&self, target: &Vars, mapping: &[usize]) -> Self {
        RationalFunction {
            num: self.num.embed(target, mapping),
            den: self.den.embed(target, mapping),
        }
    }

    pub fn project(&self, target: &Vars) -> Result<Self> {
        Ok(RationalFunction {
            num: self.num.project(target)?,
            den: self.den.project(target)?,
        })
    }

    /// Max of numerator/denominator total degrees; a size measure for bounds.
    pub fn degree(&self) -> u32 {
        self.num.total_degree().max(self.den.total_degree())
    }
}

// Sums go over the lcm of the denominators and products cross-reduce first;
// both keep the final gcd small, which dominates the cost of exact chains.

fn add_sub(lhs: &RationalFunction, rhs: &RationalFunction, sub: bool) -> RationalFunction {
    let g = poly_gcd(&lhs.den, &rhs.den);
    let (la, lb) = if g.is_one() {
        (rhs.den.clone(), lhs.den.clone())
    } else {
        (rhs.den.exact_div(&g), lhs.den.exact_div(&g))
    };
    let left = &lhs.num * &la;
    let right = &rhs.num * &lb;
    let num = if sub { &left - &right } else { &left + &right };
    let den = &lhs.den * &la;
    RationalFunction::canonical(num, den)
}

impl Add for &RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        add_sub(self, rhs, false)
    }
}

impl Sub for &RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        add_sub(self, rhs, true)
    }
}

impl Mul for &RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        let g1 = poly_gcd(&self.num, &rhs.den);
        let g2 = poly_gcd(&rhs.num, &self.den);
        let n1 = if g1.is_one() { self.num.clone() } else { self.num.exact_div(&g1) };
        let d2 = if g1.is_one() { rhs.den.clone() } else { rhs.den.exact_div(&g1) };
        let n2 = if g2.is_one() { rhs.num.clone() } else { rhs.num.exact_div(&g2) };
        let d1 = if g2.is_one() { self.den.clone() } else { self.den.exact_div(&g2) };
        RationalFunction::canonical(&n1 * &n2, &d1 * &d2)
    }
}

impl Div for &RationalFunction {
    type Output = Result<RationalFunction>;
    fn div(self, rhs: &RationalFunction) -> Result<RationalFunction> {
        if rhs.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(self * &RationalFunction::canonical(rhs.den.clone(), rhs.num.clone()))
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

impl fmt::Debug for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    fn p_vars() -> Vars {
        Vars::new(["p"]).unwrap()
    }

    #[test]
    fn inverse_square_derivative() {
        // d/dp [ 1/p^2 ] = -2/p^3
        let v = p_vars();
        let p = RationalFunction::var(&v, 0);
        let f = p.pow(-2).unwrap();
        let d = f.derive(0);
        let expected = &RationalFunction::constant(&v, rat(-2, 1)) * &p.pow(-3).unwrap();
        assert_eq!(d, expected);
    }

    #[test]
    fn canonical_form_is_reduced_and_monic() {
        let v = Vars::new(["x"]).unwrap();
        let x = Polynomial::var(&v, 0);
        // (2x^2 + 2x) / (4x) -> (1/2 x + 1/2) / 1
        let num = &(&x * &x) + &x;
        let f = RationalFunction::new(num.scaled(&rat(2, 1)), x.scaled(&rat(4, 1))).unwrap();
        assert!(f.is_polynomial());
        assert_eq!(f.to_string(), "1/2*x + 1/2");
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let v = Vars::new(["x", "y"]).unwrap();
        let x = Polynomial::var(&v, 0);
        let y = Polynomial::var(&v, 1);
        let f = RationalFunction::new(&x + &y, &(&x * &y) + &y).unwrap();
        let g = RationalFunction::new(f.numer().clone(), f.denom().clone()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn pole_detected_on_eval() {
        let v = p_vars();
        let f = RationalFunction::var(&v, 0).pow(-2).unwrap();
        assert!(matches!(f.eval(&[rat(0, 1)]), Err(Error::Pole(_))));
        assert_eq!(f.eval(&[rat(2, 1)]).unwrap(), rat(1, 4));
    }
}
