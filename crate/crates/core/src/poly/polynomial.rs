//! Sparse multivariate polynomials over the exact rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by exponent vectors under the graded
//! lexicographic order induced by the declared variable order. Arithmetic,
//! differentiation, and evaluation are exact; no floating point enters.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::vars::Vars;
use crate::error::{Error, Result};

/// Exponent vector under graded lexicographic order: higher total degree wins,
/// ties break lexicographically on the exponents in declared variable order.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_add(*b).expect("exponent overflow"))
                .collect(),
        )
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    vars: Vars,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero(vars: &Vars) -> Self {
        Polynomial {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(vars: &Vars) -> Self {
        Self::constant(vars, BigRational::one())
    }

    pub fn constant(vars: &Vars, c: BigRational) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Monomial(vec![0; vars.len()]), c);
        }
        p
    }

    /// The monomial `x_idx`.
    pub fn var(vars: &Vars, idx: usize) -> Self {
        assert!(idx < vars.len(), "variable index out of range");
        let mut exps = vec![0; vars.len()];
        exps[idx] = 1;
        let mut p = Self::zero(vars);
        p.terms.insert(Monomial(exps), BigRational::one());
        p
    }

    pub fn from_terms<I>(vars: &Vars, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, BigRational)>,
    {
        let mut p = Self::zero(vars);
        for (exps, c) in terms {
            assert_eq!(exps.len(), vars.len(), "exponent vector length mismatch");
            p.add_term(Monomial(exps), c);
        }
        p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    /// `Some(c)` when the polynomial is a constant (including zero).
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_constant().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    /// Highest exponent of variable `idx` across all terms.
    pub fn degree_in(&self, idx: usize) -> u32 {
        self.terms.keys().map(|m| m.0[idx]).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Leading (largest) term under the graded lex order.
    pub fn leading_term(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff(&self) -> BigRational {
        self.leading_term()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn coeff(&self, exps: &[u32]) -> BigRational {
        self.terms
            .get(&Monomial(exps.to_vec()))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn assert_same_vars(&self, other: &Polynomial) {
        assert_eq!(
            self.vars, other.vars,
            "polynomial arithmetic across different variable universes"
        );
    }

    pub fn scaled(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Self::zero(&self.vars);
        }
        Polynomial {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Polynomial {
        let mut acc = Self::one(&self.vars);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Exact partial derivative with respect to variable `idx`.
    pub fn derive(&self, idx: usize) -> Polynomial {
        assert!(idx < self.vars.len());
        let mut out = Self::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.0[idx];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[idx] = e - 1;
            out.add_term(Monomial(exps), c * BigRational::from(BigInt::from(e)));
        }
        out
    }

    /// Exact evaluation; the point must cover every declared variable.
    pub fn eval(&self, point: &[BigRational]) -> Result<BigRational> {
        if point.len() != self.vars.len() {
            return Err(Error::Shape(format!(
                "evaluation point has dimension {}, expected {}",
                point.len(),
                self.vars.len()
            )));
        }
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t *= &point[i];
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Substitute each variable by the polynomial `images[i]`; all images must
    /// share one target universe.
    pub fn substitute(&self, target: &Vars, images: &[Polynomial]) -> Polynomial {
        assert_eq!(images.len(), self.vars.len());
        for im in images {
            assert_eq!(im.vars, *target);
        }
        let mut out = Polynomial::zero(target);
        for (m, c) in &self.terms {
            let mut t = Polynomial::constant(target, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = &t * &images[i].pow(e);
                }
            }
            out = &out + &t;
        }
        out
    }

    /// Reinterpret over `target` where `mapping[i]` gives the index in
    /// `target` of our variable `i`.
    pub fn embed(&self, target: &Vars, mapping: &[usize]) -> Polynomial {
        assert_eq!(mapping.len(), self.vars.len());
        let mut out = Polynomial::zero(target);
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; target.len()];
            for (i, &e) in m.0.iter().enumerate() {
                exps[mapping[i]] += e;
            }
            out.add_term(Monomial(exps), c.clone());
        }
        out
    }

    /// Drop variables that never appear. Errors if a dropped variable is used.
    pub fn project(&self, target: &Vars) -> Result<Polynomial> {
        let mapping: Vec<Option<usize>> = self
            .vars
            .names()
            .iter()
            .map(|n| target.index_of(n))
            .collect();
        let mut out = Polynomial::zero(target);
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; target.len()];
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    match mapping[i] {
                        Some(j) => exps[j] += e,
                        None => {
                            return Err(Error::UnknownSymbol(self.vars.names()[i].clone()));
                        }
                    }
                }
            }
            out.add_term(Monomial(exps), c.clone());
        }
        Ok(out)
    }

    /// Indices of variables that actually occur.
    pub fn active_vars(&self) -> Vec<usize> {
        let mut active = vec![false; self.vars.len()];
        for m in self.terms.keys() {
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    active[i] = true;
                }
            }
        }
        active
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }

    /// Divide by a nonzero rational constant.
    pub fn div_constant(&self, c: &BigRational) -> Polynomial {
        assert!(!c.is_zero());
        self.scaled(&c.recip())
    }

    /// Normalize so the leading coefficient is 1. Zero stays zero.
    pub fn monic(&self) -> Polynomial {
        match self.leading_term() {
            None => self.clone(),
            Some((_, c)) => self.div_constant(&c.clone()),
        }
    }

    /// Exact division, panicking if `self` is not a multiple of `div`.
    /// Callers must guarantee divisibility.
    pub(crate) fn exact_div(&self, div: &Polynomial) -> Polynomial {
        self.assert_same_vars(div);
        assert!(!div.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = Polynomial::zero(&self.vars);
        let (dm, dc) = {
            let (m, c) = div.leading_term().unwrap();
            (m.clone(), c.clone())
        };
        while let Some((rm, rc)) = rem.leading_term() {
            let exps: Option<Vec<u32>> = rm
                .0
                .iter()
                .zip(&dm.0)
                .map(|(a, b)| a.checked_sub(*b))
                .collect();
            let exps = exps.expect("non-exact polynomial division");
            let qc = rc / &dc;
            let qm = Monomial(exps);
            quot.add_term(qm.clone(), qc.clone());
            let mut sub = Polynomial::zero(&self.vars);
            for (m, c) in &div.terms {
                sub.add_term(m.mul(&qm), c * &qc);
            }
            rem = &rem - &sub;
        }
        quot
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.assert_same_vars(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.assert_same_vars(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.assert_same_vars(rhs);
        let mut out = Polynomial::zero(&self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

fn fmt_coeff(c: &BigRational) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Polynomial {
    /// Deterministic printing: terms in descending graded lex order,
    /// `*` between all factors, `^` for powers above one.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let abs = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || m.is_constant() {
                factors.push(fmt_coeff(&abs));
            }
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(self.vars.names()[i].clone()),
                    _ => factors.push(format!("{}^{}", self.vars.names()[i], e)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    fn xy() -> Vars {
        Vars::new(["x", "y"]).unwrap()
    }

    #[test]
    fn graded_lex_order() {
        // x^2 > xy > y^2 > x > y > 1 with vars (x, y)
        let m = |a, b| Monomial(vec![a, b]);
        assert!(m(2, 0) > m(1, 1));
        assert!(m(1, 1) > m(0, 2));
        assert!(m(0, 2) > m(1, 0));
        assert!(m(1, 0) > m(0, 1));
        assert!(m(0, 1) > m(0, 0));
    }

    #[test]
    fn arithmetic_and_display() {
        let v = xy();
        let x = Polynomial::var(&v, 0);
        let y = Polynomial::var(&v, 1);
        let p = &(&x * &x) + &y.scaled(&rat(3, 2));
        assert_eq!(p.to_string(), "x^2 + 3/2*y");
        let q = &p - &p;
        assert!(q.is_zero());
        assert_eq!(q.to_string(), "0");
    }

    #[test]
    fn derivative_of_spec_example() {
        // d/dI [ I*(100 - I) ] = 100 - 2I
        let v = Vars::new(["I"]).unwrap();
        let i = Polynomial::var(&v, 0);
        let p = &i * &(&Polynomial::constant(&v, rat(100, 1)) - &i);
        let d = p.derive(0);
        let expected = &Polynomial::constant(&v, rat(100, 1)) - &i.scaled(&rat(2, 1));
        assert_eq!(d, expected);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let v = xy();
        let c = Polynomial::constant(&v, rat(7, 3));
        assert!(c.derive(0).is_zero());
    }

    #[test]
    fn exact_division_round_trip() {
        let v = xy();
        let x = Polynomial::var(&v, 0);
        let y = Polynomial::var(&v, 1);
        let a = &(&x + &y) * &(&x - &y);
        let q = a.exact_div(&(&x + &y));
        assert_eq!(q, &x - &y);
    }

    #[test]
    fn eval_requires_full_point() {
        let v = xy();
        let x = Polynomial::var(&v, 0);
        assert!(x.eval(&[rat(1, 1)]).is_err());
        assert_eq!(x.eval(&[rat(3, 1), rat(0, 1)]).unwrap(), rat(3, 1));
    }
}
