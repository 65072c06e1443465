//! Vector fields with rational-function coefficients on a fixed chart.
//!
//! Charts are global coordinate systems; the manifold is the open subset of
//! Euclidean space where the coefficient denominators do not vanish. Rational
//! (not just polynomial) coefficients are required because Hamiltonian
//! examples carry terms like `1/p^2`.

use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::poly::{RationalFunction, Vars};

#[derive(Clone, PartialEq, Eq)]
pub struct VectorField {
    chart: Vars,
    coeffs: Vec<RationalFunction>,
}

impl VectorField {
    pub fn new(chart: Vars, coeffs: Vec<RationalFunction>) -> Result<Self> {
        if coeffs.len() != chart.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for a {}-dimensional chart",
                coeffs.len(),
                chart.len()
            )));
        }
        for c in &coeffs {
            if *c.vars() != chart {
                return Err(Error::ChartMismatch {
                    expected: chart.names().to_vec(),
                    got: c.vars().names().to_vec(),
                });
            }
        }
        Ok(VectorField { chart, coeffs })
    }

    /// Parse coefficient expressions over the chart variables.
    pub fn parse(chart: &Vars, exprs: &[&str]) -> Result<Self> {
        let coeffs = exprs
            .iter()
            .map(|e| crate::poly::parse_rational_function(e, chart))
            .collect::<Result<Vec<_>>>()?;
        Self::new(chart.clone(), coeffs)
    }

    pub fn zero(chart: &Vars) -> Self {
        VectorField {
            chart: chart.clone(),
            coeffs: vec![RationalFunction::zero(chart); chart.len()],
        }
    }

    pub fn chart(&self) -> &Vars {
        &self.chart
    }

    pub fn coeffs(&self) -> &[RationalFunction] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &RationalFunction {
        &self.coeffs[i]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(RationalFunction::is_zero)
    }

    fn check_chart(&self, other: &VectorField) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch {
                expected: self.chart.names().to_vec(),
                got: other.chart.names().to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.check_chart(other)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.check_chart(other)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scaled(&self, c: &BigRational) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(|a| a.scaled(c)).collect(),
        }
    }

    /// Multiply every component by a rational function on the same chart.
    pub fn mul_function(&self, f: &RationalFunction) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(|a| a * f).collect(),
        }
    }

    /// Lie bracket `[A, B]^i = sum_j (A^j dB^i/dx^j - B^j dA^i/dx^j)`.
    pub fn lie_bracket(&self, other: &VectorField) -> Result<VectorField> {
        self.check_chart(other)?;
        let n = self.chart.len();
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = RationalFunction::zero(&self.chart);
            for j in 0..n {
                let t1 = &self.coeffs[j] * &other.coeffs[i].derive(j);
                let t2 = &other.coeffs[j] * &self.coeffs[i].derive(j);
                acc = &acc + &(&t1 - &t2);
            }
            coeffs.push(acc);
        }
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs,
        })
    }

    /// Directional derivative `A(f) = sum_i A^i df/dx^i`.
    pub fn apply(&self, f: &RationalFunction) -> Result<RationalFunction> {
        if *f.vars() != self.chart {
            return Err(Error::ChartMismatch {
                expected: self.chart.names().to_vec(),
                got: f.vars().names().to_vec(),
            });
        }
        let mut acc = RationalFunction::zero(&self.chart);
        for (i, a) in self.coeffs.iter().enumerate() {
            acc = &acc + &(a * &f.derive(i));
        }
        Ok(acc)
    }

    /// `(B . nabla) A`: derivative of each component of `self` along `other`.
    pub fn directional_derivative_along(&self, other: &VectorField) -> Result<VectorField> {
        self.check_chart(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| other.apply(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs,
        })
    }

    /// Exact component-wise evaluation; names the offending coefficient when
    /// a denominator vanishes at the point.
    pub fn evaluate(&self, point: &[BigRational]) -> Result<Vec<BigRational>> {
        if point.len() != self.chart.len() {
            return Err(Error::Shape(format!(
                "point has dimension {}, chart has {}",
                point.len(),
                self.chart.len()
            )));
        }
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.eval(point).map_err(|_| {
                    Error::Pole(format!(
                        "coefficient {} of d/d{} has a pole at the evaluation point",
                        c,
                        self.chart.names()[i]
                    ))
                })
            })
            .collect()
    }

    /// Size measure used by closure bounds: max over components of
    /// numerator plus denominator total degree.
    pub fn degree(&self) -> u32 {
        self.coeffs
            .iter()
            .map(|c| c.numer().total_degree() + c.denom().total_degree())
            .max()
            .unwrap_or(0)
    }

    /// True when no component denominator vanishes at the point.
    pub fn pole_free_at(&self, point: &[BigRational]) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.denom().eval(point).map(|v| !v.is_zero()).unwrap_or(false))
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})*d/d{}", c, self.chart.names()[i])?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
