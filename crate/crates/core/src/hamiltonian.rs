//! Symplectic forms with rational-function coefficients, Hamiltonian-field
//! detection, Poisson brackets, Lie-Hamilton algebras, conserved-quantity
//! search, and Casimir / coalgebra constants of motion on prolongations.
//!
//! Sign convention, fixed once: `i_{X_f} omega = df` and
//! `{f, g} = omega(X_f, X_g) = X_g(f)`. Every output is stated relative to
//! this convention.
//!
//! Potentials are integrated exactly. Antiderivatives of rational one-forms
//! may pick up logarithmic terms with constant coefficients (the
//! Lotka-Volterra fields do); the `Potential` type carries them so that
//! gradients, brackets, and span expansions stay in the rational world.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::{verify_jacobi, LieAlgebraBasis};
use crate::poly::{solve_linear, LinearSolution, Monomial, Polynomial, RationalFunction, Vars};
use crate::vecfield::VectorField;

// ---------------------------------------------------------------------------
// symplectic forms
// ---------------------------------------------------------------------------

/// An exact symplectic form `omega = sum_{i<j} w_ij dx^i ^ dx^j` given by its
/// antisymmetric coefficient matrix. Construction verifies antisymmetry and
/// closedness exactly and nondegeneracy via the symbolic determinant.
#[derive(Clone, Debug)]
pub struct SymplecticForm {
    chart: Vars,
    omega: Vec<Vec<RationalFunction>>,
}

impl SymplecticForm {
    pub fn new(chart: &Vars, omega: Vec<Vec<RationalFunction>>) -> Result<Self> {
        let n = chart.len();
        if n % 2 != 0 {
            return Err(Error::Shape("symplectic chart must be even-dimensional".into()));
        }
        if omega.len() != n || omega.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("omega matrix shape mismatch".into()));
        }
        for row in &omega {
            for e in row {
                if e.vars() != chart {
                    return Err(Error::ChartMismatch {
                        expected: chart.names().to_vec(),
                        got: e.vars().names().to_vec(),
                    });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let sum = &omega[i][j] + &omega[j][i];
                if !sum.is_zero() {
                    return Err(Error::Shape(format!(
                        "omega is not antisymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        // closedness: d omega = 0, i.e. dw_ij/dx_k + dw_jk/dx_i + dw_ki/dx_j = 0
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let c = &(&omega[i][j].derive(k) + &omega[j][k].derive(i))
                        + &omega[k][i].derive(j);
                    if !c.is_zero() {
                        return Err(Error::Shape(format!(
                            "omega is not closed at ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        let form = SymplecticForm {
            chart: chart.clone(),
            omega,
        };
        if form.determinant()?.is_zero() {
            return Err(Error::Shape("omega is degenerate (zero determinant)".into()));
        }
        Ok(form)
    }

    /// Canonical form on a chart ordered `(q_1, p_1, q_2, p_2, ...)`:
    /// `sum_i dq_i ^ dp_i`.
    pub fn standard(chart: &Vars) -> Result<Self> {
        let n = chart.len();
        let mut omega = vec![vec![RationalFunction::zero(chart); n]; n];
        for b in 0..n / 2 {
            omega[2 * b][2 * b + 1] = RationalFunction::one(chart);
            omega[2 * b + 1][2 * b] = -&RationalFunction::one(chart);
        }
        Self::new(chart, omega)
    }

    /// Parse entries from expression strings.
    pub fn parse(chart: &Vars, entries: &[Vec<String>]) -> Result<Self> {
        let omega = entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| crate::poly::parse_rational_function(e, chart))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(chart, omega)
    }

    pub fn chart(&self) -> &Vars {
        &self.chart
    }

    pub fn matrix(&self) -> &[Vec<RationalFunction>] {
        &self.omega
    }

    fn determinant(&self) -> Result<RationalFunction> {
        symbolic_det(&self.omega, &self.chart)
    }

    /// Poisson bivector `P = -W^{-1}`, so that `X_f = P grad f` solves
    /// `i_{X_f} omega = df` and `{f, g} = grad f . P grad g` equals `X_g(f)`.
    pub fn bivector(&self) -> Result<Vec<Vec<RationalFunction>>> {
        let inv = symbolic_inverse(&self.omega, &self.chart)?;
        Ok(inv.into_iter().map(|row| row.into_iter().map(|e| -&e).collect()).collect())
    }

    /// `i_X omega` as a one-form: `alpha_j = sum_i X^i w_ij`.
    pub fn contract(&self, x: &VectorField) -> Result<Vec<RationalFunction>> {
        if x.chart() != &self.chart {
            return Err(Error::ChartMismatch {
                expected: self.chart.names().to_vec(),
                got: x.chart().names().to_vec(),
            });
        }
        let n = self.chart.len();
        Ok((0..n)
            .map(|j| {
                let mut acc = RationalFunction::zero(&self.chart);
                for i in 0..n {
                    acc = &acc + &(x.coeff(i) * &self.omega[i][j]);
                }
                acc
            })
            .collect())
    }
}

fn symbolic_det(m: &[Vec<RationalFunction>], chart: &Vars) -> Result<RationalFunction> {
    let n = m.len();
    if n == 0 {
        return Ok(RationalFunction::one(chart));
    }
    if n == 1 {
        return Ok(m[0][0].clone());
    }
    let mut acc = RationalFunction::zero(chart);
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<RationalFunction>> = (1..n)
            .map(|i| (0..n).filter(|&k| k != j).map(|k| m[i][k].clone()).collect())
            .collect();
        let sub = symbolic_det(&minor, chart)?;
        let term = &m[0][j] * &sub;
        acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    Ok(acc)
}

fn symbolic_inverse(
    m: &[Vec<RationalFunction>],
    chart: &Vars,
) -> Result<Vec<Vec<RationalFunction>>> {
    let n = m.len();
    let mut a: Vec<Vec<RationalFunction>> = m.to_vec();
    let mut inv: Vec<Vec<RationalFunction>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        RationalFunction::one(chart)
                    } else {
                        RationalFunction::zero(chart)
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Shape("degenerate form: symbolic inverse failed".into()))?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].clone();
        for k in 0..n {
            a[col][k] = (&a[col][k] / &p)?;
            inv[col][k] = (&inv[col][k] / &p)?;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in 0..n {
                    let t = &a[col][k] * &f;
                    a[r][k] = &a[r][k] - &t;
                    let t = &inv[col][k] * &f;
                    inv[r][k] = &inv[r][k] - &t;
                }
            }
        }
    }
    Ok(inv)
}

// ---------------------------------------------------------------------------
// potentials
// ---------------------------------------------------------------------------

/// `h = rational + sum_k c_k ln(arg_k)` with exact rational-constant log
/// coefficients. The differential of a potential is always rational, so every
/// bracket and gradient computation stays exact.
#[derive(Clone, PartialEq)]
pub struct Potential {
    rational: RationalFunction,
    logs: Vec<(BigRational, RationalFunction)>,
}

impl Potential {
    pub fn zero(vars: &Vars) -> Self {
        Potential {
            rational: RationalFunction::zero(vars),
            logs: Vec::new(),
        }
    }

    pub fn from_rational(f: RationalFunction) -> Self {
        Potential {
            rational: f,
            logs: Vec::new(),
        }
    }

    pub fn vars(&self) -> &Vars {
        self.rational.vars()
    }

    pub fn rational_part(&self) -> &RationalFunction {
        &self.rational
    }

    pub fn log_terms(&self) -> &[(BigRational, RationalFunction)] {
        &self.logs
    }

    /// `Some` when the potential is purely rational.
    pub fn as_rational(&self) -> Option<&RationalFunction> {
        self.logs.is_empty().then_some(&self.rational)
    }

    fn push_log(&mut self, c: BigRational, arg: RationalFunction) {
        if c.is_zero() {
            return;
        }
        for (k, a) in &mut self.logs {
            if *a == arg {
                *k += c;
                if k.is_zero() {
                    let keep = arg;
                    self.logs.retain(|(_, a2)| a2 != &keep);
                }
                return;
            }
        }
        self.logs.push((c, arg));
    }

    pub fn add(&self, other: &Potential) -> Potential {
        let mut out = self.clone();
        out.rational = &out.rational + &other.rational;
        for (c, a) in &other.logs {
            out.push_log(c.clone(), a.clone());
        }
        out
    }

    pub fn scaled(&self, c: &BigRational) -> Potential {
        Potential {
            rational: self.rational.scaled(c),
            logs: self.logs.iter().map(|(k, a)| (k * c, a.clone())).collect(),
        }
    }

    /// Exact partial derivative; always rational.
    pub fn derive(&self, idx: usize) -> RationalFunction {
        let mut acc = self.rational.derive(idx);
        for (c, a) in &self.logs {
            let d = &a.derive(idx) / a;
            acc = &acc + &d.expect("log arguments are nonzero").scaled(c);
        }
        acc
    }

    pub fn gradient(&self) -> Vec<RationalFunction> {
        (0..self.vars().len()).map(|i| self.derive(i)).collect()
    }

    /// Normalize so `h(base) = 0`: shift the rational part and rescale each
    /// log argument to value one at the base point.
    pub fn normalized_at(&self, base: &[BigRational]) -> Result<Potential> {
        let vars = self.vars().clone();
        let shift = self.rational.eval(base)?;
        let mut out = Potential {
            rational: &self.rational - &RationalFunction::constant(&vars, shift),
            logs: Vec::new(),
        };
        for (c, a) in &self.logs {
            let v = a.eval(base)?;
            if v.is_zero() {
                return Err(Error::Pole("log argument vanishes at the base point".into()));
            }
            out.push_log(c.clone(), a.scaled(&v.recip()));
        }
        Ok(out)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let rat = eval_rat_f64(&self.rational, x);
        let logs: f64 = self
            .logs
            .iter()
            .map(|(c, a)| crate::poly::rational_to_f64(c) * eval_rat_f64(a, x).ln())
            .sum();
        rat + logs
    }
}

fn eval_rat_f64(f: &RationalFunction, x: &[f64]) -> f64 {
    let ev = |p: &Polynomial| {
        p.terms()
            .map(|(m, c)| {
                let mut t = crate::poly::rational_to_f64(c);
                for (i, &e) in m.0.iter().enumerate() {
                    t *= x[i].powi(e as i32);
                }
                t
            })
            .sum::<f64>()
    };
    ev(f.numer()) / ev(f.denom())
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rational)?;
        for (c, a) in &self.logs {
            write!(f, " + ({c})*log({a})")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Antiderivative of `f` with respect to variable `idx`, allowing a rational
/// part plus constant-coefficient log terms. Errors when the antiderivative
/// leaves that class.
fn integrate_univar(f: &RationalFunction, idx: usize) -> Result<Potential> {
    let vars = f.vars().clone();
    if f.is_zero() {
        return Ok(Potential::zero(&vars));
    }
    let den_deg = f.denom().degree_in(idx);
    if den_deg == 0 {
        // denominator free of the variable: integrate the numerator term-wise
        let mut num = Polynomial::zero(&vars);
        for (m, c) in f.numer().terms() {
            let mut exps = m.0.clone();
            exps[idx] += 1;
            let k = BigRational::from_integer((exps[idx] as i64).into());
            num = &num
                + &Polynomial::from_terms(&vars, [(exps, c / k)]);
        }
        return Ok(Potential::from_rational(RationalFunction::new(
            num,
            f.denom().clone(),
        )?));
    }
    // denominator is a pure monomial in the variable times an idx-free factor?
    let min_exp = f.denom().terms().map(|(m, _)| m.0[idx]).min().unwrap_or(0);
    if min_exp == den_deg {
        // D = E * x^k with E free of x
        let k = den_deg;
        let e_poly = {
            let terms: Vec<(Vec<u32>, BigRational)> = f
                .denom()
                .terms()
                .map(|(m, c)| {
                    let mut exps = m.0.clone();
                    exps[idx] = 0;
                    (exps, c.clone())
                })
                .collect();
            Polynomial::from_terms(&vars, terms)
        };
        let mut out = Potential::zero(&vars);
        for (m, c) in f.numer().terms() {
            let e = m.0[idx] as i64 - k as i64; // power after division by x^k
            let mut exps = m.0.clone();
            exps[idx] = 0;
            let base = Polynomial::from_terms(&vars, [(exps, c.clone())]);
            if e == -1 {
                // c(x-free)/E * 1/x: log term; coefficient must be constant
                let coeff = RationalFunction::new(base, e_poly.clone())?;
                match coeff.as_constant() {
                    Some(c0) => {
                        out.push_log(c0, RationalFunction::var(&vars, idx));
                    }
                    None => {
                        return Err(Error::Unsupported(format!(
                            "antiderivative needs a non-constant log coefficient ({coeff}); \
                             not representable"
                        )))
                    }
                }
            } else {
                let newpow = e + 1;
                let x_pow = RationalFunction::var(&vars, idx).pow(newpow as i32)?;
                let scale = BigRational::from_integer(newpow.into()).recip();
                let term = &RationalFunction::new(base.scaled(&scale), e_poly.clone())? * &x_pow;
                out.rational = &out.rational + &term;
            }
        }
        return Ok(out);
    }
    // last supported pattern: numerator = c * dD/dx with constant c -> c ln D
    let dden = f.denom().derive(idx);
    if !dden.is_zero() {
        let ratio = RationalFunction::new(f.numer().clone(), dden)?;
        if let Some(c) = ratio.as_constant() {
            let mut out = Potential::zero(&vars);
            out.push_log(c, RationalFunction::from_poly(f.denom().clone()));
            return Ok(out);
        }
    }
    Err(Error::Unsupported(format!(
        "no rational-plus-log antiderivative found for {f} in {}",
        vars.names()[idx]
    )))
}

// ---------------------------------------------------------------------------
// hamiltonian_of and poisson brackets
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum HamiltonianResult {
    Hamiltonian(Potential),
    /// `i_X omega` is not closed; carries the offending two-form component.
    NotHamiltonian {
        i: usize,
        j: usize,
        residual: RationalFunction,
    },
}

/// Base-point candidates for normalization, dodging poles.
fn base_candidates(n: usize) -> Vec<Vec<BigRational>> {
    let primes = [2i64, 3, 5, 7, 11, 13, 17, 19];
    let mut out = vec![vec![BigRational::one(); n]];
    out.push((0..n).map(|i| BigRational::from_integer(((i + 1) as i64).into())).collect());
    out.push((0..n).map(|i| BigRational::from_integer(primes[i % primes.len()].into())).collect());
    out.push((0..n).map(|i| BigRational::new(1.into(), ((i + 2) as i64).into())).collect());
    out
}

/// Solve `dh = i_X omega` exactly. On success the potential satisfies the
/// equation identically (re-verified by differentiation) and is normalized to
/// vanish at a pole-free base point, first candidate `(1, ..., 1)`.
pub fn hamiltonian_of(x: &VectorField, omega: &SymplecticForm) -> Result<HamiltonianResult> {
    let alpha = omega.contract(x)?;
    let chart = omega.chart().clone();
    let n = chart.len();
    // exact closedness of the one-form
    for i in 0..n {
        for j in (i + 1)..n {
            let resid = &alpha[j].derive(i) - &alpha[i].derive(j);
            if !resid.is_zero() {
                return Ok(HamiltonianResult::NotHamiltonian { i, j, residual: resid });
            }
        }
    }
    // staircase integration, one variable at a time
    let mut h = Potential::zero(&chart);
    for i in 0..n {
        let resid = &alpha[i] - &h.derive(i);
        let term = integrate_univar(&resid, i)?;
        h = h.add(&term);
    }
    // re-differentiate: the defining equation must hold exactly
    for (i, a) in alpha.iter().enumerate() {
        let d = h.derive(i);
        if &d != a {
            return Err(Error::Numeric(format!(
                "integration self-check failed in component {i}: d(h) = {d}, expected {a}"
            )));
        }
    }
    // normalize at the first pole-free base point
    for base in base_candidates(n) {
        if let Ok(normalized) = h.normalized_at(&base) {
            return Ok(HamiltonianResult::Hamiltonian(normalized));
        }
    }
    Err(Error::Pole(
        "no pole-free base point found for normalization; candidates exhausted".into(),
    ))
}

/// The Hamiltonian field `X_f = P grad f` of a rational-differential
/// potential under the fixed convention.
pub fn hamiltonian_field(grad: &[RationalFunction], omega: &SymplecticForm) -> Result<VectorField> {
    let p = omega.bivector()?;
    let chart = omega.chart();
    let n = chart.len();
    let coeffs = (0..n)
        .map(|i| {
            let mut acc = RationalFunction::zero(chart);
            for (j, g) in grad.iter().enumerate() {
                acc = &acc + &(&p[i][j] * g);
            }
            acc
        })
        .collect();
    VectorField::new(chart.clone(), coeffs)
}

/// `{f, g} = grad f . P grad g = X_g(f)`, exact.
pub fn poisson_bracket(
    f: &RationalFunction,
    g: &RationalFunction,
    omega: &SymplecticForm,
) -> Result<RationalFunction> {
    poisson_bracket_grads(
        &(0..omega.chart().len()).map(|i| f.derive(i)).collect::<Vec<_>>(),
        &(0..omega.chart().len()).map(|i| g.derive(i)).collect::<Vec<_>>(),
        omega,
    )
}

pub fn poisson_bracket_potentials(
    f: &Potential,
    g: &Potential,
    omega: &SymplecticForm,
) -> Result<RationalFunction> {
    poisson_bracket_grads(&f.gradient(), &g.gradient(), omega)
}

fn poisson_bracket_grads(
    gf: &[RationalFunction],
    gg: &[RationalFunction],
    omega: &SymplecticForm,
) -> Result<RationalFunction> {
    let p = omega.bivector()?;
    let chart = omega.chart();
    let n = chart.len();
    let mut acc = RationalFunction::zero(chart);
    for i in 0..n {
        for j in 0..n {
            if p[i][j].is_zero() {
                continue;
            }
            acc = &acc + &(&(&gf[i] * &p[i][j]) * &gg[j]);
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Lie-Hamilton algebras
// ---------------------------------------------------------------------------

/// Hamiltonian functions spanning the Vessiot-Guldberg algebra, with exact
/// Poisson structure constants over the span extended by the constant 1
/// whenever brackets produce constants (central extension).
#[derive(Clone, Debug)]
pub struct LieHamiltonAlgebra {
    pub chart: Vars,
    pub hamiltonians: Vec<Potential>,
    pub fields: Vec<VectorField>,
    /// `structure[a][b]` has length `dim + 1`; the last slot is the
    /// coefficient of the constant function 1.
    pub structure: Vec<Vec<Vec<BigRational>>>,
    pub central: bool,
}

impl LieHamiltonAlgebra {
    pub fn dim(&self) -> usize {
        self.hamiltonians.len()
    }

    /// Abstract Poisson structure on generators `v_1..v_r` (plus a central
    /// `v_{r+1}` when the extension is nontrivial).
    pub fn poisson_structure(&self) -> PoissonStructure {
        let r = self.dim();
        let total = if self.central { r + 1 } else { r };
        let mut constants = vec![vec![vec![BigRational::zero(); total]; total]; total];
        for a in 0..r {
            for b in 0..r {
                for g in 0..r {
                    constants[a][b][g] = self.structure[a][b][g].clone();
                }
                if self.central {
                    constants[a][b][r] = self.structure[a][b][r].clone();
                }
            }
        }
        PoissonStructure {
            dim: total,
            central: self.central.then_some(r),
            constants,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut entries = Vec::new();
        for a in 0..self.dim() {
            for b in (a + 1)..self.dim() {
                for (g, c) in self.structure[a][b].iter().enumerate() {
                    if !c.is_zero() {
                        let name = if g == self.dim() {
                            "1".to_string()
                        } else {
                            format!("h{}", g + 1)
                        };
                        entries.push(serde_json::json!([a + 1, b + 1, name, c.to_string()]));
                    }
                }
            }
        }
        serde_json::json!({
            "dim": self.dim(),
            "central_extension": self.central,
            "hamiltonians": self.hamiltonians.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "structure": entries,
        })
    }
}

#[derive(Clone, Debug)]
pub enum HamiltonianSystemResult {
    Hamiltonian(LieHamiltonAlgebra),
    NotHamiltonian {
        field_index: usize,
        i: usize,
        j: usize,
        residual: RationalFunction,
    },
}

/// Build the Lie-Hamilton algebra for an already-classified Vessiot-Guldberg
/// basis; fails over to `NotHamiltonian` with the offending two-form when a
/// basis field has no potential.
pub fn lie_hamilton_algebra(
    basis: &LieAlgebraBasis,
    omega: &SymplecticForm,
) -> Result<HamiltonianSystemResult> {
    let mut hams = Vec::with_capacity(basis.dim());
    for (idx, x) in basis.basis().iter().enumerate() {
        match hamiltonian_of(x, omega)? {
            HamiltonianResult::Hamiltonian(h) => hams.push(h),
            HamiltonianResult::NotHamiltonian { i, j, residual } => {
                return Ok(HamiltonianSystemResult::NotHamiltonian {
                    field_index: idx,
                    i,
                    j,
                    residual,
                })
            }
        }
    }
    let r = hams.len();
    let mut structure = vec![vec![vec![BigRational::zero(); r + 1]; r]; r];
    let mut central = false;
    for a in 0..r {
        for b in (a + 1)..r {
            let br = poisson_bracket_potentials(&hams[a], &hams[b], omega)?;
            let coeffs = expand_in_potential_span(&br, &hams)?.ok_or_else(|| {
                Error::Numeric(format!(
                    "bracket {{h{}, h{}}} = {br} does not lie in span(h) + constants",
                    a + 1,
                    b + 1
                ))
            })?;
            if !coeffs[r].is_zero() {
                central = true;
            }
            for g in 0..=r {
                structure[a][b][g] = coeffs[g].clone();
                structure[b][a][g] = -coeffs[g].clone();
            }
        }
    }
    // exact Jacobi on the extended structure (central column included)
    {
        let total = r + 1;
        let mut c = vec![vec![vec![BigRational::zero(); total]; total]; total];
        for a in 0..r {
            for b in 0..r {
                for g in 0..total {
                    c[a][b][g] = structure[a][b][g].clone();
                }
            }
        }
        verify_jacobi(&c)?;
    }
    Ok(HamiltonianSystemResult::Hamiltonian(LieHamiltonAlgebra {
        chart: omega.chart().clone(),
        hamiltonians: hams,
        fields: basis.basis().to_vec(),
        structure,
        central,
    }))
}

/// Classify the operator, then build its Lie-Hamilton algebra. The operator
/// must already be in Stratonovich form and classify within bounds.
pub fn is_hamiltonian_system(
    op: &crate::stratonovich::StochOperator,
    omega: &SymplecticForm,
    bounds: &crate::liealg::ClosureBounds,
) -> Result<HamiltonianSystemResult> {
    let classification = crate::stratonovich::classify_stochastic_lie(op, bounds)?;
    let basis = classification.basis().ok_or_else(|| {
        Error::Unsupported(
            "operator is not a stochastic Lie system within bounds; no basis available".into(),
        )
    })?;
    lie_hamilton_algebra(basis, omega)
}

/// Express `target` (a rational function) exactly as
/// `sum_g c_g h_g + c_0 * 1`; log parts must cancel. Returns coefficients
/// `[c_1..c_r, c_0]` or `None`.
fn expand_in_potential_span(
    target: &RationalFunction,
    hams: &[Potential],
) -> Result<Option<Vec<BigRational>>> {
    let vars = target.vars().clone();
    let r = hams.len();
    // coordinates: distinct log args across the basis
    let mut log_args: Vec<RationalFunction> = Vec::new();
    for h in hams {
        for (_, a) in h.log_terms() {
            if !log_args.contains(a) {
                log_args.push(a.clone());
            }
        }
    }
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    let mut rhs: Vec<BigRational> = Vec::new();
    // log cancellation rows
    for arg in &log_args {
        let mut row = Vec::with_capacity(r + 1);
        for h in hams {
            let c = h
                .log_terms()
                .iter()
                .find(|(_, a)| a == arg)
                .map(|(c, _)| c.clone())
                .unwrap_or_else(BigRational::zero);
            row.push(c);
        }
        row.push(BigRational::zero()); // constant has no logs
        rows.push(row);
        rhs.push(BigRational::zero());
    }
    // rational part rows over a common denominator
    let mut den = Polynomial::one(&vars);
    for h in hams {
        den = crate::poly::poly_lcm(&den, h.rational_part().denom());
    }
    den = crate::poly::poly_lcm(&den, target.denom());
    let scale = |f: &RationalFunction| -> Polynomial {
        f.numer() * &den.exact_div(f.denom())
    };
    let scaled: Vec<Polynomial> = hams.iter().map(|h| scale(h.rational_part())).collect();
    let one_scaled = scale(&RationalFunction::one(&vars));
    let target_scaled = scale(target);
    let mut support: std::collections::BTreeMap<Monomial, usize> = Default::default();
    for p in scaled.iter().chain([&one_scaled, &target_scaled]) {
        for (m, _) in p.terms() {
            let next = support.len();
            support.entry(m.clone()).or_insert(next);
        }
    }
    let base = rows.len();
    rows.extend(vec![vec![BigRational::zero(); r + 1]; support.len()]);
    rhs.extend(vec![BigRational::zero(); support.len()]);
    for (j, p) in scaled.iter().enumerate() {
        for (m, c) in p.terms() {
            rows[base + support[m]][j] = c.clone();
        }
    }
    for (m, c) in one_scaled.terms() {
        rows[base + support[m]][r] = c.clone();
    }
    for (m, c) in target_scaled.terms() {
        rhs[base + support[m]] = c.clone();
    }
    match solve_linear(&rows, &rhs)? {
        LinearSolution::Inconsistent => Ok(None),
        LinearSolution::Solved { particular, .. } => Ok(Some(particular)),
    }
}

// ---------------------------------------------------------------------------
// conserved quantities
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ConservedSearch {
    /// Empty Hamiltonian list: every function is conserved; flagged instead
    /// of enumerating the polynomial ring.
    pub degenerate: bool,
    #[serde(skip)]
    pub basis: Vec<Polynomial>,
}

/// Polynomial `f` with `{h_a, f} = 0` for every given Hamiltonian, i.e.
/// `X_{h_a}(f) = 0`; searched over `1 <= deg f <= max_degree`.
pub fn conserved_search(
    hams: &[Potential],
    omega: &SymplecticForm,
    max_degree: u32,
) -> Result<ConservedSearch> {
    if hams.is_empty() {
        return Ok(ConservedSearch {
            degenerate: true,
            basis: Vec::new(),
        });
    }
    let fields = hams
        .iter()
        .map(|h| hamiltonian_field(&h.gradient(), omega))
        .collect::<Result<Vec<_>>>()?;
    let basis = crate::prolong::first_integrals_poly(&fields, max_degree)?;
    Ok(ConservedSearch {
        degenerate: false,
        basis,
    })
}

// ---------------------------------------------------------------------------
// Casimir elements and the coalgebra constant
// ---------------------------------------------------------------------------

/// Abstract Poisson structure `{v_a, v_b} = sum_g c[a][b][g] v_g` on linear
/// generators, with an optional central generator index.
#[derive(Clone, Debug)]
pub struct PoissonStructure {
    pub dim: usize,
    pub central: Option<usize>,
    pub constants: Vec<Vec<Vec<BigRational>>>,
}

impl PoissonStructure {
    pub fn new(
        dim: usize,
        central: Option<usize>,
        constants: Vec<Vec<Vec<BigRational>>>,
    ) -> Result<Self> {
        if constants.len() != dim
            || constants.iter().any(|m| m.len() != dim || m.iter().any(|r| r.len() != dim))
        {
            return Err(Error::Shape("structure constant tensor shape mismatch".into()));
        }
        for a in 0..dim {
            for b in 0..dim {
                for g in 0..dim {
                    if constants[a][b][g] != -constants[b][a][g].clone() {
                        return Err(Error::Shape("structure constants are not antisymmetric".into()));
                    }
                }
            }
        }
        if let Some(z) = central {
            for a in 0..dim {
                for g in 0..dim {
                    if !constants[z][a][g].is_zero() {
                        return Err(Error::Shape("declared central generator is not central".into()));
                    }
                }
            }
        }
        verify_jacobi(&constants)?;
        Ok(PoissonStructure {
            dim,
            central,
            constants,
        })
    }

    /// Generator variables `v_1..v_dim`.
    pub fn generator_vars(&self) -> Vars {
        Vars::new((1..=self.dim).map(|i| format!("v{i}"))).expect("generator names")
    }

    /// `{v_a, P}` in the symmetric algebra, by the Leibniz rule.
    pub fn bracket_with_generator(&self, a: usize, p: &Polynomial) -> Polynomial {
        let vars = self.generator_vars();
        let mut acc = Polynomial::zero(&vars);
        for b in 0..self.dim {
            let dp = p.derive(b);
            if dp.is_zero() {
                continue;
            }
            for g in 0..self.dim {
                let c = &self.constants[a][b][g];
                if c.is_zero() {
                    continue;
                }
                let vg = Polynomial::var(&vars, g);
                acc = &acc + &(&dp * &vg).scaled(c);
            }
        }
        acc
    }
}

/// A polynomial in the abstract generators, candidate Casimir element.
#[derive(Clone, Debug)]
pub struct CasimirElement {
    pub poly: Polynomial,
}

impl CasimirElement {
    pub fn parse(ps: &PoissonStructure, expr: &str) -> Result<Self> {
        let vars = ps.generator_vars();
        Ok(CasimirElement {
            poly: crate::poly::parse_polynomial(expr, &vars)?,
        })
    }
}

#[derive(Clone, Debug)]
pub enum CasimirVerdict {
    Yes,
    No {
        /// Index of a generator whose bracket with the candidate is nonzero,
        /// plus that bracket as the witness.
        generator: usize,
        witness: Polynomial,
    },
}

/// Symbolic check `{v_a, C} = 0` for every generator.
pub fn casimir_verify(ps: &PoissonStructure, c: &CasimirElement) -> Result<CasimirVerdict> {
    if c.poly.vars() != &ps.generator_vars() {
        return Err(Error::Shape("casimir polynomial uses wrong generators".into()));
    }
    for a in 0..ps.dim {
        let br = ps.bracket_with_generator(a, &c.poly);
        if !br.is_zero() {
            return Ok(CasimirVerdict::No {
                generator: a,
                witness: br,
            });
        }
    }
    Ok(CasimirVerdict::Yes)
}

/// The coalgebra constant of motion on `k` copies:
/// `F = C(sum_a h_1(x_(a)), ..., sum_a h_r(x_(a)))`, with the momentum
/// identification `h_g = J* v_g`. Central generators map to constants, whose
/// diagonal prolongation is `k` times the constant.
pub fn coalgebra_constant(
    c: &CasimirElement,
    hams: &[RationalFunction],
    chart: &Vars,
    copies: usize,
) -> Result<RationalFunction> {
    if hams.len() != c.poly.vars().len() {
        return Err(Error::Shape(format!(
            "{} hamiltonians for {} generators",
            hams.len(),
            c.poly.vars().len()
        )));
    }
    let idx: Vec<usize> = (1..=copies).collect();
    let big = crate::prolong::product_chart(chart, &idx)?;
    let images = hams
        .iter()
        .map(|h| crate::prolong::prolong_function(h, chart, &idx))
        .collect::<Result<Vec<_>>>()?;
    RationalFunction::from_poly(c.poly.clone()).substitute(&big, &images).map_err(|e| e)
        .and_then(|f| f.project(&big))
}

/// Check that `F` is annihilated by the diagonal prolongations of all the
/// given fields, exactly.
pub fn verify_prolonged_invariant(
    f: &RationalFunction,
    fields: &[VectorField],
    copies: usize,
) -> Result<bool> {
    let idx: Vec<usize> = (1..=copies).collect();
    for x in fields {
        let prolonged = crate::prolong::prolong_indexed(x, &idx)?;
        if !prolonged.apply(f)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_rational_function, rat};

    fn chart_qp() -> Vars {
        Vars::new(["q", "p"]).unwrap()
    }

    fn omega_qp() -> SymplecticForm {
        SymplecticForm::standard(&chart_qp()).unwrap()
    }

    #[test]
    fn sis_field_potentials_match_corrected_values() {
        // Y1 = q d/dq - p d/dp -> h = qp (up to additive constant)
        let v = chart_qp();
        let w = omega_qp();
        let y1 = VectorField::parse(&v, &["q", "-p"]).unwrap();
        let h1 = match hamiltonian_of(&y1, &w).unwrap() {
            HamiltonianResult::Hamiltonian(h) => h,
            other => panic!("Y1 is Hamiltonian, got {other:?}"),
        };
        let qp = parse_rational_function("q*p", &v).unwrap();
        let diff = &h1.as_rational().unwrap().clone() - &qp;
        assert!(diff.as_constant().is_some(), "h1 - qp = {diff}");

        // Y2 -> h = -q^2 p + 1/p (corrected sign), again up to a constant
        let y2 = VectorField::parse(&v, &["-(q^2 + 1/p^2)", "2*q*p"]).unwrap();
        let h2 = match hamiltonian_of(&y2, &w).unwrap() {
            HamiltonianResult::Hamiltonian(h) => h,
            other => panic!("Y2 is Hamiltonian, got {other:?}"),
        };
        let expected = parse_rational_function("-q^2*p + 1/p", &v).unwrap();
        let diff = &h2.as_rational().unwrap().clone() - &expected;
        assert!(diff.as_constant().is_some(), "h2 residual {diff}");
        // and dh = i_Y omega re-verified: the constructor already did; check once more
        let alpha = w.contract(&y2).unwrap();
        for i in 0..2 {
            assert_eq!(h2.derive(i), alpha[i]);
        }
    }

    #[test]
    fn euler_like_field_is_not_hamiltonian() {
        // x d/dx on (x, y) with omega = dx ^ dy: i_X omega = x dy is not closed
        let v = Vars::new(["x", "y"]).unwrap();
        let w = SymplecticForm::standard(&v).unwrap();
        let x = VectorField::parse(&v, &["x", "0"]).unwrap();
        match hamiltonian_of(&x, &w).unwrap() {
            HamiltonianResult::NotHamiltonian { residual, .. } => {
                assert!(!residual.is_zero());
            }
            HamiltonianResult::Hamiltonian(h) => panic!("unexpected potential {h}"),
        }
    }

    #[test]
    fn rotation_potential_on_r2() {
        let v = Vars::new(["x", "y"]).unwrap();
        let w = SymplecticForm::standard(&v).unwrap();
        let rot = VectorField::parse(&v, &["y", "-x"]).unwrap();
        let h = match hamiltonian_of(&rot, &w).unwrap() {
            HamiltonianResult::Hamiltonian(h) => h,
            other => panic!("rotation is Hamiltonian, got {other:?}"),
        };
        let expected = parse_rational_function("(x^2 + y^2)/2", &v).unwrap();
        let diff = &h.as_rational().unwrap().clone() - &expected;
        assert!(diff.as_constant().is_some());
    }

    #[test]
    fn hamiltonian_field_round_trip() {
        let v = chart_qp();
        let w = omega_qp();
        let y2 = VectorField::parse(&v, &["-(q^2 + 1/p^2)", "2*q*p"]).unwrap();
        let h = match hamiltonian_of(&y2, &w).unwrap() {
            HamiltonianResult::Hamiltonian(h) => h,
            _ => unreachable!(),
        };
        let back = hamiltonian_field(&h.gradient(), &w).unwrap();
        assert_eq!(back, y2);
    }

    #[test]
    fn bracket_antisymmetry_and_oscillator_central_constant() {
        // h2 = y, h3 = -x on (x, y): {h2, h3} = 1 under the fixed convention
        let v = Vars::new(["x", "y"]).unwrap();
        let w = SymplecticForm::standard(&v).unwrap();
        let h2 = parse_rational_function("y", &v).unwrap();
        let h3 = parse_rational_function("-x", &v).unwrap();
        let br = poisson_bracket(&h2, &h3, &w).unwrap();
        assert_eq!(br, RationalFunction::one(&v));
        let anti = poisson_bracket(&h3, &h2, &w).unwrap();
        assert_eq!(anti, -&RationalFunction::one(&v));
        // {f, f} = 0
        let f = parse_rational_function("x^2*y - 1/x", &v).unwrap();
        assert!(poisson_bracket(&f, &f, &w).unwrap().is_zero());
    }

    #[test]
    fn sis_bracket_proportional_to_h2() {
        let v = chart_qp();
        let w = omega_qp();
        let h1 = parse_rational_function("q*p", &v).unwrap();
        let h2 = parse_rational_function("-q^2*p + 1/p", &v).unwrap();
        let br = poisson_bracket(&h1, &h2, &w).unwrap();
        // {h1, h2} = -h2 under the fixed convention
        assert_eq!(br, -&h2);
    }

    #[test]
    fn poisson_jacobi_identity_exact() {
        let v = chart_qp();
        let w = omega_qp();
        let f = parse_rational_function("q^2 + p", &v).unwrap();
        let g = parse_rational_function("q*p", &v).unwrap();
        let h = parse_rational_function("p^2 - q", &v).unwrap();
        let jac = &(&poisson_bracket(&poisson_bracket(&f, &g, &w).unwrap(), &h, &w).unwrap()
            + &poisson_bracket(&poisson_bracket(&g, &h, &w).unwrap(), &f, &w).unwrap())
            + &poisson_bracket(&poisson_bracket(&h, &f, &w).unwrap(), &g, &w).unwrap();
        assert!(jac.is_zero());
    }

    #[test]
    fn lotka_volterra_fields_are_hamiltonian_with_log_potential() {
        // omega = 1/(N1 N2) dN1 ^ dN2
        let v = Vars::new(["N1", "N2"]).unwrap();
        let inv = parse_rational_function("1/(N1*N2)", &v).unwrap();
        let mut m = vec![vec![RationalFunction::zero(&v); 2]; 2];
        m[0][1] = inv.clone();
        m[1][0] = -&inv;
        let w = SymplecticForm::new(&v, m).unwrap();
        let x1 = VectorField::parse(&v, &["N1", "N2"]).unwrap();
        let x2 = VectorField::parse(&v, &["N1*N2", "N1*N2"]).unwrap();
        let h1 = match hamiltonian_of(&x1, &w).unwrap() {
            HamiltonianResult::Hamiltonian(h) => h,
            other => panic!("X1 is Hamiltonian, got {other:?}"),
        };
        assert_eq!(h1.log_terms().len(), 2, "h1 = {h1}");
        let h2 = match hamiltonian_of(&x2, &w).unwrap() {
            HamiltonianResult::Hamiltonian(h) => h,
            other => panic!("X2 is Hamiltonian, got {other:?}"),
        };
        // h2 = N2 - N1 up to a constant, no logs
        let expected = parse_rational_function("N2 - N1", &v).unwrap();
        let diff = &h2.as_rational().unwrap().clone() - &expected;
        assert!(diff.as_constant().is_some());
        // {h1, h2} = -h2 under the fixed convention: bracket is rational
        let br = poisson_bracket_potentials(&h1, &h2, &w).unwrap();
        let diff = &br + &expected;
        assert!(diff.as_constant().is_some(), "bracket {br}");
    }

    #[test]
    fn conserved_search_finds_rotation_invariant() {
        let v = Vars::new(["x", "y"]).unwrap();
        let w = SymplecticForm::standard(&v).unwrap();
        let h = Potential::from_rational(
            parse_rational_function("(x^2 + y^2)/2", &v).unwrap(),
        );
        let found = conserved_search(&[h], &w, 2).unwrap();
        assert!(!found.degenerate);
        let r2 = crate::poly::parse_polynomial("x^2 + y^2", &v).unwrap();
        assert!(found
            .basis
            .iter()
            .any(|f| { f == &r2 || f == &r2.scaled(&rat(1, 2)) || (f - &r2).is_zero() }));
    }

    #[test]
    fn translations_leave_nothing_conserved() {
        let v = Vars::new(["x", "y"]).unwrap();
        let w = SymplecticForm::standard(&v).unwrap();
        let hx = Potential::from_rational(parse_rational_function("x", &v).unwrap());
        let hy = Potential::from_rational(parse_rational_function("y", &v).unwrap());
        let found = conserved_search(&[hx, hy], &w, 3).unwrap();
        assert!(found.basis.is_empty());
    }

    #[test]
    fn empty_hamiltonian_list_flagged_degenerate() {
        let v = Vars::new(["x", "y"]).unwrap();
        let w = SymplecticForm::standard(&v).unwrap();
        let found = conserved_search(&[], &w, 3).unwrap();
        assert!(found.degenerate);
    }

    fn sl2_structure() -> PoissonStructure {
        // {v1,v2} = v1, {v1,v3} = 2 v2, {v2,v3} = v3
        let z = BigRational::zero();
        let mut c = vec![vec![vec![z.clone(); 3]; 3]; 3];
        c[0][1][0] = rat(1, 1);
        c[1][0][0] = rat(-1, 1);
        c[0][2][1] = rat(2, 1);
        c[2][0][1] = rat(-2, 1);
        c[1][2][2] = rat(1, 1);
        c[2][1][2] = rat(-1, 1);
        PoissonStructure::new(3, None, c).unwrap()
    }

    #[test]
    fn sl2_casimir_verifies() {
        let ps = sl2_structure();
        let c = CasimirElement::parse(&ps, "v1*v3 - v2^2").unwrap();
        assert!(matches!(casimir_verify(&ps, &c).unwrap(), CasimirVerdict::Yes));
    }

    #[test]
    fn sl2_non_casimir_rejected_with_witness() {
        let ps = sl2_structure();
        let c = CasimirElement::parse(&ps, "v1*v3").unwrap();
        match casimir_verify(&ps, &c).unwrap() {
            CasimirVerdict::No { generator, witness } => {
                assert!(!witness.is_zero());
                // v2 commutes with v1 v3; the witness generator is v1 or v3
                assert!(generator == 0 || generator == 2);
            }
            CasimirVerdict::Yes => panic!("v1*v3 is not a Casimir"),
        }
    }

    #[test]
    fn abelian_everything_is_casimir() {
        let z = BigRational::zero();
        let c = vec![vec![vec![z; 2]; 2]; 2];
        let ps = PoissonStructure::new(2, None, c).unwrap();
        let cas = CasimirElement::parse(&ps, "v1^3 - v2").unwrap();
        assert!(matches!(casimir_verify(&ps, &cas).unwrap(), CasimirVerdict::Yes));
    }

    #[test]
    fn sl2_coalgebra_constant_is_invariant_on_two_copies() {
        // realization under the fixed convention: h1 = p, h2 = -qp, h3 = q^2 p
        // (chart (q, p), omega = dq ^ dp); fields X_{h_i} close sl(2)
        let v = chart_qp();
        let w = omega_qp();
        let h = [
            parse_rational_function("p", &v).unwrap(),
            parse_rational_function("-q*p", &v).unwrap(),
            parse_rational_function("q^2*p", &v).unwrap(),
        ];
        // verify the realization satisfies the abstract structure
        let br12 = poisson_bracket(&h[0], &h[1], &w).unwrap();
        assert_eq!(br12, h[0]);
        let br13 = poisson_bracket(&h[0], &h[2], &w).unwrap();
        assert_eq!(br13, h[1].scaled(&rat(2, 1)));
        let br23 = poisson_bracket(&h[1], &h[2], &w).unwrap();
        assert_eq!(br23, h[2]);

        let ps = sl2_structure();
        let cas = CasimirElement::parse(&ps, "v1*v3 - v2^2").unwrap();
        let f = coalgebra_constant(&cas, &h, &v, 2).unwrap();
        let fields: Vec<VectorField> = h
            .iter()
            .map(|hi| {
                let grad: Vec<RationalFunction> = (0..2).map(|k| hi.derive(k)).collect();
                hamiltonian_field(&grad, &w).unwrap()
            })
            .collect();
        assert!(verify_prolonged_invariant(&f, &fields, 2).unwrap());
    }

    #[test]
    fn central_linear_casimir_prolongs_to_sum() {
        // 2-dim abelian with central v2: C = v2 -> F = sum_a h2(x_(a))
        let z = BigRational::zero();
        let c = vec![vec![vec![z; 2]; 2]; 2];
        let ps = PoissonStructure::new(2, Some(1), c).unwrap();
        let cas = CasimirElement::parse(&ps, "v2").unwrap();
        let v = chart_qp();
        let h = [
            parse_rational_function("q", &v).unwrap(),
            parse_rational_function("p^2", &v).unwrap(),
        ];
        let f = coalgebra_constant(&cas, &h, &v, 2).unwrap();
        let big = crate::prolong::product_chart(&v, &[1, 2]).unwrap();
        let expected = parse_rational_function("p_1^2 + p_2^2", &big).unwrap();
        assert_eq!(f, expected);
    }
}
