//! Equilibria, the stochastic Dirichlet criterion, symmetries, and relative
//! equilibria of Hamiltonian stochastic systems.
//!
//! An equilibrium must kill EVERY constituent field of every component
//! (drift and all noises, at each power of t separately): the stochastic
//! disturbance may not act at the point, for all times. Newton iterations
//! use exact symbolic Jacobians compiled to f64; symbolic conservation
//! checks never leave exact arithmetic.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{hamiltonian_field, SymplecticForm};
use crate::numlin::{least_squares, norm2, symmetric_eigenvalues};
use crate::poly::{rational_to_f64, RationalFunction};
use crate::stratonovich::{Interpretation, StochOperator};
use crate::vecfield::VectorField;

fn eval_f64(f: &RationalFunction, x: &[f64]) -> f64 {
    let ev = |p: &crate::poly::Polynomial| {
        p.terms()
            .map(|(m, c)| {
                let mut t = rational_to_f64(c);
                for (i, &e) in m.0.iter().enumerate() {
                    t *= x[i].powi(e as i32);
                }
                t
            })
            .sum::<f64>()
    };
    ev(f.numer()) / ev(f.denom())
}

fn field_eval_f64(f: &VectorField, x: &[f64]) -> Vec<f64> {
    f.coeffs().iter().map(|c| eval_f64(c, x)).collect()
}

fn require_stratonovich(op: &StochOperator) -> Result<()> {
    if op.interpretation() != Interpretation::Stratonovich {
        return Err(Error::Unsupported(
            "stability analysis runs on the Stratonovich form; convert first".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// equilibria
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumReport {
    pub point: Vec<f64>,
    /// Max-norm residual of each constituent field at the point.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub is_equilibrium: bool,
    /// Index of a violating constituent field, when not an equilibrium.
    pub witness: Option<usize>,
}

/// Residual check of a candidate point against every constituent field.
pub fn equilibrium_check(op: &StochOperator, point: &[f64], tol: f64) -> Result<EquilibriumReport> {
    require_stratonovich(op)?;
    let fields = op.constituent_fields();
    let residuals: Vec<f64> = fields
        .iter()
        .map(|f| {
            field_eval_f64(f, point)
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
        })
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let witness = residuals.iter().position(|&r| r > tol);
    Ok(EquilibriumReport {
        point: point.to_vec(),
        max_residual,
        is_equilibrium: witness.is_none(),
        witness,
        residuals,
    })
}

/// Multi-start Gauss-Newton on the stacked system `{W_k(x) = 0}`. Starts
/// whose Newton systems degenerate are abandoned and recorded; converged
/// points are deduplicated after a deterministic sort.
pub fn find_equilibria(
    op: &StochOperator,
    starts: &[Vec<f64>],
    tol: f64,
) -> Result<(Vec<EquilibriumReport>, Vec<usize>)> {
    require_stratonovich(op)?;
    let fields = op.constituent_fields();
    if fields.is_empty() {
        // zero operator: every start is trivially an equilibrium
        let reports = starts
            .iter()
            .map(|s| equilibrium_check(op, s, tol))
            .collect::<Result<Vec<_>>>()?;
        return Ok((reports, Vec::new()));
    }
    let n = op.dim();
    // stacked residual and exact Jacobian rows
    let jac: Vec<Vec<Vec<RationalFunction>>> = fields
        .iter()
        .map(|f| {
            f.coeffs()
                .iter()
                .map(|c| (0..n).map(|j| c.derive(j)).collect())
                .collect()
        })
        .collect();
    let mut converged: Vec<Vec<f64>> = Vec::new();
    let mut abandoned: Vec<usize> = Vec::new();
    'starts: for (s_idx, start) in starts.iter().enumerate() {
        let mut x = start.clone();
        for _ in 0..100 {
            let mut resid = Vec::with_capacity(fields.len() * n);
            for f in &fields {
                resid.extend(field_eval_f64(f, &x));
            }
            if resid.iter().all(|r| r.abs() < tol) {
                converged.push(x);
                continue 'starts;
            }
            let mut rows = Vec::with_capacity(fields.len() * n);
            for jf in &jac {
                for row in jf {
                    rows.push(row.iter().map(|d| eval_f64(d, &x)).collect::<Vec<f64>>());
                }
            }
            if rows.iter().flatten().any(|v| !v.is_finite())
                || resid.iter().any(|v| !v.is_finite())
            {
                abandoned.push(s_idx);
                continue 'starts;
            }
            let neg: Vec<f64> = resid.iter().map(|r| -r).collect();
            let Ok(step) = least_squares(&rows, &neg) else {
                abandoned.push(s_idx);
                continue 'starts;
            };
            if norm2(&step) < 1e-16 {
                abandoned.push(s_idx);
                continue 'starts;
            }
            // damped update
            let r0 = norm2(&resid);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let cand: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
                let mut r = Vec::with_capacity(resid.len());
                for f in &fields {
                    r.extend(field_eval_f64(f, &cand));
                }
                if r.iter().all(|v| v.is_finite()) && norm2(&r) < r0 {
                    x = cand;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                abandoned.push(s_idx);
                continue 'starts;
            }
        }
        abandoned.push(s_idx);
    }
    // deterministic sort, then dedup within 10 * tol
    converged.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .find_map(|(x, y)| {
                let c = x.total_cmp(y);
                (c != std::cmp::Ordering::Equal).then_some(c)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for c in converged {
        if unique
            .iter()
            .all(|u| norm2(&u.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>()) >= 10.0 * tol)
        {
            unique.push(c);
        }
    }
    let reports = unique
        .iter()
        .map(|p| equilibrium_check(op, p, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok((reports, abandoned))
}

// ---------------------------------------------------------------------------
// Dirichlet criterion
// ---------------------------------------------------------------------------

/// Candidate equilibrium point: exact rationals allow exact criticality
/// tests; numeric points fall back to tolerance checks.
#[derive(Clone, Debug)]
pub enum PointSpec {
    Exact(Vec<BigRational>),
    Numeric(Vec<f64>),
}

impl PointSpec {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            PointSpec::Exact(v) => v.iter().map(rational_to_f64).collect(),
            PointSpec::Numeric(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definiteness {
    PositiveDefinite,
    NegativeDefinite,
    Indefinite,
    Degenerate,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletVerdict {
    pub equilibrium: bool,
    /// Strong conservation: every constituent field annihilates f symbolically.
    pub conserved: bool,
    pub nonconserved_witness: Option<String>,
    pub critical: bool,
    pub hessian: Definiteness,
    /// Strongly conserved and critical and definite Hessian.
    pub almost_surely_stable: bool,
}

/// The stochastic Dirichlet criterion at a candidate equilibrium.
pub fn dirichlet_check(
    op: &StochOperator,
    f: &RationalFunction,
    z0: &PointSpec,
    tol: f64,
) -> Result<DirichletVerdict> {
    require_stratonovich(op)?;
    if f.vars() != op.chart() {
        return Err(Error::ChartMismatch {
            expected: op.chart().names().to_vec(),
            got: f.vars().names().to_vec(),
        });
    }
    let zf = z0.to_f64();
    let n = op.chart().len();
    // pole of f at z0 is a hard error
    if let PointSpec::Exact(z) = z0 {
        f.eval(z)?;
    } else if !eval_f64(f, &zf).is_finite() {
        return Err(Error::Pole("f has a pole at the candidate point".into()));
    }
    let equilibrium = equilibrium_check(op, &zf, tol)?.is_equilibrium;
    // strong conservation, symbolic
    let mut conserved = true;
    let mut witness = None;
    for (k, w) in op.constituent_fields().iter().enumerate() {
        let lf = w.apply(f)?;
        if !lf.is_zero() {
            conserved = false;
            witness = Some(format!("constituent field {k} gives derivative {lf}"));
            break;
        }
    }
    // criticality: exact when the point is rational
    let grad: Vec<RationalFunction> = (0..n).map(|i| f.derive(i)).collect();
    let critical = match z0 {
        PointSpec::Exact(z) => grad
            .iter()
            .map(|g| g.eval(z))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(Zero::is_zero),
        PointSpec::Numeric(_) => grad.iter().all(|g| eval_f64(g, &zf).abs() < tol),
    };
    // Hessian definiteness at tolerance
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            hess[i][j] = eval_f64(&grad[i].derive(j), &zf);
        }
    }
    // symmetrize against rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = m;
            hess[j][i] = m;
        }
    }
    let ev = symmetric_eigenvalues(&hess);
    let hessian = if ev.iter().any(|l| l.abs() <= tol) {
        Definiteness::Degenerate
    } else if ev.iter().all(|&l| l > tol) {
        Definiteness::PositiveDefinite
    } else if ev.iter().all(|&l| l < -tol) {
        Definiteness::NegativeDefinite
    } else {
        Definiteness::Indefinite
    };
    let definite = matches!(
        hessian,
        Definiteness::PositiveDefinite | Definiteness::NegativeDefinite
    );
    Ok(DirichletVerdict {
        equilibrium,
        conserved,
        nonconserved_witness: witness,
        critical,
        hessian,
        almost_surely_stable: equilibrium && conserved && critical && definite,
    })
}

/// Numerical corroboration of a stability verdict: simulate paths from
/// initial points at the given radius around `z0` and report the worst
/// distance from `z0` along all of them. A sanity check, not a proof.
pub fn perturbation_sweep(
    op: &StochOperator,
    z0: &[f64],
    radius: f64,
    n_paths: usize,
    t_end: f64,
    steps: usize,
    seed: u64,
) -> Result<f64> {
    require_stratonovich(op)?;
    let compiled = crate::sde::CompiledOperator::compile(op);
    let n = z0.len();
    let worst = crate::exec::map_indexed(crate::exec::ExecMode::Auto, n_paths, |i| -> Result<f64> {
        let s = crate::sde::derive_seed(seed, i as u64);
        // deterministic direction on the sphere from the seed
        let mut dir: Vec<f64> = (0..n)
            .map(|j| {
                let bits = crate::sde::mix64(s ^ (j as u64 + 1));
                (bits % 2048) as f64 / 1024.0 - 1.0
            })
            .collect();
        let nrm = norm2(&dir).max(1e-9);
        for d in &mut dir {
            *d *= radius / nrm;
        }
        let x0: Vec<f64> = z0.iter().zip(&dir).map(|(a, b)| a + b).collect();
        let path = crate::sde::BrownianPath::sample(s, t_end, steps, compiled.num_noises())?;
        let traj = crate::sde::integrate_heun_compiled(&compiled, &x0, &path)?;
        Ok(traj
            .states
            .iter()
            .map(|st| norm2(&st.iter().zip(z0).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max))
    });
    let mut max = 0.0f64;
    for w in worst {
        max = max.max(w?);
    }
    Ok(max)
}

// ---------------------------------------------------------------------------
// symmetries
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryVerdict {
    pub symmetric: bool,
    /// `(constituent index, component index)` of the first failure.
    pub witness: Option<(usize, usize)>,
}

/// Check a linear map `phi` for `phi . W_k(x) = W_k(phi x)` as exact
/// rational-function identities, for every constituent field.
pub fn symmetry_check(phi: &[Vec<BigRational>], op: &StochOperator) -> Result<SymmetryVerdict> {
    let chart = op.chart().clone();
    let n = chart.len();
    if phi.len() != n || phi.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("phi must be a square matrix on the chart".into()));
    }
    // invertibility: exact determinant
    let phi_rf: Vec<Vec<RationalFunction>> = phi
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| RationalFunction::constant(&chart, c.clone()))
                .collect()
        })
        .collect();
    let det = det_rational(phi);
    if det.is_zero() {
        return Err(Error::Shape("phi is singular".into()));
    }
    let _ = phi_rf;
    // images phi(x) as rational functions
    let images: Vec<RationalFunction> = (0..n)
        .map(|i| {
            let mut acc = RationalFunction::zero(&chart);
            for (j, c) in phi[i].iter().enumerate() {
                acc = &acc + &RationalFunction::var(&chart, j).scaled(c);
            }
            acc
        })
        .collect();
    for (k, w) in op.constituent_fields().iter().enumerate() {
        for i in 0..n {
            // (phi . W)(x)_i = sum_j phi_ij W^j(x)
            let mut lhs = RationalFunction::zero(&chart);
            for (j, c) in phi[i].iter().enumerate() {
                lhs = &lhs + &w.coeff(j).scaled(c);
            }
            // W^i(phi x)
            let rhs = w.coeff(i).substitute(&chart, &images)?;
            if lhs != rhs {
                return Ok(SymmetryVerdict {
                    symmetric: false,
                    witness: Some((k, i)),
                });
            }
        }
    }
    Ok(SymmetryVerdict {
        symmetric: true,
        witness: None,
    })
}

fn det_rational(m: &[Vec<BigRational>]) -> BigRational {
    let n = m.len();
    match n {
        0 => BigRational::from_integer(1.into()),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = BigRational::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<BigRational>> = (1..n)
                    .map(|i| {
                        (0..n)
                            .filter(|&k| k != j)
                            .map(|k| m[i][k].clone())
                            .collect()
                    })
                    .collect();
                let term = &m[0][j] * &det_rational(&minor);
                if j % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

// ---------------------------------------------------------------------------
// relative equilibria
// ---------------------------------------------------------------------------

/// A symmetry action specified by its momentum map components; the
/// fundamental fields are the Hamiltonian fields of the components under the
/// fixed convention, so the defining property holds by construction.
#[derive(Clone, Debug)]
pub struct MomentumMap {
    pub components: Vec<RationalFunction>,
    pub generators: Vec<VectorField>,
}

impl MomentumMap {
    pub fn from_components(
        omega: &SymplecticForm,
        components: Vec<RationalFunction>,
    ) -> Result<MomentumMap> {
        let generators = components
            .iter()
            .map(|j| {
                let grad: Vec<RationalFunction> =
                    (0..omega.chart().len()).map(|i| j.derive(i)).collect();
                hamiltonian_field(&grad, omega)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentumMap {
            components,
            generators,
        })
    }

    /// Verify user-supplied generators against the components.
    pub fn with_generators(
        omega: &SymplecticForm,
        components: Vec<RationalFunction>,
        generators: Vec<VectorField>,
    ) -> Result<MomentumMap> {
        let derived = Self::from_components(omega, components)?;
        for (a, (have, want)) in generators.iter().zip(&derived.generators).enumerate() {
            if have != want {
                return Err(Error::Shape(format!(
                    "generator {a} is not the Hamiltonian field of its momentum component"
                )));
            }
        }
        Ok(MomentumMap {
            components: derived.components,
            generators,
        })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RelativeEquilibrium {
    pub state: Vec<f64>,
    /// `xi[component][generator]`.
    pub xi: Vec<Vec<f64>>,
    /// `mu_e = J(state)`, by the theorem's own definition.
    pub mu: Vec<f64>,
    /// Max-norm residual of `X_{h^a} - sum_g xi^{a g} xi_M^g` at the state.
    pub defining_residual: f64,
    pub verified: bool,
}

#[derive(Clone, Debug)]
pub enum RelEqOutcome {
    Converged(RelativeEquilibrium),
    NoConvergence { iterations: usize, residual: f64 },
}

/// Newton (Gauss-Newton least squares) on the stacked critical-point
/// equations `grad_x [ h^a - <J - mu_e, xi^a> ] = 0`; since `mu_e := J(x_e)`
/// enters as a constant, the gradient equations reduce to
/// `grad h^a - sum_g xi^{a g} grad J_g = 0`.
///
/// On convergence the defining property is re-verified: each component's
/// Hamiltonian field must equal the xi-combination of the fundamental
/// fields at the solution, within `tol`.
pub fn relative_equilibrium_solve(
    components: &[RationalFunction],
    mm: &MomentumMap,
    omega: &SymplecticForm,
    guess_state: &[f64],
    guess_xi: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<RelEqOutcome> {
    let n = omega.chart().len();
    let l = components.len();
    let r = mm.dim();
    if guess_state.len() != n || guess_xi.len() != l || guess_xi.iter().any(|x| x.len() != r) {
        return Err(Error::Shape("guess dimensions mismatch".into()));
    }
    // symbolic gradients and Hessians
    let grad_h: Vec<Vec<RationalFunction>> = components
        .iter()
        .map(|h| (0..n).map(|i| h.derive(i)).collect())
        .collect();
    let grad_j: Vec<Vec<RationalFunction>> = mm
        .components
        .iter()
        .map(|j| (0..n).map(|i| j.derive(i)).collect())
        .collect();
    let hess_h: Vec<Vec<Vec<RationalFunction>>> = grad_h
        .iter()
        .map(|g| g.iter().map(|gi| (0..n).map(|j| gi.derive(j)).collect()).collect())
        .collect();
    let hess_j: Vec<Vec<Vec<RationalFunction>>> = grad_j
        .iter()
        .map(|g| g.iter().map(|gi| (0..n).map(|j| gi.derive(j)).collect()).collect())
        .collect();

    let nvars = n + l * r;
    let mut z: Vec<f64> = Vec::with_capacity(nvars);
    z.extend_from_slice(guess_state);
    for row in guess_xi {
        z.extend_from_slice(row);
    }
    let residual = |z: &[f64]| -> Vec<f64> {
        let x = &z[..n];
        let mut out = Vec::with_capacity(l * n);
        for a in 0..l {
            for i in 0..n {
                let mut v = eval_f64(&grad_h[a][i], x);
                for g in 0..r {
                    v -= z[n + a * r + g] * eval_f64(&grad_j[g][i], x);
                }
                out.push(v);
            }
        }
        out
    };
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it;
        let res = residual(&z);
        let rn = norm2(&res);
        if rn < tol {
            break;
        }
        // Jacobian: rows (a, i), cols: x then xi
        let x = z[..n].to_vec();
        let mut rows = Vec::with_capacity(l * n);
        for a in 0..l {
            for i in 0..n {
                let mut row = vec![0.0; nvars];
                for j in 0..n {
                    let mut v = eval_f64(&hess_h[a][i][j], &x);
                    for g in 0..r {
                        v -= z[n + a * r + g] * eval_f64(&hess_j[g][i][j], &x);
                    }
                    row[j] = v;
                }
                for g in 0..r {
                    row[n + a * r + g] = -eval_f64(&grad_j[g][i], &x);
                }
                rows.push(row);
            }
        }
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let Ok(step) = least_squares(&rows, &neg) else {
            return Ok(RelEqOutcome::NoConvergence {
                iterations,
                residual: rn,
            });
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let cand: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
            let rc = norm2(&residual(&cand));
            if rc.is_finite() && rc < rn {
                z = cand;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Ok(RelEqOutcome::NoConvergence {
                iterations,
                residual: rn,
            });
        }
    }
    let res = residual(&z);
    if norm2(&res) >= tol {
        return Ok(RelEqOutcome::NoConvergence {
            iterations,
            residual: norm2(&res),
        });
    }
    let state = z[..n].to_vec();
    let xi: Vec<Vec<f64>> = (0..l)
        .map(|a| z[n + a * r..n + (a + 1) * r].to_vec())
        .collect();
    let mu: Vec<f64> = mm.components.iter().map(|j| eval_f64(j, &state)).collect();
    // defining property: X_{h^a}(x_e) = sum_g xi^{a g} xi_M^g(x_e)
    let mut defining_residual = 0.0f64;
    for a in 0..l {
        let xh = hamiltonian_field(&grad_h[a], omega)?;
        let lhs = field_eval_f64(&xh, &state);
        let mut rhs = vec![0.0; n];
        for g in 0..r {
            let gen = field_eval_f64(&mm.generators[g], &state);
            for i in 0..n {
                rhs[i] += xi[a][g] * gen[i];
            }
        }
        for i in 0..n {
            defining_residual = defining_residual.max((lhs[i] - rhs[i]).abs());
        }
    }
    let verified = defining_residual < tol.max(1e-8);
    Ok(RelEqOutcome::Converged(RelativeEquilibrium {
        state,
        xi,
        mu,
        defining_residual,
        verified,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_rational_function, rat, Vars};
    use crate::stratonovich::TimeWeightedField;

    fn chart_xy() -> Vars {
        Vars::new(["x", "y"]).unwrap()
    }

    /// damped oscillator drift (w y, -w x - k y), noise (0, -s y), Stratonovich
    fn oscillator(w: &str, k: &str, s: &str) -> StochOperator {
        let v = chart_xy();
        let drift = TimeWeightedField::constant(
            VectorField::parse(&v, &[&format!("({w})*y"), &format!("-({w})*x - ({k})*y")])
                .unwrap(),
        );
        let noise = TimeWeightedField::constant(
            VectorField::parse(&v, &["0", &format!("-({s})*y")]).unwrap(),
        );
        StochOperator::new(&v, Interpretation::Stratonovich, drift, vec![noise]).unwrap()
    }

    #[test]
    fn damped_oscillator_equilibrium_is_origin() {
        let op = oscillator("1", "1/2", "1/2");
        let starts = vec![
            vec![1.0, 1.0],
            vec![-2.0, 0.5],
            vec![0.3, -0.7],
            vec![5.0, 5.0],
        ];
        let (reports, abandoned) = find_equilibria(&op, &starts, 1e-10).unwrap();
        assert_eq!(reports.len(), 1, "abandoned {abandoned:?}");
        assert!(reports[0].is_equilibrium);
        assert!(norm2(&reports[0].point) < 1e-8);
    }

    /// Lotka-Volterra with shared noise along X1 = (N1, N2).
    fn lotka_volterra() -> StochOperator {
        let v = Vars::new(["N1", "N2"]).unwrap();
        let drift = TimeWeightedField::constant(
            VectorField::parse(&v, &["(1 - 1/2*N2)*N1", "(1 - 1/2*N1)*N2"]).unwrap(),
        );
        let noise = TimeWeightedField::constant(
            VectorField::parse(&v, &["1/4*N1", "1/4*N2"]).unwrap(),
        );
        StochOperator::new(&v, Interpretation::Stratonovich, drift, vec![noise]).unwrap()
    }

    #[test]
    fn lotka_volterra_interior_point_rejected() {
        let op = lotka_volterra();
        // the deterministic interior fixed point (2, 2) kills the drift
        let drift_at = equilibrium_check(&op, &[2.0, 2.0], 1e-10).unwrap();
        assert!(!drift_at.is_equilibrium);
        assert_eq!(drift_at.residuals[0], 0.0); // drift vanishes
        assert!(drift_at.residuals[1] > 0.4); // noise does not
        // multi-start search finds only the origin
        let starts = vec![vec![2.1, 1.9], vec![0.5, 0.5], vec![3.0, 1.0]];
        let (reports, _) = find_equilibria(&op, &starts, 1e-10).unwrap();
        for r in &reports {
            assert!(norm2(&r.point) < 1e-6, "spurious equilibrium {:?}", r.point);
        }
    }

    #[test]
    fn zero_operator_everything_is_an_equilibrium() {
        let v = chart_xy();
        let op = StochOperator::new(
            &v,
            Interpretation::Stratonovich,
            TimeWeightedField::zero(&v),
            vec![],
        )
        .unwrap();
        let starts = vec![vec![1.0, 2.0], vec![-3.0, 4.0]];
        let (reports, _) = find_equilibria(&op, &starts, 1e-10).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.is_equilibrium));
    }

    #[test]
    fn dirichlet_certifies_pure_rotation() {
        let op = oscillator("1", "0", "0");
        let v = chart_xy();
        let f = parse_rational_function("(x^2 + y^2)/2", &v).unwrap();
        let verdict = dirichlet_check(
            &op,
            &f,
            &PointSpec::Exact(vec![rat(0, 1), rat(0, 1)]),
            1e-10,
        )
        .unwrap();
        assert!(verdict.equilibrium);
        assert!(verdict.conserved);
        assert!(verdict.critical);
        assert_eq!(verdict.hessian, Definiteness::PositiveDefinite);
        assert!(verdict.almost_surely_stable);
    }

    #[test]
    fn dirichlet_rejects_nonconserved_noise() {
        // translation noise -s d/dy: X(f) = -s y != 0
        let v = chart_xy();
        let drift = TimeWeightedField::constant(
            VectorField::parse(&v, &["y", "-x"]).unwrap(),
        );
        let noise = TimeWeightedField::constant(
            VectorField::parse(&v, &["0", "-1/2"]).unwrap(),
        );
        let op =
            StochOperator::new(&v, Interpretation::Stratonovich, drift, vec![noise]).unwrap();
        let f = parse_rational_function("(x^2 + y^2)/2", &v).unwrap();
        let verdict =
            dirichlet_check(&op, &f, &PointSpec::Numeric(vec![0.0, 0.0]), 1e-10).unwrap();
        assert!(!verdict.conserved);
        assert!(verdict.nonconserved_witness.is_some());
        assert!(!verdict.almost_surely_stable);
    }

    #[test]
    fn dirichlet_degenerate_for_constant_function() {
        let op = oscillator("1", "0", "0");
        let v = chart_xy();
        let f = parse_rational_function("7", &v).unwrap();
        let verdict = dirichlet_check(
            &op,
            &f,
            &PointSpec::Exact(vec![rat(0, 1), rat(0, 1)]),
            1e-10,
        )
        .unwrap();
        assert!(verdict.critical);
        assert_eq!(verdict.hessian, Definiteness::Degenerate);
        assert!(!verdict.almost_surely_stable);
    }

    #[test]
    fn perturbed_rotation_paths_stay_close() {
        let op = oscillator("1", "0", "0");
        let worst = perturbation_sweep(&op, &[0.0, 0.0], 0.1, 20, 5.0, 2000, 77).unwrap();
        assert!(worst < 0.5, "worst excursion {worst}");
    }

    #[test]
    fn rotation_symmetry_of_isotropic_oscillator() {
        let op = oscillator("1", "0", "0");
        // rotation by the rational-friendly 3-4-5 angle
        let phi = vec![
            vec![rat(3, 5), rat(4, 5)],
            vec![rat(-4, 5), rat(3, 5)],
        ];
        let verdict = symmetry_check(&phi, &op).unwrap();
        assert!(verdict.symmetric);
    }

    #[test]
    fn identity_always_a_symmetry_scaling_on_gbm() {
        let v = Vars::new(["x"]).unwrap();
        let drift = TimeWeightedField::constant(VectorField::parse(&v, &["x"]).unwrap());
        let noise =
            TimeWeightedField::constant(VectorField::parse(&v, &["1/2*x"]).unwrap());
        let op =
            StochOperator::new(&v, Interpretation::Stratonovich, drift, vec![noise]).unwrap();
        let id = vec![vec![rat(1, 1)]];
        assert!(symmetry_check(&id, &op).unwrap().symmetric);
        let scale = vec![vec![rat(7, 3)]];
        assert!(symmetry_check(&scale, &op).unwrap().symmetric);
        // singular map rejected
        let zero = vec![vec![rat(0, 1)]];
        assert!(symmetry_check(&zero, &op).is_err());
    }

    #[test]
    fn asymmetric_map_detected() {
        let op = oscillator("1", "1/2", "0");
        // 3-4-5 rotation is not a symmetry once damping breaks isotropy...
        let phi = vec![
            vec![rat(3, 5), rat(4, 5)],
            vec![rat(-4, 5), rat(3, 5)],
        ];
        let verdict = symmetry_check(&phi, &op).unwrap();
        assert!(!verdict.symmetric);
        assert!(verdict.witness.is_some());
    }

    #[test]
    fn so2_relative_equilibrium() {
        let v = chart_xy();
        let w = SymplecticForm::standard(&v).unwrap();
        let h = parse_rational_function("(x^2 + y^2)/2", &v).unwrap();
        let j = parse_rational_function("(x^2 + y^2)/2", &v).unwrap();
        let mm = MomentumMap::from_components(&w, vec![j]).unwrap();
        let out = relative_equilibrium_solve(
            &[h],
            &mm,
            &w,
            &[1.0, 0.0],
            &[vec![0.5]],
            1e-10,
            100,
        )
        .unwrap();
        match out {
            RelEqOutcome::Converged(sol) => {
                assert!((sol.xi[0][0] - 1.0).abs() < 1e-8, "xi = {:?}", sol.xi);
                assert!(sol.defining_residual < 1e-8);
                assert!(sol.verified);
                // mu_e = J(state) by construction
                let jx = 0.5 * (sol.state[0].powi(2) + sol.state[1].powi(2));
                assert_eq!(sol.mu[0], jx);
            }
            RelEqOutcome::NoConvergence { iterations, residual } => {
                panic!("no convergence after {iterations} iterations, residual {residual}")
            }
        }
    }

    #[test]
    fn two_component_relative_equilibrium() {
        // h1 = rotation energy, h2 = J itself: same state, xi = (1) and (1)
        let v = chart_xy();
        let w = SymplecticForm::standard(&v).unwrap();
        let h = parse_rational_function("(x^2 + y^2)/2", &v).unwrap();
        let mm = MomentumMap::from_components(&w, vec![h.clone()]).unwrap();
        let out = relative_equilibrium_solve(
            &[h.clone(), h],
            &mm,
            &w,
            &[1.0, 0.5],
            &[vec![0.5], vec![0.7]],
            1e-10,
            100,
        )
        .unwrap();
        match out {
            RelEqOutcome::Converged(sol) => {
                assert!((sol.xi[0][0] - 1.0).abs() < 1e-8);
                assert!((sol.xi[1][0] - 1.0).abs() < 1e-8);
                assert!(sol.verified);
            }
            _ => panic!("expected convergence"),
        }
    }
}
