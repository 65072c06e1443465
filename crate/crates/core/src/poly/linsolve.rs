//! Exact linear algebra over the rationals: reduced row echelon form,
//! solution spaces, rank, and nullspaces.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum LinearSolution {
    Inconsistent,
    Solved {
        /// One exact solution of `A x = b`.
        particular: Vec<BigRational>,
        /// Exact basis of the nullspace of `A`.
        nullspace: Vec<Vec<BigRational>>,
    },
}

/// Solve `rows * x = rhs` exactly. All rows must share one length.
pub fn solve_linear(rows: &[Vec<BigRational>], rhs: &[BigRational]) -> Result<LinearSolution> {
    if rows.len() != rhs.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} right-hand sides",
            rows.len(),
            rhs.len()
        )));
    }
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    for r in rows {
        if r.len() != ncols {
            return Err(Error::Shape("ragged coefficient matrix".into()));
        }
    }
    // augmented RREF
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(b.clone());
            row
        })
        .collect();
    let pivots = rref(&mut m, ncols);

    // inconsistency: zero row with nonzero rhs
    for row in &m {
        if row[..ncols].iter().all(Zero::is_zero) && !row[ncols].is_zero() {
            return Ok(LinearSolution::Inconsistent);
        }
    }

    let mut particular = vec![BigRational::zero(); ncols];
    for (r, &c) in pivots.iter().enumerate() {
        particular[c] = m[r][ncols].clone();
    }
    let nullspace = nullspace_from_rref(&m, ncols, &pivots);
    Ok(LinearSolution::Solved {
        particular,
        nullspace,
    })
}

/// Exact rank of a rational matrix.
pub fn rank(rows: &[Vec<BigRational>]) -> usize {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    rref(&mut m, ncols).len()
}

/// Basis of the nullspace of a homogeneous system.
pub fn nullspace(rows: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let pivots = rref(&mut m, ncols);
    nullspace_from_rref(&m, ncols, &pivots)
}

/// In-place reduced row echelon form on the first `ncols` columns.
/// Returns the pivot column of each pivot row, in row order.
fn rref(m: &mut [Vec<BigRational>], ncols: usize) -> Vec<usize> {
    let nrows = m.len();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        let Some(p) = (row..nrows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = m[row][col].recip();
        for v in m[row].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..nrows {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let (head, tail) = if r < row {
                    let (a, b) = m.split_at_mut(row);
                    (&mut a[r], &b[0])
                } else {
                    let (a, b) = m.split_at_mut(r);
                    (&mut b[0], &a[row])
                };
                for (x, y) in head.iter_mut().zip(tail.iter()) {
                    *x = &*x - &(&f * y);
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == nrows {
            break;
        }
    }
    pivots
}

fn nullspace_from_rref(
    m: &[Vec<BigRational>],
    ncols: usize,
    pivots: &[usize],
) -> Vec<Vec<BigRational>> {
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![BigRational::zero(); ncols];
        v[free] = BigRational::one();
        for (r, &c) in pivots.iter().enumerate() {
            v[c] = -m[r][free].clone();
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    fn v(xs: &[(i64, i64)]) -> Vec<BigRational> {
        xs.iter().map(|&(p, q)| rat(p, q)).collect()
    }

    #[test]
    fn identity_system() {
        let rows = vec![v(&[(1, 1), (0, 1)]), v(&[(0, 1), (1, 1)])];
        let sol = solve_linear(&rows, &v(&[(3, 1), (4, 1)])).unwrap();
        match sol {
            LinearSolution::Solved {
                particular,
                nullspace,
            } => {
                assert_eq!(particular, v(&[(3, 1), (4, 1)]));
                assert!(nullspace.is_empty());
            }
            _ => panic!("expected unique solution"),
        }
    }

    #[test]
    fn one_equation_two_unknowns() {
        let rows = vec![v(&[(1, 1), (1, 1)])];
        let sol = solve_linear(&rows, &v(&[(0, 1)])).unwrap();
        match sol {
            LinearSolution::Solved { nullspace, .. } => {
                assert_eq!(nullspace.len(), 1);
                // basis vector proportional to (1, -1)
                let n = &nullspace[0];
                assert_eq!(&n[0] + &n[1], rat(0, 1));
                assert!(!n[0].is_zero());
            }
            _ => panic!("expected solvable"),
        }
    }

    #[test]
    fn vandermonde_interpolation_matches_inverse_oracle() {
        // points 2, 3, 5 against monomials 1, x, x^2; rhs from f(x) = 1 + x^2
        let pts = [rat(2, 1), rat(3, 1), rat(5, 1)];
        let rows: Vec<Vec<BigRational>> = pts
            .iter()
            .map(|x| vec![rat(1, 1), x.clone(), x * x])
            .collect();
        let rhs: Vec<BigRational> = pts.iter().map(|x| rat(1, 1) + x * x).collect();
        let sol = solve_linear(&rows, &rhs).unwrap();
        let expected = brute_force_3x3_solve(&rows, &rhs);
        match sol {
            LinearSolution::Solved {
                particular,
                nullspace,
            } => {
                assert!(nullspace.is_empty());
                assert_eq!(particular, expected);
                assert_eq!(particular, v(&[(1, 1), (0, 1), (1, 1)]));
            }
            _ => panic!("expected unique solution"),
        }
    }

    /// Independent oracle: explicit 3x3 inversion by cofactors.
    fn brute_force_3x3_solve(a: &[Vec<BigRational>], b: &[BigRational]) -> Vec<BigRational> {
        let det = |m: &[Vec<BigRational>]| -> BigRational {
            &m[0][0] * &(&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
                - &m[0][1] * &(&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
                + &m[0][2] * &(&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
        };
        let d = det(a);
        assert!(!d.is_zero());
        (0..3)
            .map(|j| {
                let mut m = a.to_vec();
                for i in 0..3 {
                    m[i][j] = b[i].clone();
                }
                det(&m) / &d
            })
            .collect()
    }

    #[test]
    fn inconsistent_detected() {
        let rows = vec![v(&[(1, 1), (1, 1)]), v(&[(2, 1), (2, 1)])];
        let sol = solve_linear(&rows, &v(&[(1, 1), (3, 1)])).unwrap();
        assert_eq!(sol, LinearSolution::Inconsistent);
    }

    #[test]
    fn rank_and_nullspace() {
        let rows = vec![
            v(&[(1, 1), (2, 1), (3, 1)]),
            v(&[(2, 1), (4, 1), (6, 1)]),
            v(&[(0, 1), (1, 1), (1, 1)]),
        ];
        assert_eq!(rank(&rows), 2);
        assert_eq!(nullspace(&rows).len(), 1);
    }
}
