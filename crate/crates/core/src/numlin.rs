//! Small dense f64 linear algebra for the numeric layer: pivoted solves,
//! least squares, and a Jacobi eigenvalue sweep for symmetric matrices.
//! Symbolic decisions never route through here.

use crate::error::{Error, Result};

/// Solve a square system by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-14 {
            return Err(Error::Numeric("singular linear system".into()));
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Ok((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Minimum-norm least squares `x = A^+ b` via one-sided Jacobi SVD.
/// Rank-deficient systems get the pseudo-inverse solution, which keeps
/// Gauss-Newton steps well-defined on underdetermined critical-point systems.
pub fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let rows = a.len();
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    if rows != b.len() {
        return Err(Error::Shape("least squares shape mismatch".into()));
    }
    if cols == 0 {
        return Ok(Vec::new());
    }
    // columns of `work` converge to U * Sigma; `v` accumulates the rotations
    let mut work: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| a[i][j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|i| (0..cols).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let app: f64 = work[p].iter().map(|x| x * x).sum();
                let aqq: f64 = work[q].iter().map(|x| x * x).sum();
                let apq: f64 = work[p].iter().zip(&work[q]).map(|(x, y)| x * y).sum();
                if apq.abs() <= 1e-15 * (app * aqq).sqrt().max(1e-300) {
                    continue;
                }
                rotated = true;
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..rows {
                    let wp = work[p][i];
                    let wq = work[q][i];
                    work[p][i] = c * wp - s * wq;
                    work[q][i] = s * wp + c * wq;
                }
                for i in 0..cols {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigmas: Vec<f64> = work.iter().map(|col| norm2(col)).collect();
    let smax = sigmas.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(vec![0.0; cols]);
    }
    let cut = smax * 1e-12;
    let mut x = vec![0.0; cols];
    for k in 0..cols {
        if sigmas[k] < cut {
            continue;
        }
        // coefficient (u_k . b) / sigma_k along v_k
        let ub: f64 = work[k].iter().zip(b).map(|(u, bb)| u * bb).sum::<f64>() / sigmas[k];
        let coef = ub / sigmas[k];
        for i in 0..cols {
            x[i] += coef * v[k][i];
        }
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
