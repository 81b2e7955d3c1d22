//! Cyclic Jacobi eigen-decomposition for small symmetric matrices.

// Index loops mirror the textbook rotation formulas.
#![allow(clippy::needless_range_loop)]

use super::AnalyticsError;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues and eigenvectors of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Decomposes the symmetric matrix `a` (row-major, `n`×`n`) by sweeping
/// plane rotations over every off-diagonal pair in fixed row order until
/// the off-diagonal mass vanishes. The sweep order is deterministic.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<SymmetricEigen, AnalyticsError> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(AnalyticsError::NotSquare);
    }
    for i in 0..n {
        for j in 0..i {
            let tol = 1e-12 * (1.0 + a[i][j].abs().max(a[j][i].abs()));
            if (a[i][j] - a[j][i]).abs() > tol {
                return Err(AnalyticsError::NotSymmetric);
            }
        }
    }

    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let scale: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] != 0.0 {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
    }
    if !converged {
        return Err(AnalyticsError::NoConvergence);
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|k| (m[k][k], (0..n).map(|i| v[i][k]).collect())).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(SymmetricEigen { values, vectors })
}

/// Zeroes `m[p][q]` with one rotation, accumulating it into `v`.
fn rotate(m: &mut [Vec<f64>], v: &mut [Vec<f64>], p: usize, q: usize) {
    let n = m.len();
    let apq = m[p][q];
    let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
    // smaller root of t^2 + 2t·theta - 1 = 0
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
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
    m[p][q] = 0.0;
    m[q][p] = 0.0;
    for row in v.iter_mut() {
        let vp = row[p];
        let vq = row[q];
        row[p] = c * vp - s * vq;
        row[q] = s * vp + c * vq;
    }
}
