//! Small dense linear algebra over `f64` and over jets.
//!
//! Matrices here are at most a few dozen rows, so plain Gaussian elimination with partial
//! pivoting is enough.

use crate::error::{Error, Result};
use crate::weil::JetScalar;

/// Solve `A x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n × n`. Returns the solution and `det A`.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix is not square or does not match rhs".into()));
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[piv][col] == 0.0 {
            return Err(Error::Singularity("singular matrix in linear solve".into()));
        }
        if piv != col {
            m.swap(piv, col);
            x.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    Ok((x, det))
}

pub fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    match solve(a, &vec![0.0; n]) {
        Ok((_, d)) => d,
        Err(_) => 0.0,
    }
}

/// Inverse of a square matrix of jets by Gauss-Jordan elimination. Pivots are chosen by the
/// magnitude of their constant terms, which must be nonzero for the jet to be invertible.
pub fn invert_jet_matrix(a: &[Vec<JetScalar>]) -> Result<Vec<Vec<JetScalar>>> {
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("jet matrix is not square".into()));
    }
    let shape = a[0][0].shape().clone();
    let mut m: Vec<Vec<JetScalar>> = a.to_vec();
    let mut inv: Vec<Vec<JetScalar>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| JetScalar::constant(&shape, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].value().abs().total_cmp(&m[j][col].value().abs()))
            .unwrap_or(col);
        if m[piv][col].value() == 0.0 {
            return Err(Error::Singularity("singular metric".into()));
        }
        m.swap(piv, col);
        inv.swap(piv, col);
        let r = m[col][col].recip()?;
        for c in 0..n {
            m[col][c] = &m[col][c] * &r;
            inv[col][c] = &inv[col][c] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col].clone();
            if f.max_abs() == 0.0 {
                continue;
            }
            for c in 0..n {
                let d = &f * &m[col][c];
                m[row][c] = &m[row][c] - &d;
                let d = &f * &inv[col][c];
                inv[row][c] = &inv[row][c] - &d;
            }
        }
    }
    Ok(inv)
}
