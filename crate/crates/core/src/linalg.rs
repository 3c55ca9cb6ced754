//! Small dense linear algebra for the estimators.
//!
//! The regression designs here never exceed a dozen columns (fixed effects
//! are absorbed by demeaning, not materialized), so plain row-major `Vec<f64>`
//! matrices with Cholesky factorization and a Jacobi eigensolver cover every
//! need of the crate.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingularMatrix;

/// Gram matrix X'X (p x p) and moment vector X'y (p) from column vectors.
pub fn normal_equations(columns: &[Vec<f64>], y: &[f64]) -> (Mat, Vec<f64>) {
    let p = columns.len();
    let mut xtx = Mat::zeros(p, p);
    let mut xty = vec![0.0; p];
    for (j, cj) in columns.iter().enumerate() {
        for (k, ck) in columns.iter().enumerate().skip(j) {
            let mut s = 0.0;
            for i in 0..y.len() {
                s += cj[i] * ck[i];
            }
            xtx.set(j, k, s);
            xtx.set(k, j, s);
        }
        let mut s = 0.0;
        for i in 0..y.len() {
            s += cj[i] * y[i];
        }
        xty[j] = s;
    }
    (xtx, xty)
}

/// Solve the symmetric positive-definite system `a x = b` in place via
/// Cholesky. Fails when a pivot falls below `tol` times the largest diagonal,
/// which is how rank deficiency surfaces to the callers.
pub fn cholesky_solve(a: &Mat, b: &[f64], tol: f64) -> Result<Vec<f64>, SingularMatrix> {
    let l = cholesky_factor(a, tol)?;
    Ok(cholesky_back_substitute(&l, b))
}

/// Lower-triangular Cholesky factor of a symmetric PD matrix.
pub fn cholesky_factor(a: &Mat, tol: f64) -> Result<Mat, SingularMatrix> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let max_diag = (0..n).map(|i| fabs(a.get(i, i))).fold(0.0_f64, f64::max);
    let floor = if max_diag > 0.0 { tol * max_diag } else { tol };
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= floor {
                    return Err(SingularMatrix);
                }
                l.set(i, i, sqrt(s));
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

fn cholesky_back_substitute(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Inverse of a symmetric PD matrix through its Cholesky factor.
pub fn cholesky_inverse(a: &Mat, tol: f64) -> Result<Mat, SingularMatrix> {
    let n = a.rows;
    let l = cholesky_factor(a, tol)?;
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_back_substitute(&l, &e);
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    Ok(inv)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching unit-norm
/// eigenvectors as the rows of the returned matrix.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let mut m = a.clone();
    // v accumulates the rotations; rows end up as eigenvectors.
    let mut v = Mat::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }

    for _ in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if fabs(apq) < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vpk = v.get(p, k);
                    let vqk = v.get(q, k);
                    v.set(p, k, c * vpk - s * vqk);
                    v.set(q, k, s * vpk + c * vqk);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m.get(j, j)
            .partial_cmp(&m.get(i, i))
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Mat::zeros(n, n);
    for (row, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(row, k, v.get(i, k));
        }
    }
    (values, vectors)
}
