//! Minimal dense linear algebra: exactly what the solvers need, nothing more.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Mutable row `i` together with immutable row `j` (`i != j`).
    pub fn split_rows(&mut self, i: usize, j: usize) -> (&mut [f64], &[f64]) {
        assert_ne!(i, j);
        let cols = self.cols;
        if i < j {
            let (a, b) = self.data.split_at_mut(j * cols);
            (&mut a[i * cols..(i + 1) * cols], &b[..cols])
        } else {
            let (a, b) = self.data.split_at_mut(i * cols);
            (&mut b[..cols], &a[j * cols..(j + 1) * cols])
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    /// `y = A^T x`, streaming rows so the access pattern stays contiguous.
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        y.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, &aij) in y.iter_mut().zip(self.row(i)) {
                *yj += xi * aij;
            }
        }
    }

    /// `A B` (used at test scale and for factor folding; no blocking needed).
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.at(i, k);
                if aik == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    /// Symmetric Gram matrix `A A^T`.
    pub fn gram_rows(&self) -> Mat {
        let p = self.rows;
        let mut g = Mat::zeros(p, p);
        for i in 0..p {
            let ri = self.row(i);
            for j in 0..=i {
                let v = dot(ri, self.row(j));
                *g.at_mut(i, j) = v;
                *g.at_mut(j, i) = v;
            }
        }
        g
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Cholesky factor (lower triangular, stored dense) of a symmetric
/// positive-definite matrix. Returns `None` if a pivot is not positive.
pub fn cholesky(a: &Mat) -> Option<Mat> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.at(i, j);
            for k in 0..j {
                sum -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                *l.at_mut(i, j) = math::sqrt(sum);
            } else {
                *l.at_mut(i, j) = sum / l.at(j, j);
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Mat, b: &[f64], x: &mut [f64]) {
    let n = l.rows();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    // forward: L y = b
    for i in 0..n {
        let mut sum = b[i];
        let row = l.row(i);
        for k in 0..i {
            sum -= row[k] * x[k];
        }
        x[i] = sum / row[i];
    }
    // backward: L^T x = y
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum -= l.at(k, i) * x[k];
        }
        x[i] = sum / l.at(i, i);
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns.
/// Intended for the small matrices of custom correlation specs.
pub fn jacobi_eigh(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.at(i, j) * m.at(i, j);
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if math::abs(apq) < 1e-300 {
                    continue;
                }
                let app = m.at(p, p);
                let aqq = m.at(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::hypot(1.0, theta))
                } else {
                    1.0 / (theta - math::hypot(1.0, theta))
                };
                let c = 1.0 / math::hypot(1.0, t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    *m.at_mut(k, p) = c * mkp - s * mkq;
                    *m.at_mut(k, q) = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    *m.at_mut(p, k) = c * mpk - s * mqk;
                    *m.at_mut(q, k) = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    *v.at_mut(k, p) = c * vkp - s * vkq;
                    *v.at_mut(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m.at(i, i)).collect();
    (eig, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose_agree() {
        let a = Mat::from_rows(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 0.0, -1.0], &mut y);
        assert_eq!(y, vec![-2.0, -2.0]);
        let mut z = vec![0.0; 3];
        a.matvec_t(&[1.0, 1.0], &mut z);
        assert_eq!(z, vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = Mat::from_rows(3, 3, vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let l = cholesky(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let mut x = [0.0; 3];
        cholesky_solve(&l, &b, &mut x);
        let mut ax = [0.0; 3];
        a.matvec(&x, &mut ax);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn jacobi_recovers_spectrum() {
        // symmetric with known eigenvalues {1, 3}
        let a = Mat::from_rows(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let (mut eig, v) = jacobi_eigh(&a);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
        // V diag(eig) V^T == A
        let (eig_raw, _) = jacobi_eigh(&a);
        let mut recon = Mat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += v.at(i, k) * eig_raw[k] * v.at(j, k);
                }
                *recon.at_mut(i, j) = s;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((recon.at(i, j) - a.at(i, j)).abs() < 1e-10);
            }
        }
    }
}
