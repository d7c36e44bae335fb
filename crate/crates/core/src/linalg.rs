//! Small dense-matrix helpers and a symmetric eigensolver.
//!
//! The matrices here are tiny (bond-dimension environments, covariance
//! matrices of feature clouds), so everything is a plain row-major `Vec`.
//! The eigensolver is the classical Householder tridiagonalization followed
//! by implicit-shift QL iteration, which returns an orthonormal eigenbasis
//! for real symmetric input.

#![allow(clippy::needless_range_loop)]

use num_traits::{Float, Zero};
use thiserror::Error;

use crate::scalar::{Amplitude, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("eigensolver failed to converge for row {row}")]
    NoConvergence { row: usize },
    #[error("matrix has a significantly negative eigenvalue {value} (largest {largest})")]
    NegativeEigenvalue { value: f64, largest: f64 },
}

/// Dense row-major matrix over a real or complex amplitude type.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<A> {
    rows: usize,
    cols: usize,
    data: Vec<A>,
}

impl<A: Amplitude> Mat<A> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![A::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> A) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<A>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Mat { rows, cols, data }
    }

    /// 1x1 matrix holding `one`; the seed of every chain contraction.
    pub fn unit() -> Self {
        Mat {
            rows: 1,
            cols: 1,
            data: vec![A::one()],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, A::one());
        }
        m
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
    pub fn get(&self, i: usize, j: usize) -> A {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: A) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: A) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[A] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [A] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[A] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, rhs: &Mat<A>) -> Mat<A> {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..rhs.cols {
                    out.add_at(i, j, a * rhs.get(k, j));
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[A]) -> Vec<A> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        let mut out = vec![A::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = A::zero();
            for j in 0..self.cols {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `transpose(self) * x`, used by backpropagation.
    pub fn matvec_t(&self, x: &[A]) -> Vec<A> {
        assert_eq!(self.rows, x.len(), "matvec_t shape mismatch");
        let mut out = vec![A::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for j in 0..self.cols {
                out[j] += self.get(i, j) * xi;
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat<A> {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Elementwise pairing `sum_ij a_ij * b_ij` (no conjugation).
    pub fn pair(&self, rhs: &Mat<A>) -> A {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut acc = A::zero();
        for (a, b) in self.data.iter().zip(rhs.data.iter()) {
            acc += *a * *b;
        }
        acc
    }

    pub fn max_abs(&self) -> A::Real {
        let mut m = <A::Real>::zero();
        for a in &self.data {
            let v = a.abs_sq();
            if v > m {
                m = v;
            }
        }
        m.sqrt()
    }

    pub fn scale_in_place(&mut self, s: A::Real) {
        for a in &mut self.data {
            *a = a.scale(s);
        }
    }

    pub fn trace(&self) -> A {
        assert_eq!(self.rows, self.cols);
        let mut acc = A::zero();
        for i in 0..self.rows {
            acc += self.get(i, i);
        }
        acc
    }
}

/// Eigendecomposition of a real symmetric matrix. Eigenvalues ascend;
/// column `j` of `vectors` is the eigenvector for `values[j]`.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
}

/// Householder reduction to tridiagonal form followed by implicit-shift QL.
pub fn sym_eigen<T: Scalar>(a: &Mat<T>) -> Result<SymEigen<T>, LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(SymEigen {
            values: vec![],
            vectors: Mat::zeros(0, 0),
        });
    }

    let mut z = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];

    tred2(&mut z, &mut d, &mut e);
    tql2(&mut z, &mut d, &mut e)?;

    // Sort ascending with eigenvectors following, for deterministic output.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| z.get(i, order[j]));
    Ok(SymEigen { values, vectors })
}

fn tred2<T: Scalar>(z: &mut Mat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        let mut scale = T::zero();
        if l > 0 {
            for k in 0..=l {
                scale += z.get(i, k).abs();
            }
            if scale == T::zero() {
                e[i] = z.get(i, l);
            } else {
                for k in 0..=l {
                    let v = z.get(i, k) / scale;
                    z.set(i, k, v);
                    h += v * v;
                }
                let f = z.get(i, l);
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z.set(i, l, f - g);
                let mut f_acc = T::zero();
                for j in 0..=l {
                    z.set(j, i, z.get(i, j) / h);
                    let mut g_acc = T::zero();
                    for k in 0..=j {
                        g_acc += z.get(j, k) * z.get(i, k);
                    }
                    for k in (j + 1)..=l {
                        g_acc += z.get(k, j) * z.get(i, k);
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * z.get(i, j);
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = z.get(i, j);
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let v = z.get(j, k) - (f * e[k] + g * z.get(i, k));
                        z.set(j, k, v);
                    }
                }
            }
        } else {
            e[i] = z.get(i, l);
        }
        d[i] = h;
    }
    d[0] = T::zero();
    e[0] = T::zero();
    for i in 0..n {
        if d[i] != T::zero() {
            for j in 0..i {
                let mut g = T::zero();
                for k in 0..i {
                    g += z.get(i, k) * z.get(k, j);
                }
                for k in 0..i {
                    let v = z.get(k, j) - g * z.get(k, i);
                    z.set(k, j, v);
                }
            }
        }
        d[i] = z.get(i, i);
        z.set(i, i, T::one());
        for j in 0..i {
            z.set(j, i, T::zero());
            z.set(i, j, T::zero());
        }
    }
}

fn tql2<T: Scalar>(z: &mut Mat<T>, d: &mut [T], e: &mut [T]) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence { row: l });
            }
            let mut g = (d[l + 1] - d[l]) / (e[l] + e[l]);
            let mut r = g.hypot(T::one());
            let sign_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + (c + c) * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z.get(k, i + 1);
                    z.set(k, i + 1, s * z.get(k, i) + c * f);
                    z.set(k, i, c * z.get(k, i) - s * f);
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Symmetric positive-semidefinite square root via eigendecomposition.
///
/// Eigenvalues in `[-rel_tol * max_eig, 0)` are clamped to zero; anything
/// more negative is an error.
pub fn psd_sqrt<T: Scalar>(a: &Mat<T>, rel_tol: T) -> Result<Mat<T>, LinalgError> {
    let eig = sym_eigen(a)?;
    let roots = clamp_nonnegative(&eig.values, rel_tol)?
        .into_iter()
        .map(|v| v.sqrt())
        .collect::<Vec<_>>();
    let n = a.rows();
    // Q * diag(sqrt) * Q^T
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = T::zero();
            for k in 0..n {
                acc += eig.vectors.get(i, k) * roots[k] * eig.vectors.get(j, k);
            }
            out.set(i, j, acc);
            out.set(j, i, acc);
        }
    }
    Ok(out)
}

/// Clamp slightly negative eigenvalues of a notionally PSD matrix to zero.
pub fn clamp_nonnegative<T: Scalar>(values: &[T], rel_tol: T) -> Result<Vec<T>, LinalgError> {
    let largest = values
        .iter()
        .fold(T::zero(), |m, &v| if v > m { v } else { m });
    let floor = -rel_tol * largest.max(T::one() * T::epsilon());
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        if v < floor {
            return Err(LinalgError::NegativeEigenvalue {
                value: v.to_f64().unwrap_or(f64::NAN),
                largest: largest.to_f64().unwrap_or(f64::NAN),
            });
        }
        out.push(if v < T::zero() { T::zero() } else { v });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    #[test]
    fn matmul_and_pair_basics() {
        let a = Mat::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Mat::from_rows(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[2.0, 1.0, 4.0, 3.0]);
        assert_eq!(a.pair(&b), 2.0 + 3.0);
    }

    #[test]
    fn complex_max_abs_uses_modulus() {
        let m = Mat::from_rows(1, 2, vec![Complex::new(3.0f64, 4.0), Complex::new(1.0, 0.0)]);
        assert!((m.max_abs() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_random_symmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 3, 5, 8, 13] {
            let a = random_symmetric(n, &mut rng);
            let eig = sym_eigen(&a).unwrap();
            // A v_j = lambda_j v_j for every column.
            for j in 0..n {
                for i in 0..n {
                    let mut av = 0.0;
                    for k in 0..n {
                        av += a.get(i, k) * eig.vectors.get(k, j);
                    }
                    let lv = eig.values[j] * eig.vectors.get(i, j);
                    assert!(
                        (av - lv).abs() < 1e-9,
                        "residual too large at n={n}, ({i},{j}): {av} vs {lv}"
                    );
                }
            }
            // Orthonormal columns.
            for j in 0..n {
                for j2 in 0..=j {
                    let mut dot = 0.0;
                    for k in 0..n {
                        dot += eig.vectors.get(k, j) * eig.vectors.get(k, j2);
                    }
                    let expect = if j == j2 { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-10);
                }
            }
            // Ascending order.
            for j in 1..n {
                assert!(eig.values[j - 1] <= eig.values[j]);
            }
        }
    }

    #[test]
    fn eigen_of_diagonal_matrix_is_exact() {
        let a = Mat::from_rows(3, 3, vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let eig = sym_eigen(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 2.0).abs() < 1e-14);
        assert!((eig.values[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_known_2x2() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a = Mat::from_rows(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let eig = sym_eigen(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 4, 7] {
            let b = random_symmetric(n, &mut rng);
            // a = b * b^T is PSD.
            let a = b.matmul(&b.transpose());
            let s = psd_sqrt(&a, 1e-8).unwrap();
            let s2 = s.matmul(&s);
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (s2.get(i, j) - a.get(i, j)).abs() < 1e-9,
                        "sqrt squared mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn psd_sqrt_rejects_indefinite_matrix() {
        let a = Mat::from_rows(2, 2, vec![1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            psd_sqrt(&a, 1e-8),
            Err(LinalgError::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn non_square_rejected() {
        let a: Mat<f64> = Mat::zeros(2, 3);
        assert!(matches!(sym_eigen(&a), Err(LinalgError::NotSquare { .. })));
    }
}
