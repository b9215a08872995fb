//! Small dense row-major matrix, enough for the reservoir.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn matmul(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                let src = rhs.row(k);
                let dst = out.row_mut(i);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * *s;
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt()
    }

    /// Spectral radius from Gelfand's formula `rho = lim ||A^n||^(1/n)`,
    /// evaluated on `A^(2^squarings)` by repeated normalised squaring.
    pub fn spectral_radius(&self, squarings: u32) -> T {
        assert_eq!(self.rows, self.cols);
        let n0 = self.frobenius_norm();
        if n0 == T::zero() {
            return T::zero();
        }
        let mut b = self.clone();
        b.scale(T::one() / n0);
        // log ||A^(2^k)|| is tracked as `log_norm`; b holds A^(2^k) / ||A^(2^k)||.
        let mut log_norm = n0.ln();
        let mut power = T::one();
        for _ in 0..squarings {
            b = b.matmul(&b);
            let m = b.frobenius_norm();
            if m == T::zero() {
                return T::zero();
            }
            b.scale(T::one() / m);
            log_norm = log_norm + log_norm + m.ln();
            power = power + power;
        }
        (log_norm / power).exp()
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_and_mul_vec() {
        let a = Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        let b = Matrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let c = a.matmul(&b);
        assert_eq!(c.row(0), &[5.0, 8.0]);
        assert_eq!(c.row(1), &[14.0, 26.0]);
        assert_eq!(a.mul_vec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(Matrix::<f64>::identity(3).matmul(&b), b);
    }

    #[test]
    fn spectral_radius_of_known_matrices() {
        let d = Matrix::from_fn(3, 3, |i, j| if i == j { [0.5, -0.9, 0.2][i] } else { 0.0_f64 });
        assert!((d.spectral_radius(40) - 0.9).abs() < 1e-9);
        // Rotation scaled by 0.7: complex pair of modulus 0.7.
        let (c, s) = (0.3f64.cos() * 0.7, 0.3f64.sin() * 0.7);
        let r = Matrix::from_fn(2, 2, |i, j| [[c, -s], [s, c]][i][j]);
        assert!((r.spectral_radius(40) - 0.7).abs() < 1e-9);
        // Nilpotent.
        let n = Matrix::from_fn(2, 2, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 });
        assert_eq!(n.spectral_radius(10), 0.0);
        // Jordan block converges slowly but still within tolerance at 2^40.
        let j = Matrix::from_fn(2, 2, |i, k| if i == k { 0.8 } else if k == i + 1 { 1.0 } else { 0.0_f64 });
        assert!((j.spectral_radius(40) - 0.8).abs() < 1e-9);
    }
}
