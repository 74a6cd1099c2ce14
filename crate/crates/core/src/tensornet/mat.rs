use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix. Deliberately small: matrix-vector products and rank-1 updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        let m = Self { rows, cols, data };
        m.check_shape()?;
        Ok(m)
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

    pub fn check_shape(&self) -> Result<()> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "{}x{} matrix holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn expect_shape(&self, what: &str, rows: usize, cols: usize) -> Result<()> {
        self.check_shape()?;
        if self.rows != rows || self.cols != cols {
            return Err(Error::Shape(format!(
                "{what} is {}x{}, expected {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out += A[rows] x` over the row range `rows`.
    #[inline]
    pub fn gemv_rows(&self, rows: std::ops::Range<usize>, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, i) in out.iter_mut().zip(rows) {
            let r = self.row(i);
            let mut acc = T::zero();
            for (a, b) in r.iter().zip(x) {
                acc += *a * *b;
            }
            *o += acc;
        }
    }

    /// `out += A x`.
    #[inline]
    pub fn gemv(&self, x: &[T], out: &mut [T]) {
        self.gemv_rows(0..self.rows, x, out);
    }

    /// `out += A[rows]^T v` where `v` has one entry per row in the range.
    #[inline]
    pub fn gemv_t_rows(&self, rows: std::ops::Range<usize>, v: &[T], out: &mut [T]) {
        debug_assert_eq!(out.len(), self.cols);
        for (vi, i) in v.iter().zip(rows) {
            if *vi == T::zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += *a * *vi;
            }
        }
    }

    #[inline]
    pub fn gemv_t(&self, v: &[T], out: &mut [T]) {
        self.gemv_t_rows(0..self.rows, v, out);
    }

    /// `A[rows] += u x^T`.
    #[inline]
    pub fn add_outer_rows(&mut self, rows: std::ops::Range<usize>, u: &[T], x: &[T]) {
        for (ui, i) in u.iter().zip(rows) {
            if *ui == T::zero() {
                continue;
            }
            for (a, b) in self.row_mut(i).iter_mut().zip(x) {
                *a += *ui * *b;
            }
        }
    }

    #[inline]
    pub fn add_outer(&mut self, u: &[T], x: &[T]) {
        self.add_outer_rows(0..self.rows, u, x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_hand_computation() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut out = vec![0.0; 2];
        a.gemv(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-2.0, -2.0]);
        let mut out = vec![0.0; 3];
        a.gemv_t(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 7.0, 9.0]);
        let mut b = Matrix::<f64>::zeros(2, 2);
        b.add_outer(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(b.data, vec![3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        assert!(Matrix::from_vec(2, 2, vec![1.0f64; 3]).is_err());
        let m = Matrix::<f32>::zeros(2, 3);
        assert!(m.expect_shape("w", 3, 2).is_err());
    }
}
