//! Row-major matrix and the few dense kernels the model needs.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    /// Entries drawn uniformly from (−scale, scale).
    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Mat {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        Mat { rows, cols, data }
    }

    /// y = A·x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = Vec::with_capacity(self.rows);
        for row in self.data.chunks_exact(self.cols) {
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y.push(acc);
        }
        y
    }

    /// x = Aᵀ·y
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut x = alloc::vec![0.0; self.cols];
        for (row, &w) in self.data.chunks_exact(self.cols).zip(y) {
            for (out, a) in x.iter_mut().zip(row) {
                *out += a * w;
            }
        }
        x
    }

    /// A += y·xᵀ (gradient accumulation for a weight used as A·x).
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (row, &w) in self.data.chunks_exact_mut(self.cols).zip(y) {
            for (out, a) in row.iter_mut().zip(x) {
                *out += w * a;
            }
        }
    }

    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<(), Error> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::ShapeMismatch {
                expected: rows * cols,
                got: self.rows * self.cols,
            });
        }
        Ok(())
    }
}

/// a += s·b
pub fn add_scaled(a: &mut [f64], b: &[f64], s: f64) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

pub fn expect_len(x: &[f64], len: usize) -> Result<(), Error> {
    if x.len() != len {
        return Err(Error::ShapeMismatch {
            expected: len,
            got: x.len(),
        });
    }
    Ok(())
}
