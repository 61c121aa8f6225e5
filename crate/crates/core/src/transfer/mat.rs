use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other^T`.
    pub fn mul_transpose(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols);
        Mat::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out.row_mut(i).iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Row vector times matrix: `u * self`.
    pub fn left_mul(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                actual: u.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        self.left_mul_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn left_mul_into(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &a) in u.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += a * m;
            }
        }
    }

    /// Matrix times column vector: `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self += scale * outer(u, v)`.
    pub fn add_outer(&mut self, scale: f64, u: &[f64], v: &[f64]) {
        for (i, &a) in u.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let s = scale * a;
            for (o, b) in self.row_mut(i).iter_mut().zip(v) {
                *o += s * b;
            }
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Mat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn row_argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        best
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place numerically stable softmax.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Mat) -> Mat {
    let mut m = logits.clone();
    for i in 0..m.rows {
        softmax_in_place(m.row_mut(i));
    }
    m
}

/// Backpropagate `grad` (dL/dP) through `P = softmax(z)` for one vector.
pub fn softmax_backward(p: &[f64], grad: &[f64]) -> Vec<f64> {
    let inner = dot(p, grad);
    p.iter().zip(grad).map(|(pi, gi)| pi * (gi - inner)).collect()
}

/// Row-wise [`softmax_backward`].
pub fn softmax_rows_backward(p: &Mat, grad: &Mat) -> Mat {
    let mut out = Mat::zeros(p.rows, p.cols);
    for i in 0..p.rows {
        out.row_mut(i)
            .copy_from_slice(&softmax_backward(p.row(i), grad.row(i)));
    }
    out
}
