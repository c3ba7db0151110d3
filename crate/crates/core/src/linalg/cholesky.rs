use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Cholesky factor stored over the row envelope (profile) of a symmetric matrix.
///
/// Row `i` of `L` occupies columns `first[i]..=i`. Fill-in stays inside the envelope,
/// so a row-major ordering of a structured grid keeps storage at `n · bandwidth`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Number of stored entries the envelope of `a` requires.
    pub fn envelope_size(a: &SparseMatrix) -> usize {
        (0..a.nrows())
            .map(|i| i + 1 - a.row(i).map(|(j, _)| j).next().unwrap_or(i).min(i))
            .sum()
    }

    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Domain("Cholesky needs a square matrix".into()));
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).next().unwrap_or(i).min(i))
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i + 1 - first[i]);
        }
        let mut data = vec![0.0; offsets[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[offsets[i] + j - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = data[offsets[i] + j - fi];
                let row_i = &data[offsets[i] + start - fi..offsets[i] + j - fi];
                let row_j = &data[offsets[j] + start - fj..offsets[j] + j - fj];
                s -= row_i.iter().zip(row_j).map(|(x, y)| x * y).sum::<f64>();
                if j < i {
                    let djj = data[offsets[j + 1] - 1];
                    data[offsets[i] + j - fi] = s / djj;
                } else {
                    if !(s > 0.0) {
                        return Err(Error::Singular(format!(
                            "matrix not positive definite at pivot {i} ({s})"
                        )));
                    }
                    data[offsets[i] + i - fi] = libm::sqrt(s);
                }
            }
        }
        Ok(Self {
            first,
            offsets,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] = (x[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (l, y) in row[..i - fi].iter().zip(&mut x[fi..i]) {
                *y -= l * xi;
            }
        }
    }
}
