//! Constrained SPD solves `A w + Cᵀ λ = b`, `C w = 0`.
//!
//! Identically-zero constraint rows are pruned up front. Tiny systems are solved by
//! LU on the assembled KKT matrix; larger ones by a Schur complement on `λ` whose inner
//! solves with `A` use an envelope Cholesky factor, or Jacobi-CG when the envelope
//! would be too large to store.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::cg::JacobiCg;
use super::cholesky::EnvelopeCholesky;
use super::sparse::{norm_inf, SparseMatrix};
use crate::error::{Error, Result};

/// KKT systems with `n + m` at most this size are solved densely under [`SaddleMethod::Auto`].
pub const DENSE_KKT_LIMIT: usize = 300;

/// Smallest admissible pivot of the equilibrated KKT or Schur factorization.
pub const RANK_TOL: f64 = 1e-13;

/// Envelope entries above which inner solves switch to CG.
pub const ENVELOPE_LIMIT: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaddleMethod {
    Auto,
    DenseKkt,
    SchurCholesky,
    SchurCg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleOptions {
    pub method: SaddleMethod,
    /// Relative tolerance of inner CG solves (only used by [`SaddleMethod::SchurCg`]).
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        Self {
            method: SaddleMethod::Auto,
            cg_tol: 1e-10,
            cg_max_iter: 20_000,
        }
    }
}

enum Inner<'a> {
    Cholesky(EnvelopeCholesky),
    Cg(JacobiCg<'a>),
}

impl Inner<'_> {
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Inner::Cholesky(f) => Ok(f.solve(b)),
            Inner::Cg(cg) => cg.solve(b).map(|(x, _)| x),
        }
    }
}

enum Factored<'a> {
    Dense {
        lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        /// Symmetric equilibration applied to the KKT matrix.
        scale: Vec<f64>,
    },
    Schur {
        inner: Inner<'a>,
        /// `A⁻¹ Cᵀ`, one column per kept constraint.
        y: DMatrix<f64>,
        /// Factor of the Jacobi-scaled Schur complement and its scaling.
        schur: Option<(nalgebra::Cholesky<f64, nalgebra::Dyn>, DVector<f64>)>,
    },
}

/// A factored saddle-point system, reusable across right-hand sides.
pub struct SaddleSystem<'a> {
    n: usize,
    constraints: SparseMatrix,
    factored: Factored<'a>,
}

fn prune_zero_rows(c: &SparseMatrix) -> SparseMatrix {
    let rows: Vec<Vec<(usize, f64)>> = (0..c.nrows())
        .filter(|&i| c.row(i).any(|(_, v)| v != 0.0))
        .map(|i| c.row(i).filter(|&(_, v)| v != 0.0).collect())
        .collect();
    SparseMatrix::from_rows(c.ncols(), rows)
}

impl<'a> SaddleSystem<'a> {
    pub fn new(a: &'a SparseMatrix, c: &SparseMatrix, options: SaddleOptions) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || c.ncols() != n {
            return Err(Error::Domain(format!(
                "saddle system: A is {}x{}, C is {}x{}",
                a.nrows(),
                a.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        let constraints = prune_zero_rows(c);
        let m = constraints.nrows();
        if m > n {
            return Err(Error::RankDeficient { element: usize::MAX });
        }

        let method = match options.method {
            SaddleMethod::Auto if n + m <= DENSE_KKT_LIMIT => SaddleMethod::DenseKkt,
            SaddleMethod::Auto if EnvelopeCholesky::envelope_size(a) <= ENVELOPE_LIMIT => {
                SaddleMethod::SchurCholesky
            }
            SaddleMethod::Auto => SaddleMethod::SchurCg,
            other => other,
        };

        let factored = match method {
            SaddleMethod::DenseKkt => {
                // symmetric equilibration: unit diagonal on A, unit-norm constraint rows
                let mut scale = vec![0.0; n + m];
                for (i, (si, d)) in scale.iter_mut().zip(a.diagonal()).enumerate() {
                    if !(d > 0.0) {
                        return Err(Error::Domain(format!("saddle system: A[{i},{i}] = {d} is not positive")));
                    }
                    *si = 1.0 / libm::sqrt(d);
                }
                for r in 0..m {
                    let norm2: f64 = constraints.row(r).map(|(j, v)| (v * scale[j]) * (v * scale[j])).sum();
                    scale[n + r] = 1.0 / libm::sqrt(norm2);
                }
                let mut kkt = DMatrix::zeros(n + m, n + m);
                for i in 0..n {
                    for (j, v) in a.row(i) {
                        kkt[(i, j)] = scale[i] * v * scale[j];
                    }
                }
                for r in 0..m {
                    for (j, v) in constraints.row(r) {
                        let x = scale[n + r] * v * scale[j];
                        kkt[(n + r, j)] = x;
                        kkt[(j, n + r)] = x;
                    }
                }
                let lu = kkt.lu();
                let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
                if !(min_pivot > RANK_TOL) {
                    return Err(Error::RankDeficient { element: usize::MAX });
                }
                Factored::Dense { lu, scale }
            }
            SaddleMethod::SchurCholesky | SaddleMethod::SchurCg => {
                let inner = if method == SaddleMethod::SchurCholesky {
                    Inner::Cholesky(EnvelopeCholesky::factor(a)?)
                } else {
                    Inner::Cg(JacobiCg::new(a, options.cg_tol, options.cg_max_iter)?)
                };
                let mut y = DMatrix::zeros(n, m);
                let mut col = vec![0.0; n];
                for r in 0..m {
                    col.iter_mut().for_each(|v| *v = 0.0);
                    for (j, v) in constraints.row(r) {
                        col[j] = v;
                    }
                    let sol = inner.solve(&col)?;
                    y.column_mut(r).copy_from_slice(&sol);
                }
                let schur = if m == 0 {
                    None
                } else {
                    let mut s = DMatrix::zeros(m, m);
                    for r in 0..m {
                        for q in 0..m {
                            s[(r, q)] = constraints.row(r).map(|(j, v)| v * y[(j, q)]).sum();
                        }
                    }
                    // Jacobi-scaled so the pivot test measures dependence, not magnitude
                    let d: Vec<f64> = (0..m).map(|r| 1.0 / libm::sqrt(s[(r, r)])).collect();
                    if d.iter().any(|v| !v.is_finite()) {
                        return Err(Error::RankDeficient { element: usize::MAX });
                    }
                    let s = DMatrix::from_fn(m, m, |r, q| 0.5 * (s[(r, q)] + s[(q, r)]) * d[r] * d[q]);
                    let chol = nalgebra::Cholesky::new(s)
                        .ok_or(Error::RankDeficient { element: usize::MAX })?;
                    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, v| a.min(*v));
                    if !(min_pivot * min_pivot > RANK_TOL) {
                        return Err(Error::RankDeficient { element: usize::MAX });
                    }
                    Some((chol, DVector::from_vec(d)))
                };
                Factored::Schur { inner, y, schur }
            }
            SaddleMethod::Auto => unreachable!(),
        };

        Ok(Self {
            n,
            constraints,
            factored,
        })
    }

    /// Number of constraints kept after pruning zero rows.
    pub fn num_constraints(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Domain(format!(
                "right-hand side has length {}, system has {}",
                b.len(),
                self.n
            )));
        }
        if norm_inf(b) == 0.0 {
            return Ok(vec![0.0; self.n]);
        }
        match &self.factored {
            Factored::Dense { lu, scale } => {
                let m = self.constraints.nrows();
                let mut rhs = DVector::zeros(self.n + m);
                for (i, bi) in b.iter().enumerate() {
                    rhs[i] = scale[i] * bi;
                }
                let sol = lu
                    .solve(&rhs)
                    .ok_or(Error::RankDeficient { element: usize::MAX })?;
                Ok((0..self.n).map(|i| scale[i] * sol[i]).collect())
            }
            Factored::Schur { inner, y, schur } => {
                let mut w = inner.solve(b)?;
                if let Some((schur, d)) = schur {
                    // λ = S⁻¹ C A⁻¹ b, then w ← A⁻¹ b − Y λ; a second pass removes
                    // the constraint residual left by rounding
                    for _ in 0..2 {
                        let cw = DVector::from_vec(self.constraints.mul_vec(&w)).component_mul(d);
                        let lambda = schur.solve(&cw).component_mul(d);
                        let correction = y * lambda;
                        w.iter_mut().zip(correction.iter()).for_each(|(wi, ci)| *wi -= ci);
                    }
                }
                Ok(w)
            }
        }
    }
}

/// One-shot constrained solve with default options.
pub fn saddle_solve(a: &SparseMatrix, c: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    SaddleSystem::new(a, c, SaddleOptions::default())?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cg_solve;

    fn laplace_2d(m: usize) -> SparseMatrix {
        let n = m * m;
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let p = j * m + i;
                t.push((p, p, 4.0));
                if i + 1 < m {
                    t.push((p, p + 1, -1.0));
                    t.push((p + 1, p, -1.0));
                }
                if j + 1 < m {
                    t.push((p, p + m, -1.0));
                    t.push((p + m, p, -1.0));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    fn constraints(n: usize) -> SparseMatrix {
        // two averaging constraints plus a zero row that must be pruned
        let rows = vec![
            (0..n / 2).map(|j| (j, 1.0 + j as f64 * 0.1)).collect(),
            Vec::new(),
            (n / 3..n).map(|j| (j, 0.5)).collect(),
        ];
        SparseMatrix::from_rows(n, rows)
    }

    fn dense_kkt_oracle(a: &SparseMatrix, c: &SparseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.nrows();
        let keep: Vec<usize> = (0..c.nrows()).filter(|&r| c.row_nnz(r) > 0).collect();
        let m = keep.len();
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&a.to_dense());
        for (q, &r) in keep.iter().enumerate() {
            for (j, v) in c.row(r) {
                k[(n + q, j)] = v;
                k[(j, n + q)] = v;
            }
        }
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from_slice(b);
        let sol = k.full_piv_lu().solve(&rhs).unwrap();
        sol.rows(0, n).iter().copied().collect()
    }

    #[test]
    fn no_constraints_is_cg() {
        let a = laplace_2d(6);
        let b: Vec<f64> = (0..36).map(|i| (i % 5) as f64).collect();
        let empty = SparseMatrix::zeros(0, 36);
        let w = saddle_solve(&a, &empty, &b).unwrap();
        let (x, _) = cg_solve(&a, &b, 1e-13, 500).unwrap();
        for (u, v) in w.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_2d(4);
        let c = constraints(16);
        assert_eq!(saddle_solve(&a, &c, &[0.0; 16]).unwrap(), vec![0.0; 16]);
    }

    #[test]
    fn all_methods_agree_with_oracle() {
        let a = laplace_2d(8);
        let c = constraints(64);
        let b: Vec<f64> = (0..64).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let oracle = dense_kkt_oracle(&a, &c, &b);
        for method in [SaddleMethod::DenseKkt, SaddleMethod::SchurCholesky, SaddleMethod::SchurCg] {
            let opts = SaddleOptions {
                method,
                cg_tol: 1e-13,
                ..Default::default()
            };
            let sys = SaddleSystem::new(&a, &c, opts).unwrap();
            assert_eq!(sys.num_constraints(), 2);
            let w = sys.solve(&b).unwrap();
            let err = w.iter().zip(&oracle).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{method:?}: {err}");
            let cw = c.mul_vec(&w);
            assert!(norm_inf(&cw) <= 1e-9 * norm_inf(&w), "{method:?}");
        }
    }

    #[test]
    fn rank_deficient_detected() {
        let a = laplace_2d(4);
        let row: Vec<(usize, f64)> = (0..8).map(|j| (j, 1.0)).collect();
        let doubled: Vec<(usize, f64)> = row.iter().map(|&(j, v)| (j, 2.0 * v)).collect();
        let c = SparseMatrix::from_rows(16, vec![row, doubled]);
        for method in [SaddleMethod::DenseKkt, SaddleMethod::SchurCholesky] {
            let opts = SaddleOptions {
                method,
                ..Default::default()
            };
            assert!(
                matches!(SaddleSystem::new(&a, &c, opts), Err(Error::RankDeficient { .. })),
                "{method:?}"
            );
        }
    }

    #[test]
    fn badly_scaled_full_rank_is_accepted() {
        // contrast 1e6 in A and constraint rows differing by 1e4 in magnitude
        let m = 8;
        let n = m * m;
        let weight = |p: usize| -> f64 { if ((p % m) / 2 + (p / m) / 2) % 2 == 0 { 1e5 } else { 0.1 } };
        let mut t = Vec::new();
        for p in 0..n {
            t.push((p, p, 1e-3));
            let mut edge = |q: usize| {
                let w = weight(p).min(weight(q));
                t.extend([(p, p, w), (q, q, w), (p, q, -w), (q, p, -w)]);
            };
            if p % m + 1 < m {
                edge(p + 1);
            }
            if p + m < n {
                edge(p + m);
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let c = SparseMatrix::from_rows(
            n,
            vec![
                (0..10).map(|j| (j, 1e-4)).collect(),
                (20..40).map(|j| (j, 1.0 + j as f64)).collect(),
                (5..25).map(|j| (j, 0.3)).collect(),
            ],
        );
        let b: Vec<f64> = (0..n).map(|i| ((i * 5) % 7) as f64 - 3.0).collect();
        let oracle = dense_kkt_oracle(&a, &c, &b);
        let scale = norm_inf(&oracle);
        for method in [SaddleMethod::DenseKkt, SaddleMethod::SchurCholesky] {
            let opts = SaddleOptions {
                method,
                ..Default::default()
            };
            let w = SaddleSystem::new(&a, &c, opts).unwrap().solve(&b).unwrap();
            let err = w.iter().zip(&oracle).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8 * scale, "{method:?}: {err}");
        }
    }
}
