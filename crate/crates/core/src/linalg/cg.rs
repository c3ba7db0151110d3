use alloc::vec;
use alloc::vec::Vec;

use super::sparse::{dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for a fixed SPD matrix.
///
/// The inverse diagonal is computed once, so the same instance can be reused for
/// many right-hand sides.
#[derive(Debug, Clone)]
pub struct JacobiCg<'a> {
    matrix: &'a SparseMatrix,
    inv_diag: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> JacobiCg<'a> {
    pub fn new(matrix: &'a SparseMatrix, tol: f64, max_iter: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Domain("CG needs a square matrix".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain("CG tolerance must be positive".into()));
        }
        let inv_diag = matrix
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::Singular(alloc::format!(
                        "nonpositive diagonal entry {d} in row {i}"
                    )))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            matrix,
            inv_diag,
            tol,
            max_iter,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.solve_from(b, vec![0.0; b.len()])
    }

    /// Solve starting from the initial guess `x`.
    pub fn solve_from(&self, b: &[f64], mut x: Vec<f64>) -> Result<(Vec<f64>, SolveReport)> {
        let a = self.matrix;
        a.check_square_for(b)?;
        a.check_square_for(&x)?;
        let n = b.len();
        let b_norm = norm2(b);
        if b_norm == 0.0 {
            return Ok((
                vec![0.0; n],
                SolveReport {
                    iterations: 0,
                    relative_residual: 0.0,
                    converged: true,
                },
            ));
        }

        let mut r = a.mul_vec(&x);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let mut rel = norm2(&r) / b_norm;
        if rel <= self.tol {
            return Ok((
                x,
                SolveReport {
                    iterations: 0,
                    relative_residual: rel,
                    converged: true,
                },
            ));
        }

        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(ri, d)| ri * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            a.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Singular(alloc::format!(
                    "CG search direction has nonpositive curvature {pap}"
                )));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rel = norm2(&r) / b_norm;
            if rel <= self.tol {
                // confirm against the true residual before accepting
                a.mul_vec_into(&x, &mut ap);
                r.iter_mut()
                    .zip(b.iter().zip(&ap))
                    .for_each(|(ri, (bi, axi))| *ri = bi - axi);
                rel = norm2(&r) / b_norm;
                if rel <= self.tol {
                    return Ok((
                        x,
                        SolveReport {
                            iterations,
                            relative_residual: rel,
                            converged: true,
                        },
                    ));
                }
                // restart from the true residual
                z.iter_mut()
                    .zip(r.iter().zip(&self.inv_diag))
                    .for_each(|(zi, (ri, d))| *zi = ri * d);
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
                continue;
            }
            z.iter_mut()
                .zip(r.iter().zip(&self.inv_diag))
                .for_each(|(zi, (ri, d))| *zi = ri * d);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
        Err(Error::NotConverged(SolveReport {
            iterations,
            relative_residual: rel,
            converged: false,
        }))
    }
}

/// Jacobi-preconditioned CG: `x` with `‖b − Ax‖₂ ≤ tol·‖b‖₂`, or
/// [`Error::NotConverged`] carrying the final report.
pub fn cg_solve(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    JacobiCg::new(a, tol, max_iter)?.solve(b)
}
