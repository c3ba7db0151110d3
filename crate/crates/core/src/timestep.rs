//! Backward Euler for the linear problem and the linearized (semi-implicit) variant for
//! semilinear reaction terms. The same routine runs in the fine P1 space, a coarse P1
//! space, or a multiscale space; only the matrices and the optional lift to fine nodes
//! change.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{JacobiCg, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub tau: f64,
    pub n_steps: usize,
}

impl Schedule {
    pub fn new(tau: f64, n_steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || n_steps == 0 {
            return Err(Error::Domain(alloc::format!(
                "schedule needs tau > 0 and at least one step, got tau={tau}, n_steps={n_steps}"
            )));
        }
        Ok(Self { tau, n_steps })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.n_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    Fine,
    CoarseP1,
    Multiscale,
}

/// Matrices of one discrete space plus its lift to fine interior nodes.
#[derive(Debug, Clone, Copy)]
pub struct SpaceOperators<'a> {
    pub tag: SpaceTag,
    pub stiffness: &'a SparseMatrix,
    pub mass: &'a SparseMatrix,
    /// Fine interior nodes × space dofs; `None` when the space is the fine space.
    pub basis: Option<&'a SparseMatrix>,
}

impl SpaceOperators<'_> {
    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn lift(&self, coeffs: &[f64]) -> Vec<f64> {
        match self.basis {
            Some(b) => b.mul_vec(coeffs),
            None => coeffs.to_vec(),
        }
    }

    /// Test a fine-space load against the space's basis.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        match self.basis {
            Some(b) => b.transpose_mul_vec(fine),
            None => fine.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record every `stride`-th step in addition to the final one.
    pub record_stride: Option<usize>,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
            record_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub space: SpaceTag,
    /// `(t_n, U_n)` at the recorded steps.
    pub recorded: Vec<(f64, Vec<f64>)>,
    pub final_coeffs: Vec<f64>,
    /// Final state on the fine interior nodes.
    pub final_fine: Vec<f64>,
}

fn run(
    ops: &SpaceOperators<'_>,
    u0: &[f64],
    schedule: Schedule,
    options: StepOptions,
    mut load: impl FnMut(usize, &[f64]) -> Result<Vec<f64>>,
) -> Result<Trajectory> {
    let n = ops.dim();
    if u0.len() != n || ops.mass.nrows() != n {
        return Err(Error::Domain(alloc::format!(
            "initial vector of length {} for a space of dimension {n}",
            u0.len()
        )));
    }
    let system = ops.mass.add_scaled(schedule.tau, ops.stiffness);
    let solver = JacobiCg::new(&system, options.tol, options.max_iter)?;

    let mut u = u0.to_vec();
    let mut recorded = Vec::new();
    let mut rhs = vec![0.0; n];
    for step in 1..=schedule.n_steps {
        let b = load(step, &u)?;
        ops.mass.mul_vec_into(&u, &mut rhs);
        rhs.iter_mut().zip(&b).for_each(|(r, bi)| *r += schedule.tau * bi);
        let (next, _) = solver
            .solve_from(&rhs, u.clone())
            .map_err(|e| e.at_step(step))?;
        u = next;
        if options.record_stride.is_some_and(|s| s > 0 && step % s == 0) || step == schedule.n_steps {
            recorded.push((schedule.time(step), u.clone()));
        }
    }
    Ok(Trajectory {
        space: ops.tag,
        final_fine: ops.lift(&u),
        final_coeffs: u,
        recorded,
    })
}

/// `(M + τK) U_n = M U_{n−1} + τ b_n`, with `load(n, t_n)` returning `b_n` in the
/// space's own coordinates.
pub fn backward_euler_linear(
    ops: &SpaceOperators<'_>,
    mut load: impl FnMut(usize, f64) -> Vec<f64>,
    u0: &[f64],
    schedule: Schedule,
    options: StepOptions,
) -> Result<Trajectory> {
    run(ops, u0, schedule, options, |step, _| {
        let b = load(step, schedule.time(step));
        if b.len() != ops.dim() {
            return Err(Error::Domain(alloc::format!(
                "load of length {} for a space of dimension {}",
                b.len(),
                ops.dim()
            )));
        }
        Ok(b)
    })
}

/// `(M + τK) U_n = M U_{n−1} + τ Bᵀ M_h f(B U_{n−1})`: the reaction term is applied
/// nodewise on the fine lift and integrated with the fine interior mass matrix.
pub fn backward_euler_semilinear(
    ops: &SpaceOperators<'_>,
    fine_mass: &SparseMatrix,
    f: impl Fn(f64) -> f64,
    u0: &[f64],
    schedule: Schedule,
    options: StepOptions,
) -> Result<Trajectory> {
    run(ops, u0, schedule, options, |step, u| {
        let mut fu = ops.lift(u);
        for v in fu.iter_mut() {
            *v = f(*v);
            if !v.is_finite() {
                return Err(Error::BlowUp { step });
            }
        }
        Ok(ops.restrict(&fine_mass.mul_vec(&fu)))
    })
}

/// Allen–Cahn reaction `f(u) = −(u³ − u)`.
pub fn allen_cahn(u: f64) -> f64 {
    -(u * u * u - u)
}
