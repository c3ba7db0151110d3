//! Convergence experiments: a fine P1 reference, the localized multiscale method, and
//! the coarse P1 comparator, all stepped with the same backward Euler routine.

use rayon::prelude::*;

use lod_core::assembly::{assemble, clement, load_vector, prolongation, FemOperators};
use lod_core::coeff::CoeffField;
use lod_core::linalg::{l2_norm, JacobiCg, SaddleOptions, SparseMatrix};
use lod_core::lod::{build_space, compute_correctors, ms_initial_projection, CorrectorSet, GlobalCorrectors};
use lod_core::mesh::{build_mesh, build_pair, MeshPair, TriMesh};
use lod_core::order::fit_order;
use lod_core::timestep::{
    allen_cahn, backward_euler_linear, backward_euler_semilinear, Schedule, SpaceOperators, SpaceTag,
    StepOptions, Trajectory,
};

use crate::cache;
use crate::config::{ExperimentConfig, Problem};
use crate::error::{Result, StageExt};
use crate::report::{ConvergenceReport, LevelResult};

/// Shared fine-scale data for one experiment.
pub struct FineProblem {
    pub config: ExperimentConfig,
    pub field: CoeffField,
    pub mesh: TriMesh,
    pub fem: FemOperators,
    /// Initial data on the fine interior nodes.
    pub u0: Vec<f64>,
    /// Load of `f ≡ 1` on the fine interior nodes; `f(x, t) = t` scales it by `t`.
    unit_load: Vec<f64>,
}

impl FineProblem {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let field = config.coefficient.build()?;
        let mesh = build_mesh(config.fine_level).stage(|| "fine mesh".into())?;
        let fem = assemble(&mesh, &field).stage(|| "fine assembly".into())?;
        let u0 = match config.problem {
            // u0 = 1 interpolated, then clipped to zero on ∂Ω
            Problem::Linear => vec![1.0; mesh.num_interior()],
            Problem::Semilinear => mesh.interpolate_interior(|x, y| x * (1.0 - x) * y * (1.0 - y)),
        };
        let unit_load = load_vector(&fem, &vec![1.0; mesh.num_nodes()]);
        Ok(Self {
            config: config.clone(),
            field,
            mesh,
            fem,
            u0,
            unit_load,
        })
    }

    fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self.config.tau, self.config.n_steps).stage(|| "schedule".into())
    }

    fn step_options(&self) -> StepOptions {
        StepOptions {
            tol: self.config.step_tol,
            ..StepOptions::default()
        }
    }

    /// Run backward Euler in the given space, starting from coefficients `start`.
    pub fn evolve(&self, ops: &SpaceOperators<'_>, start: &[f64]) -> lod_core::Result<Trajectory> {
        let schedule = Schedule::new(self.config.tau, self.config.n_steps)?;
        match self.config.problem {
            Problem::Linear => backward_euler_linear(
                ops,
                |_, t| {
                    let fine: Vec<f64> = self.unit_load.iter().map(|v| t * v).collect();
                    ops.restrict(&fine)
                },
                start,
                schedule,
                self.step_options(),
            ),
            Problem::Semilinear => backward_euler_semilinear(
                ops,
                &self.fem.mass,
                allen_cahn,
                start,
                schedule,
                self.step_options(),
            ),
        }
    }

    pub fn reference(&self) -> Result<Trajectory> {
        self.schedule()?;
        let ops = SpaceOperators {
            tag: SpaceTag::Fine,
            stiffness: &self.fem.stiffness,
            mass: &self.fem.mass,
            basis: None,
        };
        self.evolve(&ops, &self.u0).stage(|| "fine reference".into())
    }

    pub fn relative_error(&self, approx: &[f64], reference: &[f64]) -> Result<f64> {
        let diff: Vec<f64> = approx.iter().zip(reference).map(|(a, b)| a - b).collect();
        let num = l2_norm(&self.fem.mass, &diff)?;
        let den = l2_norm(&self.fem.mass, reference)?;
        Ok(num / den)
    }

    pub fn saddle_options(&self) -> SaddleOptions {
        SaddleOptions {
            cg_tol: self.config.corrector_tol,
            ..SaddleOptions::default()
        }
    }

    /// Correctors for one coarse level, through the cache when configured.
    pub fn correctors(&self, pair: &MeshPair, k: usize) -> lod_core::Result<CorrectorSet> {
        let key = cache::cache_key(pair.coarse().level(), pair.fine().level(), k, &self.field);
        if let Some(dir) = &self.config.cache_dir {
            if let Some(set) = cache::load(dir, &key) {
                log::info!("level {}: correctors loaded from cache", pair.coarse().level());
                return Ok(set);
            }
        }
        let cl = clement(pair, &self.fem);
        let set = compute_correctors(pair, &self.fem, &cl, k, self.saddle_options())?;
        if let Some(dir) = &self.config.cache_dir {
            if let Err(e) = cache::store(dir, &key, &set) {
                log::warn!("could not write corrector cache: {e}");
            }
        }
        Ok(set)
    }

    /// Final-time fine representation of the multiscale solution on `level` with patch size `k`.
    pub fn multiscale_solution(&self, level: u32, k: usize) -> Result<Vec<f64>> {
        let stage = |what: &str| format!("level {level} (k = {k}): {what}");
        let pair = build_pair(level, self.config.fine_level).stage(|| stage("mesh pair"))?;
        let set = self.correctors(&pair, k).stage(|| stage("correctors"))?;
        let space = build_space(&set, &pair, &self.fem).stage(|| stage("multiscale space"))?;
        let start = ms_initial_projection(&space, &self.fem, &self.u0).stage(|| stage("initial projection"))?;
        let ops = SpaceOperators {
            tag: SpaceTag::Multiscale,
            stiffness: &space.ms_stiffness,
            mass: &space.ms_mass,
            basis: Some(&space.basis),
        };
        Ok(self.evolve(&ops, &start).stage(|| stage("multiscale time stepping"))?.final_fine)
    }

    /// Final-time fine representation of the coarse P1 solution, with coarse operators
    /// `Eᵀ K_h E`, `Eᵀ M_h E` from the P1 prolongation `E`.
    pub fn coarse_p1_solution(&self, level: u32) -> Result<Vec<f64>> {
        let stage = |what: &str| format!("level {level}: coarse P1 {what}");
        let pair = build_pair(level, self.config.fine_level).stage(|| stage("mesh pair"))?;
        let e = prolongation(&pair);
        let et = e.transpose();
        let stiffness = et.matmul(&self.fem.stiffness.matmul(&e));
        let mass = et.matmul(&self.fem.mass.matmul(&e));
        let start = solve_spd(&mass, &et.mul_vec(&self.fem.mass.mul_vec(&self.u0)))
            .stage(|| stage("initial projection"))?;
        let ops = SpaceOperators {
            tag: SpaceTag::CoarseP1,
            stiffness: &stiffness,
            mass: &mass,
            basis: Some(&e),
        };
        Ok(self.evolve(&ops, &start).stage(|| stage("time stepping"))?.final_fine)
    }
}

fn solve_spd(a: &SparseMatrix, b: &[f64]) -> lod_core::Result<Vec<f64>> {
    Ok(JacobiCg::new(a, 1e-12, 20 * b.len() + 200)?.solve(b)?.0)
}

/// Run the fine reference, then every coarse level of the schedule.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let fine = FineProblem::new(config)?;
    log::info!(
        "fine level {}: {} interior nodes, coefficient contrast {:.3e}",
        config.fine_level,
        fine.mesh.num_interior(),
        fine.field.contrast()
    );
    let reference = fine.reference()?;

    let levels: Vec<(u32, usize)> = config
        .coarse_levels
        .iter()
        .copied()
        .zip(config.k_schedule.iter().copied())
        .collect();
    let results: Vec<LevelResult> = levels
        .par_iter()
        .map(|&(level, k)| {
            let lod = fine.multiscale_solution(level, k)?;
            let p1 = fine.coarse_p1_solution(level)?;
            let row = LevelResult {
                level,
                h: std::f64::consts::SQRT_2 / (1u64 << level) as f64,
                dofs: ((1usize << level) - 1).pow(2),
                k,
                rel_err_lod: fine.relative_error(&lod, &reference.final_fine)?,
                rel_err_p1: fine.relative_error(&p1, &reference.final_fine)?,
            };
            log::info!(
                "level {level} (k = {k}): lod {:.4e}, p1 {:.4e}",
                row.rel_err_lod,
                row.rel_err_p1
            );
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let fit = |sel: fn(&LevelResult) -> f64| -> Result<f64> {
        if results.len() < 2 {
            return Ok(f64::NAN);
        }
        let pairs: Vec<(f64, f64)> = results.iter().map(|r| (r.h, sel(r))).collect();
        fit_order(&pairs).stage(|| "order fit".into())
    };
    Ok(ConvergenceReport {
        order_lod: fit(|r| r.rel_err_lod)?,
        order_p1: fit(|r| r.rel_err_p1)?,
        levels: results,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub k: usize,
    /// `‖φ_x − φ_{k,x}‖_A`.
    pub energy_error: f64,
    /// Energy error relative to `‖φ_x‖_A`.
    pub relative: f64,
}

/// Localization error of the corrector of one interior coarse node for `k = 1..=k_max`.
pub fn corrector_decay(
    config: &ExperimentConfig,
    coarse_level: u32,
    node: Option<usize>,
    k_max: usize,
) -> Result<(usize, Vec<DecayRow>)> {
    let fine = FineProblem::new(config)?;
    let pair = build_pair(coarse_level, config.fine_level).stage(|| "decay: mesh pair".into())?;
    let coarse = pair.coarse();
    let node = match node {
        Some(n) if n < coarse.num_nodes() && !coarse.is_boundary(n) => n,
        Some(n) => {
            return Err(crate::error::Error::Invalid(format!(
                "node {n} is not an interior coarse node"
            )))
        }
        // the interior node nearest to (1/4, 1/4)
        None => {
            let q = coarse.cells_per_side() / 4;
            coarse.node_at(q.max(1), q.max(1))
        }
    };
    let cl = clement(&pair, &fine.fem);
    let global = GlobalCorrectors::new(&pair, &fine.fem, &cl, fine.saddle_options())
        .stage(|| "decay: global corrector system".into())?;
    let exact = global.node_corrector(node).stage(|| "decay: global corrector".into())?;
    let scale = lod_core::linalg::energy_norm(&fine.fem.stiffness, &exact)?;
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let set = compute_correctors(&pair, &fine.fem, &cl, k, fine.saddle_options())
            .stage(|| format!("decay: correctors k = {k}"))?;
        let local = set.node_corrector(&pair, node);
        let diff: Vec<f64> = exact.iter().zip(&local).map(|(a, b)| a - b).collect();
        let err = lod_core::linalg::energy_norm(&fine.fem.stiffness, &diff)?;
        log::info!("decay k = {k}: {err:.4e}");
        rows.push(DecayRow {
            k,
            energy_error: err,
            relative: err / scale,
        });
    }
    Ok((node, rows))
}
