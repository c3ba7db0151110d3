//! Localized element correctors and the multiscale space they span.
//!
//! For each coarse element `K`, patch `ω_k(K)`, and vertex hat `φ_x` of `K`, the
//! corrector `w = R_{K,k} φ_x` solves
//!
//! ```text
//! a_ω(w, v) = a_K(φ_x, v)   for all v ∈ V_h(ω) with I_H v = 0
//! ```
//!
//! with homogeneous Dirichlet data on the patch boundary. The kernel constraint is
//! imposed with Lagrange multipliers on the Clément rows. The multiscale basis
//! function of an interior coarse node is `φ_x − Σ_K R_{K,k} φ_x`.
//!
//! Element correctors are collected per element and summed in ascending element
//! order, so the basis does not depend on how the patch problems were scheduled.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::assembly::{element_stiffness, prolongation, ClementMatrix, FemOperators};
use crate::error::{Error, Result};
use crate::linalg::{JacobiCg, SaddleOptions, SaddleSystem, SparseMatrix};
use crate::mesh::{barycentric, MeshPair};

/// Sparse vector over fine interior indices, indices ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.add_to(&mut out, 1.0);
        out
    }

    pub fn add_to(&self, out: &mut [f64], scale: f64) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] += scale * v;
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Element correctors `R_{K,k} φ_x` for every coarse element and local vertex.
/// Entries for vertices on `∂Ω` are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorSet {
    pub coarse_level: u32,
    pub fine_level: u32,
    pub k: usize,
    pub correctors: Vec<[Option<SparseVec>; 3]>,
}

impl CorrectorSet {
    /// `φ_{k,x} = Σ_K R_{K,k} φ_x` as a dense fine interior vector.
    pub fn node_corrector(&self, pair: &MeshPair, coarse_node: usize) -> Vec<f64> {
        let mut out = vec![0.0; pair.fine().num_interior()];
        for &e in pair.coarse().node_elements(coarse_node) {
            let local = local_vertex(pair, e, coarse_node);
            if let Some(w) = &self.correctors[e][local] {
                w.add_to(&mut out, 1.0);
            }
        }
        out
    }
}

fn local_vertex(pair: &MeshPair, element: usize, node: usize) -> usize {
    pair.coarse().elements()[element]
        .iter()
        .position(|&v| v == node)
        .expect("node is a vertex of the element")
}

/// `a_K(φ_x, φ_i)` for the fine nodes `i` of coarse element `K`, with `x` its
/// `local`-th vertex. Returned as `(fine node, value)` sorted by node.
pub fn element_load(pair: &MeshPair, fem: &FemOperators, element: usize, local: usize) -> Vec<(usize, f64)> {
    let fine = pair.fine();
    let tri = pair.coarse().element_vertices(element);
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for &fe in pair.children(element) {
        let nodes = fine.elements()[fe];
        let verts = fine.element_vertices(fe);
        let ke = element_stiffness(&verts, fem.element_coeff[fe]);
        let hat = verts.map(|p| barycentric(&tri, p)[local]);
        for a in 0..3 {
            let v: f64 = (0..3).map(|b| ke[a][b] * hat[b]).sum();
            *acc.entry(nodes[a]).or_insert(0.0) += v;
        }
    }
    acc.into_iter().collect()
}

/// Clément rows that can touch a patch: interior coarse vertices of its elements.
fn candidate_rows(pair: &MeshPair, coarse_elements: &[usize]) -> Vec<usize> {
    let coarse = pair.coarse();
    let mut rows: Vec<usize> = coarse_elements
        .iter()
        .flat_map(|&e| coarse.elements()[e])
        .filter_map(|v| coarse.interior_index(v))
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Greedy maximal independent subset of the rows of `c`, in ascending order.
///
/// Near a domain corner with `H/h = 2`, two Clément rows restricted to a patch can be
/// proportional. The constraint `C w = 0` is homogeneous, so dropping such rows leaves
/// the feasible set unchanged. Works on the Gram matrix `C Cᵀ` with an incremental
/// Cholesky; a row is dependent when its squared residual falls below
/// `DEPENDENT_ROW_TOL` times its squared norm.
pub fn independent_rows(c: &SparseMatrix) -> Vec<usize> {
    let gram = c.matmul(&c.transpose()).to_dense();
    let m = gram.nrows();
    let mut kept: Vec<usize> = Vec::new();
    // rows of the Cholesky factor for the kept rows, indexed by position in `kept`
    let mut l: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let gii = gram[(i, i)];
        if gii <= 0.0 {
            continue;
        }
        let mut row = Vec::with_capacity(kept.len() + 1);
        for (a, &j) in kept.iter().enumerate() {
            let s: f64 = (0..a).map(|b| row[b] * l[a][b]).sum();
            row.push((gram[(i, j)] - s) / l[a][a]);
        }
        let d = gii - row.iter().map(|v| v * v).sum::<f64>();
        if d <= DEPENDENT_ROW_TOL * gii {
            continue;
        }
        row.push(libm::sqrt(d));
        l.push(row);
        kept.push(i);
    }
    kept
}

pub const DEPENDENT_ROW_TOL: f64 = 1e-10;

struct PatchGroup {
    coarse_elements: Vec<usize>,
    fine_nodes: Vec<usize>,
    members: Vec<usize>,
}

fn solve_group(
    pair: &MeshPair,
    fem: &FemOperators,
    clement: &ClementMatrix,
    group: &PatchGroup,
    options: SaddleOptions,
) -> Result<Vec<(usize, [Option<SparseVec>; 3])>> {
    let fine = pair.fine();
    let coarse = pair.coarse();
    let interior: Vec<usize> = group
        .fine_nodes
        .iter()
        .map(|&n| fine.interior_index(n).expect("patch nodes are interior"))
        .collect();

    let empty = |e: usize| -> [Option<SparseVec>; 3] {
        coarse.elements()[e].map(|v| (!coarse.is_boundary(v)).then(SparseVec::default))
    };
    if interior.is_empty() {
        return Ok(group.members.iter().map(|&e| (e, empty(e))).collect());
    }

    let a = fem.stiffness.submatrix(&interior, &interior);
    let c = clement
        .matrix
        .submatrix(&candidate_rows(pair, &group.coarse_elements), &interior);
    let rows = independent_rows(&c);
    let c = if rows.len() < c.nrows() {
        let all: Vec<usize> = (0..c.ncols()).collect();
        c.submatrix(&rows, &all)
    } else {
        c
    };
    let system = SaddleSystem::new(&a, &c, options)
        .map_err(|e| e.at_element(group.members[0]))?;

    let mut position = BTreeMap::new();
    for (p, &n) in group.fine_nodes.iter().enumerate() {
        position.insert(n, p);
    }

    let mut out = Vec::with_capacity(group.members.len());
    let mut rhs = vec![0.0; interior.len()];
    for &e in &group.members {
        let mut slots = empty(e);
        for (local, slot) in slots.iter_mut().enumerate() {
            if slot.is_none() {
                continue;
            }
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for (node, v) in element_load(pair, fem, e, local) {
                if let Some(&p) = position.get(&node) {
                    rhs[p] = v;
                }
            }
            let w = system.solve(&rhs).map_err(|err| err.at_element(e))?;
            *slot = Some(SparseVec {
                indices: interior.clone(),
                values: w,
            });
        }
        out.push((e, slots));
    }
    Ok(out)
}

/// Solve all element corrector problems on patches `ω_k(K)`.
///
/// Elements whose patches coincide (always the case once `k` saturates) share one
/// factorization.
pub fn compute_correctors(
    pair: &MeshPair,
    fem: &FemOperators,
    clement: &ClementMatrix,
    k: usize,
    options: SaddleOptions,
) -> Result<CorrectorSet> {
    let mut by_patch: BTreeMap<Vec<usize>, PatchGroup> = BTreeMap::new();
    for e in 0..pair.coarse().num_elements() {
        let patch = pair.patch(e, k)?;
        by_patch
            .entry(patch.coarse_elements.clone())
            .or_insert_with(|| PatchGroup {
                coarse_elements: patch.coarse_elements,
                fine_nodes: patch.fine_nodes,
                members: Vec::new(),
            })
            .members
            .push(e);
    }
    let groups: Vec<PatchGroup> = by_patch.into_values().collect();

    #[cfg(feature = "parallel")]
    let solved: Vec<_> = groups
        .par_iter()
        .map(|g| solve_group(pair, fem, clement, g, options))
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let solved: Vec<_> = groups
        .iter()
        .map(|g| solve_group(pair, fem, clement, g, options))
        .collect::<Result<_>>()?;

    let mut correctors = vec![[None, None, None]; pair.coarse().num_elements()];
    for (e, slots) in solved.into_iter().flatten() {
        correctors[e] = slots;
    }
    Ok(CorrectorSet {
        coarse_level: pair.coarse().level(),
        fine_level: pair.fine().level(),
        k,
        correctors,
    })
}

/// Unlocalized correctors: the corrector problem posed on the whole domain.
pub struct GlobalCorrectors<'a> {
    pair: &'a MeshPair,
    fem: &'a FemOperators,
    system: SaddleSystem<'a>,
}

impl<'a> GlobalCorrectors<'a> {
    pub fn new(
        pair: &'a MeshPair,
        fem: &'a FemOperators,
        clement: &ClementMatrix,
        options: SaddleOptions,
    ) -> Result<Self> {
        let system = SaddleSystem::new(&fem.stiffness, &clement.matrix, options)?;
        Ok(Self { pair, fem, system })
    }

    /// `R^f_K φ_x` for the `local`-th vertex of coarse element `K`.
    pub fn element_corrector(&self, element: usize, local: usize) -> Result<Vec<f64>> {
        let fine = self.pair.fine();
        let mut rhs = vec![0.0; fine.num_interior()];
        for (node, v) in element_load(self.pair, self.fem, element, local) {
            if let Some(i) = fine.interior_index(node) {
                rhs[i] = v;
            }
        }
        self.system.solve(&rhs)
    }

    /// `φ_x = R^f φ_x` for an interior coarse node.
    pub fn node_corrector(&self, coarse_node: usize) -> Result<Vec<f64>> {
        let fine = self.pair.fine();
        let mut hat = vec![0.0; fine.num_interior()];
        for (p, v) in self.pair.coarse_hat_on_fine(coarse_node) {
            if let Some(i) = fine.interior_index(p) {
                hat[i] = v;
            }
        }
        self.system.solve(&self.fem.stiffness.mul_vec(&hat))
    }
}

/// The localized multiscale space `V^ms_k`, represented through its basis over the
/// fine interior nodes.
#[derive(Debug, Clone)]
pub struct MultiscaleSpace {
    pub k: usize,
    /// `Bᵀ`: one row per interior coarse node.
    pub basis_t: SparseMatrix,
    /// `B`: fine interior nodes × basis functions.
    pub basis: SparseMatrix,
    pub ms_stiffness: SparseMatrix,
    pub ms_mass: SparseMatrix,
}

fn symmetrize(a: &SparseMatrix) -> SparseMatrix {
    a.add_scaled(1.0, &a.transpose()).scaled(0.5)
}

/// Assemble `φ_x − Σ_K R_{K,k} φ_x` for each interior coarse node and the projected
/// operators `Bᵀ K_h B`, `Bᵀ M_h B`.
pub fn build_space(correctors: &CorrectorSet, pair: &MeshPair, fem: &FemOperators) -> Result<MultiscaleSpace> {
    if correctors.coarse_level != pair.coarse().level() || correctors.fine_level != pair.fine().level() {
        return Err(Error::Config(alloc::format!(
            "correctors for levels ({}, {}) used with mesh pair ({}, {})",
            correctors.coarse_level,
            correctors.fine_level,
            pair.coarse().level(),
            pair.fine().level()
        )));
    }
    let coarse = pair.coarse();
    let hats = prolongation(pair).transpose();
    let mut triplets = Vec::new();
    for r in 0..hats.nrows() {
        triplets.extend(hats.row(r).map(|(j, v)| (r, j, v)));
    }
    for (e, slots) in correctors.correctors.iter().enumerate() {
        for (local, slot) in slots.iter().enumerate() {
            if let Some(w) = slot {
                let row = coarse
                    .interior_index(coarse.elements()[e][local])
                    .expect("correctors exist only for interior vertices");
                triplets.extend(w.indices.iter().zip(&w.values).map(|(&j, &v)| (row, j, -v)));
            }
        }
    }
    let basis_t = SparseMatrix::from_triplets(hats.nrows(), hats.ncols(), triplets);
    Ok(space_from_basis(basis_t, fem, correctors.k))
}

/// Multiscale space for an arbitrary basis given as rows over fine interior nodes.
pub fn space_from_basis(basis_t: SparseMatrix, fem: &FemOperators, k: usize) -> MultiscaleSpace {
    let basis = basis_t.transpose();
    let ms_stiffness = symmetrize(&basis_t.matmul(&fem.stiffness.matmul(&basis)));
    let ms_mass = symmetrize(&basis_t.matmul(&fem.mass.matmul(&basis)));
    MultiscaleSpace {
        k,
        basis_t,
        basis,
        ms_stiffness,
        ms_mass,
    }
}

impl MultiscaleSpace {
    pub fn dim(&self) -> usize {
        self.basis_t.nrows()
    }

    /// Fine interior representation `B c`.
    pub fn lift(&self, coeffs: &[f64]) -> Vec<f64> {
        self.basis.mul_vec(coeffs)
    }

    /// `Bᵀ v`: tests a fine-space functional against the basis.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        self.basis_t.mul_vec(fine)
    }
}

const PROJECTION_TOL: f64 = 1e-12;

fn solve_spd(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let cg = JacobiCg::new(a, PROJECTION_TOL, 20 * b.len() + 200)?;
    Ok(cg.solve(b)?.0)
}

/// Ritz projection `R^ms_k v` onto the multiscale space, returned on the fine nodes.
pub fn ms_ritz_project(space: &MultiscaleSpace, fem: &FemOperators, v: &[f64]) -> Result<Vec<f64>> {
    let rhs = space.restrict(&fem.stiffness.mul_vec(v));
    Ok(space.lift(&solve_spd(&space.ms_stiffness, &rhs)?))
}

/// L2 projection `P^ms_k u0`, returned as basis coefficients.
pub fn ms_initial_projection(space: &MultiscaleSpace, fem: &FemOperators, u0: &[f64]) -> Result<Vec<f64>> {
    let rhs = space.restrict(&fem.mass.mul_vec(u0));
    solve_spd(&space.ms_mass, &rhs)
}
