//! P1 assembly on a [`TriMesh`], the weighted Clément quasi-interpolation matrix, and
//! coarse-to-fine transfer operators for a [`MeshPair`].
//!
//! Interior operators are indexed by position in [`TriMesh::interior_nodes`]
//! (homogeneous Dirichlet conditions); "full" operators cover every node.

use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::CoeffField;
use crate::error::Result;
use crate::linalg::{JacobiCg, SparseMatrix};
use crate::mesh::{MeshPair, Point, TriMesh};

pub type ElementMatrix = [[f64; 3]; 3];

/// Exact P1 stiffness of one triangle for a constant scalar coefficient.
pub fn element_stiffness(vertices: &[Point; 3], coeff: f64) -> ElementMatrix {
    let [p0, p1, p2] = *vertices;
    let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * area2;
    let grads = [
        [(p1[1] - p2[1]) / area2, (p2[0] - p1[0]) / area2],
        [(p2[1] - p0[1]) / area2, (p0[0] - p2[0]) / area2],
        [(p0[1] - p1[1]) / area2, (p1[0] - p0[0]) / area2],
    ];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = coeff * area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
        }
    }
    k
}

/// Exact P1 mass of one triangle: `area/12 · [2 1 1; 1 2 1; 1 1 2]`.
pub fn element_mass(vertices: &[Point; 3]) -> ElementMatrix {
    let [p0, p1, p2] = *vertices;
    let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

#[derive(Debug, Clone)]
pub struct FemOperators {
    /// Stiffness over interior nodes.
    pub stiffness: SparseMatrix,
    /// Mass over interior nodes.
    pub mass: SparseMatrix,
    /// Mass over all nodes.
    pub full_mass: SparseMatrix,
    /// Stiffness over all nodes, before Dirichlet elimination.
    pub full_stiffness: SparseMatrix,
    /// Rows of `full_mass` at interior nodes: maps nodal values on all nodes to
    /// interior load entries.
    pub load_mass: SparseMatrix,
    /// Coefficient value on each element.
    pub element_coeff: Vec<f64>,
}

pub fn assemble(mesh: &TriMesh, field: &CoeffField) -> Result<FemOperators> {
    field.check_resolved_by(mesh)?;
    let n = mesh.num_nodes();
    let mut k_trip = Vec::with_capacity(9 * mesh.num_elements());
    let mut m_trip = Vec::with_capacity(9 * mesh.num_elements());
    let mut element_coeff = Vec::with_capacity(mesh.num_elements());
    for (e, tri) in mesh.elements().iter().enumerate() {
        let verts = mesh.element_vertices(e);
        let c = field.value_at(mesh.centroid(e))?;
        element_coeff.push(c);
        let ke = element_stiffness(&verts, c);
        let me = element_mass(&verts);
        for a in 0..3 {
            for b in 0..3 {
                k_trip.push((tri[a], tri[b], ke[a][b]));
                m_trip.push((tri[a], tri[b], me[a][b]));
            }
        }
    }
    let full_stiffness = SparseMatrix::from_triplets(n, n, k_trip);
    let full_mass = SparseMatrix::from_triplets(n, n, m_trip);
    let interior = mesh.interior_nodes();
    let all: Vec<usize> = (0..n).collect();
    Ok(FemOperators {
        stiffness: full_stiffness.submatrix(interior, interior),
        mass: full_mass.submatrix(interior, interior),
        load_mass: full_mass.submatrix(interior, &all),
        full_mass,
        full_stiffness,
        element_coeff,
    })
}

/// Load vector `(f, φ_i)` over interior nodes from nodal values of `f` on all nodes,
/// integrated as mass matrix times interpolant.
pub fn load_vector(fem: &FemOperators, nodal: &[f64]) -> Vec<f64> {
    fem.load_mass.mul_vec(nodal)
}

/// [`load_vector`] for a function evaluated at the mesh nodes.
pub fn load_from_fn(mesh: &TriMesh, fem: &FemOperators, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    load_vector(fem, &mesh.interpolate(f))
}

/// Weighted Clément interpolation `(I_H v)(x) = (∫ v φ_x)/(∫ φ_x)` for interior coarse
/// nodes `x`, acting on fine-node vectors.
#[derive(Debug, Clone)]
pub struct ClementMatrix {
    /// Coarse interior nodes × fine interior nodes.
    pub matrix: SparseMatrix,
    /// Coarse interior nodes × all fine nodes.
    pub full: SparseMatrix,
    /// `∫ φ_x` per coarse interior node.
    pub weights: Vec<f64>,
}

pub fn clement(pair: &MeshPair, fem: &FemOperators) -> ClementMatrix {
    let coarse = pair.coarse();
    let fine = pair.fine();
    let nf = fine.num_nodes();
    let mut acc = vec![0.0; nf];
    let mut full_rows = Vec::with_capacity(coarse.num_interior());
    let mut rows = Vec::with_capacity(coarse.num_interior());
    let mut weights = Vec::with_capacity(coarse.num_interior());
    for &x in coarse.interior_nodes() {
        // ∫ φ_i φ_x = (M_full · hat_x)_i since φ_x is exactly a fine-space function
        let hat = pair.coarse_hat_on_fine(x);
        let mut touched = Vec::new();
        for &(p, hp) in &hat {
            for (q, m) in fem.full_mass.row(p) {
                if acc[q] == 0.0 {
                    touched.push(q);
                }
                acc[q] += m * hp;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let weight: f64 = touched.iter().map(|&q| acc[q]).sum();
        let full_row: Vec<(usize, f64)> = touched.iter().map(|&q| (q, acc[q] / weight)).collect();
        for &q in &touched {
            acc[q] = 0.0;
        }
        rows.push(
            full_row
                .iter()
                .filter_map(|&(q, v)| fine.interior_index(q).map(|i| (i, v)))
                .collect(),
        );
        full_rows.push(full_row);
        weights.push(weight);
    }
    ClementMatrix {
        matrix: SparseMatrix::from_rows(fine.num_interior(), rows),
        full: SparseMatrix::from_rows(nf, full_rows),
        weights,
    }
}

/// P1 prolongation: fine interior nodes × coarse interior nodes, column `x` holding the
/// coarse hat `φ_x` evaluated at the fine nodes.
pub fn prolongation(pair: &MeshPair) -> SparseMatrix {
    let fine = pair.fine();
    let mut triplets = Vec::new();
    for (col, &x) in pair.coarse().interior_nodes().iter().enumerate() {
        for (p, v) in pair.coarse_hat_on_fine(x) {
            if let Some(i) = fine.interior_index(p) {
                triplets.push((i, col, v));
            }
        }
    }
    SparseMatrix::from_triplets(fine.num_interior(), pair.coarse().num_interior(), triplets)
}

/// L2 projection of fine interior vectors onto the coarse P1 space:
/// solves `M_H c = M_Hh v`.
#[derive(Debug, Clone)]
pub struct CoarseProjector {
    mixed: SparseMatrix,
    coarse_mass: SparseMatrix,
    pub tol: f64,
}

pub fn l2_project_coarse(pair: &MeshPair, fine: &FemOperators, coarse: &FemOperators) -> CoarseProjector {
    let e = prolongation(pair);
    CoarseProjector {
        mixed: e.transpose().matmul(&fine.mass),
        coarse_mass: coarse.mass.clone(),
        tol: 1e-13,
    }
}

impl CoarseProjector {
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.mixed.mul_vec(v);
        let cg = JacobiCg::new(&self.coarse_mass, self.tol, 10 * rhs.len() + 100)?;
        Ok(cg.solve(&rhs)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{constant_field, random_field};
    use crate::mesh::{build_mesh, build_pair};

    #[test]
    fn five_point_stencil() {
        // oracle: sum the element matrices touching the center node by hand
        let mesh = build_mesh(3).unwrap();
        let center = mesh.node_at(4, 4);
        let mut row = vec![0.0; mesh.num_nodes()];
        for &e in mesh.node_elements(center) {
            let tri = mesh.elements()[e];
            let k = element_stiffness(&mesh.element_vertices(e), 1.0);
            let a = tri.iter().position(|&v| v == center).unwrap();
            for b in 0..3 {
                row[tri[b]] += k[a][b];
            }
        }
        let fem = assemble(&mesh, &constant_field(1.0).unwrap()).unwrap();
        let ci = mesh.interior_index(center).unwrap();
        let mut nnz = 0;
        for (j, v) in fem.stiffness.row(ci) {
            let node = mesh.interior_nodes()[j];
            assert!((v - row[node]).abs() < 1e-14);
            if v.abs() > 1e-14 {
                nnz += 1;
            }
        }
        assert_eq!(nnz, 5);
        assert!((fem.stiffness.get(ci, ci) - 4.0).abs() < 1e-14);
        for (di, dj) in [(1, 0), (0, 1)] {
            let nb = mesh.interior_index(mesh.node_at(4 + di, 4 + dj)).unwrap();
            assert!((fem.stiffness.get(ci, nb) + 1.0).abs() < 1e-14);
        }
        let diag = mesh.interior_index(mesh.node_at(5, 5)).unwrap();
        assert!(fem.stiffness.get(ci, diag).abs() < 1e-14);
    }

    #[test]
    fn constant_scaling() {
        let mesh = build_mesh(3).unwrap();
        let k1 = assemble(&mesh, &constant_field(1.0).unwrap()).unwrap().stiffness;
        let k2 = assemble(&mesh, &constant_field(2.0).unwrap()).unwrap().stiffness;
        for (a, b) in k1.values().iter().zip(k2.values()) {
            assert!((2.0 * a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }
    }

    #[test]
    fn full_mass_total_is_area() {
        for level in 1..=5 {
            let mesh = build_mesh(level).unwrap();
            let fem = assemble(&mesh, &constant_field(1.0).unwrap()).unwrap();
            let total: f64 = fem.full_mass.row_sums().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_stiffness_kills_constants() {
        let mesh = build_mesh(4).unwrap();
        let field = random_field(2, 0.1, 10.0, 3).unwrap();
        let fem = assemble(&mesh, &field).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        assert!(fem.full_stiffness.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        let restricted = fem.stiffness.mul_vec(&vec![1.0; mesh.num_interior()]);
        assert!(restricted.iter().any(|v| v.abs() > 1e-3));
        assert!(fem.stiffness.is_symmetric() && fem.mass.is_symmetric());
    }

    #[test]
    fn too_coarse_for_field() {
        let mesh = build_mesh(2).unwrap();
        let field = random_field(3, 0.1, 10.0, 3).unwrap();
        assert!(matches!(assemble(&mesh, &field), Err(crate::Error::Config(_))));
    }

    #[test]
    fn load_vectors() {
        let mesh = build_mesh(5).unwrap();
        let fem = assemble(&mesh, &constant_field(1.0).unwrap()).unwrap();
        assert!(load_from_fn(&mesh, &fem, |_, _| 0.0).iter().all(|&v| v == 0.0));
        let t = 0.37;
        let load = load_from_fn(&mesh, &fem, |_, _| t);
        let sums = fem.load_mass.row_sums();
        for (l, s) in load.iter().zip(&sums) {
            assert!((l - t * s).abs() < 1e-15);
        }
        let bubble: f64 = load_from_fn(&mesh, &fem, |x, y| x * (1.0 - x) * y * (1.0 - y)).iter().sum();
        assert!((bubble - 1.0 / 36.0).abs() < 2e-3);
    }

    #[test]
    fn l2_norms_of_interpolants() {
        let mesh = build_mesh(5).unwrap();
        let fem = assemble(&mesh, &constant_field(1.0).unwrap()).unwrap();
        let one = mesh.interpolate(|_, _| 1.0);
        assert!((crate::linalg::l2_norm(&fem.full_mass, &one).unwrap() - 1.0).abs() < 1e-12);
        let x = mesh.interpolate(|x, _| x);
        let nx = crate::linalg::l2_norm(&fem.full_mass, &x).unwrap();
        assert!((nx - (1.0f64 / 3.0).sqrt()).abs() < 1e-3);
        let ex = crate::linalg::energy_norm(&fem.full_stiffness, &x).unwrap();
        assert!((ex - 1.0).abs() < 1e-12);
        assert!(crate::linalg::energy_norm(&fem.full_stiffness, &one).unwrap() < 1e-7);
    }

    #[test]
    fn clement_closed_form_on_level_pair() {
        // pair (1, 2): the only interior coarse node is the center (0.5, 0.5)
        let pair = build_pair(1, 2).unwrap();
        let fem = assemble(pair.fine(), &constant_field(1.0).unwrap()).unwrap();
        let cl = clement(&pair, &fem);
        assert_eq!(cl.matrix.nrows(), 1);
        // ∫φ_x = area(supp φ_x)/3; support is six coarse triangles of area 1/8
        assert!((cl.weights[0] - 0.25).abs() < 1e-14);

        // oracle: integrate φ_i^h φ_x per fine element with the exact P1 mass rule
        let fine = pair.fine();
        let center = pair.embed_node(pair.coarse().interior_nodes()[0]);
        let hat: Vec<f64> = {
            let mut v = vec![0.0; fine.num_nodes()];
            for (p, val) in pair.coarse_hat_on_fine(pair.coarse().interior_nodes()[0]) {
                v[p] = val;
            }
            v
        };
        let mut integral = 0.0;
        for &e in fine.node_elements(center) {
            let tri = fine.elements()[e];
            let m = element_mass(&fine.element_vertices(e));
            let a = tri.iter().position(|&v| v == center).unwrap();
            for b in 0..3 {
                integral += m[a][b] * hat[tri[b]];
            }
        }
        let ci = fine.interior_index(center).unwrap();
        assert!((cl.matrix.get(0, ci) - integral / 0.25).abs() < 1e-14);
        // hand value: 6 fine triangles of area 1/32 around the center, hat = 1 at the
        // center and 1/2 at its six neighbours: Σ area/12·(2·1 + 2·½) = 6·(1/32)(3/12)
        assert!((integral - 6.0 * (1.0 / 32.0) * (3.0 / 12.0)).abs() < 1e-15);
    }

    #[test]
    fn clement_reproduces_constants_and_is_local() {
        let pair = build_pair(2, 4).unwrap();
        let fem = assemble(pair.fine(), &constant_field(1.0).unwrap()).unwrap();
        let cl = clement(&pair, &fem);
        let ones_full = vec![1.0; pair.fine().num_nodes()];
        for v in cl.full.mul_vec(&ones_full) {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let ones_interior = vec![1.0; pair.fine().num_interior()];
        let vals = cl.matrix.mul_vec(&ones_interior);
        for (r, &x) in pair.coarse().interior_nodes().iter().enumerate() {
            let touches_boundary = pair
                .coarse()
                .node_elements(x)
                .iter()
                .any(|&e| pair.coarse().elements()[e].iter().any(|&v| pair.coarse().is_boundary(v)));
            if touches_boundary {
                assert!(vals[r] < 1.0 - 1e-3);
            } else {
                assert!((vals[r] - 1.0).abs() < 1e-12);
            }
            // nonzeros only inside supp φ_x
            let c = pair.coarse().nodes()[x];
            let h = pair.coarse().spacing();
            for (j, _) in cl.matrix.row(r) {
                let p = pair.fine().nodes()[pair.fine().interior_nodes()[j]];
                assert!((p[0] - c[0]).abs() <= h + 1e-12 && (p[1] - c[1]).abs() <= h + 1e-12);
            }
        }
    }

    #[test]
    fn clement_kernel_by_projection() {
        // v − Cᵀ(CCᵀ)⁻¹Cv lies in the kernel
        let pair = build_pair(2, 4).unwrap();
        let fem = assemble(pair.fine(), &constant_field(1.0).unwrap()).unwrap();
        let c = cl_dense(&clement(&pair, &fem).matrix);
        let v = nalgebra::DVector::from_fn(c.ncols(), |i, _| ((i * 13) % 7) as f64 - 3.0);
        let cct = &c * c.transpose();
        let w = &v - c.transpose() * cct.cholesky().unwrap().solve(&(&c * &v));
        assert!((&c * w).amax() <= 1e-12);
    }

    fn cl_dense(m: &SparseMatrix) -> nalgebra::DMatrix<f64> {
        m.to_dense()
    }

    #[test]
    fn coarse_projection() {
        let pair = build_pair(2, 5).unwrap();
        let field = constant_field(1.0).unwrap();
        let fine = assemble(pair.fine(), &field).unwrap();
        let coarse = assemble(pair.coarse(), &field).unwrap();
        let proj = l2_project_coarse(&pair, &fine, &coarse);
        let e = prolongation(&pair);

        // M_H = Eᵀ M_h E exactly (coarse hats are fine-space functions)
        let galerkin = e.transpose().matmul(&fine.mass).matmul(&e);
        for i in 0..coarse.mass.nrows() {
            for j in 0..coarse.mass.ncols() {
                assert!((galerkin.get(i, j) - coarse.mass.get(i, j)).abs() < 1e-15);
            }
        }

        let c: Vec<f64> = (0..coarse.mass.nrows()).map(|i| (i as f64 * 0.7).sin()).collect();
        let back = proj.apply(&e.mul_vec(&c)).unwrap();
        for (a, b) in back.iter().zip(&c) {
            assert!((a - b).abs() < 1e-11);
        }
        assert!(proj.apply(&vec![0.0; fine.mass.nrows()]).unwrap().iter().all(|&v| v == 0.0));

        // dense normal-equations oracle: min ‖E c − v‖_M
        let v = pair.fine().interpolate_interior(|x, y| x * (1.0 - x) * y * (1.0 - y));
        let ed = e.to_dense();
        let md = fine.mass.to_dense();
        let lhs = ed.transpose() * &md * &ed;
        let rhs = ed.transpose() * &md * nalgebra::DVector::from_vec(v.clone());
        let oracle = lhs.lu().solve(&rhs).unwrap();
        let got = proj.apply(&v).unwrap();
        for (a, b) in got.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
