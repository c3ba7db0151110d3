//! Uniform right-triangle meshes of the unit square and their dyadic hierarchy.
//!
//! Nodes are numbered row-major from the lower-left corner, `node = j * (n + 1) + i`
//! for a mesh with `n = 2^level` cells per side. Cartesian cell `(i, j)` is split
//! along its lower-left to upper-right diagonal into a lower element `2 * (j * n + i)`
//! and an upper element `2 * (j * n + i) + 1`, both oriented counter-clockwise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MAX_LEVEL: u32 = 10;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    level: u32,
    cells: usize,
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    interior_nodes: Vec<usize>,
    interior_index: Vec<Option<usize>>,
    node_elements: Vec<Vec<usize>>,
}

/// Build the uniform triangulation with Cartesian spacing `2^-level`.
pub fn build_mesh(level: u32) -> Result<TriMesh> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::Config(format!(
            "mesh level {level} outside 1..={MAX_LEVEL}"
        )));
    }
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let side = n + 1;

    let mut nodes = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            nodes.push([i as f64 * h, j as f64 * h]);
        }
    }

    let id = |i: usize, j: usize| j * side + i;
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            elements.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }

    let mut interior_nodes = Vec::with_capacity((n - 1) * (n - 1));
    let mut interior_index = vec![None; side * side];
    for j in 1..n {
        for i in 1..n {
            interior_index[id(i, j)] = Some(interior_nodes.len());
            interior_nodes.push(id(i, j));
        }
    }

    let mut node_elements = vec![Vec::new(); side * side];
    for (e, tri) in elements.iter().enumerate() {
        for &v in tri {
            node_elements[v].push(e);
        }
    }

    Ok(TriMesh {
        level,
        cells: n,
        nodes,
        elements,
        interior_nodes,
        interior_index,
        node_elements,
    })
}

impl TriMesh {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of Cartesian cells per side, `2^level`.
    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    /// Cartesian spacing `2^-level`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Element diameter `H_K = √2 · 2^-level`.
    pub fn element_diam(&self) -> f64 {
        core::f64::consts::SQRT_2 * self.spacing()
    }

    /// Ratio of element diameter to inscribed-circle diameter; the same for every element.
    pub fn shape_regularity(&self) -> f64 {
        let h = self.spacing();
        let inradius = h * (2.0 - core::f64::consts::SQRT_2) / 2.0;
        self.element_diam() / (2.0 * inradius)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Position of `node` in [`TriMesh::interior_nodes`], `None` on the boundary.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.interior_index[node].is_none()
    }

    /// Elements that have `node` as a vertex, in ascending order.
    pub fn node_elements(&self, node: usize) -> &[usize] {
        &self.node_elements[node]
    }

    pub fn node_at(&self, i: usize, j: usize) -> usize {
        j * (self.cells + 1) + i
    }

    /// Cartesian cell `(i, j)` and the lower/upper flag of an element.
    pub fn element_cell(&self, element: usize) -> (usize, usize, bool) {
        let cell = element / 2;
        (cell % self.cells, cell / self.cells, element % 2 == 1)
    }

    pub fn element_vertices(&self, element: usize) -> [Point; 3] {
        let [a, b, c] = self.elements[element];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn signed_area(&self, element: usize) -> f64 {
        let [p, q, r] = self.element_vertices(element);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn centroid(&self, element: usize) -> Point {
        let [p, q, r] = self.element_vertices(element);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Nodal interpolant of `f` over all nodes, boundary included.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Nodal interpolant of `f` restricted to interior nodes.
    pub fn interpolate_interior(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.interior_nodes
            .iter()
            .map(|&n| {
                let p = self.nodes[n];
                f(p[0], p[1])
            })
            .collect()
    }

    /// Extend an interior-node vector by zero to all nodes.
    pub fn extend_by_zero(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_nodes()];
        for (&n, &v) in self.interior_nodes.iter().zip(interior) {
            full[n] = v;
        }
        full
    }

    /// Restrict an all-node vector to the interior nodes.
    pub fn restrict_to_interior(&self, full: &[f64]) -> Vec<f64> {
        self.interior_nodes.iter().map(|&n| full[n]).collect()
    }
}

/// A coarse mesh together with a uniform refinement of it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPair {
    coarse: TriMesh,
    fine: TriMesh,
    child_map: Vec<Vec<usize>>,
    parent: Vec<usize>,
    node_embed: Vec<usize>,
}

pub fn build_pair(coarse_level: u32, fine_level: u32) -> Result<MeshPair> {
    if coarse_level >= fine_level {
        return Err(Error::Config(format!(
            "coarse level {coarse_level} must be below fine level {fine_level}"
        )));
    }
    let coarse = build_mesh(coarse_level)?;
    let fine = build_mesh(fine_level)?;
    let ratio = 1usize << (fine_level - coarse_level);
    let nf = fine.cells_per_side();

    let mut child_map = vec![Vec::with_capacity(ratio * ratio); coarse.num_elements()];
    let mut parent = vec![0; fine.num_elements()];
    for (fe, p) in parent.iter_mut().enumerate() {
        let (fi, fj, upper) = fine.element_cell(fe);
        let (ci, cj) = (fi / ratio, fj / ratio);
        let (a, b) = (fi % ratio, fj % ratio);
        // Fine cells above the coarse diagonal belong to the upper coarse triangle,
        // cells on it are split the same way as the coarse cell.
        let coarse_upper = b > a || (b == a && upper);
        let ce = 2 * (cj * coarse.cells_per_side() + ci) + usize::from(coarse_upper);
        *p = ce;
        child_map[ce].push(fe);
    }
    debug_assert!(child_map.iter().all(|c| c.len() == ratio * ratio));

    let node_embed = (0..coarse.num_nodes())
        .map(|n| {
            let i = n % (coarse.cells_per_side() + 1);
            let j = n / (coarse.cells_per_side() + 1);
            j * ratio * (nf + 1) + i * ratio
        })
        .collect();

    Ok(MeshPair {
        coarse,
        fine,
        child_map,
        parent,
        node_embed,
    })
}

impl MeshPair {
    pub fn coarse(&self) -> &TriMesh {
        &self.coarse
    }

    pub fn fine(&self) -> &TriMesh {
        &self.fine
    }

    /// Fine elements covering coarse element `element`, ascending.
    pub fn children(&self, element: usize) -> &[usize] {
        &self.child_map[element]
    }

    pub fn parent(&self, fine_element: usize) -> usize {
        self.parent[fine_element]
    }

    /// Fine node coinciding with coarse node `node`.
    pub fn embed_node(&self, node: usize) -> usize {
        self.node_embed[node]
    }

    /// Fine elements per coarse element along one side.
    pub fn ratio(&self) -> usize {
        1 << (self.fine.level() - self.coarse.level())
    }

    /// Values of the coarse hat function of `coarse_node` at the fine nodes of its
    /// support, as `(fine node, value)` sorted by fine node. Zero values are dropped.
    pub fn coarse_hat_on_fine(&self, coarse_node: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for &ce in self.coarse.node_elements(coarse_node) {
            let verts = self.coarse.element_vertices(ce);
            let local = self.coarse.elements()[ce]
                .iter()
                .position(|&v| v == coarse_node)
                .expect("node belongs to its element");
            for &fe in self.children(ce) {
                for &fnode in &self.fine.elements()[fe] {
                    let value = barycentric(&verts, self.fine.nodes()[fnode])[local];
                    if value > 1e-14 {
                        out.push((fnode, value));
                    }
                }
            }
        }
        out.sort_by_key(|&(n, _)| n);
        out.dedup_by_key(|&mut (n, _)| n);
        out
    }

    /// Patch `ω_k(K)` around coarse element `element`.
    pub fn patch(&self, element: usize, k: usize) -> Result<Patch> {
        let nc = self.coarse.num_elements();
        if element >= nc {
            return Err(Error::Domain(format!(
                "coarse element {element} out of range (mesh has {nc})"
            )));
        }
        let mut member = vec![false; nc];
        member[element] = true;
        let mut current = vec![element];
        for _ in 0..k {
            if current.len() == nc {
                break;
            }
            let mut next = current.clone();
            for &e in &current {
                for &v in &self.coarse.elements()[e] {
                    for &nb in self.coarse.node_elements(v) {
                        if !member[nb] {
                            member[nb] = true;
                            next.push(nb);
                        }
                    }
                }
            }
            current = next;
        }
        current.sort_unstable();

        let mut fine_nodes = Vec::new();
        for &ce in &current {
            for &fe in self.children(ce) {
                for &fnode in &self.fine.elements()[fe] {
                    if self.fine.is_boundary(fnode) {
                        continue;
                    }
                    let inside = self
                        .fine
                        .node_elements(fnode)
                        .iter()
                        .all(|&adj| member[self.parent[adj]]);
                    if inside {
                        fine_nodes.push(fnode);
                    }
                }
            }
        }
        fine_nodes.sort_unstable();
        fine_nodes.dedup();

        Ok(Patch {
            center_element: element,
            k,
            coarse_elements: current,
            fine_nodes,
        })
    }
}

/// Barycentric coordinates of `p` with respect to triangle `tri`.
pub fn barycentric(tri: &[Point; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = *tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Union of coarse elements reached by `k` rounds of vertex-adjacency closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub center_element: usize,
    pub k: usize,
    /// Ascending coarse element indices.
    pub coarse_elements: Vec<usize>,
    /// Ascending fine node indices strictly inside the patch and off `∂Ω`.
    pub fine_nodes: Vec<usize>,
}
