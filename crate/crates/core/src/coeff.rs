//! Scalar diffusion coefficients `A = B(x)·I`, piecewise constant on a Cartesian grid.
//!
//! Random fields draw each cell independently and log-uniformly from `[lo, hi]` using
//! ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`). A uniform `u ∈ [0, 1)` is formed
//! from the top 53 bits of `next_u64`, and the cell value is `exp(ln lo + u·(ln hi − ln lo))`.
//! Cells are stored row-major starting at the lower-left corner.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffField {
    grid_level: u32,
    values: Vec<f64>,
    alpha: f64,
    beta: f64,
}

pub fn constant_field(value: f64) -> Result<CoeffField> {
    CoeffField::from_values(0, vec![value])
}

pub fn random_field(grid_level: u32, lo: f64, hi: f64, seed: u64) -> Result<CoeffField> {
    if !(lo > 0.0 && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!(
            "random field needs 0 < lo < hi, got lo={lo}, hi={hi}"
        )));
    }
    if grid_level == 0 || grid_level > crate::mesh::MAX_LEVEL {
        return Err(Error::Domain(format!(
            "random field grid level {grid_level} outside 1..={}",
            crate::mesh::MAX_LEVEL
        )));
    }
    let (log_lo, log_hi) = (libm::log(lo), libm::log(hi));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cells = 1usize << (2 * grid_level);
    let values = (0..cells)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            libm::exp(log_lo + u * (log_hi - log_lo)).clamp(lo, hi)
        })
        .collect();
    CoeffField::from_values(grid_level, values)
}

impl CoeffField {
    pub fn from_values(grid_level: u32, values: Vec<f64>) -> Result<Self> {
        if grid_level > crate::mesh::MAX_LEVEL {
            return Err(Error::Domain(format!("grid level {grid_level} too large")));
        }
        let expected = 1usize << (2 * grid_level);
        if values.len() != expected {
            return Err(Error::Domain(format!(
                "grid level {grid_level} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!(
                "coefficient values must be positive and finite, found {bad}"
            )));
        }
        let alpha = values.iter().copied().fold(f64::INFINITY, f64::min);
        let beta = values.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            grid_level,
            values,
            alpha,
            beta,
        })
    }

    pub fn grid_level(&self) -> u32 {
        self.grid_level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn contrast(&self) -> f64 {
        self.beta / self.alpha
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_values(
            self.grid_level,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Value of the cell containing `point`. Cells are half-open `[x0, x1) × [y0, y1)`
    /// except along `x = 1` and `y = 1`.
    pub fn value_at(&self, point: Point) -> Result<f64> {
        let [x, y] = point;
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(Error::Domain(format!(
                "point ({x}, {y}) outside the unit square"
            )));
        }
        let n = 1usize << self.grid_level;
        let cell = |t: f64| ((t * n as f64) as usize).min(n - 1);
        Ok(self.values[cell(y) * n + cell(x)])
    }

    /// Coefficient on `element`, which must lie inside a single coefficient cell.
    pub fn element_value(&self, mesh: &TriMesh, element: usize) -> Result<f64> {
        self.check_resolved_by(mesh)?;
        self.value_at(mesh.centroid(element))
    }

    pub fn check_resolved_by(&self, mesh: &TriMesh) -> Result<()> {
        if mesh.level() < self.grid_level {
            return Err(Error::Config(format!(
                "mesh level {} cannot resolve a coefficient on grid level {}",
                mesh.level(),
                self.grid_level
            )));
        }
        Ok(())
    }

    /// Canonical little-endian byte image: grid level followed by the cell values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 8 * self.values.len());
        out.extend_from_slice(&self.grid_level.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    #[test]
    fn constant_field_basics() {
        let f = constant_field(1.0).unwrap();
        assert_eq!((f.alpha(), f.beta(), f.contrast()), (1.0, 1.0, 1.0));
        assert_eq!(constant_field(3.0).unwrap().value_at([0.3, 0.9]).unwrap(), 3.0);
        assert!(matches!(constant_field(0.0), Err(Error::Domain(_))));
        assert!(matches!(constant_field(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn indexing_convention() {
        let f = CoeffField::from_values(1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.value_at([0.25, 0.25]).unwrap(), 1.0);
        assert_eq!(f.value_at([0.75, 0.25]).unwrap(), 2.0);
        assert_eq!(f.value_at([0.25, 0.75]).unwrap(), 3.0);
        assert_eq!(f.value_at([0.5, 0.5]).unwrap(), 4.0);
        assert_eq!(f.value_at([1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(f.value_at([0.0, 1.0]).unwrap(), 3.0);
        assert!(f.value_at([1.0 + 1e-12, 0.5]).is_err());
        assert!(f.value_at([0.5, -0.1]).is_err());
    }

    #[test]
    fn random_field_reproducible_and_in_range() {
        let a = random_field(6, 1e-1, 1e5, 7).unwrap();
        let b = random_field(6, 1e-1, 1e5, 7).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(a.values().len(), 4096);
        assert!(a.values().iter().all(|&v| (1e-1..=1e5).contains(&v)));
        // with 4096 log-uniform draws the extremes sit close to the interval ends
        assert!(a.contrast() > 1e5 && a.contrast() <= 1e6);
        let c = random_field(6, 1e-1, 1e5, 8).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn semilinear_contrast() {
        let f = random_field(6, 1e-3, 1.0, 1).unwrap();
        assert!(f.contrast() > 5e2 && f.contrast() <= 1e3);
    }

    #[test]
    fn narrow_interval_is_nearly_constant() {
        let f = random_field(3, 2.0, 2.0 + 1e-9, 3).unwrap();
        assert!(f.contrast() - 1.0 < 1e-9);
    }

    #[test]
    fn random_field_errors() {
        assert!(matches!(random_field(2, 1.0, 1.0, 0), Err(Error::Domain(_))));
        assert!(matches!(random_field(2, 2.0, 1.0, 0), Err(Error::Domain(_))));
        assert!(matches!(random_field(2, 0.0, 1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn element_value_requires_resolution() {
        let f = random_field(3, 1.0, 2.0, 0).unwrap();
        assert!(matches!(
            f.element_value(&build_mesh(2).unwrap(), 0),
            Err(Error::Config(_))
        ));
        let m = build_mesh(4).unwrap();
        // each fine element sits inside one coefficient cell: the centroid and the
        // vertices nudged toward it land in the same cell
        for e in 0..m.num_elements() {
            let c = m.centroid(e);
            let v = f.element_value(&m, e).unwrap();
            for p in m.element_vertices(e) {
                let q = [p[0] + 1e-9 * (c[0] - p[0]) * 1e6, p[1] + 1e-9 * (c[1] - p[1]) * 1e6];
                assert_eq!(f.value_at(q).unwrap(), v);
            }
        }
    }
}
