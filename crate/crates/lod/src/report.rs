use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fs::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: u32,
    /// Coarse element diameter `√2 · 2^-level`.
    pub h: f64,
    pub dofs: usize,
    pub k: usize,
    pub rel_err_lod: f64,
    pub rel_err_p1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResult>,
    pub order_lod: f64,
    pub order_p1: f64,
}

pub const CSV_HEADER: &str = "level,H,dofs,k,rel_err_lod,rel_err_p1";

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.levels {
            let _ = writeln!(
                out,
                "{},{:?},{},{},{:?},{:?}",
                r.level, r.h, r.dofs, r.k, r.rel_err_lod, r.rel_err_p1
            );
        }
        let _ = writeln!(
            out,
            "# order_lod={:?} order_p1={:?}",
            self.order_lod, self.order_p1
        );
        out
    }
}

pub fn write_report(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_atomic(path, report.to_csv().as_bytes())
}
