//! Experiment configuration: a flat `key = value` text file.
//!
//! ```text
//! # desk-scale linear run
//! problem = linear            # linear | semilinear
//! fine_level = 6
//! coarse_levels = 2, 3, 4
//! k_schedule = 1, 2, 2
//! tau = 0.01
//! n_steps = 100
//! coefficient = random        # constant | random | file
//! coeff_grid_level = 4        # random only
//! coeff_lo = 0.1              # random only
//! coeff_hi = 100000           # random only
//! coeff_seed = 1              # random only
//! coeff_value = 1             # constant only
//! coeff_file = coeff.txt      # file only, relative to the config file
//! output = results/linear.csv
//! corrector_tol = 1e-10       # optional
//! step_tol = 1e-9             # optional
//! cache_dir = cache           # optional
//! ```
//!
//! Keys may appear in any order; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lod_core::coeff::{constant_field, random_field, CoeffField};

use crate::coeff_file::read_coeff;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    /// `f(x, t) = t`, `u0 = 1`.
    Linear,
    /// Allen–Cahn reaction, `u0 = x(1−x)y(1−y)`.
    Semilinear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoeffSource {
    Constant(f64),
    Random {
        grid_level: u32,
        lo: f64,
        hi: f64,
        seed: u64,
    },
    File(PathBuf),
}

impl CoeffSource {
    pub fn build(&self) -> Result<CoeffField> {
        Ok(match self {
            CoeffSource::Constant(v) => constant_field(*v)?,
            CoeffSource::Random {
                grid_level,
                lo,
                hi,
                seed,
            } => random_field(*grid_level, *lo, *hi, *seed)?,
            CoeffSource::File(path) => read_coeff(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub fine_level: u32,
    pub coarse_levels: Vec<u32>,
    pub k_schedule: Vec<usize>,
    pub tau: f64,
    pub n_steps: usize,
    pub coefficient: CoeffSource,
    pub output: PathBuf,
    pub corrector_tol: f64,
    pub step_tol: f64,
    pub cache_dir: Option<PathBuf>,
}

pub const DEFAULT_CORRECTOR_TOL: f64 = 1e-10;
pub const DEFAULT_STEP_TOL: f64 = 1e-9;

impl ExperimentConfig {
    /// The reduced linear setup: fine level 6, coarse levels 2–4, `k = 1, 2, 2`.
    pub fn desk_linear(coefficient: CoeffSource) -> Self {
        Self {
            problem: Problem::Linear,
            fine_level: 6,
            coarse_levels: vec![2, 3, 4],
            k_schedule: vec![1, 2, 2],
            tau: 0.01,
            n_steps: 100,
            coefficient,
            output: PathBuf::from("report.csv"),
            corrector_tol: DEFAULT_CORRECTOR_TOL,
            step_tol: DEFAULT_STEP_TOL,
            cache_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.coarse_levels.is_empty() {
            return bad("coarse_levels is empty".into());
        }
        if self.coarse_levels.len() != self.k_schedule.len() {
            return bad(format!(
                "{} coarse levels but {} k values",
                self.coarse_levels.len(),
                self.k_schedule.len()
            ));
        }
        if !(1..=lod_core::mesh::MAX_LEVEL).contains(&self.fine_level) {
            return bad(format!("fine_level {} out of range", self.fine_level));
        }
        if let Some(&l) = self
            .coarse_levels
            .iter()
            .find(|&&l| l == 0 || l >= self.fine_level)
        {
            return bad(format!(
                "coarse level {l} must lie in 1..{}",
                self.fine_level
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) || self.n_steps == 0 {
            return bad("tau must be positive and n_steps at least 1".into());
        }
        if !(self.corrector_tol > 0.0 && self.step_tol > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        match &self.coefficient {
            CoeffSource::Constant(v) if !(*v > 0.0) => {
                return bad(format!("constant coefficient {v} must be positive"))
            }
            CoeffSource::Random {
                grid_level, lo, hi, ..
            } => {
                if *grid_level > self.fine_level {
                    return bad(format!(
                        "coefficient grid level {grid_level} exceeds fine level {}",
                        self.fine_level
                    ));
                }
                if !(*lo > 0.0 && lo < hi) {
                    return bad(format!("need 0 < coeff_lo < coeff_hi, got {lo}, {hi}"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Serialize to the config file format.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut out = String::new();
        let problem = match self.problem {
            Problem::Linear => "linear",
            Problem::Semilinear => "semilinear",
        };
        let _ = writeln!(out, "problem = {problem}");
        let _ = writeln!(out, "fine_level = {}", self.fine_level);
        let _ = writeln!(
            out,
            "coarse_levels = {}",
            join(self.coarse_levels.iter().map(|l| l.to_string()).collect())
        );
        let _ = writeln!(
            out,
            "k_schedule = {}",
            join(self.k_schedule.iter().map(|k| k.to_string()).collect())
        );
        let _ = writeln!(out, "tau = {:?}", self.tau);
        let _ = writeln!(out, "n_steps = {}", self.n_steps);
        match &self.coefficient {
            CoeffSource::Constant(v) => {
                let _ = writeln!(out, "coefficient = constant\ncoeff_value = {v:?}");
            }
            CoeffSource::Random {
                grid_level,
                lo,
                hi,
                seed,
            } => {
                let _ = writeln!(
                    out,
                    "coefficient = random\ncoeff_grid_level = {grid_level}\ncoeff_lo = {lo:?}\ncoeff_hi = {hi:?}\ncoeff_seed = {seed}"
                );
            }
            CoeffSource::File(p) => {
                let _ = writeln!(out, "coefficient = file\ncoeff_file = {}", p.display());
            }
        }
        let _ = writeln!(out, "output = {}", self.output.display());
        let _ = writeln!(out, "corrector_tol = {:?}", self.corrector_tol);
        let _ = writeln!(out, "step_tol = {:?}", self.step_tol);
        if let Some(dir) = &self.cache_dir {
            let _ = writeln!(out, "cache_dir = {}", dir.display());
        }
        out
    }
}

const KEYS: &[&str] = &[
    "problem",
    "fine_level",
    "coarse_levels",
    "k_schedule",
    "tau",
    "n_steps",
    "coefficient",
    "coeff_value",
    "coeff_grid_level",
    "coeff_lo",
    "coeff_hi",
    "coeff_seed",
    "coeff_file",
    "output",
    "corrector_tol",
    "step_tol",
    "cache_dir",
];

struct Entries<'a> {
    path: &'a Path,
    map: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Entries<'a> {
    fn raw(&self, key: &str) -> Result<(usize, &'a str)> {
        self.map
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(self.path, 0, format!("missing key `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, v) = self.raw(key)?;
        v.parse()
            .map_err(|_| Error::parse(self.path, line, format!("bad value {v:?} for `{key}`")))
    }

    fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        if self.map.contains_key(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let (line, v) = self.raw(key)?;
        v.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    Error::parse(self.path, line, format!("bad list item {s:?} in `{key}`"))
                })
            })
            .collect()
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Parse config text. Relative paths (`output`, `coeff_file`, `cache_dir`) are resolved against `base`.
pub fn parse_config(text: &str, path: &Path, base: &Path) -> Result<ExperimentConfig> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::parse(path, i + 1, format!("unknown key `{key}`")));
        }
        if map.insert(key, (i + 1, value.trim())).is_some() {
            return Err(Error::parse(path, i + 1, format!("duplicate key `{key}`")));
        }
    }
    let e = Entries { path, map };

    let (pline, problem) = e.raw("problem")?;
    let problem = match problem {
        "linear" => Problem::Linear,
        "semilinear" => Problem::Semilinear,
        other => {
            return Err(Error::parse(path, pline, format!("unknown problem {other:?}")));
        }
    };
    let (cline, kind) = e.raw("coefficient")?;
    let coefficient = match kind {
        "constant" => CoeffSource::Constant(e.get_or("coeff_value", 1.0)?),
        "random" => CoeffSource::Random {
            grid_level: e.get("coeff_grid_level")?,
            lo: e.get("coeff_lo")?,
            hi: e.get("coeff_hi")?,
            seed: e.get("coeff_seed")?,
        },
        "file" => {
            let p: PathBuf = e.get("coeff_file")?;
            CoeffSource::File(resolve(base, p))
        }
        other => {
            return Err(Error::parse(path, cline, format!("unknown coefficient kind {other:?}")));
        }
    };
    let cache_dir = match e.map.get("cache_dir") {
        Some((_, v)) if !v.is_empty() => Some(resolve(base, PathBuf::from(v))),
        _ => None,
    };

    let config = ExperimentConfig {
        problem,
        fine_level: e.get("fine_level")?,
        coarse_levels: e.list("coarse_levels")?,
        k_schedule: e.list("k_schedule")?,
        tau: e.get("tau")?,
        n_steps: e.get("n_steps")?,
        coefficient,
        output: resolve(base, e.get("output")?),
        corrector_tol: e.get_or("corrector_tol", DEFAULT_CORRECTOR_TOL)?,
        step_tol: e.get_or("step_tol", DEFAULT_STEP_TOL)?,
        cache_dir,
    };
    config.validate()?;
    Ok(config)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, path, base)
}

pub fn write_config(config: &ExperimentConfig, path: &Path) -> Result<()> {
    crate::fs::write_atomic(path, config.to_text().as_bytes())
}
