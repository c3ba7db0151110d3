//! Localized orthogonal decomposition (LOD) finite elements for linear and semilinear
//! parabolic problems with rough, high-contrast diffusion coefficients on the unit
//! square.
//!
//! The crate is `no_std` with `alloc`. The `std` feature (on by default) only affects
//! error trait plumbing; `parallel` solves corrector problems on a rayon pool.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assembly;
pub mod coeff;
mod error;
pub mod linalg;
pub mod lod;
pub mod mesh;
pub mod order;
pub mod timestep;

pub use error::{Error, Result};
