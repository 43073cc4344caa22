//! Weak Jacobians of S¹-valued fields with jumps, singularity detection by
//! ball construction, flat norms and energy scans.

pub mod config;
pub mod energy;
pub mod error;
pub mod gamma;
pub mod geometry;
pub mod grid_field;
pub mod jacobian;
pub mod lifting;
pub mod lp;
pub mod measures;
pub mod singularities;
mod text;

pub use error::{Error, Result};
