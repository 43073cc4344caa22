//! Linear-programming back ends for the flat norm.

pub mod dense;
pub mod network;
