//! Minimal liftings and weak 2×2 minors of piecewise-affine BV maps in
//! general dimension, with truncation for unbounded maps.

mod io;
mod map;
mod pairing;
pub mod quadrature;

pub use io::{read_map, write_map, MapFile};
pub use map::{
    graded_power_map, simplex_measure, AffineCoefficients, AffinePiece, JumpFace, PwAffineMap, SimplexMesh,
};
pub use pairing::{
    boundary_apply, check_property_p, flat_bound_boundary, lambda_mass, lambda_pairing, lifted_abs_mass,
    minimal_lifting_pairing, minor_apply, nu_pairing, variation, MultiIndexPair, PropertyP, GM_ORDER,
};
