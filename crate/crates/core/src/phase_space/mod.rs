//! Phase-space objects: symbols, order functions, planar domains, volumes of
//! symbol preimages, the logarithmic potential `I(z)` and compactly supported
//! symbol deformations.

mod domain;
mod potential;
mod symbol;
mod volume;

pub use domain::{DomainSpec, Shape};
pub use potential::{deform_symbol, integral_i, scan_distance, QuadGrid, ScanSpec};
pub use symbol::{bump, bump_derivative, Deformation, Monomial, OrderFunction, Polynomial, Symbol};
pub use volume::{
    estimate_kappa, volume_preimage, volume_profile, PhaseBox, VolumeEstimate, VolumeProfile,
    STRATA_PER_AXIS,
};
