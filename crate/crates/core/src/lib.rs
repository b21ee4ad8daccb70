//! Numerical machinery for eigenvalue asymptotics of randomly perturbed
//! non-self-adjoint semiclassical operators.
//!
//! Everything is generic over the real scalar `T: Real` (`f32` or `f64`);
//! the `*64` / `*32` aliases below pin the common instantiations.

pub mod det_stats;
pub mod error;
pub mod grushin;
pub mod phase_space;
pub mod quadrature;
pub mod quantize;
pub mod random_pert;
pub mod real;
pub mod rng;
pub mod special;
pub mod spectral_calc;
pub mod zero_count;

pub use error::{Error, Result};
pub use real::Real;

pub use num_complex::Complex;

/// Dense complex matrix used by every linear-algebra routine.
pub type CMatrix<T> = nalgebra::DMatrix<Complex<T>>;

pub type Symbol64 = phase_space::Symbol<f64>;
pub type Symbol32 = phase_space::Symbol<f32>;
pub type DomainSpec64 = phase_space::DomainSpec<f64>;
pub type DomainSpec32 = phase_space::DomainSpec<f32>;
pub type OperatorMatrix64 = quantize::OperatorMatrix<f64>;
pub type OperatorMatrix32 = quantize::OperatorMatrix<f32>;
pub type BasisSpec64 = quantize::BasisSpec<f64>;
pub type BasisSpec32 = quantize::BasisSpec<f32>;
pub type SingularTriple64 = quantize::SingularTriple<f64>;
pub type PerturbationSpec64 = random_pert::PerturbationSpec<f64>;
pub type PerturbationSpec32 = random_pert::PerturbationSpec<f32>;
pub type GrushinSystem64 = grushin::GrushinSystem<f64>;
pub type GrushinInverse64 = grushin::GrushinInverse<f64>;
pub type DensityGrid64 = det_stats::DensityGrid<f64>;
pub type VolumeProfile64 = phase_space::VolumeProfile<f64>;
pub type CMatrix64 = CMatrix<f64>;
pub type CMatrix32 = CMatrix<f32>;
