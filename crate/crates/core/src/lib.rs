//! Numerics for the strong-coupling Faddeev–Hopf energy.
//!
//! - [`su2`]: irreducible representations of `su(2)` and matrix elements.
//! - [`hopf`]: finite Hessian blocks of the Hopf map and the Ward operator.
//! - [`dec`]: lattice exterior calculus on periodic coordinate grids.
//! - [`field`]: discrete maps, energies, residuals, variations and bounds.
//! - [`ode`]: the symmetry-reduced profile equation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dec;
pub mod field;
pub mod hopf;
pub mod linalg;
pub mod ode;
pub mod scalar;
pub mod su2;

pub use scalar::RepScalar;

pub type Irrep64 = su2::Irrep<f64>;
pub type Irrep32 = su2::Irrep<f32>;
pub type HessianBlock64 = hopf::HessianBlock<f64>;
pub type Profile64 = ode::Profile<f64>;

#[cfg(feature = "exact")]
pub type ExactRational = num_rational::BigRational;
#[cfg(feature = "exact")]
pub type IrrepExact = su2::Irrep<ExactRational>;
#[cfg(feature = "exact")]
pub type HessianBlockExact = hopf::HessianBlock<ExactRational>;
