//! Numerics for Bohmian mechanics of the second-quantized Schrödinger field.
//!
//! The crate evolves a lattice-regularized wave functional `Psi[psi]`, extracts
//! the correction functional built from its magnitude, and feeds that
//! correction into a modified (nonlinear) Schrödinger propagator whose phase
//! drives Bohmian trajectory ensembles.
//!
//! Module map:
//! - [`grid`]: spatial lattice, derivative operators, field container
//! - [`polar`]: polar split `psi = R exp(iS/hbar)`, quantum potential, guidance velocity
//! - [`funcspace`]: configuration grid, wave functional, lattice functional derivatives
//! - [`funcdyn`]: functional Schrödinger evolution and its polar residual probe
//! - [`qcorr`]: correction density, its derivatives, modified quantum potential
//! - [`modschrod`]: standard/modified/antiparticle propagators and residual diagnostics
//! - [`trajectories`]: ensemble sampling, guidance integration, equivariance

// `!(x > 0.0)` guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
mod fft;
pub mod funcdyn;
pub mod funcspace;
pub mod grid;
pub mod modschrod;
pub mod polar;
pub mod potential;
pub mod qcorr;
pub mod trajectories;

pub use error::{Error, Result};
pub use fft::wavenumbers;
pub use grid::{Boundary, LatticeField, PhysicsParams, SpatialGrid};
pub use potential::PotentialSpec;
