//! Numerical core for the cross-coupled competition-diffusion system
//!
//! ```text
//! u_t - Δu = f(u) - κ u v²
//! v_t - Δv = g(v) - κ v u²
//! ```
//!
//! with Dirichlet data on an interval or a rectangle. The crate is `no_std`
//! (it needs `alloc`) and performs no IO: grids and discrete operators live in
//! [`mesh`], kinetics and boundary schedules in [`model`], the invariant-region
//! preserving stepper and the spectral Duhamel reference in [`evolve`], the
//! Lyapunov bookkeeping in [`energy`], stationary solves and limit
//! certificates in [`steady`], and semigroup decay certificates in
//! [`heatkernel`].
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod energy;
mod error;
pub mod evolve;
pub mod heatkernel;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod stats;
pub mod steady;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
