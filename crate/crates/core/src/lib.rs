//! Kernel-based solution of the heat equation on a half-space with the
//! dynamical boundary condition `∂_t u = ∂_{x_N} u` on `x_N = 0`.

pub mod datum;
pub mod error;
pub mod fd_oracle;
pub mod harness;
pub mod kernels;
pub mod norms;
pub mod operators;
pub mod product;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
