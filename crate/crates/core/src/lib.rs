//! Generalised Sobolev stable flux reconstruction (GSFR) workbench.
//!
//! The crate builds GSFR correction functions exactly, assembles the 1D
//! flux-reconstruction operators they induce, and analyses the resulting
//! schemes: von Neumann dispersion, RK stability limits, convergence order
//! and aliasing-driven energy growth.

pub mod error;
pub mod exact;
pub mod fr;
pub mod gsfr;
pub mod legendre;
pub mod spectral;
pub mod experiments;

pub use error::{Error, Result};
