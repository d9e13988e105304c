//! Recovery of heterogeneous elastic parameter fields from full-field strain data.
//!
//! The crate covers the whole pipeline: structured triangular meshing
//! ([`geometry`]), generation of heterogeneous stiffness fields from Gaussian
//! random fields or grayscale images ([`fieldgen`]), hyperelastic constitutive
//! models shared by the forward and inverse paths ([`materials`]), a
//! total-Lagrangian finite element solver ([`fem`]), an adjoint-based inverse
//! solver ([`adjoint`]), fully connected networks with exact nested automatic
//! differentiation ([`net`], [`graph`]), physics-informed training that
//! recovers the parameter field from strains ([`pinn`]), and an image
//! complexity score ([`complexity`]).

pub mod adjoint;
pub mod complexity;
pub mod error;
pub mod fem;
pub mod fieldgen;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod materials;
pub mod net;
pub mod pinn;
pub mod scalar;
pub mod threads;

pub use error::{Error, Result};
