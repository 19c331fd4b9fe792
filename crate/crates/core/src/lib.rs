//! Local-geometry tools for the intermediate latent space of piecewise-affine
//! mapping networks.
//!
//! A mapping network `f: Z -> W̃` built from affine layers and leaky-ReLU
//! activations is affine on every cell of its activation partition, so its
//! Jacobian is exact and locally constant. This crate exposes:
//!
//! - [`network`]: the network itself, exact Jacobians and local affine pieces.
//! - [`local_basis`]: SVD of the Jacobian (Local Basis) and the Local-PCA oracle.
//! - [`traversal`]: linear and iterative curve traversals, guided variants.
//! - [`grassmann`]: projection and geodesic distances between subspaces.
//! - [`global_basis`]: sampled-PCA and first-weight-SVD global bases.
//! - [`deviation`]: distance-to-manifold residuals by damped Gauss–Newton.
//! - [`evaluation`]: warpage experiments, ε-sweeps, singular-value histograms
//!   and latent grids.
//! - [`cli`]: the `latentgeom` command line front end.

// `!(x > t)` is used on purpose: it is also true for NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod deviation;
pub mod error;
pub mod evaluation;
pub mod gen;
pub mod global_basis;
pub mod grassmann;
pub mod io;
pub mod linalg;
pub mod local_basis;
pub mod network;
pub mod rng;
pub mod traversal;

pub use error::{Error, Result};
pub use local_basis::{local_basis, LocalFrame};
pub use network::{Activation, ActivationPattern, LayerSpec, MappingNetwork};

/// Dense column vector of `f64`.
pub type Vector = nalgebra::DVector<f64>;
/// Dense column-major matrix of `f64`.
pub type Matrix = nalgebra::DMatrix<f64>;
