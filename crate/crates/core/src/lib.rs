//! Fréchet means on non-compact symmetric spaces.
//!
//! The crate provides Euclidean spaces with arbitrary inner products, the
//! hyperbolic space, SPD matrices with the affine-invariant metric and their
//! products; geodesically symmetric (including heavy-tailed) samplers; a
//! Karcher-flow solver for the sample Fréchet mean; and Monte Carlo
//! scenarios for its weak law of large numbers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod experiments;
pub mod frechet;
mod linalg;
pub mod manifold;
mod numeric;
pub mod sampling;
pub mod symmetry;

pub use error::{Error, Result};
pub use manifold::{Family, Manifold, Point, Space, TangentData, TangentVector};
