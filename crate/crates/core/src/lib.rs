//! Explicit ReLU network constructions with exact verification.
//!
//! The crate builds fully connected ReLU networks by hand rather than by
//! training: exact piecewise-linear interpolants, a bit-extraction memorizer,
//! grid-based Hölder approximators with median smoothing, and compositional
//! assemblies. Every construction can be evaluated in binary64, in a
//! fixed-precision binary float, or in exact rational arithmetic.

pub mod bitcodec;
pub mod compositional;
pub mod ermlab;
pub mod error;
pub mod geometry;
pub mod holder;
pub mod memorize;
pub mod net;
pub mod pwl;
pub mod scalar;

pub use error::{Error, Result};
pub use net::{
    affine_net, compose, identity_net, parallelize, parallelize_all, scaling_chain, AnyNetwork,
    Circuit, Layer, Network, SizeReport,
};
pub use scalar::{BigFloat, Real, ScalarKind};
