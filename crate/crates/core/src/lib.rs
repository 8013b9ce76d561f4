//! Exact and simulated mixing analysis of the Metropolis walk and the
//! lifted (two-copy) sampler on path graphs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod bounds;
pub mod config;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod paths;
pub mod sampler;
pub mod verify;

pub use distributions::{DistributionSpec, Family, ProbabilityVector, UnimodalWeights};
pub use error::{Error, Result};
pub use kernel::{
    dhn_kernel, metropolis_kernel, Direction, LiftedState, MoveKind, ThetaSpec, TransitionKernel,
};
