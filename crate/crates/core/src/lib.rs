//! Distance-constrained offline actor-critic learning at desk scale.
//!
//! The crate bundles everything needed to study how deep Q-functions
//! generalize inside versus outside the convex hull of an offline dataset,
//! and an actor-critic agent that uses a learned state-conditioned distance
//! function as its policy constraint:
//!
//! - [`nn`]: matrices, reverse-mode autodiff, ReLU MLPs, Adam.
//! - [`envs`]: a 1D random walk and a 2D point maze with Monte-Carlo Q oracles.
//! - [`datasets`]: offline datasets with controllable geometry, region removal,
//!   normalization, minibatches and nearest-neighbor projection.
//! - [`geometry`]: exact 2D convex hulls, membership and point-to-hull distance.
//! - [`distance`]: the learned distance function, its analytic optimum and
//!   property verifiers.
//! - [`agents`]: TD3 critics, the distance-constrained actor with a dual-ascent
//!   multiplier, and TD3+BC.
//! - [`experiments`]: error grids, interpolation/extrapolation probes,
//!   data-removal studies and ablation sweeps.

pub mod agents;
pub mod config;
pub mod datasets;
pub mod distance;
pub mod envs;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod nn;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use rng::Rng64;
