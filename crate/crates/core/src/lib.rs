//! Inverse reinforcement learning on dynamic discrete choice models.
//!
//! Two estimators share one gradient loop: MaxEnt-IRL re-solves the soft
//! Bellman equation at every step, while CCP-IRL estimates conditional choice
//! probabilities from the demonstrations once and then recovers values through
//! the Hotz-Miller linear inversion.

pub mod bench;
pub mod ccp;
pub mod cli;
pub mod env;
pub mod error;
pub mod fingerprint;
pub mod hotz_miller;
pub mod instrument;
pub mod irl;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod soft_dp;

pub use error::{Error, Result};
