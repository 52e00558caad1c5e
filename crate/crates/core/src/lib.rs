//! Sensor scheduling for Kalman filtering.
//!
//! * [`state_space`]: the linear time-varying model and its covariance recursions.
//! * [`scheduler`]: the trace objective, its rank-one incremental form, randomized
//!   and classic greedy selection, the exhaustive oracle, and guarantee arithmetic.
//! * [`curvature`]: exact and sampled element-wise curvature, and the
//!   high-probability curvature bound for random measurement rows.
//! * [`network`]: balanced measurement exchange among several estimating nodes.
//! * [`harness`]: configuration-driven experiments with CSV/JSON output.

pub mod curvature;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod scheduler;
pub mod state_space;

pub use error::{Error, Result};
