//! Sensor scheduling for one Kalman time step.
//!
//! The set objective is `f(S) = Tr(P_{t|t-1}) − Tr(F_S⁻¹)` with Fisher information
//! `F_S = P_{t|t-1}⁻¹ + σ⁻² Σ_{i∈S} a_i a_iᵀ`, maximized subject to `|S| = k`
//! (a uniform matroid). Greedy variants grow `S` one sensor at a time and keep
//! `F_S⁻¹` current with a Sherman–Morrison update.

mod bounds;
mod fisher;
mod greedy;

pub use bounds::{
    beta, guarantee_alpha, mse_bound, sample_size, validate_epsilon, Guarantee,
};
pub use fisher::{closed_form_gain, FisherState, SensorInstance};
pub use greedy::{
    brute_force_optimal, classic_greedy, random_schedule, random_subset, randomized_greedy, Method,
    Schedule, DEFAULT_ENUMERATION_CAP,
};
