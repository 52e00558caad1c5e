//! Track a simulated state for 30 steps, re-scheduling sensors every step, and
//! compare the filter error of the greedy schedules with random ones.
//!
//!     cargo run --example kalman_tracking

use nalgebra::{DMatrix, DVector};
use sensor_sched::scheduler::{randomized_greedy, random_schedule, Schedule, SensorInstance};
use sensor_sched::state_space::{
    predict_covariance, simulate, MatrixSequence, RowDistribution, StateSpaceModel,
};

fn track(model: &StateSpaceModel, horizon: usize, k: usize, greedy: bool) -> sensor_sched::Result<(f64, f64)> {
    let truth = simulate(model, horizon, 99)?;
    let sigma = model.sigma();
    let mut x_pred = DVector::zeros(model.state_dim());
    let mut p_pred = model.initial_cov().clone();
    let (mut sq_err, mut trace_sum) = (0.0, 0.0);
    for t in 0..horizon {
        let a = model.measurement(t)?;
        let inst = SensorInstance::new(p_pred.clone(), a.clone(), sigma)?;
        let sched: Schedule = if greedy {
            randomized_greedy(&inst, k, 0.3, t as u64)?
        } else {
            random_schedule(&inst, k, t as u64)?
        };
        // x̂ = x̂⁻ + σ⁻² P A_Sᵀ (y_S − A_S x̂⁻)
        let a_s = a.select_rows(&sched.indices);
        let y_s = truth.measurements[t].select_rows(&sched.indices);
        let x_filt = &x_pred + &sched.posterior * a_s.transpose() * (y_s - &a_s * &x_pred) / (sigma * sigma);
        sq_err += (&x_filt - &truth.states[t]).norm_squared();
        trace_sum += sched.mse;

        let h = model.transition(t)?;
        x_pred = &h * x_filt;
        p_pred = predict_covariance(&sched.posterior, &h, sigma)?;
    }
    Ok((sq_err / horizon as f64, trace_sum / horizon as f64))
}

fn main() -> sensor_sched::Result<()> {
    let (m, n, k, horizon) = (4, 20, 3, 30);
    let rot = DMatrix::from_row_slice(4, 4, &[
        0.95, 0.1, 0.0, 0.0,
        -0.1, 0.95, 0.0, 0.0,
        0.0, 0.0, 0.9, 0.2,
        0.0, 0.0, 0.0, 0.9,
    ]);
    let model = StateSpaceModel::new(
        DMatrix::identity(m, m),
        MatrixSequence::Fixed(rot),
        MatrixSequence::Random { rows: n, cols: m, dist: RowDistribution::Gaussian { sigma_h: 1.0 }, seed: 5 },
        0.3,
    )?;
    for (label, greedy) in [("randomized greedy", true), ("random", false)] {
        let (err, mse) = track(&model, horizon, k, greedy)?;
        println!("{label:>18}: mean squared error {err:.4}, mean Tr(P) {mse:.4}");
    }
    Ok(())
}
