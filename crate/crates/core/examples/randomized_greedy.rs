//! Pick k of n sensors with the randomized greedy and print its guarantee.
//!
//!     cargo run --example randomized_greedy

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use sensor_sched::curvature::exact_curvature;
use sensor_sched::rng;
use sensor_sched::scheduler::{
    beta, brute_force_optimal, guarantee_alpha, randomized_greedy, sample_size, SensorInstance,
};

fn main() -> sensor_sched::Result<()> {
    let (m, n, k, eps) = (4, 10, 3, 0.2);
    let mut r = rng::seeded(1);
    let rows = DMatrix::<f64>::from_fn(n, m, |_, _| r.sample(StandardNormal));
    let inst = SensorInstance::new(DMatrix::identity(m, m), rows, 1.0)?;

    let sched = randomized_greedy(&inst, k, eps, 42)?;
    println!("selected {:?} (in order of selection)", sched.indices);
    println!("f(S) = {:.4}, MSE = {:.4}, {} gain evaluations", sched.objective, sched.mse, sched.gain_evals);

    let s = sample_size(n, k, eps)?;
    let c = exact_curvature(&inst, None)?;
    let alpha = guarantee_alpha(c.c_max, eps, beta(s, n));
    let opt = brute_force_optimal(&inst, k, None)?;
    println!("pool size s = {s}, C_max = {:.3}, alpha = {:.3}", c.c_max, alpha.value);
    println!("f(O*) = {:.4}; expected f(S) is at least {:.4}", opt.objective, alpha.value * opt.objective);
    Ok(())
}
