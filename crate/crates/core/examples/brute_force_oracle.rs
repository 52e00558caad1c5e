//! All four schedulers against the exhaustive optimum on a few small instances.
//!
//!     cargo run --example brute_force_oracle

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use sensor_sched::rng;
use sensor_sched::scheduler::{
    brute_force_optimal, classic_greedy, random_schedule, randomized_greedy, SensorInstance,
};

fn main() -> sensor_sched::Result<()> {
    let (m, n, k, eps, trials) = (4, 12, 4, 0.3, 500);
    println!("{:>4} {:>9} {:>9} {:>11} {:>9}", "inst", "optimum", "classic", "randomized", "random");
    for i in 0..5 {
        let mut r = rng::substream(3, &[i]);
        let rows = DMatrix::<f64>::from_fn(n, m, |_, _| r.sample(StandardNormal));
        let inst = SensorInstance::new(DMatrix::identity(m, m), rows, 0.8)?;
        let opt = brute_force_optimal(&inst, k, None)?.objective;
        let classic = classic_greedy(&inst, k)?.objective;
        let mut rg = 0.0;
        let mut rnd = 0.0;
        for t in 0..trials {
            rg += randomized_greedy(&inst, k, eps, t)?.objective;
            rnd += random_schedule(&inst, k, t)?.objective;
        }
        let trials = trials as f64;
        println!("{i:>4} {opt:>9.4} {classic:>9.4} {:>11.4} {:>9.4}", rg / trials, rnd / trials);
    }
    Ok(())
}
