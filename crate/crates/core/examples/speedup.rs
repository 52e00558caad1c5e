//! Classic vs randomized greedy on a 200-sensor instance: gain evaluations and time.
//!
//!     cargo run --release --example speedup

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use sensor_sched::harness::speedup_report;
use sensor_sched::rng;
use sensor_sched::scheduler::SensorInstance;

fn main() -> sensor_sched::Result<()> {
    let (m, n, k) = (20, 200, 20);
    let mut r = rng::seeded(7);
    let rows = DMatrix::<f64>::from_fn(n, m, |_, _| r.sample(StandardNormal));
    let inst = SensorInstance::new(DMatrix::identity(m, m), rows, 1.0)?;

    let eps = [(-(k as f64)).exp(), 0.01, 0.1, 0.3, 0.5];
    let report = speedup_report(&inst, k, &eps, 11, |e, r| (e * 1000 + r) as u64)?;
    println!("{:>10} {:>4} {:>10} {:>10} {:>10}", "eps", "s", "predicted", "evals", "wall");
    for e in &report.entries {
        println!(
            "{:>10.3e} {:>4} {:>10.2} {:>10.2} {:>10.2}",
            e.epsilon, e.sample_size, e.predicted_ratio, e.gain_eval_ratio, e.wall_time_ratio
        );
    }
    Ok(())
}
