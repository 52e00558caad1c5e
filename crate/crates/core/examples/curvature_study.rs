//! Exact curvature per distance, and how a sampled estimate approaches it.
//!
//!     cargo run --release --example curvature_study

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use sensor_sched::curvature::{exact_curvature, sampled_curvature};
use sensor_sched::rng;
use sensor_sched::scheduler::SensorInstance;

fn main() -> sensor_sched::Result<()> {
    let (m, n) = (3, 10);
    let mut r = rng::seeded(4);
    let rows = DMatrix::<f64>::from_fn(n, m, |_, _| r.sample(StandardNormal));
    let prior = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[3.0, 1.0, 0.3]));
    let inst = SensorInstance::new(prior, rows, 0.5)?;

    let exact = exact_curvature(&inst, None)?;
    println!("C_l by distance: {:?}", exact.per_distance.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>());
    println!("C_max = {:.4} (c used in the guarantee: {:.4})", exact.c_max, exact.c_effective);
    for samples in [100, 1_000, 10_000, 100_000] {
        let est = sampled_curvature(&inst, samples, 1)?;
        println!("{samples:>7} samples: {:.4}", est.c_max);
    }
    Ok(())
}
