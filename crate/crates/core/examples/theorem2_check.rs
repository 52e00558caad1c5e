//! Monte-Carlo look at the probabilistic curvature bound with sphere-distributed rows.
//!
//!     cargo run --release --example theorem2_check

use nalgebra::DMatrix;
use sensor_sched::curvature::theorem2_empirical_check;

fn main() -> sensor_sched::Result<()> {
    let (m, n, sigma_h) = (4, 8, 0.5);
    let norm_bound = m as f64 * sigma_h * sigma_h;
    for q in [2.0, 3.07, 5.0] {
        let check = theorem2_empirical_check(&DMatrix::identity(m, m), 1.0, sigma_h, norm_bound, q, n, 500, 21)?;
        println!(
            "q = {q:<5} p >= {:.3}, observed {:.3}; bound {:.1}, largest C_max/bound {:.4}, violations {}",
            check.probability_bound,
            check.event_frequency,
            check.curvature_bound,
            check.max_bound_ratio,
            check.conditional_violations
        );
    }
    Ok(())
}
