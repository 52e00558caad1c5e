//! Three nodes exchanging 40 measurements per step, with and without the balance
//! term, averaged over ten simulated networks.
//!
//!     cargo run --release --example network_balance

use sensor_sched::network::{simulate_exchange, ExchangeSimConfig};

fn main() -> sensor_sched::Result<()> {
    let cfg = ExchangeSimConfig::three_node_reference();
    let runs = 10;
    for gamma in [0.0, 200.0] {
        let mut per_node = vec![0.0; cfg.ranks.len()];
        let mut received = vec![0usize; cfg.ranks.len()];
        let mut pairwise = 0.0;
        for seed in 0..runs {
            let run = simulate_exchange(&cfg, 40, gamma, seed)?;
            let last = run.last();
            per_node.iter_mut().zip(&last.per_node_mse).for_each(|(a, v)| *a += v / runs as f64);
            received.iter_mut().zip(&last.received).for_each(|(a, v)| *a += v);
            pairwise += last.pairwise_mse_distance_sum / runs as f64;
        }
        println!(
            "gamma = {gamma:>5}: mean per-node MSE {:?} (total {:.3}), pairwise distance {pairwise:.3}, deliveries {received:?}",
            per_node.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            per_node.iter().sum::<f64>()
        );
    }
    Ok(())
}
