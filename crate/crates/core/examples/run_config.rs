//! Run a TOML experiment through the harness, as the CLI does.
//!
//!     cargo run --release --example run_config -- crates/core/configs/theorem2.toml

use std::path::PathBuf;

use sensor_sched::harness::{execute, Command, RunOptions};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/single_step.toml")));
    let out_dir = std::env::temp_dir().join("sensor-sched-example");
    let opts = RunOptions { out_dir: Some(out_dir), ..Default::default() };
    match execute(Command::Run, &path, &opts) {
        Ok(res) => {
            println!("{} rows -> {}", res.output.rows.len(), res.metrics_path.display());
            println!("{}", serde_json::to_string_pretty(&res.output.summary["bound_violations"]).unwrap());
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
