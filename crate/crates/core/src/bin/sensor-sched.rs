use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sensor_sched::harness::{self, Command, OutputFormat, RunOptions};

#[derive(Parser)]
#[command(name = "sensor-sched", version, about = "Sensor scheduling experiments")]
struct Cli {
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for metrics and summary (default: config `output`, then out/<name>).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run whatever the config's `kind` describes.
    Run { config: PathBuf },
    /// Check the expected-value guarantee against the exhaustive oracle.
    VerifyTheorem1 { config: PathBuf },
    /// Gain-evaluation and wall-clock ratio of classic vs randomized greedy.
    Speedup { config: PathBuf },
    /// Exact or sampled curvature of each instance.
    Curvature { config: PathBuf },
    /// Monte-Carlo check of the probabilistic curvature bound.
    Theorem2 { config: PathBuf },
    /// Balanced measurement exchange simulation.
    Network { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    let (command, config) = match cli.command {
        Cmd::Run { config } => (Command::Run, config),
        Cmd::VerifyTheorem1 { config } => (Command::VerifyTheorem1, config),
        Cmd::Speedup { config } => (Command::Speedup, config),
        Cmd::Curvature { config } => (Command::Curvature, config),
        Cmd::Theorem2 { config } => (Command::Theorem2, config),
        Cmd::Network { config } => (Command::Network, config),
    };
    let opts = RunOptions {
        seed: cli.seed,
        out_dir: cli.out_dir,
        format: match cli.format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        },
    };
    match harness::execute(command, &config, &opts) {
        Ok(res) => {
            println!("{}", res.metrics_path.display());
            println!("{}", res.summary_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
