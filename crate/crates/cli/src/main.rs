use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "chcon", version, about = "Quantum channel contraction, separability and noisy-memory bounds")]
struct Cli {
    /// Root seed for every randomized search and verification instance.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Instance count for verification suites (suite default when absent).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Restarts of multi-start searches.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Tolerance override for asserted inequalities.
    #[arg(long, global = true, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Output format; `simulate` defaults to jsonl, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseOrderArg {
    NoiseFirst,
    LayerFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validation, Choi spectrum, Bloch form, contraction estimates and the p constant of a channel.
    Analyze {
        /// Channel specification file (Kraus list or preset).
        channel: PathBuf,
    },
    /// Memory-time threshold and overhead lower bound.
    Bound {
        /// Channel specification file; optional when --p is given.
        channel: Option<PathBuf>,
        /// Logical qubits.
        #[arg(long, default_value_t = 1)]
        n: u64,
        /// Circuit depth, a number or a power such as 2^40.
        #[arg(long, value_parser = commands::parse_depth)]
        t: f64,
        /// Use this channel constant instead of computing it.
        #[arg(long)]
        p: Option<f64>,
        /// Certified upper bound on the quantum capacity.
        #[arg(long)]
        capacity_upper: Option<f64>,
    },
    /// Runs a noisy circuit file, or with --doubled the doubled memory experiment for a noise channel file.
    Simulate {
        /// Circuit file, or a channel specification file with --doubled.
        file: PathBuf,
        #[arg(long)]
        doubled: bool,
        /// Qubits per side for --doubled.
        #[arg(long, default_value_t = 1)]
        qubits: usize,
        /// Steps for --doubled, overriding the circuit file otherwise.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value = "noise-first")]
        noise_order: NoiseOrderArg,
        #[arg(long, value_enum, default_value = "off")]
        trailing_noise: Switch,
    },
    /// Runs a verification suite (or `all`), or replays a counterexample dump.
    Verify {
        /// Suite name or `all`.
        #[arg(required_unless_present = "replay")]
        suite: Option<String>,
        /// Counterexample or report file to replay.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CHCON_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("CHCON_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("CHCON_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(outcome) => {
            let default = if matches!(cli.command, Command::Simulate { .. }) { Format::Jsonl } else { Format::Json };
            let text = output::render(&outcome.records, cli.format.unwrap_or(default));
            if let Err(e) = output::write(&text, cli.out.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            for n in &outcome.notices {
                eprintln!("{n}");
            }
            ExitCode::from(if outcome.ok { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
