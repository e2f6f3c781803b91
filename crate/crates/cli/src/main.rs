mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Pattern synthesis, Euler tubes and limit-cycle certificates for sampled
/// switched systems.
#[derive(Debug, Parser)]
#[command(name = "eulertube", version)]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, env = "EULERTUBE_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the policy table and print the pattern chosen at z0.
    Synthesize {
        #[arg(short, long)]
        config: PathBuf,
        /// Policy table path (default: output.dir/output.policy).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Propagate the error tube of a repeated pattern.
    Tube {
        #[arg(short, long)]
        config: PathBuf,
        #[command(flatten)]
        source: PatternSource,
        /// Tube CSV path (default: output.dir/output.tube).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Search a tube for a self-including period.
    Certify {
        /// Tube CSV.
        #[arg(short, long)]
        tube: PathBuf,
        /// Euler steps per period; taken from the config when omitted.
        #[arg(short = 'K', long)]
        steps_per_period: Option<usize>,
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Certificate path (default: output.dir/output.certificate, or
        /// certificate.json next to the tube).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also try samples between period boundaries.
        #[arg(long)]
        full_scan: bool,
        /// Required slack in the inclusion test.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Integrate a perturbed ensemble and check it against a tube.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        #[command(flatten)]
        source: PatternSource,
        /// Tube CSV to check containment against.
        #[arg(short, long)]
        tube: Option<PathBuf>,
        /// Directory for trace CSVs (default: output.dir/output.traces).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

/// Where the pattern comes from, in order of precedence: `--pattern`,
/// `--policy`, `tube.pattern` in the config, then the configured policy
/// table output.
#[derive(Debug, Args)]
struct PatternSource {
    /// Comma-separated mode indices.
    #[arg(long, value_delimiter = ',', conflicts_with = "policy")]
    pattern: Option<Vec<usize>>,
    /// Policy table to look up z0 in.
    #[arg(long)]
    policy: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(commands::EXIT_CONFIG);
        }
    }
    let result = match cli.command {
        Command::Synthesize { config, out } => commands::synthesize(&config, out),
        Command::Tube {
            config,
            source,
            out,
        } => commands::tube(&config, source.pattern, source.policy, out),
        Command::Certify {
            tube,
            steps_per_period,
            config,
            out,
            full_scan,
            margin,
        } => commands::certify(&tube, steps_per_period, config, out, full_scan, margin),
        Command::Simulate {
            config,
            source,
            tube,
            out,
        } => commands::simulate(&config, source.pattern, source.policy, tube, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
