use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcakernel_cli::{parse_config, run, CliError, Verb};

/// PCA-kernel density and regression estimation on functional data.
///
/// Settings come from the config file, then from environment variables named
/// `PCAKERNEL__<KEY>__<SUBKEY>`, then from `--set key.subkey=value` flags.
#[derive(Parser)]
#[command(name = "pcakernel", version)]
struct Cli {
    #[command(subcommand)]
    verb: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic sample as curves, with responses and anchors.
    Simulate(Common),
    /// Evaluate the estimates at anchors from files or a synthetic sample.
    Estimate(Common),
    /// Run every experiment over the sample-size grid and fit rates.
    Rates(Common),
    /// Parse and validate the configuration without writing anything.
    ValidateConfig(Common),
}

#[derive(Args)]
struct Common {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; 0 uses every logical processor.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Override a configuration key, e.g. `--set replications=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(verb: Verb, args: &Common) -> Result<(), CliError> {
    let cfg = parse_config(&args.config, &args.overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .expect("thread pool");
    let written = pool.install(|| run(verb, &cfg, &args.out))?;
    for path in written {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (verb, args) = match &cli.verb {
        Command::Simulate(a) => (Verb::Simulate, a),
        Command::Estimate(a) => (Verb::Estimate, a),
        Command::Rates(a) => (Verb::Rates, a),
        Command::ValidateConfig(a) => (Verb::ValidateConfig, a),
    };
    match execute(verb, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
