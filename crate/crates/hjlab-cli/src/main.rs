//! Command-line driver: sweep / baseline / verify over a config file.

use clap::{Parser, Subcommand};
use hjlab::config;
use hjlab::report::{run, Command as RunCommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hjlab",
    version,
    about = "Vanishing-viscosity rate experiments for Hamilton-Jacobi equations \
             with Neumann boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the output formats (comma-separated: csv,json,plot).
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Suppress per-row progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Commands {
    /// Run the experiment named in the config.
    Sweep(CommonArgs),
    /// Run the heat-baseline experiment regardless of the configured kind.
    Baseline(CommonArgs),
    /// Run the invariant/certificate suite on the configured problem.
    Verify(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, command) = match &cli.command {
        Commands::Sweep(a) => (a, RunCommand::Sweep),
        Commands::Baseline(a) => (a, RunCommand::Baseline),
        Commands::Verify(a) => (a, RunCommand::Verify),
    };

    // optional worker cap for the per-epsilon parallelism
    #[cfg(feature = "parallel")]
    if let Ok(n) = std::env::var("HJLAB_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        } else {
            eprintln!("warning: HJLAB_THREADS={n:?} is not a number; ignoring");
        }
    }

    let mut cfg = match config::parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Some(formats) = &args.format {
        cfg.formats = formats.clone();
    }

    let code = run(&cfg, command, args.quiet);
    ExitCode::from(code as u8)
}
