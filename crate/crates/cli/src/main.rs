use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kwc_cli::commands::{self, exit};
use kwc_cli::config::{parse_pairs, split_assignment};
use kwc_cli::verify::DEFAULT_SEED;
use kwc_cli::{CommandError, ConfigError, RunConfig};
use kwc_core::Preset;

/// Structure-preserving finite-difference solver for the 1D
/// Kobayashi-Warren-Carter grain-boundary system.
#[derive(Parser, Debug)]
#[command(name = "kwc", version)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set grid.K=100`. Repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Initial-data preset: example1, example2, example3 or smooth.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory (same as `output.dir`).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Step to T = N dt, writing series.csv and snapshots.
    Run,
    /// Print the existence and error step-size bounds.
    Bounds,
    /// Refinement study against a finer reference run.
    Converge {
        /// Comma-separated node counts, e.g. `25,50,100,200`.
        #[arg(long)]
        levels: Option<String>,
        /// Smallest acceptable fitted order.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Randomized checks of the discrete identities and gamma bounds.
    VerifyOps {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Random field pairs per node count.
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        /// Random samples per eps.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

fn load(cli: &Cli, default_preset: Preset, extra: Vec<(String, String)>) -> Result<RunConfig, CommandError> {
    let mut pairs = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| ConfigError::Invalid(format!("reading {}: {e}", p.display())))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    if let Some(p) = &cli.preset {
        pairs.push(("ic".into(), p.clone()));
    }
    if let Some(o) = &cli.out {
        pairs.push(("output.dir".into(), o.display().to_string()));
    }
    for s in &cli.set {
        pairs.push(split_assignment(s).map_err(|msg| ConfigError::Invalid(format!("--set: {msg}")))?);
    }
    pairs.extend(extra);
    Ok(RunConfig::from_pairs(&pairs, default_preset)?)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<u8, CommandError> {
    match &cli.command {
        Command::Run => {
            let cfg = load(cli, Preset::Example1, vec![])?;
            Ok(commands::run(&cfg, out)?.status.exit_code())
        }
        Command::Bounds => {
            let cfg = load(cli, Preset::Example1, vec![])?;
            commands::bounds(&cfg, out)?;
            Ok(exit::OK)
        }
        Command::Converge { levels, floor } => {
            let mut extra = Vec::new();
            if let Some(l) = levels {
                extra.push(("converge.levels".into(), l.clone()));
            }
            if let Some(f) = floor {
                extra.push(("converge.floor".into(), f.to_string()));
            }
            let cfg = load(cli, Preset::Smooth, extra)?;
            Ok(commands::converge(&cfg, out)?.code)
        }
        Command::VerifyOps { seed, pairs, samples } => Ok(commands::verify_ops(*seed, *pairs, *samples, out)?.1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(&cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
