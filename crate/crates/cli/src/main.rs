use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vmetrics_cli::{execute, DumpOptions, Properties, RunConfig, RunError};

/// Measures variability-aware code metrics for every function of a C source
/// tree and writes them as CSV.
#[derive(Debug, Parser)]
#[command(name = "vmetrics", version)]
struct Args {
    /// Properties file (`key = value` lines).
    config: PathBuf,
    /// Override a config entry; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the parsed syntax trees to stdout.
    #[arg(long)]
    dump_ast: bool,
    /// Print the corpus-wide tables to stdout.
    #[arg(long)]
    dump_tables: bool,
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match main_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RunError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn main_inner(args: &Args) -> Result<(), RunError> {
    let mut props = Properties::load(&args.config)?;
    for pair in &args.overrides {
        props.set_pair(pair)?;
    }
    let base = args
        .config
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let config = RunConfig::from_properties(&props, &base)?;
    let dumps = DumpOptions {
        ast: args.dump_ast,
        tables: args.dump_tables,
    };
    let summary = execute(&config, dumps, &mut std::io::stdout().lock())?;
    eprintln!("{summary}");
    eprintln!("wrote {}", config.output.display());
    Ok(())
}
