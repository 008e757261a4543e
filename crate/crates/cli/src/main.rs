use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tgge_cli::output::read_file;
use tgge_cli::{emit_plot_script, run, CliError, Mode, RawConfig, Result};

/// Rapidity-distribution solvers and finite-chain benchmarks.
#[derive(Debug, Parser)]
#[command(name = "sim", version)]
struct Args {
    /// tgge, free-fermion, trajectories, dense-lindblad, fit, compare, or plot.
    mode: String,
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma list or `log:t0:t1:count`.
    #[arg(long, allow_hyphen_values = true)]
    checkpoints: Option<String>,
}

fn configure_threads() {
    if let Some(n) = std::env::var("SIM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Only fails if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn execute(args: Args) -> Result<()> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::parse(&read_file(path)?)?,
        None => RawConfig::default(),
    };
    for (key, value) in [
        ("kappa", &args.kappa),
        ("phi", &args.phi),
        ("theta", &args.theta),
        ("M", &args.m),
        ("out", &args.out),
        ("seed", &args.seed),
        ("checkpoints", &args.checkpoints),
    ] {
        if let Some(v) = value {
            raw.set(key, v.as_str())?;
        }
    }

    if args.mode == "plot" {
        let dir = args.out.clone().unwrap_or_else(|| "out".into());
        emit_plot_script(&PathBuf::from(dir))?;
        return Ok(());
    }
    let mode: Mode = args.mode.parse()?;
    let cfg = raw.build(Some(mode))?;
    let summary = run(&cfg)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn main() -> ExitCode {
    configure_threads();
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_record());
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
