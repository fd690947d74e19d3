//! Command-line front end: runs configured experiments and lists channel profiles.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pilotfwd_core::harness::{emit_csv, summary, Experiment};
use pilotfwd_core::{Error, ScenarioConfig, TdlProfile};

/// Exit status for unreadable or invalid configuration and profile files.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pilotfwd",
    version,
    about = "Monte-Carlo simulator for over-the-air pilot forwarding and CLI channel estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of drops.
        #[arg(long)]
        drops: Option<usize>,
        /// Overrides the worker thread count (0 = one per core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List the built-in tapped-delay-line profiles.
    ListProfiles,
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_) | Error::InvalidProfile(_) | Error::Io { .. }
    )
}

fn run(
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    drops: Option<usize>,
    workers: Option<usize>,
) -> ExitCode {
    let prepared = ScenarioConfig::load(&config).and_then(|mut cfg| {
        cfg.seed = seed.unwrap_or(cfg.seed);
        cfg.drops = drops.unwrap_or(cfg.drops);
        cfg.workers = workers.unwrap_or(cfg.workers);
        cfg.validate()?;
        Experiment::new(cfg)
    });
    let experiment = match prepared {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if is_config_error(&e) { EXIT_CONFIG } else { 1 });
        }
    };
    let cfg = experiment.config();
    log::info!(
        "running {} drops over {} sweep points",
        cfg.drops,
        cfg.sweep.values().len()
    );
    let result = experiment.run().and_then(|sink| {
        emit_csv(&sink, &cfg.sweep, &out)?;
        let used = out.join("config.used");
        std::fs::write(&used, cfg.to_text()).map_err(|source| Error::Io { path: used, source })?;
        Ok(sink)
    });
    match result {
        Ok(sink) => {
            print!("{}", summary(&sink, &cfg.sweep));
            println!("results written to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn list_profiles() -> ExitCode {
    println!("{:<8} {:>5} {:>12}", "name", "taps", "max delay");
    for name in TdlProfile::BUILTIN {
        let p = TdlProfile::builtin(name, 1e-9).expect("built-in profile");
        let max = p.taps().last().map_or(0.0, |t| t.delay_s * 1e9);
        println!("{name:<8} {:>5} {:>9.3} DS", p.taps().len(), max);
    }
    println!("delays scale with delay_spread_ns; profile_file loads 'delay_ns power_db' lines");
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            drops,
            workers,
        } => run(config, out, seed, drops, workers),
        Command::ListProfiles => list_profiles(),
    }
}
