use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pricemfg_cli::{compare_files, run, CliError, Overrides, Preset, RunConfig};
use pricemfg_core::GradientBackend;

#[derive(Parser)]
#[command(
    name = "pricemfg",
    version,
    about = "Equilibrium prices for a price-formation mean-field game"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Tape,
    Adjoint,
    /// central differences, step 1e-6
    Fd,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its artifacts.
    Run {
        #[arg(long)]
        preset: Option<Preset>,
        /// TOML file merged over the preset
        #[arg(long)]
        config: Option<PathBuf>,
        /// solver initialization seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        tau_alpha: Option<f64>,
        #[arg(long)]
        tau_omega: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        /// output directory (must be absent or empty)
        #[arg(long)]
        out: Option<PathBuf>,
        /// worker threads for the per-agent gradient rows
        #[arg(long)]
        threads: Option<usize>,
    },
    /// l_inf and grid-weighted l_2 distance between two CSV outputs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// column to compare (default omega_num)
        #[arg(long)]
        column: Option<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            preset,
            config,
            seed,
            iters,
            tau_alpha,
            tau_omega,
            sigma,
            backend,
            out,
            threads,
        } => {
            let overrides = Overrides {
                seed,
                iterations: iters,
                tau_alpha,
                tau_omega,
                sigma,
                backend: backend.map(|b| match b {
                    Backend::Tape => GradientBackend::Tape,
                    Backend::Adjoint => GradientBackend::Adjoint,
                    Backend::Fd => GradientBackend::FiniteDifference { step: 1e-6 },
                }),
                out,
            };
            let cfg = RunConfig::resolve(preset, config.as_deref(), &overrides)?;
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Config {
                        origin: "--threads".into(),
                        message: e.to_string(),
                    })?;
            }
            let out = run(&cfg)?;
            let r = &out.report;
            println!("wrote {}", out.dir.display());
            println!(
                "iterations {}  clearing residual {:e}",
                r.iterations_run.unwrap_or(0),
                r.clearing_residual_sup.unwrap_or(f64::NAN)
            );
            if let (Some(w), Some(z)) = (r.linf_omega_error, r.linf_trajectory_error) {
                println!("linf omega error {w:e}  linf trajectory error {z:e}");
            }
            if let Some(c) = &r.terminal_clusters {
                for cl in &c.clusters {
                    println!("terminal cluster at {}: {} agents", cl.center, cl.count);
                }
            }
            Ok(())
        }
        Command::Compare { a, b, column } => {
            let d = compare_files(&a, &b, column.as_deref())?;
            println!("linf {:e}", d.linf);
            println!("l2 {:e}", d.l2);
            Ok(())
        }
    }
}
