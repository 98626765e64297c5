use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mwlab::experiments::{run_and_write, ExperimentConfig};
use mwlab::kernels::{catalog, KernelParams};
use mwlab::Error;

#[derive(Parser)]
#[command(name = "mwlab", version, about = "Multi-agent m-body interaction studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config's `master_seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the kernel catalog with declared constants at radius 1.
    ListKernels,
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            let (report, csv) = pool.install(|| run_and_write(&cfg, out.as_deref()))?;
            match (&report.fit, &report.fit_error) {
                (Some(fit), _) => println!(
                    "{}: {} rows, slope {:.4} (intercept {:.4}), wrote {}",
                    report.study,
                    report.rows.len(),
                    fit.slope,
                    fit.intercept,
                    csv.display()
                ),
                (None, e) => println!(
                    "{}: {} rows, no fit ({}), wrote {}",
                    report.study,
                    report.rows.len(),
                    e.as_deref().unwrap_or("none"),
                    csv.display()
                ),
            }
            Ok(())
        }
        Command::ListKernels => {
            for entry in catalog(KernelParams::default()) {
                let b = entry.kernel.bounds();
                println!(
                    "{:<20} bound {:<10.6} lipschitz {:<10.6} {}",
                    entry.name, b.bound, b.lipschitz, entry.notes
                );
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}: ok ({})", config.display(), cfg.study.name());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
