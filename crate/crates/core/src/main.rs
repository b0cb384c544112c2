use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nvdress::config::{parse_config, Experiment, RunConfig};
use nvdress::runner::{self, default_out_dir};

#[derive(Parser)]
#[command(name = "nvdress", version, about = "Optically dressed NV-center coherence simulator")]
struct Cli {
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ensemble size; overrides the config.
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Rerun from a manifest and compare the results table byte for byte.
    Replay { manifest: PathBuf },
    /// List experiment names.
    ListExperiments,
    /// Parse a config and print it with every default filled in.
    Validate { config: PathBuf },
}

fn init_pool(threads: Option<usize>) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn apply_overrides(cli: &Cli, mut config: RunConfig) -> nvdress::Result<RunConfig> {
    if let Some(s) = cli.seed {
        config.ensemble.seed = Some(s);
    }
    if let Some(r) = cli.runs {
        config.ensemble.runs = Some(r);
    }
    if let Some(t) = cli.threads {
        config.threads = Some(t);
    }
    config.resolve()
}

fn execute(cli: &Cli) -> Result<(), String> {
    match &cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<20} {}", e.name(), e.description());
            }
        }
        Command::Validate { config } => {
            let c = apply_overrides(cli, parse_config(config).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            print!("{}", c.to_toml().map_err(|e| e.to_string())?);
        }
        Command::Run { config } => {
            let c = apply_overrides(cli, parse_config(config).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            init_pool(c.threads)?;
            let out = cli.out.clone().unwrap_or_else(|| default_out_dir(&c));
            let (manifest, outcome) = runner::run(&c, &out).map_err(|e| e.to_string())?;
            if let Some(s) = outcome.summary {
                println!("{s}");
            }
            eprintln!(
                "{}: {} points, {} runs, {:.1} s -> {}",
                c.experiment,
                outcome.table.rows(),
                manifest.n_runs,
                manifest.wall_clock_seconds,
                out.display()
            );
        }
        Command::Replay { manifest } => {
            if cli.seed.is_some() || cli.runs.is_some() {
                return Err("--seed and --runs cannot be combined with replay".into());
            }
            let original = runner::read_manifest(manifest).map_err(|e| e.to_string())?;
            init_pool(cli.threads.or(original.config.threads))?;
            let r = runner::replay(manifest, cli.out.as_deref()).map_err(|e| e.to_string())?;
            match r.identical {
                Some(true) => eprintln!("replay: results identical"),
                Some(false) => return Err("replay: results differ from the original table".into()),
                None => eprintln!("replay: original results missing, nothing to compare"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
