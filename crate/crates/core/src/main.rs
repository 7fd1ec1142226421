//! prunekit command-line driver.
//!
//! `run` executes the full pipeline from one config; the other subcommands
//! run single stages against an existing run directory. Failures exit
//! nonzero with a machine-readable JSON object on stderr. Set `PRUNEKIT_LOG`
//! (error/warn/info/debug) to control verbosity.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use prunekit::config::{RunConfig, PAPER_SYNTHETIC_CONFIG};
use prunekit::error::{Error, Result};
use prunekit::synthgen::DEFAULT_GMM_SPEC;
use prunekit::{analysis, pipeline, theory};

#[derive(Parser)]
#[command(name = "prunekit", version, about = "Data pruning toolkit: representations, budgeted selection, and discriminative-power checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON; omitted means the bundled synthetic config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override every stage seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent selector jobs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl RunArgs {
    fn load_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                RunConfig::from_json(&body)?
            }
            None => RunConfig::paper_synthetic(),
        };
        if let Some(seed) = self.seed {
            cfg.apply_seed_override(seed);
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> Result<PathBuf> {
        if let Some(out) = &self.out {
            return Ok(out.clone());
        }
        if let Some(dir) = cfg.and_then(|c| c.output_dir.clone()) {
            return Ok(dir);
        }
        Err(Error::validation(
            "no run directory: pass --out or set output_dir in the config",
        ))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the config, dataset, and validation split into the run directory.
    Generate {
        #[command(flatten)]
        run: RunArgs,
        /// Print the embedded default GMM spec and exit.
        #[arg(long)]
        dump_default_spec: bool,
        /// Print the bundled run config and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Train the reference model and store the checkpoint trace.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Extract every configured representation (plus validation twins).
    Extract {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every selector×budget job.
    Select {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the pairwise overlap-ratio CSV for the run's selections.
    Overlap {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Tabulate the discriminative-power curves.
    Theory {
        /// Comma-separated α values.
        #[arg(long, default_value = "1,5", value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 1001)]
        grid_points: usize,
        #[arg(long, default_value_t = 1.0)]
        w_norm: f64,
        /// Min-max normalize each curve to [0, 1].
        #[arg(long)]
        normalized: bool,
        /// Output CSV path; omitted prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the analysis CSVs and the hashed input manifest.
    Report {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Full pipeline: generate → train → extract → select → analyze → report.
    Run {
        #[command(flatten)]
        run: RunArgs,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            run,
            dump_default_spec,
            dump_config,
        } => {
            if dump_default_spec {
                print!("{DEFAULT_GMM_SPEC}");
                return Ok(());
            }
            if dump_config {
                print!("{PAPER_SYNTHETIC_CONFIG}");
                return Ok(());
            }
            let cfg = run.load_config()?;
            let out = run.out_dir(Some(&cfg))?;
            pipeline::stage_generate(&cfg, &out)
        }
        Command::Train { run } => pipeline::stage_train(&run.out_dir(None)?),
        Command::Extract { run } => pipeline::stage_extract(&run.out_dir(None)?),
        Command::Select { run } => {
            let out = run.out_dir(None)?;
            pipeline::stage_select(&out, run.jobs)
        }
        Command::Overlap { run } => {
            let csv = pipeline::overlap_csv(&run.out_dir(None)?)?;
            print!("{csv}");
            Ok(())
        }
        Command::Theory {
            alphas,
            grid_points,
            w_norm,
            normalized,
            out,
        } => {
            let tables = theory::emit_curves(&alphas, grid_points, w_norm, normalized)?;
            log::info!(
                "alpha threshold (positive root of -x(1-e^x) = 1+e^x): {}",
                theory::alpha_threshold()
            );
            for t in &tables {
                if let Some(z) = theory::cg_peak_location(t.alpha)? {
                    log::info!("alpha {}: gradient curve peaks at z = {z}", t.alpha);
                } else {
                    log::info!("alpha {}: gradient curve is monotone decreasing", t.alpha);
                }
            }
            let csv = theory::curves_to_csv(&tables);
            match out {
                Some(path) => {
                    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Report { run } => analysis::report(&run.out_dir(None)?),
        Command::Run { run } => {
            let cfg = run.load_config()?;
            let out = run.out_dir(Some(&cfg))?;
            pipeline::run_all(&cfg, &out, run.jobs)
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::Validation(_) => "validation",
        Error::Config { .. } => "config",
        Error::Training { .. } => "training",
        Error::Io { .. } => "io",
        Error::Json { .. } => "json",
    }
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("PRUNEKIT_LOG", "warn"),
    )
    .init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        let payload = serde_json::json!({
            "error": e.to_string(),
            "kind": error_kind(&e),
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
