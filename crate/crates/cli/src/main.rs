use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diagan::diagnostics::K_SWEEP;
use diagan::pipeline::run::{self, SweepSort, BASELINE_CKPT, SAMPLES};
use diagan::pipeline::ExperimentConfig;
use diagan::Result;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "diagan", version, about = "Self-diagnosing GAN experiments on toy 2-D data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: `single_gaussian` or `twenty_five`.
    #[arg(long)]
    preset: Option<String>,
    /// Experiment seed; overrides the config's.
    #[arg(long)]
    seed: u64,
    /// `dotted.key=value` override, applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name, self.seed)?,
            (None, None) => {
                return Err(diagan::Error::Config("either --config or --preset is required".into()));
            }
        };
        cfg.seed = self.seed;
        for o in &self.overrides {
            cfg.set(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved config as TOML.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Phase 1: train with uniform minibatches and record LDRs.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute discrepancy scores from the saved LDR log.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
    },
    /// Phase 2: score-weighted training with the auxiliary discriminator.
    ResampleTrain {
        #[arg(long)]
        run: PathBuf,
        /// Score table to sample from; defaults to the run's scores.csv.
        #[arg(long, conflicts_with = "baseline")]
        scores: Option<PathBuf>,
        /// Continue with uniform minibatches instead (the vanilla baseline).
        #[arg(long)]
        baseline: bool,
    },
    /// Phase 3: rejection sampling with the auxiliary discriminator.
    Drs {
        #[arg(long)]
        run: PathBuf,
        /// Number of accepted samples; defaults to the config's.
        #[arg(short, long)]
        n: Option<usize>,
        /// Plain generator samples from the baseline checkpoint, no rejection.
        #[arg(long)]
        baseline: bool,
    },
    /// Metrics of a sample file against the training data.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        /// Defaults to the run's samples.csv.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Full pipeline for each k, sharing one phase-1 run.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_values_t = K_SWEEP.to_vec())]
        k: Vec<f64>,
        /// Sort rows best first by `frechet`, `precision`, `recall` or `modes`.
        #[arg(long)]
        sort_by: Option<SweepSort>,
    },
    /// Collect a run's outputs into report.json.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn baseline_samples(dir: &Path, n: Option<usize>) -> Result<()> {
    let run_dir = run::Run::open(dir)?;
    let n = n.unwrap_or(run_dir.config.drs.samples);
    let samples = run::sample(dir, BASELINE_CKPT, n, "baseline_samples.csv")?;
    println!("wrote {} samples to {}", samples.nrows(), dir.join("baseline_samples.csv").display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Config { config } => {
            print!("{}", config.resolve()?.to_toml());
        }
        Command::Train { config, out } => print_json(&run::train(&config.resolve()?, &out)?)?,
        Command::Diagnose { run } => {
            let table = run::diagnose(&run)?;
            println!("wrote {} scores to {}", table.len(), run.join(run::SCORES).display());
        }
        Command::ResampleTrain { run, scores, baseline } => {
            let manifest = if baseline { run::baseline(&run)? } else { run::resample_train(&run, scores.as_deref())? };
            print_json(&manifest)?;
        }
        Command::Drs { run, n, baseline } => {
            if baseline {
                baseline_samples(&run, n)?;
            } else {
                let n = match n {
                    Some(n) => n,
                    None => run::Run::open(&run)?.config.drs.samples,
                };
                print_json(&run::drs(&run, n)?)?;
            }
        }
        Command::Evaluate { run, samples } => {
            let samples = samples.unwrap_or_else(|| run.join(SAMPLES));
            print_json(&run::evaluate(&run, &samples)?)?;
        }
        Command::Sweep { config, out, k, sort_by } => {
            let rows = run::sweep(&config.resolve()?, &out, &k, sort_by)?;
            print_json(&rows)?;
        }
        Command::Report { run } => print_json(&run::report(&run)?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
