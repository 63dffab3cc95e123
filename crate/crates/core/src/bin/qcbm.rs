//! Command-line front end for config-driven experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcbm::experiment::{self, AnalysisKind, AnalysisReport, ExperimentConfig, Verdict};
use qcbm::Error;

#[derive(Parser)]
#[command(name = "qcbm", version, about = "Train and analyze quantum circuit Born machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a run directory.
    Train(Common),
    /// Draw samples from a trained run; `--config` points at its config.json.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Number of samples (defaults to the config's sample_count).
        #[arg(long)]
        shots: Option<usize>,
    },
    /// Check exact gradients against finite differences.
    Gradcheck(Common),
    /// Produce analysis reports.
    Analyze {
        kind: AnalysisKind,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load(common: &Common) -> qcbm::Result<ExperimentConfig> {
    ExperimentConfig::load(&common.config, common.seed)
}

fn run(command: Command) -> qcbm::Result<Verdict> {
    match command {
        Command::Train(common) => {
            let config = load(&common)?;
            let out = experiment::output_dir(&config, common.out.as_deref())?;
            let summary = experiment::cmd_train(&config, &out)?;
            let o = &summary.outcome;
            println!("steps {} loss {:.6e} kl {:.6e} ({})", o.steps, o.final_loss, o.final_kl, o.status);
            if let Some(chi) = summary.valid_rate {
                println!("valid rate {chi:.4}");
            }
            println!("wrote {}", out.display());
        }
        Command::Sample { common, shots } => {
            let checkpoint = experiment::load_checkpoint(&common.config, common.seed)?;
            let dir = common.config.parent().unwrap_or(Path::new(".")).to_path_buf();
            let out = common.out.unwrap_or(dir);
            let shots = shots.unwrap_or(checkpoint.config.sample_count);
            let (_, summary) = experiment::cmd_sample(&checkpoint, shots, &out)?;
            println!("{} samples to {}", summary.shots, out.join("samples.txt").display());
            if let Some(chi) = summary.valid_rate {
                println!("valid rate {chi:.4}");
            }
        }
        Command::Gradcheck(common) => {
            let config = load(&common)?;
            let (r, verdict) = experiment::cmd_gradcheck(&config, common.out.as_deref())?;
            println!(
                "max deviation {:.3e} over {} trials x {} parameters (tolerance {:.1e})",
                r.max_deviation, r.trials, r.parameter_count, r.tolerance
            );
            if !r.passed {
                println!("FAIL worst at trial {} parameter {} ({})", r.worst_trial, r.worst_index, r.worst_parameter);
            } else {
                println!("PASS");
            }
            return Ok(verdict);
        }
        Command::Analyze { kind, common } => {
            let config = load(&common)?;
            let out = experiment::output_dir(&config, common.out.as_deref())?;
            match experiment::cmd_analyze(kind, &config, &out)? {
                AnalysisReport::Layers(s) => {
                    println!("spread ratio {:.3} typical amplitude {:.3e}", s.spread_ratio(), s.typical_amplitude());
                }
                AnalysisReport::Variance(s) => {
                    for row in &s.rows {
                        println!("N {:?} variance {:.4e}", row.shots, row.variance);
                    }
                    if let Some(slope) = s.slope {
                        println!("slope {slope:.4}");
                    }
                }
                AnalysisReport::DepthSweep(points) => {
                    for p in &points {
                        println!("depth {} mmd {:.4e} kl {:.4e}", p.depth, p.mmd, p.kl);
                    }
                }
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(Verdict::Pass)
}
