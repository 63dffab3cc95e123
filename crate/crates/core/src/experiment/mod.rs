//! Config-driven runs: training, sampling from a checkpoint, gradient
//! checks and analysis reports. Every command writes plain CSV and JSON.
//!
//! A training run directory holds `config.json` (the resolved config),
//! `edges.json`, `trace.csv`, `theta.json`, `samples.txt` and
//! `summary.json`. Re-running from the snapshot reproduces the CSV; set
//! `record_timing` to false for byte-identical `seconds` as well.

pub mod config;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{DatasetKind, EdgeSource, ExperimentConfig, OptimizerKind};
pub use run::{build_problem, build_problem_with_depth, train, train_from, Problem, TrainOutcome, TrainRecord};

use crate::architecture::{CircuitSpec, Edge};
use crate::datasets::{bas_patterns, valid_rate};
use crate::error::{Error, Result};
use crate::gradient::{circuit_loss, finite_difference_gradient, shifted_gradient, Estimator};
use crate::metrics::{gradient_layer_study, gradient_variance_study, LayerStudy, VarianceStudy};
use crate::seeding::{derive_indexed, derive_seed};
use crate::simulator::{run_circuit, MeasurementBatch};

/// Whether a command's own check passed. Errors are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// Anything that stops a config from turning into a runnable problem is a
/// configuration error.
fn as_config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Resolves the output directory from `--out` or the config.
pub fn output_dir(config: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    out.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))
}

pub fn sample_seed(config: &ExperimentConfig) -> u64 {
    derive_seed(config.seed, "samples")
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    #[serde(flatten)]
    pub outcome: TrainOutcome,
    pub parameter_count: usize,
    pub valid_rate: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Diagnostic<'a> {
    error: String,
    last_step: Option<usize>,
    last_theta: &'a [f64],
}

/// Trains and writes a run directory.
pub fn cmd_train(config: &ExperimentConfig, out: &Path) -> Result<TrainSummary> {
    let problem = build_problem(config).map_err(as_config_error)?;
    ensure_dir(out)?;
    fs::write(out.join("config.json"), config.to_json())?;
    write_edges(&out.join("edges.json"), problem.spec.edges())?;

    let mut trace = csv::Writer::from_path(out.join("trace.csv"))?;
    trace.write_record(run::TRACE_HEADER)?;
    let mut last: (Option<usize>, Vec<f64>) = (None, Vec::new());
    let mut io_error = None;
    let result = train(config, &problem, |r, theta| {
        if io_error.is_none() {
            if let Err(e) = trace.write_record(r.to_row()) {
                io_error = Some(e);
            }
        }
        last = (Some(r.step), theta.to_vec());
    });
    trace.flush()?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let outcome = match result {
        Ok(o) => o,
        Err(e @ Error::NonFinite(_)) => {
            let diag = Diagnostic { error: e.to_string(), last_step: last.0, last_theta: &last.1 };
            write_json(&out.join("diagnostic.json"), &diag)?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    write_json(&out.join("theta.json"), &outcome.theta)?;
    let samples = run_circuit(&problem.spec, &outcome.theta)?.sample(config.sample_count, sample_seed(config))?;
    fs::write(out.join("samples.txt"), samples.to_text())?;
    let valid_rate = match &problem.bas {
        Some(d) => Some(valid_rate(&samples, d)?),
        None => None,
    };
    let summary = TrainSummary { parameter_count: problem.spec.parameter_count(), valid_rate, outcome };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn write_edges(path: &Path, edges: &[Edge]) -> Result<()> {
    fs::write(path, serde_json::to_string(edges)? + "\n")?;
    Ok(())
}

/// A trained model restored from a run directory.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub spec: CircuitSpec,
    pub theta: Vec<f64>,
}

/// Loads `config.json`, `edges.json` and `theta.json` from the directory
/// holding `config_path`.
pub fn load_checkpoint(config_path: &Path, seed: Option<u64>) -> Result<Checkpoint> {
    let config = ExperimentConfig::load(config_path, seed)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let edges = run::read_edges(&dir.join("edges.json")).map_err(as_config_error)?;
    let theta: Vec<f64> = serde_json::from_str(&fs::read_to_string(dir.join("theta.json")).map_err(|e| as_config_error(e.into()))?)
        .map_err(|e| Error::Config(format!("theta.json: {e}")))?;
    let spec = CircuitSpec::new(config.qubits(), config.depth, edges).map_err(as_config_error)?;
    if theta.len() != spec.parameter_count() {
        return Err(Error::Config(format!(
            "checkpoint has {} angles but the circuit needs {}",
            theta.len(),
            spec.parameter_count()
        )));
    }
    Ok(Checkpoint { config, spec, theta })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub shots: usize,
    pub seed: u64,
    pub valid_rate: Option<f64>,
}

/// Draws `shots` samples from a checkpoint into `out/samples.txt`.
pub fn cmd_sample(checkpoint: &Checkpoint, shots: usize, out: &Path) -> Result<(MeasurementBatch, SampleSummary)> {
    if shots == 0 {
        return Err(Error::Config("shots must be positive".into()));
    }
    let seed = sample_seed(&checkpoint.config);
    let batch = run_circuit(&checkpoint.spec, &checkpoint.theta)?.sample(shots, seed)?;
    let valid_rate = match checkpoint.config.dataset {
        DatasetKind::Bas3x3 => Some(valid_rate(&batch, &bas_patterns(3, 3)?)?),
        DatasetKind::Gaussian => None,
    };
    ensure_dir(out)?;
    fs::write(out.join("samples.txt"), batch.to_text())?;
    let summary = SampleSummary { shots, seed, valid_rate };
    write_json(&out.join("sample_summary.json"), &summary)?;
    Ok((batch, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub trials: usize,
    pub parameter_count: usize,
    pub shift: f64,
    pub step: f64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub worst_trial: usize,
    pub worst_index: usize,
    /// `layer/qubit/slot` of the worst coordinate.
    pub worst_parameter: String,
    pub passed: bool,
}

/// Compares the shift-rule gradient against central finite differences at
/// `gradcheck_trials` random points.
pub fn gradcheck(config: &ExperimentConfig) -> Result<GradcheckReport> {
    if config.estimator() != Estimator::Exact {
        return Err(Error::Config("gradcheck needs exact mode; set batch_size to null".into()));
    }
    let problem = build_problem(config).map_err(as_config_error)?;
    let spec = &problem.spec;
    let (mut max_deviation, mut worst_trial, mut worst_index) = (0.0f64, 0, 0);
    for trial in 0..config.gradcheck_trials {
        let theta = spec.random_parameters(derive_indexed(config.seed, "gradcheck", trial as u64));
        let analytic = shifted_gradient(spec, &theta, &problem.objective, config.gradcheck_shift)?;
        let numeric = finite_difference_gradient(
            |x| circuit_loss(spec, x, &problem.objective).unwrap_or(f64::NAN),
            &theta,
            config.gradcheck_step,
        );
        for (k, (a, b)) in analytic.iter().zip(&numeric).enumerate() {
            let dev = (a - b).abs();
            if !(dev <= max_deviation) {
                max_deviation = if dev.is_nan() { f64::INFINITY } else { dev };
                worst_trial = trial;
                worst_index = k;
            }
        }
    }
    let p = spec.parameter_index(worst_index)?;
    Ok(GradcheckReport {
        trials: config.gradcheck_trials,
        parameter_count: spec.parameter_count(),
        shift: config.gradcheck_shift,
        step: config.gradcheck_step,
        tolerance: config.gradcheck_tolerance,
        max_deviation,
        worst_trial,
        worst_index,
        worst_parameter: format!("{}/{}/{}", p.layer, p.qubit, p.slot),
        passed: max_deviation < config.gradcheck_tolerance,
    })
}

pub fn cmd_gradcheck(config: &ExperimentConfig, out: Option<&Path>) -> Result<(GradcheckReport, Verdict)> {
    let report = gradcheck(config)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("gradcheck.json"), &report)?;
    }
    let verdict = if report.passed { Verdict::Pass } else { Verdict::Fail };
    Ok((report, verdict))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnalysisKind {
    /// Gradient statistics grouped by layer.
    Layers,
    /// Sampled-gradient variance against batch size.
    Variance,
    /// Final loss and KL across circuit depths.
    DepthSweep,
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthPoint {
    pub depth: usize,
    pub mmd: f64,
    pub kl: f64,
    pub target_mmd: f64,
    pub status: String,
}

#[derive(Debug, Clone)]
pub enum AnalysisReport {
    Layers(LayerStudy),
    Variance(VarianceStudy),
    DepthSweep(Vec<DepthPoint>),
}

pub fn layers_analysis(config: &ExperimentConfig) -> Result<LayerStudy> {
    let problem = build_problem(config).map_err(as_config_error)?;
    let theta = run::initial_parameters(config, &problem.spec);
    gradient_layer_study(&problem.spec, &theta, &problem.objective, config.layer_bins, config.histogram_buckets)
}

pub fn variance_analysis(config: &ExperimentConfig) -> Result<VarianceStudy> {
    let problem = build_problem(config).map_err(as_config_error)?;
    let theta = run::initial_parameters(config, &problem.spec);
    let estimators: Vec<Estimator> = config.variance_batch_sizes.iter().map(|&shots| Estimator::Sampled { shots }).collect();
    gradient_variance_study(
        &problem.spec,
        &theta,
        &problem.objective,
        &estimators,
        config.variance_seeds,
        derive_seed(config.seed, "variance"),
    )
}

/// Trains one model per depth in `depth_sweep`, all from the same seed.
pub fn depth_sweep(config: &ExperimentConfig) -> Result<Vec<DepthPoint>> {
    config
        .depth_sweep
        .iter()
        .map(|&depth| {
            let mut c = config.clone();
            c.depth = depth;
            let problem = build_problem(&c).map_err(as_config_error)?;
            let outcome = train(&c, &problem, |_, _| {})?;
            Ok(DepthPoint {
                depth,
                mmd: outcome.final_loss,
                kl: outcome.final_kl,
                target_mmd: outcome.final_target_loss,
                status: outcome.status,
            })
        })
        .collect()
}

pub fn cmd_analyze(kind: AnalysisKind, config: &ExperimentConfig, out: &Path) -> Result<AnalysisReport> {
    ensure_dir(out)?;
    fs::write(out.join("config.json"), config.to_json())?;
    match kind {
        AnalysisKind::Layers => {
            let study = layers_analysis(config)?;
            write_layer_reports(&study, out)?;
            Ok(AnalysisReport::Layers(study))
        }
        AnalysisKind::Variance => {
            let study = variance_analysis(config)?;
            let mut w = csv::Writer::from_path(out.join("variance.csv"))?;
            w.write_record(["N", "variance"])?;
            for row in &study.rows {
                let n = row.shots.map_or_else(|| "exact".to_string(), |n| n.to_string());
                w.write_record([n, row.variance.to_string()])?;
            }
            w.flush()?;
            write_json(&out.join("variance.json"), &study)?;
            Ok(AnalysisReport::Variance(study))
        }
        AnalysisKind::DepthSweep => {
            let points = depth_sweep(config)?;
            let mut w = csv::Writer::from_path(out.join("depth_sweep.csv"))?;
            w.write_record(["depth", "mmd", "kl"])?;
            for p in &points {
                w.write_record([p.depth.to_string(), p.mmd.to_string(), p.kl.to_string()])?;
            }
            w.flush()?;
            write_json(&out.join("depth_sweep.json"), &points)?;
            Ok(AnalysisReport::DepthSweep(points))
        }
    }
}

#[derive(Serialize)]
struct LayerSummary<'a> {
    spread_ratio: f64,
    typical_amplitude: f64,
    parameter_count: usize,
    bins: &'a [crate::metrics::LayerBin],
}

fn write_layer_reports(study: &LayerStudy, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("layer_histogram.csv"))?;
    w.write_record(["bin", "first_layer", "last_layer", "lower_edge", "upper_edge", "count"])?;
    for (b, (bin, counts)) in study.bins.iter().zip(&study.histograms).enumerate() {
        for (j, count) in counts.iter().enumerate() {
            w.write_record([
                b.to_string(),
                bin.first_layer.to_string(),
                bin.last_layer.to_string(),
                study.edges[j].to_string(),
                study.edges[j + 1].to_string(),
                count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("layer_stats.csv"))?;
    w.write_record(["bin", "first_layer", "last_layer", "components", "mean", "std_dev"])?;
    for (b, bin) in study.bins.iter().enumerate() {
        w.write_record([
            b.to_string(),
            bin.first_layer.to_string(),
            bin.last_layer.to_string(),
            bin.components.to_string(),
            bin.mean.to_string(),
            bin.std_dev.to_string(),
        ])?;
    }
    w.flush()?;
    let summary = LayerSummary {
        spread_ratio: study.spread_ratio(),
        typical_amplitude: study.typical_amplitude(),
        parameter_count: study.gradient.len(),
        bins: &study.bins,
    };
    write_json(&out.join("layers.json"), &summary)
}
