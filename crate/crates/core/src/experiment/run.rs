//! Problem construction and the training loops behind `train`.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{DatasetKind, EdgeSource, ExperimentConfig, OptimizerKind};
use crate::architecture::{chow_liu_edges, mutual_information, CircuitSpec, Edge};
use crate::datasets::{bas_patterns, draw_training_set, gaussian_mixture_target, BasDataset};
use crate::error::{Error, Result};
use crate::gradient::{measurement_cost, mmd_gradient, Estimator};
use crate::loss::{KernelMatrix, MmdObjective};
use crate::metrics::kl_divergence;
use crate::optim::{cmaes_minimize, lbfgs_minimize, AdamConfig, AdamState, CmaesConfig, LbfgsConfig};
use crate::seeding::{derive_indexed, derive_seed};
use crate::simulator::{sample_counts, Circuit, MeasurementBatch};

/// Everything fixed before optimization starts.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: CircuitSpec,
    pub objective: MmdObjective,
    /// The distribution the data came from, used for KL and final scoring.
    pub exact_target: Vec<f64>,
    /// The dataset the Chow-Liu tree was fitted to.
    pub structure_data: Vec<usize>,
    pub bas: Option<BasDataset>,
}

pub fn read_edges(path: &Path) -> Result<Vec<Edge>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_training_file(path: &Path, n: usize) -> Result<MeasurementBatch> {
    let batch = MeasurementBatch::from_text(&std::fs::read_to_string(path)?)?;
    if batch.n != n {
        return Err(Error::Config(format!(
            "training file {} has {}-bit samples, expected {n}",
            path.display(),
            batch.n
        )));
    }
    Ok(batch)
}

/// Target, training data, entangler and objective for a resolved config.
pub fn build_problem(config: &ExperimentConfig) -> Result<Problem> {
    build_problem_with_depth(config, config.depth)
}

pub fn build_problem_with_depth(config: &ExperimentConfig, depth: usize) -> Result<Problem> {
    let n = config.qubits();
    let (exact_target, bas) = match config.dataset {
        DatasetKind::Bas3x3 => {
            let d = bas_patterns(3, 3)?;
            (d.target_distribution(), Some(d))
        }
        DatasetKind::Gaussian => (gaussian_mixture_target(n)?.probabilities().to_vec(), None),
    };
    let training = match (&config.training_file, config.training_size) {
        (Some(path), _) => Some(read_training_file(path, n)?),
        (None, Some(m)) => Some(draw_training_set(&exact_target, n, m, derive_seed(config.seed, "training"))?),
        (None, None) => None,
    };
    let structure_data = match (&training, &bas) {
        (Some(t), _) => t.samples.clone(),
        (None, Some(d)) => d.patterns().to_vec(),
        (None, None) => draw_training_set(&exact_target, n, 100_000, derive_seed(config.seed, "structure"))?.samples,
    };
    let edges = match config.edges {
        EdgeSource::Chowliu if n >= 2 => {
            chow_liu_edges(&mutual_information(n, &structure_data)?, derive_seed(config.seed, "edges"))?
        }
        EdgeSource::Chowliu => Vec::new(),
        EdgeSource::File => read_edges(config.edges_file.as_deref().expect("resolved config"))?,
    };
    let spec = CircuitSpec::new(n, depth, edges)?;
    let kernel = KernelMatrix::new(n, &config.kernel()?)?;
    let objective = match &training {
        Some(t) => MmdObjective::from_training_set(kernel, t)?,
        None => MmdObjective::new(kernel, exact_target.clone())?,
    };
    Ok(Problem { spec, objective, exact_target, structure_data, bas })
}

/// One row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRecord {
    pub step: usize,
    pub loss: f64,
    pub kl: Option<f64>,
    pub grad_norm: Option<f64>,
    pub measurements: u64,
    pub seconds: f64,
}

pub const TRACE_HEADER: [&str; 6] = ["step", "loss", "kl", "grad_norm", "measurements", "seconds"];

impl TrainRecord {
    pub fn to_row(&self) -> [String; 6] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.step.to_string(),
            self.loss.to_string(),
            opt(self.kl),
            opt(self.grad_norm),
            self.measurements.to_string(),
            self.seconds.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub theta: Vec<f64>,
    /// Exact MMD against the training objective at the final parameters.
    pub final_loss: f64,
    /// Exact MMD against the data-generating distribution.
    pub final_target_loss: f64,
    pub final_kl: f64,
    pub steps: usize,
    pub measurements: u64,
    /// Optimizer-specific termination note.
    pub status: String,
    #[serde(skip)]
    pub records: Vec<TrainRecord>,
}

struct Recorder<'a, O> {
    problem: &'a Problem,
    circuit: Circuit,
    record_kl: bool,
    start: Option<Instant>,
    records: Vec<TrainRecord>,
    observer: O,
}

impl<O: FnMut(&TrainRecord, &[f64])> Recorder<'_, O> {
    fn distribution(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.circuit.run(theta)?.probabilities())
    }

    fn push(&mut self, step: usize, loss: f64, theta: &[f64], grad_norm: Option<f64>, measurements: u64) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss {loss} at step {step}")));
        }
        let kl = if self.record_kl {
            Some(kl_divergence(&self.problem.exact_target, &self.distribution(theta)?)?)
        } else {
            None
        };
        let seconds = self.start.map_or(0.0, |s| s.elapsed().as_secs_f64());
        let record = TrainRecord { step, loss, kl, grad_norm, measurements, seconds };
        (self.observer)(&record, theta);
        self.records.push(record);
        Ok(())
    }

    fn exact_loss(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.problem.objective.loss(&self.distribution(theta)?))
    }
}

/// Initial parameters for a run.
pub fn initial_parameters(config: &ExperimentConfig, spec: &CircuitSpec) -> Vec<f64> {
    spec.random_parameters(derive_seed(config.seed, "init"))
}

/// Runs the configured optimizer. `observer` sees every trace row as it is
/// produced, together with the parameters it describes.
pub fn train<O>(config: &ExperimentConfig, problem: &Problem, observer: O) -> Result<TrainOutcome>
where
    O: FnMut(&TrainRecord, &[f64]),
{
    let theta0 = initial_parameters(config, &problem.spec);
    train_from(config, problem, theta0, observer)
}

pub fn train_from<O>(config: &ExperimentConfig, problem: &Problem, theta0: Vec<f64>, observer: O) -> Result<TrainOutcome>
where
    O: FnMut(&TrainRecord, &[f64]),
{
    let mut rec = Recorder {
        problem,
        circuit: Circuit::new(&problem.spec),
        record_kl: config.record_kl,
        start: config.record_timing.then(Instant::now),
        records: Vec::new(),
        observer,
    };
    let (theta, measurements, status) = match config.optimizer {
        OptimizerKind::Adam => run_adam(config, problem, theta0, &mut rec)?,
        OptimizerKind::Lbfgs => run_lbfgs(config, problem, theta0, &mut rec)?,
        OptimizerKind::Cmaes => run_cmaes(config, problem, theta0, &mut rec)?,
    };
    let p = rec.distribution(&theta)?;
    let final_loss = problem.objective.loss(&p);
    if !final_loss.is_finite() {
        return Err(Error::NonFinite("final loss".into()));
    }
    let target = MmdObjective::new(problem.objective.kernel().clone(), problem.exact_target.clone())?;
    Ok(TrainOutcome {
        final_target_loss: target.loss(&p),
        final_kl: kl_divergence(&problem.exact_target, &p)?,
        final_loss,
        steps: rec.records.last().map_or(0, |r| r.step),
        measurements,
        status,
        records: rec.records,
        theta,
    })
}

fn run_adam<O: FnMut(&TrainRecord, &[f64])>(
    config: &ExperimentConfig,
    problem: &Problem,
    mut theta: Vec<f64>,
    rec: &mut Recorder<'_, O>,
) -> Result<(Vec<f64>, u64, String)> {
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        beta1: config.beta1,
        beta2: config.beta2,
        epsilon: config.epsilon,
    };
    let mut state = AdamState::new(theta.len(), adam);
    let estimator = config.estimator();
    let mut measurements = 0u64;
    rec.push(0, rec.exact_loss(&theta)?, &theta, None, 0)?;
    for step in 1..=config.max_steps {
        let seed = derive_indexed(config.seed, "gradient", step as u64);
        let g = mmd_gradient(&problem.spec, &theta, &problem.objective, estimator, seed)?;
        measurements += g.measurements;
        state.step(&mut theta, &g.values)?;
        rec.push(step, rec.exact_loss(&theta)?, &theta, Some(g.norm()), measurements)?;
    }
    Ok((theta, measurements, "max_steps".into()))
}

fn run_lbfgs<O: FnMut(&TrainRecord, &[f64])>(
    config: &ExperimentConfig,
    problem: &Problem,
    theta: Vec<f64>,
    rec: &mut Recorder<'_, O>,
) -> Result<(Vec<f64>, u64, String)> {
    if config.estimator() != Estimator::Exact {
        return Err(Error::Config("lbfgs needs exact gradients".into()));
    }
    let cfg = LbfgsConfig { memory: config.lbfgs_memory, max_iters: config.max_steps, ..Default::default() };
    let circuit = Circuit::new(&problem.spec);
    let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let loss = problem.objective.loss(&circuit.run(x)?.probabilities());
        let g = crate::gradient::mmd_gradient_exact(&problem.spec, x, &problem.objective)?;
        Ok((loss, g.values))
    };
    let mut failure = None;
    let result = lbfgs_minimize(f, &theta, &cfg, |it, x| {
        if failure.is_none() {
            if let Err(e) = rec.push(it.iteration, it.loss, x, Some(it.grad_norm), 0) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let status = serde_json::to_value(result.status)?.as_str().unwrap_or_default().to_string();
    Ok((result.theta, 0, status))
}

fn run_cmaes<O: FnMut(&TrainRecord, &[f64])>(
    config: &ExperimentConfig,
    problem: &Problem,
    theta: Vec<f64>,
    rec: &mut Recorder<'_, O>,
) -> Result<(Vec<f64>, u64, String)> {
    let cfg = CmaesConfig {
        population: config.population,
        initial_sigma: config.initial_sigma,
        max_generations: config.max_steps,
        elite_fraction: config.elite_fraction,
        seed: derive_seed(config.seed, "cmaes"),
        target_loss: None,
    };
    let shots = config.batch_size;
    let per_generation = shots.map_or(0, |n| (n * config.population) as u64);
    let circuit = Circuit::new(&problem.spec);
    let loss = |x: &[f64], seed: u64| -> Result<f64> {
        let p = circuit.run(x)?.probabilities();
        Ok(match shots {
            None => problem.objective.loss(&p),
            Some(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let w = 1.0 / n as f64;
                let h: Vec<f64> = sample_counts(&p, n as u64, &mut rng).into_iter().map(|c| c as f64 * w).collect();
                problem.objective.loss(&h)
            }
        })
    };
    rec.push(0, rec.exact_loss(&theta)?, &theta, None, 0)?;
    let mut failure = None;
    let result = cmaes_minimize(loss, &theta, &cfg, |g, mean| {
        if failure.is_none() {
            let m = g.generation as u64 * per_generation;
            if let Err(e) = rec.push(g.generation, g.mean_loss, mean, None, m) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let status = format!("generations={} restarts={}", result.generations, result.restarts);
    Ok((result.mean, result.generations as u64 * per_generation, status))
}

/// Total measurements of a sampled Adam run of `steps` steps.
pub fn adam_budget(parameter_count: usize, shots: usize, steps: usize) -> u64 {
    measurement_cost(parameter_count, shots) * steps as u64
}
