//! Flat JSON experiment configuration.
//!
//! Every optional field is filled in by [`ExperimentConfig::resolve`] and the
//! resolved form is what gets written back to a run directory, so a snapshot
//! reloads to exactly the same experiment.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gradient::{Estimator, SHIFT};
use crate::loss::{DistanceMode, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// 3x3 Bars-and-Stripes on 9 qubits.
    Bas3x3,
    /// Two-peak Gaussian mixture on `qubits` qubits.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSource {
    /// Chow-Liu tree of the training data.
    Chowliu,
    /// JSON list of `[control, target]` pairs from `edges_file`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Lbfgs,
    Cmaes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    #[serde(default)]
    pub qubits: Option<usize>,
    #[serde(default = "defaults::depth")]
    pub depth: usize,
    #[serde(default = "defaults::edges")]
    pub edges: EdgeSource,
    #[serde(default)]
    pub edges_file: Option<PathBuf>,
    #[serde(default)]
    pub kernel_bandwidths: Option<Vec<f64>>,
    #[serde(default)]
    pub kernel_distance: Option<DistanceMode>,
    #[serde(default = "defaults::optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::population")]
    pub population: usize,
    #[serde(default = "defaults::initial_sigma")]
    pub initial_sigma: f64,
    #[serde(default = "defaults::elite_fraction")]
    pub elite_fraction: f64,
    #[serde(default = "defaults::lbfgs_memory")]
    pub lbfgs_memory: usize,
    /// Measurements per circuit for gradients or noisy losses; `null` means
    /// exact probabilities.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Size of the i.i.d. training set drawn from the target; `null` trains
    /// on the exact target distribution.
    #[serde(default)]
    pub training_size: Option<usize>,
    /// Newline-delimited bit strings to train on instead of drawing a set.
    #[serde(default)]
    pub training_file: Option<PathBuf>,
    #[serde(default = "defaults::sample_count")]
    pub sample_count: usize,
    #[serde(default = "defaults::yes")]
    pub record_kl: bool,
    /// With timing off the `seconds` column is all zeros and reruns are
    /// byte-identical.
    #[serde(default = "defaults::yes")]
    pub record_timing: bool,
    #[serde(default = "defaults::gradcheck_tolerance")]
    pub gradcheck_tolerance: f64,
    #[serde(default = "defaults::gradcheck_step")]
    pub gradcheck_step: f64,
    #[serde(default = "defaults::gradcheck_shift")]
    pub gradcheck_shift: f64,
    #[serde(default = "defaults::gradcheck_trials")]
    pub gradcheck_trials: usize,
    #[serde(default = "defaults::layer_bins")]
    pub layer_bins: usize,
    #[serde(default = "defaults::histogram_buckets")]
    pub histogram_buckets: usize,
    #[serde(default = "defaults::variance_batch_sizes")]
    pub variance_batch_sizes: Vec<usize>,
    #[serde(default = "defaults::variance_seeds")]
    pub variance_seeds: usize,
    #[serde(default = "defaults::depth_sweep")]
    pub depth_sweep: Vec<usize>,
}

mod defaults {
    use super::*;

    pub fn depth() -> usize {
        10
    }
    pub fn edges() -> EdgeSource {
        EdgeSource::Chowliu
    }
    pub fn optimizer() -> OptimizerKind {
        OptimizerKind::Adam
    }
    pub fn learning_rate() -> f64 {
        0.1
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn epsilon() -> f64 {
        1e-8
    }
    pub fn population() -> usize {
        50
    }
    pub fn initial_sigma() -> f64 {
        0.3 * PI
    }
    pub fn elite_fraction() -> f64 {
        0.2
    }
    pub fn lbfgs_memory() -> usize {
        10
    }
    pub fn max_steps() -> usize {
        500
    }
    pub fn sample_count() -> usize {
        10_000
    }
    pub fn yes() -> bool {
        true
    }
    pub fn gradcheck_tolerance() -> f64 {
        1e-6
    }
    pub fn gradcheck_step() -> f64 {
        1e-5
    }
    pub fn gradcheck_shift() -> f64 {
        SHIFT
    }
    pub fn gradcheck_trials() -> usize {
        10
    }
    pub fn layer_bins() -> usize {
        10
    }
    pub fn histogram_buckets() -> usize {
        40
    }
    pub fn variance_batch_sizes() -> Vec<usize> {
        vec![500, 2000, 8000]
    }
    pub fn variance_seeds() -> usize {
        100
    }
    pub fn depth_sweep() -> Vec<usize> {
        (1..=10).collect()
    }
}

const GAUSSIAN_QUBITS: usize = 10;
const GAUSSIAN_TRAINING_SIZE: usize = 100_000;

impl ExperimentConfig {
    /// Parses JSON, applies a seed override, fills defaults and validates.
    /// Paths inside the file are taken relative to `base`.
    pub fn from_json(text: &str, seed: Option<u64>, base: Option<&Path>) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(seed) = seed {
            match value.as_object_mut() {
                Some(obj) => {
                    obj.insert("seed".into(), Value::from(seed));
                }
                None => return Err(Error::Config("config must be a JSON object".into())),
            }
        }
        let mut config: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            for path in [&mut config.edges_file, &mut config.training_file].into_iter().flatten() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        config.resolve()?;
        Ok(config)
    }

    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, seed, path.parent())
    }

    /// Fills dataset-dependent defaults and checks every field.
    pub fn resolve(&mut self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self.dataset {
            DatasetKind::Bas3x3 => {
                match self.qubits {
                    None => self.qubits = Some(9),
                    Some(9) => {}
                    Some(q) => return bad(format!("bas3x3 uses 9 qubits, config asks for {q}")),
                }
                self.kernel_bandwidths.get_or_insert_with(|| KernelSpec::bars_and_stripes().bandwidths);
                self.kernel_distance.get_or_insert(DistanceMode::BitstringL2);
            }
            DatasetKind::Gaussian => {
                let q = *self.qubits.get_or_insert(GAUSSIAN_QUBITS);
                if !(1..=20).contains(&q) {
                    return bad(format!("gaussian dataset needs 1 to 20 qubits, got {q}"));
                }
                if self.training_file.is_none() {
                    self.training_size.get_or_insert(GAUSSIAN_TRAINING_SIZE);
                }
                self.kernel_bandwidths.get_or_insert_with(|| KernelSpec::gaussian_mixture().bandwidths);
                self.kernel_distance.get_or_insert(DistanceMode::Integer);
            }
        }
        self.kernel().map_err(|e| Error::Config(e.to_string()))?;
        match (self.edges, &self.edges_file) {
            (EdgeSource::File, None) => return bad("edges = \"file\" needs edges_file".into()),
            (EdgeSource::File, Some(p)) if !p.is_file() => {
                return bad(format!("edges file {} does not exist", p.display()))
            }
            (EdgeSource::Chowliu, Some(_)) => return bad("edges_file given but edges = \"chowliu\"".into()),
            _ => {}
        }
        if let Some(p) = &self.training_file {
            if !p.is_file() {
                return bad(format!("training file {} does not exist", p.display()));
            }
            if self.training_size.is_some() {
                return bad("training_size and training_file are mutually exclusive".into());
            }
        }
        if self.training_size == Some(0) {
            return bad("training_size must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive or null".into());
        }
        if self.optimizer == OptimizerKind::Lbfgs && self.batch_size.is_some() {
            return bad("lbfgs needs exact gradients; set batch_size to null".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if self.population < 4 {
            return bad(format!("population {} is below 4", self.population));
        }
        if !(self.initial_sigma > 0.0 && self.initial_sigma.is_finite()) {
            return bad("initial_sigma must be positive".into());
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return bad("elite_fraction must lie in (0, 1]".into());
        }
        if self.lbfgs_memory == 0 {
            return bad("lbfgs_memory must be positive".into());
        }
        if self.sample_count == 0 {
            return bad("sample_count must be positive".into());
        }
        if !(self.gradcheck_step > 0.0) || !(self.gradcheck_tolerance > 0.0) || self.gradcheck_trials == 0 {
            return bad("gradcheck step, tolerance and trials must be positive".into());
        }
        if self.layer_bins == 0 || self.histogram_buckets == 0 {
            return bad("layer_bins and histogram_buckets must be positive".into());
        }
        if self.variance_batch_sizes.contains(&0) {
            return bad("variance_batch_sizes must be positive".into());
        }
        if self.variance_seeds < 20 {
            return bad(format!("variance_seeds {} is below 20", self.variance_seeds));
        }
        if self.depth_sweep.is_empty() {
            return bad("depth_sweep is empty".into());
        }
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        self.qubits.expect("resolved config")
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(
            self.kernel_bandwidths.clone().expect("resolved config"),
            self.kernel_distance.expect("resolved config"),
        )
    }

    pub fn estimator(&self) -> Estimator {
        Estimator::from_batch_size(self.batch_size)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
