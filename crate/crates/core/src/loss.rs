//! Mixture-of-Gaussians kernels and the squared maximum mean discrepancy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::MeasurementBatch;

/// How `|x - y|^2` is measured between two outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Squared l2 distance of the bit vectors, i.e. the Hamming distance.
    BitstringL2,
    /// Squared difference of the outcomes read as integers.
    Integer,
}

impl std::str::FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bitstring_l2" => Ok(Self::BitstringL2),
            "integer" => Ok(Self::Integer),
            other => Err(Error::InvalidKernel(format!("unknown distance mode {other:?}"))),
        }
    }
}

/// `K(x, y) = (1/c) sum_i exp(-|x - y|^2 / (2 sigma_i))`.
///
/// Note the bandwidth enters linearly, not squared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidths: Vec<f64>,
    pub distance: DistanceMode,
}

impl KernelSpec {
    pub fn new(bandwidths: Vec<f64>, distance: DistanceMode) -> Result<Self> {
        let spec = Self { bandwidths, distance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() {
            return Err(Error::InvalidKernel("at least one bandwidth required".into()));
        }
        if let Some(bad) = self.bandwidths.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidKernel(format!("bandwidth {bad} is not positive")));
        }
        Ok(())
    }

    /// Bars-and-Stripes defaults: bandwidths 0.5, 1, 2, 4 on bit strings.
    pub fn bars_and_stripes() -> Self {
        Self { bandwidths: vec![0.5, 1.0, 2.0, 4.0], distance: DistanceMode::BitstringL2 }
    }

    /// Gaussian-mixture defaults: bandwidths 0.25, 10, 1000 on integers.
    pub fn gaussian_mixture() -> Self {
        Self { bandwidths: vec![0.25, 10.0, 1000.0], distance: DistanceMode::Integer }
    }

    pub fn squared_distance(&self, x: usize, y: usize) -> f64 {
        match self.distance {
            DistanceMode::BitstringL2 => (x ^ y).count_ones() as f64,
            DistanceMode::Integer => {
                let d = x.abs_diff(y) as f64;
                d * d
            }
        }
    }

    fn value_at_squared_distance(&self, d2: f64) -> f64 {
        let sum: f64 = self.bandwidths.iter().map(|s| (-d2 / (2.0 * s)).exp()).sum();
        sum / self.bandwidths.len() as f64
    }
}

/// Kernel between two outcomes.
pub fn kernel_value(x: usize, y: usize, spec: &KernelSpec) -> f64 {
    spec.value_at_squared_distance(spec.squared_distance(x, y))
}

/// Dense Gram matrix over all `2^n` basis outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(n: usize, spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let dim = 1usize << n;
        // The kernel only depends on the distance, so tabulate it once.
        let table: Vec<f64> = match spec.distance {
            DistanceMode::BitstringL2 => {
                (0..=n).map(|h| spec.value_at_squared_distance(h as f64)).collect()
            }
            DistanceMode::Integer => (0..dim)
                .map(|d| spec.value_at_squared_distance((d as f64) * (d as f64)))
                .collect(),
        };
        let mut entries = Vec::with_capacity(dim * dim);
        for x in 0..dim {
            for y in 0..dim {
                let key = match spec.distance {
                    DistanceMode::BitstringL2 => (x ^ y).count_ones() as usize,
                    DistanceMode::Integer => x.abs_diff(y),
                };
                entries.push(table[key]);
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.dim + y]
    }

    fn row(&self, x: usize) -> &[f64] {
        &self.entries[x * self.dim..(x + 1) * self.dim]
    }

    /// `K v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|x| dot(self.row(x), v)).collect()
    }

    /// `a^T K b`.
    pub fn quadratic(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.apply(b))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A distribution either known exactly or represented by samples.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionView {
    Exact(Vec<f64>),
    Empirical(MeasurementBatch),
}

impl DistributionView {
    /// Probability vector; empirical views become normalized histograms.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        match self {
            Self::Exact(p) => Ok(p.clone()),
            Self::Empirical(batch) if batch.is_empty() => Err(Error::EmptyDataset),
            Self::Empirical(batch) => Ok(batch.histogram()),
        }
    }
}

/// Squared MMD, `p^T K p - 2 p^T K pi + pi^T K pi`.
pub fn mmd_loss(p: &DistributionView, pi: &DistributionView, kernel: &KernelMatrix) -> Result<f64> {
    let p = p.probabilities()?;
    let pi = pi.probabilities()?;
    for v in [&p, &pi] {
        if v.len() != kernel.dim() {
            return Err(Error::DimensionMismatch { expected: kernel.dim(), found: v.len() });
        }
    }
    let diff: Vec<f64> = p.iter().zip(&pi).map(|(a, b)| a - b).collect();
    Ok(kernel.quadratic(&diff, &diff))
}

/// MMD loss against a fixed target, with `K pi` and `pi^T K pi` cached.
#[derive(Debug, Clone)]
pub struct MmdObjective {
    kernel: KernelMatrix,
    target: Vec<f64>,
    kernel_target: Vec<f64>,
    target_term: f64,
}

impl MmdObjective {
    pub fn new(kernel: KernelMatrix, target: Vec<f64>) -> Result<Self> {
        if target.len() != kernel.dim() {
            return Err(Error::DimensionMismatch { expected: kernel.dim(), found: target.len() });
        }
        let total: f64 = target.iter().sum();
        if target.iter().any(|&t| t < 0.0) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "target must be a probability vector (sums to {total})"
            )));
        }
        let kernel_target = kernel.apply(&target);
        let target_term = dot(&target, &kernel_target);
        Ok(Self { kernel, target, kernel_target, target_term })
    }

    /// Target given by a training set; the loss uses its normalized histogram.
    pub fn from_training_set(kernel: KernelMatrix, training: &MeasurementBatch) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if 1usize << training.n != kernel.dim() {
            return Err(Error::DimensionMismatch { expected: kernel.dim(), found: 1 << training.n });
        }
        Self::new(kernel, training.histogram())
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// The constant `pi^T K pi`.
    pub fn target_term(&self) -> f64 {
        self.target_term
    }

    pub fn loss(&self, p: &[f64]) -> f64 {
        let kp = self.kernel.apply(p);
        dot(p, &kp) - 2.0 * dot(p, &self.kernel_target) + self.target_term
    }

    /// `K (p - pi)`; its inner product with a probability shift gives the
    /// derivative contribution of that shift.
    pub fn potential(&self, p: &[f64]) -> Vec<f64> {
        self.kernel
            .apply(p)
            .into_iter()
            .zip(&self.kernel_target)
            .map(|(a, b)| a - b)
            .collect()
    }
}
