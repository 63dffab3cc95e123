//! Diagnostics beyond the training loss: exact KL divergence, statistics of
//! gradient components, and fidelity susceptibility.

use serde::Serialize;

use crate::architecture::CircuitSpec;
use crate::error::{Error, Result};
use crate::gradient::{Estimator, ShiftedDistributions};
use crate::loss::MmdObjective;
use crate::seeding::derive_indexed;
use crate::simulator::Circuit;

/// `KL(pi || p) = sum_x pi(x) ln(pi(x) / p(x))`. Outcomes outside the
/// support of `pi` contribute nothing; any `p(x) = 0` with `pi(x) > 0` gives
/// `+infinity`.
pub fn kl_divergence(pi: &[f64], p: &[f64]) -> Result<f64> {
    if pi.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: pi.len(), found: p.len() });
    }
    let mut total = 0.0;
    for (&a, &b) in pi.iter().zip(p) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * (a / b).ln();
        }
    }
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerBin {
    pub first_layer: usize,
    pub last_layer: usize,
    pub components: usize,
    pub mean: f64,
    pub std_dev: f64,
}

/// Exact gradient at one point, grouped by circuit depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerStudy {
    pub bins: Vec<LayerBin>,
    /// Shared histogram edges, `buckets + 1` of them.
    pub edges: Vec<f64>,
    /// `histograms[b][j]` counts bin `b` components in `[edges[j], edges[j+1])`.
    pub histograms: Vec<Vec<u64>>,
    pub gradient: Vec<f64>,
}

impl LayerStudy {
    /// Largest over smallest per-bin standard deviation.
    pub fn spread_ratio(&self) -> f64 {
        let sds = self.bins.iter().map(|b| b.std_dev);
        let max = sds.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = sds.fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Root mean square of all gradient components.
    pub fn typical_amplitude(&self) -> f64 {
        (self.gradient.iter().map(|g| g * g).sum::<f64>() / self.gradient.len() as f64).sqrt()
    }
}

/// Layer `l` of a depth-`d` circuit falls in bin `min(l * bins / d, bins - 1)`.
pub fn layer_bin(layer: usize, depth: usize, bins: usize) -> usize {
    (layer * bins / depth.max(1)).min(bins - 1)
}

pub fn gradient_layer_study(
    spec: &CircuitSpec,
    theta: &[f64],
    objective: &MmdObjective,
    bins: usize,
    buckets: usize,
) -> Result<LayerStudy> {
    if bins == 0 || buckets == 0 {
        return Err(Error::InvalidArgument("need at least one bin and one bucket".into()));
    }
    let bins = bins.min(spec.depth() + 1);
    let gradient = crate::gradient::mmd_gradient_exact(spec, theta, objective)?.values;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for (k, &g) in gradient.iter().enumerate() {
        let layer = spec.parameter_index(k)?.layer;
        groups[layer_bin(layer, spec.depth(), bins)].push(g);
    }
    let mut range = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if range == 0.0 || !range.is_finite() {
        range = 1.0;
    }
    let width = 2.0 * range / buckets as f64;
    let edges: Vec<f64> = (0..=buckets).map(|j| -range + j as f64 * width).collect();
    let histograms = groups
        .iter()
        .map(|values| {
            let mut counts = vec![0u64; buckets];
            for &g in values {
                let j = (((g + range) / width) as usize).min(buckets - 1);
                counts[j] += 1;
            }
            counts
        })
        .collect();
    let layers_per_bin = |b: usize| {
        let layers: Vec<usize> = (0..=spec.depth()).filter(|&l| layer_bin(l, spec.depth(), bins) == b).collect();
        (layers[0], *layers.last().expect("every bin holds a layer"))
    };
    let bins = groups
        .iter()
        .enumerate()
        .map(|(b, values)| {
            let (first_layer, last_layer) = layers_per_bin(b);
            let (mean, var) = mean_and_variance(values, 0);
            LayerBin { first_layer, last_layer, components: values.len(), mean, std_dev: var.sqrt() }
        })
        .collect();
    Ok(LayerStudy { bins, edges, histograms, gradient })
}

/// Mean and variance with `ddof` degrees of freedom removed.
fn mean_and_variance(values: &[f64], ddof: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    // Shifting by the first value keeps identical samples at exactly zero
    // variance.
    let origin = values[0];
    let shift = values.iter().map(|v| v - origin).sum::<f64>() / n as f64;
    let mean = origin + shift;
    if n <= ddof {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - origin - shift).powi(2)).sum();
    (mean, ss / (n - ddof) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    /// `None` for exact gradients.
    pub shots: Option<usize>,
    /// Per-coordinate sample variance across seeds, averaged over coordinates.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceStudy {
    pub rows: Vec<VarianceRow>,
    pub seeds: usize,
    /// Least-squares slope of `ln variance` against `ln N` over sampled rows.
    pub slope: Option<f64>,
}

/// Spread of the sampled gradient estimator at a fixed `theta`. The circuit
/// is simulated once; only the measurement batches are redrawn per seed.
pub fn gradient_variance_study(
    spec: &CircuitSpec,
    theta: &[f64],
    objective: &MmdObjective,
    estimators: &[Estimator],
    seeds: usize,
    master_seed: u64,
) -> Result<VarianceStudy> {
    if seeds < 20 {
        return Err(Error::InvalidArgument(format!("need at least 20 seeds per batch size, got {seeds}")));
    }
    let shifted = ShiftedDistributions::compute(spec, theta)?;
    let mut rows = Vec::with_capacity(estimators.len());
    for &estimator in estimators {
        let samples: Vec<Vec<f64>> = (0..seeds as u64)
            .map(|s| match estimator {
                Estimator::Exact => Ok(shifted.exact_gradient(objective)),
                Estimator::Sampled { shots } => {
                    shifted.sampled_gradient(objective, shots, derive_indexed(master_seed, &format!("variance/{shots}"), s))
                }
            })
            .collect::<Result<_>>()?;
        let count = spec.parameter_count();
        let mut column = vec![0.0; seeds];
        let mut total = 0.0;
        for k in 0..count {
            for (c, g) in column.iter_mut().zip(&samples) {
                *c = g[k];
            }
            total += mean_and_variance(&column, 1).1;
        }
        let shots = match estimator {
            Estimator::Exact => None,
            Estimator::Sampled { shots } => Some(shots),
        };
        rows.push(VarianceRow { shots, variance: total / count as f64 });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.shots.filter(|_| r.variance > 0.0).map(|n| ((n as f64).ln(), r.variance.ln())))
        .collect();
    Ok(VarianceStudy { rows, seeds, slope: regression_slope(&points) })
}

/// Least-squares slope of `y` on `x`; `None` for fewer than two distinct `x`.
pub fn regression_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityProbe {
    pub index: usize,
    pub deltas: Vec<f64>,
    pub fidelities: Vec<f64>,
    /// Curvature of `-ln F` at zero perturbation, from the fit.
    pub fitted: f64,
    /// `(1 - <Sigma>^2) / 4` on the state entering the perturbed gate.
    pub direct: f64,
    /// Largest fit residual of `-ln F / delta^2`, relative to the fitted
    /// curvature scale.
    pub fit_residual: f64,
    /// False when some perturbation is too large for the small-angle
    /// expansion to be trusted.
    pub small_angle: bool,
}

/// `|<psi(theta)|psi(theta + delta e_index)>|`.
pub fn fidelity(spec: &CircuitSpec, theta: &[f64], index: usize, delta: f64) -> Result<f64> {
    let circuit = Circuit::new(spec);
    fidelity_with(&circuit, theta, index, delta)
}

fn fidelity_with(circuit: &Circuit, theta: &[f64], index: usize, delta: f64) -> Result<f64> {
    let count = circuit.spec().parameter_count();
    if index >= count {
        return Err(Error::ParameterIndexOutOfRange { index, count });
    }
    let base = circuit.run(theta)?;
    let mut moved = theta.to_vec();
    moved[index] += delta;
    let other = circuit.run(&moved)?;
    Ok(base.inner(&other).norm().min(1.0))
}

/// Largest perturbation accepted as small-angle.
pub const SMALL_ANGLE: f64 = 0.1;

/// Fits `-ln F(delta) = a delta^2 + b delta^4` and reports `2a`, next to the
/// closed form from the generator's expectation value.
pub fn fidelity_susceptibility(spec: &CircuitSpec, theta: &[f64], index: usize, deltas: &[f64]) -> Result<FidelityProbe> {
    if deltas.is_empty() || deltas.iter().any(|d| *d == 0.0 || !d.is_finite()) {
        return Err(Error::InvalidArgument("perturbations must be finite and non-zero".into()));
    }
    let circuit = Circuit::new(spec);
    let fidelities: Vec<f64> = deltas
        .iter()
        .map(|&d| fidelity_with(&circuit, theta, index, d))
        .collect::<Result<_>>()?;
    // -ln F / delta^2 = a + b delta^2 is linear in u = delta^2.
    let points: Vec<(f64, f64)> = deltas.iter().zip(&fidelities).map(|(d, f)| (d * d, -f.ln() / (d * d))).collect();
    let (a, b) = match regression_slope(&points) {
        Some(b) => {
            let n = points.len() as f64;
            let mu = points.iter().map(|p| p.0).sum::<f64>() / n;
            let my = points.iter().map(|p| p.1).sum::<f64>() / n;
            (my - b * mu, b)
        }
        None => (points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64, 0.0),
    };
    let scale = a.abs().max(1e-12);
    let fit_residual = points.iter().map(|(u, y)| (y - a - b * u).abs() / scale).fold(0.0, f64::max);
    let slot = spec.parameter_index(index)?;
    let pre_gate = circuit.state_before(theta, index)?;
    let sigma = pre_gate.pauli_expectation(slot.qubit, slot.slot)?;
    Ok(FidelityProbe {
        index,
        deltas: deltas.to_vec(),
        fidelities,
        fitted: 2.0 * a,
        direct: 0.25 * (1.0 - sigma * sigma),
        fit_residual,
        small_angle: deltas.iter().all(|d| d.abs() <= SMALL_ANGLE),
    })
}
