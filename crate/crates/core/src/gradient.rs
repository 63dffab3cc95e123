//! Parameter-shift gradients of the MMD loss.
//!
//! Each rotation is `exp(-i theta Sigma / 2)` with `Sigma^2 = 1`, so every
//! output probability obeys
//!
//! ```text
//! dp(x)/dtheta_k = (p_{theta + pi/2 e_k}(x) - p_{theta - pi/2 e_k}(x)) / 2
//! ```
//!
//! exactly. Substituting into the MMD loss gives
//!
//! ```text
//! dL/dtheta_k = <K>_{p+, p} - <K>_{p-, p} - <K>_{p+, pi} + <K>_{p-, pi}
//!             = (p+ - p-)^T K (p - pi)
//! ```
//!
//! which needs only samples from the three circuits, so it can be estimated
//! from finite measurement batches without bias.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::architecture::CircuitSpec;
use crate::error::{Error, Result};
use crate::loss::{dot, KernelMatrix, MmdObjective};
use crate::simulator::{sample_counts, Circuit};

/// The parameter shift, `pi/2`.
pub const SHIFT: f64 = FRAC_PI_2;

/// How the three-circuit expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// Exact probability vectors (the `N -> infinity` limit).
    Exact,
    /// Batches of `shots` measurements per circuit.
    Sampled { shots: usize },
}

impl Estimator {
    pub fn from_batch_size(batch: Option<usize>) -> Self {
        match batch {
            None => Self::Exact,
            Some(shots) => Self::Sampled { shots },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
    pub estimator: Estimator,
    /// Circuit measurements consumed, `2 P N + N` for a sampled gradient.
    pub measurements: u64,
}

impl GradientVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(p_{theta+} - p_{theta-}) / 2` for one parameter, the exact derivative of
/// every output probability.
pub fn shift_rule_probability(spec: &CircuitSpec, theta: &[f64], index: usize) -> Result<Vec<f64>> {
    spec.check_parameters(theta)?;
    if index >= spec.parameter_count() {
        return Err(Error::ParameterIndexOutOfRange { index, count: spec.parameter_count() });
    }
    let circuit = Circuit::new(spec);
    let mut shifted = theta.to_vec();
    shifted[index] = theta[index] + SHIFT;
    let plus = circuit.run(&shifted)?.probabilities();
    shifted[index] = theta[index] - SHIFT;
    let minus = circuit.run(&shifted)?.probabilities();
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / 2.0).collect())
}

/// Exact gradient `(p+ - p-)^T K (p - pi)` for every parameter.
pub fn mmd_gradient_exact(
    spec: &CircuitSpec,
    theta: &[f64],
    objective: &MmdObjective,
) -> Result<GradientVector> {
    Ok(GradientVector {
        values: shifted_gradient(spec, theta, objective, SHIFT)?,
        estimator: Estimator::Exact,
        measurements: 0,
    })
}

/// Exact-mode gradient with an arbitrary shift and the fixed `1/2` prefactor.
/// Only `pi/2` gives the true gradient; other values exist for negative
/// controls in gradient checks.
pub fn shifted_gradient(
    spec: &CircuitSpec,
    theta: &[f64],
    objective: &MmdObjective,
    shift: f64,
) -> Result<Vec<f64>> {
    check_dims(spec, objective)?;
    let circuit = Circuit::new(spec);
    let center = circuit.run(theta)?.probabilities();
    let potential = objective.potential(&center);
    let mut grad = vec![0.0; spec.parameter_count()];
    circuit.for_each_shifted(theta, shift, |k, sign, state| {
        grad[k] += sign * dot(&state.probabilities(), &potential);
    })?;
    Ok(grad)
}

fn check_dims(spec: &CircuitSpec, objective: &MmdObjective) -> Result<()> {
    if objective.kernel().dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: objective.kernel().dim() });
    }
    Ok(())
}

fn parameter_rng(seed: u64, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ k as u64)
}

fn center_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn histogram(probs: &[f64], shots: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = 1.0 / shots as f64;
    sample_counts(probs, shots as u64, rng)
        .into_iter()
        .map(|c| c as f64 * w)
        .collect()
}

/// Sampled gradient. Per parameter, batches of `shots` measurements from
/// `p+` and `p-`; one shared batch from `p` for all parameters; the target
/// terms use the objective's full training distribution.
///
/// Parameter `k` draws from its own stream seeded with `seed ^ k`, so the
/// result does not depend on evaluation order.
pub fn mmd_gradient_sampled(
    spec: &CircuitSpec,
    theta: &[f64],
    objective: &MmdObjective,
    shots: usize,
    seed: u64,
) -> Result<GradientVector> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    check_dims(spec, objective)?;
    let circuit = Circuit::new(spec);
    let center = circuit.run(theta)?.probabilities();
    let potential = objective.potential(&histogram(&center, shots, &mut center_rng(seed)));
    let mut grad = vec![0.0; spec.parameter_count()];
    let mut rng = None;
    circuit.for_each_shifted(theta, SHIFT, |k, sign, state| {
        if sign > 0.0 {
            rng = Some(parameter_rng(seed, k));
        }
        let r = rng.as_mut().expect("plus shift visited first");
        grad[k] += sign * dot(&histogram(&state.probabilities(), shots, r), &potential);
    })?;
    Ok(GradientVector {
        values: grad,
        estimator: Estimator::Sampled { shots },
        measurements: measurement_cost(spec.parameter_count(), shots),
    })
}

/// `2 P N + N`.
pub fn measurement_cost(parameter_count: usize, shots: usize) -> u64 {
    (2 * parameter_count as u64 + 1) * shots as u64
}

/// Dispatches on the estimator.
pub fn mmd_gradient(
    spec: &CircuitSpec,
    theta: &[f64],
    objective: &MmdObjective,
    estimator: Estimator,
    seed: u64,
) -> Result<GradientVector> {
    match estimator {
        Estimator::Exact => mmd_gradient_exact(spec, theta, objective),
        Estimator::Sampled { shots } => mmd_gradient_sampled(spec, theta, objective, shots, seed),
    }
}

/// Exact output distributions of the unshifted and all shifted circuits,
/// kept so that many sampled gradients at one `theta` can share the
/// simulation cost.
#[derive(Debug, Clone)]
pub struct ShiftedDistributions {
    pub center: Vec<f64>,
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
}

impl ShiftedDistributions {
    pub fn compute(spec: &CircuitSpec, theta: &[f64]) -> Result<Self> {
        let circuit = Circuit::new(spec);
        let center = circuit.run(theta)?.probabilities();
        let count = spec.parameter_count();
        let (mut plus, mut minus) = (Vec::with_capacity(count), Vec::with_capacity(count));
        circuit.for_each_shifted(theta, SHIFT, |_, sign, state| {
            if sign > 0.0 {
                plus.push(state.probabilities());
            } else {
                minus.push(state.probabilities());
            }
        })?;
        Ok(Self { center, plus, minus })
    }

    pub fn exact_gradient(&self, objective: &MmdObjective) -> Vec<f64> {
        let potential = objective.potential(&self.center);
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(p, m)| dot(p, &potential) - dot(m, &potential))
            .collect()
    }

    /// Identical in law, and for equal seeds identical in value, to
    /// [`mmd_gradient_sampled`] at the same `theta`.
    pub fn sampled_gradient(&self, objective: &MmdObjective, shots: usize, seed: u64) -> Result<Vec<f64>> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let potential = objective.potential(&histogram(&self.center, shots, &mut center_rng(seed)));
        Ok(self
            .plus
            .iter()
            .zip(&self.minus)
            .enumerate()
            .map(|(k, (p, m))| {
                let mut rng = parameter_rng(seed, k);
                let hp = histogram(p, shots, &mut rng);
                let hm = histogram(m, shots, &mut rng);
                dot(&hp, &potential) - dot(&hm, &potential)
            })
            .collect())
    }
}

/// Central finite differences of `f` with step `h`.
pub fn finite_difference_gradient<F>(f: F, theta: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            x[k] = theta[k] + h;
            let up = f(&x);
            x[k] = theta[k] - h;
            let down = f(&x);
            x[k] = theta[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Exact MMD loss of the circuit output.
pub fn circuit_loss(spec: &CircuitSpec, theta: &[f64], objective: &MmdObjective) -> Result<f64> {
    Ok(objective.loss(&Circuit::new(spec).run(theta)?.probabilities()))
}

/// Offsets `(gamma_1, ..., gamma_r)` added to `theta`, one per argument of a
/// degree-`r` expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTuple {
    pub offsets: Vec<Vec<f64>>,
}

impl OffsetTuple {
    pub fn zeros(degree: usize, parameter_count: usize) -> Self {
        Self { offsets: vec![vec![0.0; parameter_count]; degree] }
    }

    pub fn degree(&self) -> usize {
        self.offsets.len()
    }

    /// Copy with `delta` added to parameter `k` of offset `i`.
    pub fn shifted(&self, i: usize, k: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.offsets[i][k] += delta;
        out
    }
}

/// Derivative of `E_f(Gamma) = sum_X f(X) prod_i p_{theta + gamma_i}(x_i)`
/// with respect to `theta_k`.
///
/// The general form sums `s * E_f` over both shift signs `s` of every
/// argument and halves the result. With `symmetric` set, `f` must be
/// symmetric and all offsets equal; the sum then collapses onto the first
/// argument as `(r/2) [E_f(gamma_1 + pi/2 e_k) - E_f(gamma_1 - pi/2 e_k)]`.
pub fn vstat_gradient<E>(expectation: E, gamma: &OffsetTuple, k: usize, symmetric: bool) -> Result<f64>
where
    E: Fn(&OffsetTuple) -> Result<f64>,
{
    let r = gamma.degree();
    if r < 1 {
        return Err(Error::InvalidDegree);
    }
    if gamma.offsets.iter().any(|g| k >= g.len()) {
        return Err(Error::ParameterIndexOutOfRange { index: k, count: gamma.offsets[0].len() });
    }
    if symmetric {
        if gamma.offsets.iter().any(|g| g != &gamma.offsets[0]) {
            return Err(Error::InvalidArgument(
                "symmetric V-statistic form needs identical offsets".into(),
            ));
        }
        let up = expectation(&gamma.shifted(0, k, SHIFT))?;
        let down = expectation(&gamma.shifted(0, k, -SHIFT))?;
        return Ok(r as f64 / 2.0 * (up - down));
    }
    let mut acc = 0.0;
    for i in 0..r {
        acc += expectation(&gamma.shifted(i, k, SHIFT))? - expectation(&gamma.shifted(i, k, -SHIFT))?;
    }
    Ok(acc / 2.0)
}

/// Second derivative `d^2 E_f / dtheta_a dtheta_b` by nesting the general
/// shift formula.
pub fn vstat_second_derivative<E>(expectation: E, gamma: &OffsetTuple, a: usize, b: usize) -> Result<f64>
where
    E: Fn(&OffsetTuple) -> Result<f64>,
{
    vstat_gradient(|g: &OffsetTuple| vstat_gradient(&expectation, g, a, false), gamma, b, false)
}

fn offset_distributions(circuit: &Circuit, theta: &[f64], gamma: &OffsetTuple) -> Result<Vec<Vec<f64>>> {
    gamma
        .offsets
        .iter()
        .map(|g| {
            let shifted: Vec<f64> = theta.iter().zip(g).map(|(t, o)| t + o).collect();
            Ok(circuit.run(&shifted)?.probabilities())
        })
        .collect()
}

/// `E_K(gamma_1, gamma_2) = p_{theta+gamma_1}^T K p_{theta+gamma_2}`.
pub fn kernel_expectation<'a>(
    spec: &CircuitSpec,
    theta: &'a [f64],
    kernel: &'a KernelMatrix,
) -> impl Fn(&OffsetTuple) -> Result<f64> + 'a {
    let circuit = Circuit::new(spec);
    move |gamma: &OffsetTuple| {
        if gamma.degree() != 2 {
            return Err(Error::InvalidDegree);
        }
        let p = offset_distributions(&circuit, theta, gamma)?;
        Ok(kernel.quadratic(&p[0], &p[1]))
    }
}

/// `E(gamma_1) = p_{theta+gamma_1}(outcome)`.
pub fn indicator_expectation<'a>(
    spec: &CircuitSpec,
    theta: &'a [f64],
    outcome: usize,
) -> impl Fn(&OffsetTuple) -> Result<f64> + 'a {
    let circuit = Circuit::new(spec);
    move |gamma: &OffsetTuple| {
        if gamma.degree() != 1 {
            return Err(Error::InvalidDegree);
        }
        Ok(offset_distributions(&circuit, theta, gamma)?[0][outcome])
    }
}

/// Expectation of an arbitrary `f(x_1, ..., x_r)` by enumerating all
/// `2^(n r)` outcome tuples. Only practical for tiny registers.
pub fn enumerated_expectation<'a, F>(
    spec: &CircuitSpec,
    theta: &'a [f64],
    f: F,
) -> impl Fn(&OffsetTuple) -> Result<f64> + 'a
where
    F: Fn(&[usize]) -> f64 + 'a,
{
    let circuit = Circuit::new(spec);
    let dim = spec.dim();
    move |gamma: &OffsetTuple| {
        let r = gamma.degree();
        if r < 1 {
            return Err(Error::InvalidDegree);
        }
        let p = offset_distributions(&circuit, theta, gamma)?;
        let mut xs = vec![0usize; r];
        let mut total = 0.0;
        for code in 0..dim.pow(r as u32) {
            let mut c = code;
            let mut weight = 1.0;
            for (i, x) in xs.iter_mut().enumerate() {
                *x = c % dim;
                c /= dim;
                weight *= p[i][*x];
            }
            total += weight * f(&xs);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::KernelSpec;
    use crate::simulator::probabilities;
    use std::f64::consts::PI;

    fn objective(n: usize, seed: u64) -> MmdObjective {
        let k = KernelMatrix::new(n, &KernelSpec::bars_and_stripes()).unwrap();
        let spec = CircuitSpec::new(n, 1, vec![]).unwrap();
        // A generic full-support target.
        let target = probabilities(&spec, &spec.random_parameters(seed)).unwrap();
        MmdObjective::new(k, target).unwrap()
    }

    #[test]
    fn single_rx_closed_form() {
        let spec = CircuitSpec::new(1, 0, vec![]).unwrap();
        let theta = PI / 3.0;
        let d = shift_rule_probability(&spec, &[theta], 0).unwrap();
        let expected = theta.sin() / 2.0;
        assert!((d[1] - expected).abs() < 1e-15);
        assert!((expected - 0.4330).abs() < 1e-4);
        assert!((d[0] + expected).abs() < 1e-15);
    }

    #[test]
    fn phase_on_ground_state_has_zero_derivative() {
        // Layer-0 z_post acts after Rx(0), i.e. on |0>.
        let spec = CircuitSpec::new(2, 1, vec![(0, 1)]).unwrap();
        let mut theta = spec.random_parameters(1);
        theta[0] = 0.0;
        let k = spec
            .flat_index(crate::ParameterIndex { layer: 0, qubit: 0, slot: crate::Slot::ZPost })
            .unwrap();
        let d = shift_rule_probability(&spec, &theta, k).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
    }

    #[test]
    fn bad_index() {
        let spec = CircuitSpec::new(2, 0, vec![]).unwrap();
        assert!(matches!(
            shift_rule_probability(&spec, &[0.0, 0.0], 2),
            Err(Error::ParameterIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_gradient_at_reachable_optimum() {
        let spec = CircuitSpec::new(3, 2, vec![(0, 1), (1, 2)]).unwrap();
        let theta = spec.random_parameters(8);
        let k = KernelMatrix::new(3, &KernelSpec::gaussian_mixture()).unwrap();
        let obj = MmdObjective::new(k, probabilities(&spec, &theta).unwrap()).unwrap();
        let g = mmd_gradient_exact(&spec, &theta, &obj).unwrap();
        assert!(g.norm() < 1e-6);
    }

    #[test]
    fn stored_and_streaming_paths_agree() {
        let spec = CircuitSpec::new(3, 2, vec![(2, 1), (1, 0)]).unwrap();
        let theta = spec.random_parameters(2);
        let obj = objective(3, 5);
        let shifted = ShiftedDistributions::compute(&spec, &theta).unwrap();
        let exact = mmd_gradient_exact(&spec, &theta, &obj).unwrap();
        for (a, b) in shifted.exact_gradient(&obj).iter().zip(&exact.values) {
            assert!((a - b).abs() < 1e-15);
        }
        let s1 = mmd_gradient_sampled(&spec, &theta, &obj, 300, 77).unwrap();
        let s2 = shifted.sampled_gradient(&obj, 300, 77).unwrap();
        assert_eq!(s1.values, s2);
        assert_eq!(s1.measurements, (2 * 21 + 1) * 300);
        assert_eq!(s1.estimator, Estimator::Sampled { shots: 300 });
    }

    #[test]
    fn exact_estimator_dispatch_is_bit_identical() {
        let spec = CircuitSpec::new(3, 1, vec![(0, 2), (2, 1)]).unwrap();
        let theta = spec.random_parameters(21);
        let obj = objective(3, 6);
        let a = mmd_gradient(&spec, &theta, &obj, Estimator::Exact, 123).unwrap();
        let b = mmd_gradient_exact(&spec, &theta, &obj).unwrap();
        assert_eq!(a, b);
        assert!(mmd_gradient_sampled(&spec, &theta, &obj, 0, 1).is_err());
    }

    #[test]
    fn finite_difference_of_quadratic() {
        let g = finite_difference_gradient(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0], 1e-4);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn corrupted_shift_is_wrong() {
        let spec = CircuitSpec::new(2, 1, vec![(0, 1)]).unwrap();
        let theta = spec.random_parameters(4);
        let obj = objective(2, 9);
        let good = shifted_gradient(&spec, &theta, &obj, SHIFT).unwrap();
        let bad = shifted_gradient(&spec, &theta, &obj, 0.5).unwrap();
        let dev = good.iter().zip(&bad).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev > 1e-3);
    }

    #[test]
    fn vstat_degree_one_is_shift_rule() {
        let spec = CircuitSpec::new(2, 1, vec![(1, 0)]).unwrap();
        let theta = spec.random_parameters(13);
        let gamma = OffsetTuple::zeros(1, spec.parameter_count());
        for k in 0..spec.parameter_count() {
            let d = shift_rule_probability(&spec, &theta, k).unwrap();
            for (x0, &dx) in d.iter().enumerate() {
                let e = indicator_expectation(&spec, &theta, x0);
                let v = vstat_gradient(&e, &gamma, k, true).unwrap();
                assert!((v - dx).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn vstat_errors() {
        let spec = CircuitSpec::new(2, 0, vec![]).unwrap();
        let theta = [0.1, 0.2];
        let e = indicator_expectation(&spec, &theta, 1);
        assert!(matches!(vstat_gradient(&e, &OffsetTuple::zeros(0, 2), 0, false), Err(Error::InvalidDegree)));
        let mut uneven = OffsetTuple::zeros(2, 2);
        uneven.offsets[1][0] = 0.3;
        let k = KernelMatrix::new(2, &KernelSpec::bars_and_stripes()).unwrap();
        let ek = kernel_expectation(&spec, &theta, &k);
        assert!(vstat_gradient(&ek, &uneven, 0, true).is_err());
        assert!(vstat_gradient(&ek, &uneven, 0, false).is_ok());
    }

    #[test]
    fn enumerated_matches_kernel_expectation() {
        let spec = CircuitSpec::new(2, 1, vec![(0, 1)]).unwrap();
        let theta = spec.random_parameters(31);
        let kspec = KernelSpec::bars_and_stripes();
        let k = KernelMatrix::new(2, &kspec).unwrap();
        let fk = kernel_expectation(&spec, &theta, &k);
        let fe = enumerated_expectation(&spec, &theta, |x: &[usize]| crate::loss::kernel_value(x[0], x[1], &kspec));
        let mut gamma = OffsetTuple::zeros(2, spec.parameter_count());
        gamma.offsets[0][3] = 0.4;
        gamma.offsets[1][1] = -1.1;
        assert!((fk(&gamma).unwrap() - fe(&gamma).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn vstat_reproduces_model_kernel_terms() {
        let k = KernelMatrix::new(3, &KernelSpec::bars_and_stripes()).unwrap();
        for seed in 0..5 {
            let spec = CircuitSpec::new(3, 2, vec![(0, 1), (1, 2)]).unwrap();
            let theta = spec.random_parameters(100 + seed);
            let p = probabilities(&spec, &theta).unwrap();
            let e = kernel_expectation(&spec, &theta, &k);
            let gamma = OffsetTuple::zeros(2, spec.parameter_count());
            for j in 0..spec.parameter_count() {
                let dp = shift_rule_probability(&spec, &theta, j).unwrap();
                let direct = 2.0 * k.quadratic(&dp, &p);
                let sym = vstat_gradient(&e, &gamma, j, true).unwrap();
                let general = vstat_gradient(&e, &gamma, j, false).unwrap();
                assert!((sym - direct).abs() < 1e-12, "{sym} vs {direct}");
                assert!((general - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let spec = CircuitSpec::new(2, 1, vec![(0, 1)]).unwrap();
        let theta = spec.random_parameters(41);
        let k = KernelMatrix::new(2, &KernelSpec::bars_and_stripes()).unwrap();
        let e = kernel_expectation(&spec, &theta, &k);
        let gamma = OffsetTuple::zeros(2, spec.parameter_count());
        let value = |a: usize, da: f64, b: usize, db: f64| {
            let mut t = theta.clone();
            t[a] += da;
            t[b] += db;
            let p = probabilities(&spec, &t).unwrap();
            k.quadratic(&p, &p)
        };
        let h = 1e-4;
        for (a, b) in [(0, 0), (0, 3), (2, 5), (4, 1)] {
            let fd = (value(a, h, b, h) - value(a, h, b, -h) - value(a, -h, b, h) + value(a, -h, b, -h)) / (4.0 * h * h);
            let exact = vstat_second_derivative(&e, &gamma, a, b).unwrap();
            assert!((fd - exact).abs() < 1e-4, "({a},{b}) {fd} vs {exact}");
        }
    }

    #[test]
    fn shift_rule_finite_difference_error_is_second_order() {
        let spec = CircuitSpec::new(2, 1, vec![(1, 0)]).unwrap();
        let theta = spec.random_parameters(17);
        let exact = shift_rule_probability(&spec, &theta, 2).unwrap();
        let err = |h: f64| {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[2] += h;
            down[2] -= h;
            let pu = probabilities(&spec, &up).unwrap();
            let pd = probabilities(&spec, &down).unwrap();
            (0..4).map(|x| ((pu[x] - pd[x]) / (2.0 * h) - exact[x]).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn exact_gradient_matches_finite_difference_small_circuit() {
        let spec = CircuitSpec::new(4, 2, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let obj = objective(4, 3);
        let theta = spec.random_parameters(11);
        let g = mmd_gradient_exact(&spec, &theta, &obj).unwrap();
        let fd = finite_difference_gradient(|t| circuit_loss(&spec, t, &obj).unwrap(), &theta, 1e-5);
        let dev = g.values.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn shift_rule_matches_finite_difference(seed in 0u64..10_000, k in 0usize..28) {
            let spec = CircuitSpec::new(4, 2, vec![(3, 2), (2, 1), (0, 1)]).unwrap();
            let theta = spec.random_parameters(seed);
            let exact = shift_rule_probability(&spec, &theta, k).unwrap();
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[k] += 1e-5;
            down[k] -= 1e-5;
            let pu = probabilities(&spec, &up).unwrap();
            let pd = probabilities(&spec, &down).unwrap();
            for x in 0..16 {
                proptest::prop_assert!(((pu[x] - pd[x]) / 2e-5 - exact[x]).abs() < 1e-6);
            }
        }
    }
}
