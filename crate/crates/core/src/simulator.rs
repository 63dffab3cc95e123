//! Dense state-vector simulation of the layered Born machine circuit.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

use crate::architecture::{CircuitSpec, Slot};
use crate::error::{Error, Result};

type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Elementary gates. Rotations are `R_m(angle) = exp(-i angle sigma_m / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    /// 2x2 unitary of a single-qubit gate, `None` for CNOT.
    pub fn matrix(&self) -> Option<Matrix2> {
        match *self {
            Gate::Rx { angle, .. } => Some(rx_matrix(angle)),
            Gate::Rz { angle, .. } => Some(rz_matrix(angle)),
            Gate::Cnot { .. } => None,
        }
    }
}

fn rx_matrix(angle: f64) -> Matrix2 {
    let (s, c) = (angle / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    let mis = Complex64::new(0.0, -s);
    [[c, mis], [mis, c]]
}

fn rz_matrix(angle: f64) -> Matrix2 {
    let phase = Complex64::from_polar(1.0, -angle / 2.0);
    [[phase, ZERO], [ZERO, phase.conj()]]
}

fn matmul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Amplitudes over the `2^n` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// The product state `|0...0>`.
    pub fn zero(n: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[0] = ONE;
        Self { n, amplitudes }
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalization
    /// is the caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        Ok(Self { n: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n {
            return Err(Error::QubitOutOfRange { qubit, n: self.n });
        }
        Ok(())
    }

    /// Applies a gate in place.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::Rx { qubit, angle } => {
                self.check_qubit(qubit)?;
                self.apply_matrix(qubit, &rx_matrix(angle));
            }
            Gate::Rz { qubit, angle } => {
                self.check_qubit(qubit)?;
                self.apply_matrix(qubit, &rz_matrix(angle));
            }
            Gate::Cnot { control, target } => {
                self.check_qubit(control)?;
                self.check_qubit(target)?;
                if control == target {
                    return Err(Error::CnotSameQubit(control));
                }
                self.apply_cnot(control, target);
            }
        }
        Ok(())
    }

    pub(crate) fn apply_matrix(&mut self, qubit: usize, u: &Matrix2) {
        let stride = 1 << (self.n - 1 - qubit);
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = u[0][0] * x + u[0][1] * y;
                *b = u[1][0] * x + u[1][1] * y;
            }
        }
    }

    pub(crate) fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = 1 << (self.n - 1 - control);
        let tmask = 1 << (self.n - 1 - target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    /// Born-rule probabilities `|<x|psi>|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `shots` projective measurements in the computational basis.
    pub fn sample(&self, shots: usize, seed: u64) -> Result<MeasurementBatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_outcomes(self.n, &self.probabilities(), shots, &mut rng)
    }

    /// `<psi| Z_q |psi>` or `<psi| X_q |psi>` for the generator of a rotation slot.
    pub fn pauli_expectation(&self, qubit: usize, slot: Slot) -> Result<f64> {
        self.check_qubit(qubit)?;
        let stride = 1 << (self.n - 1 - qubit);
        let mut acc = 0.0;
        for block in self.amplitudes.chunks_exact(2 * stride) {
            let (lo, hi) = block.split_at(stride);
            for (a, b) in lo.iter().zip(hi) {
                acc += if slot.is_z() {
                    a.norm_sqr() - b.norm_sqr()
                } else {
                    2.0 * (a.conj() * b).re
                };
            }
        }
        Ok(acc)
    }
}

/// Measurement record: sampled basis-state indices of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementBatch {
    pub n: usize,
    pub samples: Vec<usize>,
}

impl MeasurementBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Normalized histogram over the `2^n` outcomes.
    pub fn histogram(&self) -> Vec<f64> {
        let mut h = vec![0.0; 1 << self.n];
        let w = 1.0 / self.samples.len() as f64;
        for &x in &self.samples {
            h[x] += w;
        }
        h
    }

    /// One bit string per line, qubit 0 first.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * (self.n + 1));
        for &x in &self.samples {
            out.push_str(&format_bits(x, self.n));
            out.push('\n');
        }
        out
    }

    /// Parses newline-delimited bit strings; blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut samples = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            match n {
                None => n = Some(line.len()),
                Some(len) if len != line.len() => {
                    return Err(Error::InvalidArgument(format!(
                        "bit string {line:?} has length {}, expected {len}",
                        line.len()
                    )))
                }
                _ => {}
            }
            samples.push(parse_bits(line)?);
        }
        let n = n.ok_or(Error::EmptyDataset)?;
        Ok(Self { n, samples })
    }
}

/// Basis index as an `n`-character bit string, qubit 0 first.
pub fn format_bits(x: usize, n: usize) -> String {
    format!("{x:0n$b}")
}

pub fn parse_bits(s: &str) -> Result<usize> {
    if s.is_empty() || s.len() > 63 {
        return Err(Error::InvalidArgument(format!("bad bit string {s:?}")));
    }
    usize::from_str_radix(s, 2).map_err(|_| Error::InvalidArgument(format!("bad bit string {s:?}")))
}

/// Draws `shots` i.i.d. outcomes from `probs`.
pub fn sample_outcomes<R: Rng>(
    n: usize,
    probs: &[f64],
    shots: usize,
    rng: &mut R,
) -> Result<MeasurementBatch> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let dist = WeightedIndex::new(probs)
        .map_err(|e| Error::InvalidArgument(format!("cannot sample distribution: {e}")))?;
    let samples = (0..shots).map(|_| dist.sample(rng)).collect();
    Ok(MeasurementBatch { n, samples })
}

/// Outcome counts of `shots` i.i.d. draws from `probs`, generated directly as
/// a multinomial vector by sequential conditional binomials. The counts have
/// the same law as histogramming [`sample_outcomes`].
pub fn sample_counts<R: Rng>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut last_positive = None;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        last_positive = Some(i);
        let q = p / mass;
        let k = if q >= 1.0 {
            remaining
        } else {
            // q is in (0, 1) here, so construction cannot fail.
            Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0)
        };
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    if remaining > 0 {
        // Round-off in the running mass; the leftover belongs to the tail.
        if let Some(i) = last_positive {
            counts[i] += remaining;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Rotation {
        qubit: usize,
        pre: Option<usize>,
        x: usize,
        post: Option<usize>,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

/// A circuit layout lowered to an operation list, one fused rotation per
/// qubit per layer.
#[derive(Debug, Clone)]
pub struct Circuit {
    spec: CircuitSpec,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(spec: &CircuitSpec) -> Self {
        let n = spec.n();
        let mut ops = Vec::new();
        let mut flat = 0;
        for layer in 0..=spec.depth() {
            let slots = spec.slots(layer);
            for qubit in 0..n {
                let (mut pre, mut x, mut post) = (None, 0, None);
                for &slot in slots {
                    match slot {
                        Slot::ZPre => pre = Some(flat),
                        Slot::X => x = flat,
                        Slot::ZPost => post = Some(flat),
                    }
                    flat += 1;
                }
                ops.push(Op::Rotation { qubit, pre, x, post });
            }
            if layer < spec.depth() {
                ops.extend(
                    spec.edges()
                        .iter()
                        .map(|&(control, target)| Op::Cnot { control, target }),
                );
            }
        }
        debug_assert_eq!(flat, spec.parameter_count());
        Self { spec: spec.clone(), ops }
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    fn rotation_matrix(pre: Option<f64>, x: f64, post: Option<f64>) -> Matrix2 {
        let mut u = rx_matrix(x);
        if let Some(a) = pre {
            u = matmul(&u, &rz_matrix(a));
        }
        if let Some(a) = post {
            u = matmul(&rz_matrix(a), &u);
        }
        u
    }

    fn apply_op(state: &mut StateVector, op: &Op, theta: &[f64], shifted: Option<(usize, f64)>) {
        match *op {
            Op::Rotation { qubit, pre, x, post } => {
                let angle = |k: usize| match shifted {
                    Some((j, delta)) if j == k => theta[k] + delta,
                    _ => theta[k],
                };
                let u = Self::rotation_matrix(pre.map(angle), angle(x), post.map(angle));
                state.apply_matrix(qubit, &u);
            }
            Op::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }

    fn run_from(&self, state: &mut StateVector, start: usize, theta: &[f64]) {
        for op in &self.ops[start..] {
            Self::apply_op(state, op, theta, None);
        }
    }

    /// Final state `|psi(theta)>`.
    pub fn run(&self, theta: &[f64]) -> Result<StateVector> {
        self.spec.check_parameters(theta)?;
        let mut state = StateVector::zero(self.spec.n());
        self.run_from(&mut state, 0, theta);
        Ok(state)
    }

    /// Visits the output states of every single-parameter shift
    /// `theta +/- shift * e_k`, calling `visit(k, sign, state)` with sign
    /// `+1.0` before `-1.0` and `k` ascending. The unshifted prefix is shared.
    pub fn for_each_shifted<F>(&self, theta: &[f64], shift: f64, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, f64, &StateVector),
    {
        self.spec.check_parameters(theta)?;
        let mut current = StateVector::zero(self.spec.n());
        for (pos, op) in self.ops.iter().enumerate() {
            if let Op::Rotation { pre, x, post, .. } = *op {
                let mut params = [pre, Some(x), post];
                params.sort();
                for k in params.into_iter().flatten() {
                    for sign in [1.0, -1.0] {
                        let mut state = current.clone();
                        Self::apply_op(&mut state, op, theta, Some((k, sign * shift)));
                        self.run_from(&mut state, pos + 1, theta);
                        visit(k, sign, &state);
                    }
                }
            }
            Self::apply_op(&mut current, op, theta, None);
        }
        Ok(())
    }

    /// State immediately before the gate carrying parameter `k`.
    pub fn state_before(&self, theta: &[f64], k: usize) -> Result<StateVector> {
        self.spec.check_parameters(theta)?;
        self.spec.parameter_index(k)?;
        let mut state = StateVector::zero(self.spec.n());
        for op in &self.ops {
            if let Op::Rotation { qubit, pre, x, post } = *op {
                if pre == Some(k) || x == k || post == Some(k) {
                    if let Some(p) = pre.filter(|&p| p != k) {
                        state.apply_matrix(qubit, &rz_matrix(theta[p]));
                    }
                    if post == Some(k) {
                        state.apply_matrix(qubit, &rx_matrix(theta[x]));
                    }
                    return Ok(state);
                }
            }
            Self::apply_op(&mut state, op, theta, None);
        }
        unreachable!("parameter {k} not found in circuit")
    }

    /// Elementary gate sequence in time order, for reference simulation.
    pub fn gates(&self, theta: &[f64]) -> Result<Vec<Gate>> {
        self.spec.check_parameters(theta)?;
        let mut gates = Vec::new();
        for op in &self.ops {
            match *op {
                Op::Rotation { qubit, pre, x, post } => {
                    if let Some(p) = pre {
                        gates.push(Gate::Rz { qubit, angle: theta[p] });
                    }
                    gates.push(Gate::Rx { qubit, angle: theta[x] });
                    if let Some(p) = post {
                        gates.push(Gate::Rz { qubit, angle: theta[p] });
                    }
                }
                Op::Cnot { control, target } => gates.push(Gate::Cnot { control, target }),
            }
        }
        Ok(gates)
    }
}

/// `|psi(theta)>`: rotation layer 0, entangler, rotation layer 1, ...,
/// entangler, rotation layer d, applied to `|0...0>` in that time order.
pub fn run_circuit(spec: &CircuitSpec, theta: &[f64]) -> Result<StateVector> {
    Circuit::new(spec).run(theta)
}

/// Exact output distribution of the circuit.
pub fn probabilities(spec: &CircuitSpec, theta: &[f64]) -> Result<Vec<f64>> {
    Ok(run_circuit(spec, theta)?.probabilities())
}
