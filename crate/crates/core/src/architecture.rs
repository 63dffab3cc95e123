//! Circuit layout: rotation-parameter indexing and the CNOT entangler topology.
//!
//! A circuit of depth `d` on `n` qubits alternates `d + 1` rotation layers with
//! `d` identical entangler layers. Every rotation layer applies, per qubit, the
//! arbitrary rotation `Rz(post) Rx(x) Rz(pre)`; the leading `Rz` of layer 0 and
//! the trailing `Rz` of layer `d` cannot change output probabilities and are
//! dropped, leaving `(3d + 1) n` trainable angles.
//!
//! Flat parameter indices follow time order: layer by layer, qubit by qubit,
//! and within a qubit `ZPre`, `X`, `ZPost`.

use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed CNOT bond, `(control, target)`.
pub type Edge = (usize, usize);

/// Position of an angle inside a qubit's rotation block, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    /// `Rz` applied before the `Rx`.
    ZPre,
    /// The `Rx` rotation.
    X,
    /// `Rz` applied after the `Rx`.
    ZPost,
}

impl Slot {
    /// True for the two phase (`Rz`) slots.
    pub fn is_z(self) -> bool {
        matches!(self, Slot::ZPre | Slot::ZPost)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::ZPre => f.write_str("z_pre"),
            Slot::X => f.write_str("x"),
            Slot::ZPost => f.write_str("z_post"),
        }
    }
}

/// Structured address of one trainable angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParameterIndex {
    pub layer: usize,
    pub qubit: usize,
    pub slot: Slot,
}

const ALL_SLOTS: [Slot; 3] = [Slot::ZPre, Slot::X, Slot::ZPost];
const FIRST_SLOTS: [Slot; 2] = [Slot::X, Slot::ZPost];
const LAST_SLOTS: [Slot; 2] = [Slot::ZPre, Slot::X];
const ONLY_X: [Slot; 1] = [Slot::X];

/// Layout of a layered Born machine circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    n: usize,
    depth: usize,
    edges: Vec<Edge>,
}

impl CircuitSpec {
    /// Builds a layout on `n` qubits with `depth` entangler layers, each applying
    /// the CNOTs of `edges` in list order.
    pub fn new(n: usize, depth: usize, edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::TooFewQubits { required: 1, found: 0 });
        }
        for &(c, t) in &edges {
            for q in [c, t] {
                if q >= n {
                    return Err(Error::QubitOutOfRange { qubit: q, n });
                }
            }
            if c == t {
                return Err(Error::CnotSameQubit(c));
            }
        }
        Ok(Self { n, depth, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of basis states, `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `(3d + 1) n`.
    pub fn parameter_count(&self) -> usize {
        (3 * self.depth + 1) * self.n
    }

    /// Slots present on every qubit of `layer`, in time order.
    pub fn slots(&self, layer: usize) -> &'static [Slot] {
        if self.depth == 0 {
            &ONLY_X
        } else if layer == 0 {
            &FIRST_SLOTS
        } else if layer == self.depth {
            &LAST_SLOTS
        } else {
            &ALL_SLOTS
        }
    }

    fn layer_offset(&self, layer: usize) -> usize {
        if layer == 0 {
            0
        } else {
            self.slots(0).len() * self.n + (layer - 1) * 3 * self.n
        }
    }

    /// Flat position of a structured index.
    pub fn flat_index(&self, index: ParameterIndex) -> Result<usize> {
        let ParameterIndex { layer, qubit, slot } = index;
        if layer > self.depth {
            return Err(Error::InvalidSlot(format!(
                "layer {layer} exceeds depth {}",
                self.depth
            )));
        }
        if qubit >= self.n {
            return Err(Error::QubitOutOfRange { qubit, n: self.n });
        }
        let slots = self.slots(layer);
        let pos = slots.iter().position(|&s| s == slot).ok_or_else(|| {
            Error::InvalidSlot(format!("layer {layer} has no {slot} slot"))
        })?;
        Ok(self.layer_offset(layer) + qubit * slots.len() + pos)
    }

    /// Inverse of [`CircuitSpec::flat_index`].
    pub fn parameter_index(&self, flat: usize) -> Result<ParameterIndex> {
        let count = self.parameter_count();
        if flat >= count {
            return Err(Error::ParameterIndexOutOfRange { index: flat, count });
        }
        let first = self.slots(0).len() * self.n;
        let (layer, within) = if flat < first {
            (0, flat)
        } else {
            let rest = flat - first;
            (1 + rest / (3 * self.n), rest % (3 * self.n))
        };
        let slots = self.slots(layer);
        Ok(ParameterIndex {
            layer,
            qubit: within / slots.len(),
            slot: slots[within % slots.len()],
        })
    }

    /// Angles drawn i.i.d. uniform on `[0, 2pi)`.
    pub fn random_parameters(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.parameter_count())
            .map(|_| rng.random::<f64>() * TAU)
            .collect()
    }

    pub(crate) fn check_parameters(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.parameter_count() {
            return Err(Error::ParameterLength {
                expected: self.parameter_count(),
                found: theta.len(),
            });
        }
        Ok(())
    }
}

/// Symmetric matrix of pairwise mutual information between bits, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct MutualInfoMatrix {
    n: usize,
    values: Vec<f64>,
}

impl MutualInfoMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.values[s * self.n + t]
    }

    /// Builds a matrix from explicit entries (row-major, `n * n`). The
    /// diagonal is ignored; asymmetric input is rejected.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: values.len() });
        }
        for s in 0..n {
            for t in 0..n {
                if values[s * n + t] != values[t * n + s] {
                    return Err(Error::InvalidArgument(format!(
                        "mutual information matrix not symmetric at ({s}, {t})"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }
}

/// Value of bit `qubit` (qubit 0 is the most significant bit).
#[inline]
pub fn bit(x: usize, qubit: usize, n: usize) -> usize {
    (x >> (n - 1 - qubit)) & 1
}

/// Empirical pairwise mutual information of an `n`-bit dataset.
pub fn mutual_information(n: usize, dataset: &[usize]) -> Result<MutualInfoMatrix> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total = dataset.len() as f64;
    let mut ones = vec![0usize; n];
    // joint[s][t] counts samples with both bits set.
    let mut joint = vec![0usize; n * n];
    for &x in dataset {
        if x >> n != 0 {
            return Err(Error::InvalidArgument(format!("sample {x} has more than {n} bits")));
        }
        for s in 0..n {
            if bit(x, s, n) == 1 {
                ones[s] += 1;
                for t in (s + 1)..n {
                    if bit(x, t, n) == 1 {
                        joint[s * n + t] += 1;
                    }
                }
            }
        }
    }
    let mut values = vec![0.0; n * n];
    for s in 0..n {
        for t in (s + 1)..n {
            let n11 = joint[s * n + t];
            let n10 = ones[s] - n11;
            let n01 = ones[t] - n11;
            let n00 = dataset.len() - n11 - n10 - n01;
            let ps = [1.0 - ones[s] as f64 / total, ones[s] as f64 / total];
            let pt = [1.0 - ones[t] as f64 / total, ones[t] as f64 / total];
            let mut mi = 0.0;
            for (a, b, count) in [(0, 0, n00), (0, 1, n01), (1, 0, n10), (1, 1, n11)] {
                if count > 0 {
                    let pab = count as f64 / total;
                    mi += pab * (pab / (ps[a] * pt[b])).ln();
                }
            }
            // Round-off can leave tiny negatives for independent bits.
            let mi = mi.max(0.0);
            values[s * n + t] = mi;
            values[t * n + s] = mi;
        }
    }
    Ok(MutualInfoMatrix { n, values })
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Maximum spanning tree over mutual information (Kruskal), undirected, in
/// acceptance order with each pair as `(s, t)`, `s < t`.
///
/// Ties are broken by lexicographic `(s, t)` order.
pub fn maximum_spanning_tree(info: &MutualInfoMatrix) -> Result<Vec<Edge>> {
    let n = info.n();
    if n < 2 {
        return Err(Error::TooFewQubits { required: 2, found: n });
    }
    let mut pairs: Vec<Edge> = (0..n)
        .flat_map(|s| ((s + 1)..n).map(move |t| (s, t)))
        .collect();
    pairs.sort_by(|&(a, b), &(c, d)| {
        info.get(c, d)
            .total_cmp(&info.get(a, b))
            .then((a, b).cmp(&(c, d)))
    });
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n - 1);
    for (s, t) in pairs {
        if uf.union(s, t) {
            tree.push((s, t));
            if tree.len() == n - 1 {
                break;
            }
        }
    }
    Ok(tree)
}

/// Chow-Liu entangler: the maximum spanning tree with each bond's control and
/// target assigned by a seeded coin flip.
pub fn chow_liu_edges(info: &MutualInfoMatrix, seed: u64) -> Result<Vec<Edge>> {
    let tree = maximum_spanning_tree(info)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(tree
        .into_iter()
        .map(|(s, t)| if rng.random::<bool>() { (t, s) } else { (s, t) })
        .collect())
}

/// Sum of mutual information over a set of bonds.
pub fn tree_weight(info: &MutualInfoMatrix, edges: &[Edge]) -> f64 {
    edges.iter().map(|&(s, t)| info.get(s, t)).sum()
}
