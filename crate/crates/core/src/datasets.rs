//! Target distributions: Bars-and-Stripes images and a discretized mixture of
//! two Gaussians.
//!
//! BAS pixel `(r, c)` of a `rows x cols` grid is qubit `r * cols + c`, read out
//! most significant first, so a pattern's bit string is the image in
//! row-major order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::architecture::bit;
use crate::error::{Error, Result};
use crate::simulator::{sample_outcomes, MeasurementBatch};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasDataset {
    rows: usize,
    cols: usize,
    /// Sorted, without duplicates.
    patterns: Vec<usize>,
}

/// Every image whose rows are all constant (stripes) or whose columns are
/// all constant (bars). Blank and full images belong to both families and
/// appear once.
pub fn bas_patterns(rows: usize, cols: usize) -> Result<BasDataset> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!("empty {rows}x{cols} grid")));
    }
    let n = rows * cols;
    if n >= usize::BITS as usize {
        return Err(Error::InvalidArgument(format!("{rows}x{cols} grid too large")));
    }
    let pixel = |r: usize, c: usize| 1usize << (n - 1 - (r * cols + c));
    let mut patterns = Vec::new();
    for mask in 0..1usize << rows {
        let image = (0..rows)
            .filter(|r| mask >> r & 1 == 1)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .fold(0, |acc, (r, c)| acc | pixel(r, c));
        patterns.push(image);
    }
    for mask in 0..1usize << cols {
        let image = (0..cols)
            .filter(|c| mask >> c & 1 == 1)
            .flat_map(|c| (0..rows).map(move |r| (r, c)))
            .fold(0, |acc, (r, c)| acc | pixel(r, c));
        patterns.push(image);
    }
    patterns.sort_unstable();
    patterns.dedup();
    Ok(BasDataset { rows, cols, patterns })
}

impl BasDataset {
    pub fn bars_and_stripes_3x3() -> Self {
        bas_patterns(3, 3).expect("3x3 grid is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of qubits, one per pixel.
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    pub fn patterns(&self) -> &[usize] {
        &self.patterns
    }

    pub fn pixel(&self, x: usize, r: usize, c: usize) -> bool {
        bit(x, r * self.cols + c, self.n()) == 1
    }

    /// Membership test straight from the definition, independent of the
    /// generator.
    pub fn is_bar_or_stripe(&self, x: usize) -> bool {
        let rows_constant = (0..self.rows).all(|r| (0..self.cols).all(|c| self.pixel(x, r, c) == self.pixel(x, r, 0)));
        let cols_constant = (0..self.cols).all(|c| (0..self.rows).all(|r| self.pixel(x, r, c) == self.pixel(x, 0, c)));
        rows_constant || cols_constant
    }

    pub fn contains(&self, x: usize) -> bool {
        self.patterns.binary_search(&x).is_ok()
    }

    /// Uniform distribution over the patterns.
    pub fn target_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.n()];
        let w = 1.0 / self.patterns.len() as f64;
        for &x in &self.patterns {
            p[x] = w;
        }
        p
    }

    /// ASCII rendering, `#` for set pixels.
    pub fn render(&self, x: usize) -> String {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| if self.pixel(x, r, c) { '#' } else { '.' }).collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Fraction of samples that are valid patterns.
pub fn valid_rate(batch: &MeasurementBatch, dataset: &BasDataset) -> Result<f64> {
    if batch.n != dataset.n() {
        return Err(Error::DimensionMismatch { expected: dataset.n(), found: batch.n });
    }
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let valid = batch.samples.iter().filter(|&&x| dataset.contains(x)).count();
    Ok(valid as f64 / batch.len() as f64)
}

/// Equal-weight, equal-width mixture of two Gaussians on the integers
/// `0..2^n`, with centers at 2/7 and 5/7 of the range and width 1/8 of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianMixtureTarget {
    pub n: usize,
    pub x_max: f64,
    pub centers: [f64; 2],
    pub width: f64,
    #[serde(skip)]
    probabilities: Vec<f64>,
}

pub fn gaussian_mixture_target(n: usize) -> Result<GaussianMixtureTarget> {
    if n == 0 {
        return Err(Error::TooFewQubits { required: 1, found: 0 });
    }
    if n > 30 {
        return Err(Error::InvalidArgument(format!("{n} qubits is too many for a dense target")));
    }
    let x_max = (1usize << n) as f64;
    let centers = [2.0 / 7.0 * x_max, 5.0 / 7.0 * x_max];
    let width = x_max / 8.0;
    let raw: Vec<f64> = (0..1usize << n)
        .map(|x| {
            let x = x as f64;
            centers.iter().map(|mu| (-(x - mu).powi(2) / (2.0 * width * width)).exp()).sum()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let probabilities = raw.into_iter().map(|v| v / total).collect();
    Ok(GaussianMixtureTarget { n, x_max, centers, width, probabilities })
}

impl GaussianMixtureTarget {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(x, p)| x as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probabilities.iter().enumerate().map(|(x, p)| (x as f64 - m).powi(2) * p).sum()
    }
}

/// `m` i.i.d. draws from `probabilities` over `n`-bit outcomes.
pub fn draw_training_set(probabilities: &[f64], n: usize, m: usize, seed: u64) -> Result<MeasurementBatch> {
    if m == 0 {
        return Err(Error::ZeroShots);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_outcomes(n, probabilities, m, &mut rng)
}
