//! (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-mu
//! covariance updates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmaesConfig {
    pub population: usize,
    pub initial_sigma: f64,
    pub max_generations: usize,
    /// Fraction of the population that is recombined into the new mean.
    pub elite_fraction: f64,
    pub seed: u64,
    /// Stop early when a generation's best loss falls below this.
    pub target_loss: Option<f64>,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self {
            population: 50,
            initial_sigma: 0.3 * PI,
            max_generations: 1000,
            elite_fraction: 0.2,
            seed: 0,
            target_loss: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmaesGeneration {
    /// 1-based.
    pub generation: usize,
    pub mean_loss: f64,
    pub best_loss: f64,
    pub sigma: f64,
    pub evaluations: u64,
    /// The search was restarted at the end of this generation.
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct CmaesResult {
    /// Distribution mean after the last generation.
    pub mean: Vec<f64>,
    pub best_theta: Vec<f64>,
    pub best_loss: f64,
    pub generations: usize,
    pub restarts: usize,
    pub trace: Vec<CmaesGeneration>,
}

/// Search distribution `N(mean, sigma^2 C)` plus evolution paths.
#[derive(Debug, Clone)]
pub struct CmaesState {
    mean: DVector<f64>,
    sigma: f64,
    initial_sigma: f64,
    covariance: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    inv_sqrt: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    population: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    generation: usize,
    eigen_generation: usize,
    restarts: usize,
}

impl CmaesState {
    pub fn new(theta0: &[f64], config: &CmaesConfig) -> Result<Self> {
        if config.population < 4 {
            return Err(Error::InvalidArgument(format!(
                "population must be at least 4, got {}",
                config.population
            )));
        }
        if !(config.initial_sigma > 0.0 && config.initial_sigma.is_finite()) {
            return Err(Error::InvalidArgument("initial step size must be positive".into()));
        }
        if !(config.elite_fraction > 0.0 && config.elite_fraction <= 1.0) {
            return Err(Error::InvalidArgument("elite fraction must lie in (0, 1]".into()));
        }
        let n = theta0.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty parameter vector".into()));
        }
        let lambda = config.population;
        let mu = ((config.elite_fraction * lambda as f64).ceil() as usize).clamp(1, lambda);
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Ok(Self {
            mean: DVector::from_column_slice(theta0),
            sigma: config.initial_sigma,
            initial_sigma: config.initial_sigma,
            covariance: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            inv_sqrt: DMatrix::identity(n, n),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            population: lambda,
            weights,
            mu_eff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            generation: 0,
            eigen_generation: 0,
            restarts: 0,
        })
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn elite_count(&self) -> usize {
        self.weights.len()
    }

    pub fn restarts(&self) -> usize {
        self.restarts
    }

    /// Draws one population.
    pub fn ask<R: Rng>(&mut self, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.mean.len();
        (0..self.population)
            .map(|_| {
                let z = DVector::from_fn(n, |i, _| self.scales[i] * rng.sample::<f64, _>(StandardNormal));
                let y = &self.basis * z;
                (&self.mean + self.sigma * y).as_slice().to_vec()
            })
            .collect()
    }

    /// Updates the distribution from a population and its losses. Returns
    /// `true` when a degenerate covariance forced a restart.
    pub fn tell(&mut self, candidates: &[Vec<f64>], losses: &[f64]) -> Result<bool> {
        if candidates.len() != self.population || losses.len() != self.population {
            return Err(Error::DimensionMismatch { expected: self.population, found: losses.len() });
        }
        self.generation += 1;
        let n = self.mean.len();
        let nf = n as f64;
        let mut order: Vec<usize> = (0..self.population).collect();
        // NaN ranks last; ties keep sampling order.
        order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));

        let old = self.mean.clone();
        let steps: Vec<DVector<f64>> = order[..self.weights.len()]
            .iter()
            .map(|&i| (DVector::from_column_slice(&candidates[i]) - &old) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in self.weights.iter().zip(&steps) {
            y_w.axpy(*w, y, 1.0);
        }
        self.mean = &old + self.sigma * &y_w;

        let cs = self.cs;
        self.path_sigma = (1.0 - cs) * &self.path_sigma + (cs * (2.0 - cs) * self.mu_eff).sqrt() * (&self.inv_sqrt * &y_w);
        let ps_norm = self.path_sigma.norm();
        let decay = 1.0 - (1.0 - cs).powi(2 * self.generation as i32);
        let hsig = ps_norm / decay.sqrt() / self.chi_n < 1.4 + 2.0 / (nf + 1.0);
        let cc = self.cc;
        let h = if hsig { 1.0 } else { 0.0 };
        self.path_c = (1.0 - cc) * &self.path_c + h * (cc * (2.0 - cc) * self.mu_eff).sqrt() * &y_w;

        let (c1, cmu) = (self.c1, self.cmu);
        let keep = 1.0 - c1 - cmu + (1.0 - h) * c1 * cc * (2.0 - cc);
        self.covariance *= keep;
        self.covariance.ger(c1, &self.path_c, &self.path_c, 1.0);
        for (w, y) in self.weights.iter().zip(&steps) {
            self.covariance.ger(cmu * w, y, y, 1.0);
        }
        self.sigma *= ((cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();

        let lag = (self.population as f64 / (c1 + cmu) / nf / 10.0).max(1.0) as usize;
        if self.generation - self.eigen_generation >= lag && !self.decompose() {
            self.restart();
            return Ok(true);
        }
        if !self.sigma.is_finite() || self.sigma == 0.0 {
            self.restart();
            return Ok(true);
        }
        Ok(false)
    }

    /// The search distribution has shrunk below any meaningful step.
    pub fn converged(&self) -> bool {
        self.sigma * self.scales.max() < 1e-12 * self.initial_sigma
    }

    /// Refreshes `B`, `D` and `C^{-1/2}`; `false` if `C` is no longer
    /// usable as a covariance.
    fn decompose(&mut self) -> bool {
        self.eigen_generation = self.generation;
        let c = (&self.covariance + self.covariance.transpose()) * 0.5;
        if c.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let eig = SymmetricEigen::new(c.clone());
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        if !(lo > 0.0) || hi / lo > 1e14 {
            return false;
        }
        self.covariance = c;
        self.scales = eig.eigenvalues.map(f64::sqrt);
        self.inv_sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d)) * eig.eigenvectors.transpose();
        self.basis = eig.eigenvectors;
        true
    }

    /// Keeps the mean, resets shape and paths, and inflates the step size.
    fn restart(&mut self) {
        let n = self.mean.len();
        self.restarts += 1;
        self.sigma = self.initial_sigma * 2f64.powi(self.restarts.min(10) as i32);
        self.covariance = DMatrix::identity(n, n);
        self.basis = DMatrix::identity(n, n);
        self.scales = DVector::from_element(n, 1.0);
        self.inv_sqrt = DMatrix::identity(n, n);
        self.path_sigma = DVector::zeros(n);
        self.path_c = DVector::zeros(n);
        self.eigen_generation = self.generation;
    }
}

/// Minimizes `loss(theta, candidate_seed)`. Each candidate gets a fresh
/// seed from the optimizer's stream so noisy losses are independent.
pub fn cmaes_minimize<F, O>(mut loss: F, theta0: &[f64], config: &CmaesConfig, mut observer: O) -> Result<CmaesResult>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
    O: FnMut(&CmaesGeneration, &[f64]),
{
    let mut state = CmaesState::new(theta0, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best_theta = theta0.to_vec();
    let mut best_loss = f64::INFINITY;
    let mut trace = Vec::with_capacity(config.max_generations);
    let mut evaluations = 0u64;
    for generation in 1..=config.max_generations {
        let candidates = state.ask(&mut rng);
        let mut losses = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let seed = rng.next_u64();
            losses.push(loss(c, seed)?);
        }
        evaluations += candidates.len() as u64;
        let finite: Vec<f64> = losses.iter().copied().filter(|l| l.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::NonFinite(format!("every loss in generation {generation}")));
        }
        let (best_index, &gen_best) = losses
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty population");
        if gen_best < best_loss {
            best_loss = gen_best;
            best_theta = candidates[best_index].clone();
        }
        let restarted = state.tell(&candidates, &losses)?;
        let record = CmaesGeneration {
            generation,
            mean_loss: finite.iter().sum::<f64>() / finite.len() as f64,
            best_loss: gen_best,
            sigma: state.sigma(),
            evaluations,
            restarted,
        };
        observer(&record, state.mean());
        trace.push(record);
        if config.target_loss.is_some_and(|t| gen_best < t) || state.converged() {
            break;
        }
    }
    Ok(CmaesResult {
        mean: state.mean().to_vec(),
        best_theta,
        best_loss,
        generations: trace.len(),
        restarts: state.restarts(),
        trace,
    })
}
