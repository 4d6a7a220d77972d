//! True, filtered, and opinion-biased prices under a KL-budgeted tilt.
//!
//! All three prices are simulated in log coordinates. The filtered and
//! synthetic log-prices share the innovation noise of the drift signal, so
//! their gap is `β ∫ (ψ − â) dt` exactly and is bounded by `β ∫ |ψ − â| dt`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{channel_rng, generate_brownian_on, NoiseChannel, PathBundle, TimeGrid};
use crate::stats::{mean_and_se, MeanEstimate};

use super::budget::{calibrate_budget, TiltSolution};
use super::family::{tilted_mean, ExpertFamily};
use super::filter::{kalman_bucy, stationary_variance, FilterModel};

/// Prior over experts for the affine proposals `â_t + c₁λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpertPrior {
    Uniform,
    Beta { a: f64, b: f64 },
}

impl ExpertPrior {
    pub fn family(&self, a_hat: f64, c1: f64) -> ExpertFamily {
        match *self {
            ExpertPrior::Uniform => ExpertFamily::AffineUniform { a_hat, c1 },
            ExpertPrior::Beta { a, b } => ExpertFamily::AffineBeta {
                a_hat,
                c1,
                a_prior: a,
                b_prior: b,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationConfig {
    pub s0: f64,
    /// Price volatility, shared by the true and filtered dynamics.
    pub sigma: f64,
    pub filter: FilterModel,
    pub prior: ExpertPrior,
    pub c1: f64,
    /// Weight of the aggregated drift in the synthetic price.
    pub beta: f64,
    /// Loss weight in the multiplier back-out.
    pub gamma: f64,
    pub budgets: Vec<f64>,
    pub n_paths: usize,
    pub grid: TimeGrid,
    pub seed: u64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            s0: 100.0,
            sigma: 0.6,
            filter: FilterModel::default(),
            prior: ExpertPrior::Beta { a: 2.0, b: 3.0 },
            c1: 1.0,
            beta: 0.5,
            gamma: 1.0,
            budgets: vec![0.01, 0.5, 5.0, 20.0],
            n_paths: 30,
            grid: TimeGrid::default(),
            seed: 0,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.filter.validate()?;
        if !(self.s0 > 0.0) {
            return Err(Error::invalid(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be > 0, got {}", self.gamma)));
        }
        self.prior.family(0.0, self.c1).validate()?;
        if self.budgets.is_empty() {
            return Err(Error::invalid("at least one KL budget is required"));
        }
        if self.budgets.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::invalid("KL budgets must be > 0"));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be positive"));
        }
        Ok(())
    }

    /// Calibrates one time-homogeneous tilt per budget. With a constant
    /// slope the per-time KL does not depend on `â`, so one `θ` serves the
    /// whole horizon.
    pub fn calibrate(&self) -> Result<Vec<TiltSolution>> {
        self.validate()?;
        let family = self.prior.family(0.0, self.c1);
        self.budgets
            .iter()
            .map(|&k| calibrate_budget(k, self.grid.horizon, &family, self.gamma))
            .collect()
    }
}

/// Drift signal and its filter along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPath {
    pub a: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub p: Vec<f64>,
}

impl SignalPath {
    /// Sample correlation of `a` and `â` over the grid.
    pub fn correlation(&self) -> f64 {
        pearson(&self.a, &self.a_hat)
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// One budget's synthetic path next to the shared true and filtered paths.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetPath {
    pub budget: f64,
    /// True `S`, synthetic `S̃`, and filtered `Ŝ` prices.
    pub bundle: PathBundle,
    /// `sup_t |log S̃ − log Ŝ|`.
    pub sup_log_gap: f64,
    /// `β ∫₀ᵀ |ψ_t − â_t| dt` (left Riemann sum).
    pub gap_bound: f64,
}

impl BudgetPath {
    /// Whether the gap exceeds its bound beyond rounding.
    pub fn violates_bound(&self) -> bool {
        self.sup_log_gap > self.gap_bound * (1.0 + 1e-12) + 1e-15
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationPath {
    pub path_index: u64,
    pub signal: SignalPath,
    pub per_budget: Vec<BudgetPath>,
}

/// Simulates the drift signal, its observation and filter, the true and
/// filtered prices, and one synthetic price per calibrated tilt.
///
/// Noise sources: the price Brownian motion drives the true log-price, the
/// drift-signal channel drives `a`, and the signal-observation channel drives
/// `Y`. The filtered and synthetic prices use the innovation
/// `dŴ = (dY − â dt) / √R`.
pub fn simulate_aggregation_triplet(
    config: &AggregationConfig,
    tilts: &[TiltSolution],
    path_index: u64,
) -> Result<AggregationPath> {
    config.validate()?;
    if tilts.len() != config.budgets.len() {
        return Err(Error::invalid(format!(
            "{} tilts for {} budgets",
            tilts.len(),
            config.budgets.len()
        )));
    }
    let grid = config.grid;
    let dt = grid.dt();
    let (seed, n) = (config.seed, grid.n_steps);
    let fm = config.filter;
    let sigma = config.sigma;

    let w_s = generate_brownian_on(NoiseChannel::Price, seed, path_index, &grid);
    let w_a = generate_brownian_on(NoiseChannel::DriftSignal, seed, path_index, &grid);
    let w_b = generate_brownian_on(NoiseChannel::SignalObservation, seed, path_index, &grid);

    // drift started from its stationary law
    let mut init = channel_rng(seed, path_index, NoiseChannel::InitialState);
    let z0: f64 = init.sample(StandardNormal);
    let mut a = Vec::with_capacity(n + 1);
    a.push(fm.a_bar + stationary_variance(fm.kappa_a, fm.sigma_a).sqrt() * z0);
    for k in 0..n {
        let ak = a[k];
        a.push(ak + fm.kappa_a * (fm.a_bar - ak) * dt + fm.sigma_a * w_a.increments[k]);
    }
    let sqrt_r = fm.r.sqrt();
    let dy: Vec<f64> = (0..n)
        .map(|k| a[k] * dt + sqrt_r * w_b.increments[k])
        .collect();
    let filt = kalman_bucy(&dy, &fm, &grid)?;
    let innovation: Vec<f64> = (0..n)
        .map(|k| (dy[k] - filt.a_hat[k] * dt) / sqrt_r)
        .collect();

    let half_var = 0.5 * sigma * sigma;
    let mut x_true = Vec::with_capacity(n + 1);
    let mut x_filt = Vec::with_capacity(n + 1);
    x_true.push(0.0);
    x_filt.push(0.0);
    for k in 0..n {
        x_true.push(x_true[k] + (a[k] - half_var) * dt + sigma * w_s.increments[k]);
        x_filt.push(x_filt[k] + (filt.a_hat[k] - half_var) * dt + sigma * innovation[k]);
    }
    let to_price = |xs: &[f64]| -> Vec<f64> { xs.iter().map(|x| config.s0 * x.exp()).collect() };
    let true_price = to_price(&x_true);
    let filt_price = to_price(&x_filt);

    let mut per_budget = Vec::with_capacity(tilts.len());
    for (&budget, sol) in config.budgets.iter().zip(tilts) {
        let mut x_syn = Vec::with_capacity(n + 1);
        x_syn.push(0.0);
        let mut bound = 0.0;
        for k in 0..n {
            let a_hat = filt.a_hat[k];
            let psi = tilted_mean(sol.theta, &config.prior.family(a_hat, config.c1))?;
            bound += (psi - a_hat).abs() * dt;
            let drift = (1.0 - config.beta) * a_hat + config.beta * psi;
            x_syn.push(x_syn[k] + (drift - half_var) * dt + sigma * innovation[k]);
        }
        let sup_log_gap = x_syn
            .iter()
            .zip(&x_filt)
            .map(|(s, f)| (s - f).abs())
            .fold(0.0, f64::max);
        let bundle = PathBundle::new(
            grid,
            true_price.clone(),
            to_price(&x_syn),
            Some(filt_price.clone()),
            seed,
            path_index,
        )?;
        per_budget.push(BudgetPath {
            budget,
            bundle,
            sup_log_gap,
            gap_bound: config.beta * bound,
        });
    }
    Ok(AggregationPath {
        path_index,
        signal: SignalPath {
            a,
            a_hat: filt.a_hat,
            p: filt.p,
        },
        per_budget,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationReport {
    pub tilts: Vec<TiltSolution>,
    pub paths: Vec<AggregationPath>,
    /// Average over paths of the sample correlation of `a` and `â`.
    pub mean_correlation: MeanEstimate,
}

impl AggregationReport {
    /// Number of (path, budget) pairs whose gap exceeds its bound.
    pub fn bound_violations(&self) -> usize {
        self.paths
            .iter()
            .flat_map(|p| &p.per_budget)
            .filter(|b| b.violates_bound())
            .count()
    }

    /// Mean over paths of the sup log-gap for budget index `i`.
    pub fn mean_sup_gap(&self, i: usize) -> f64 {
        let gaps: Vec<f64> = self.paths.iter().map(|p| p.per_budget[i].sup_log_gap).collect();
        mean_and_se(&gaps).mean
    }
}

pub fn aggregation_experiment(config: &AggregationConfig) -> Result<AggregationReport> {
    let tilts = config.calibrate()?;
    let paths: Vec<AggregationPath> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_aggregation_triplet(config, &tilts, i))
        .collect::<Result<_>>()?;
    let corr: Vec<f64> = paths.iter().map(|p| p.signal.correlation()).collect();
    Ok(AggregationReport {
        tilts,
        paths,
        mean_correlation: mean_and_se(&corr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_reproduces_filter() {
        let c = AggregationConfig {
            beta: 0.0,
            n_paths: 2,
            ..Default::default()
        };
        let tilts = c.calibrate().unwrap();
        let p = simulate_aggregation_triplet(&c, &tilts, 1).unwrap();
        for b in &p.per_budget {
            assert_eq!(
                Some(&b.bundle.synthetic_path),
                b.bundle.filtered_path.as_ref()
            );
            assert_eq!(b.sup_log_gap, 0.0);
        }
    }

    #[test]
    fn gap_respects_bound_and_shrinks_with_budget() {
        let c = AggregationConfig {
            n_paths: 4,
            ..Default::default()
        };
        let r = aggregation_experiment(&c).unwrap();
        assert_eq!(r.bound_violations(), 0);
        for p in &r.paths {
            let g = &p.per_budget;
            assert!(g[0].sup_log_gap > g[3].sup_log_gap);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = AggregationConfig {
            n_paths: 2,
            ..Default::default()
        };
        let tilts = c.calibrate().unwrap();
        let a = simulate_aggregation_triplet(&c, &tilts, 0).unwrap();
        let b = simulate_aggregation_triplet(&c, &tilts, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_beta() {
        let c = AggregationConfig {
            beta: 1.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
