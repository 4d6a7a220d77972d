//! Ambiguity-weighted opinion bias that shrinks as information grows.
//!
//! A single trader observes the true log-price through a `τ²/n` Gaussian
//! channel. The conditional standard deviation `γ` of the price (its W₂
//! distance to the Dirac at the filtered estimate) sets the bias weight
//! `β = 1 − exp(−κ_b γ^{p_b})`, which mixes the true drift with an opinion
//! drift `ρ`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{gbm_log_prior, trader_posterior_from_noise};
use crate::measures::LognormalLaw;
use crate::sde::{
    channel_rng, euler_step, generate_brownian, simulate_gbm_floored, NoiseChannel, PathBundle,
    TimeGrid, DEFAULT_POSITIVITY_FLOOR,
};
use crate::stats::{mean_and_se, ols_fit, MeanEstimate};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct BiasConfig {
    pub s0: f64,
    pub mu_star: f64,
    pub sigma_star: f64,
    /// Observation noise scale; the channel variance is `tau² / n`.
    pub tau: f64,
    pub kappa_b: f64,
    pub p_b: f64,
    pub mu_op: f64,
    pub c_rel: f64,
    pub eps: f64,
    pub info_levels: Vec<f64>,
    pub n_paths: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    pub floor_rel: f64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig {
            s0: 100.0,
            mu_star: 0.08,
            sigma_star: 0.6,
            tau: 2.0,
            kappa_b: 1e-3,
            p_b: 2.4,
            // implementation choices; no values are prescribed for these
            mu_op: 0.2,
            c_rel: 1.0,
            eps: 1e-6,
            info_levels: vec![1.0, 10.0, 100.0, 1000.0],
            n_paths: 30,
            grid: TimeGrid::default(),
            seed: 0,
            floor_rel: DEFAULT_POSITIVITY_FLOOR,
        }
    }
}

impl BiasConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.s0 > 0.0) {
            return Err(Error::invalid(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(self.sigma_star >= 0.0) || !self.mu_star.is_finite() {
            return Err(Error::invalid("GBM parameters must be finite with sigma >= 0"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.kappa_b >= 0.0) {
            return Err(Error::invalid(format!("kappa_b must be >= 0, got {}", self.kappa_b)));
        }
        if !(self.p_b > 0.0) {
            return Err(Error::invalid(format!("p_b must be > 0, got {}", self.p_b)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.c_rel >= 0.0) || !self.mu_op.is_finite() {
            return Err(Error::invalid("opinion drift needs finite mu_op and c_rel >= 0"));
        }
        if self.info_levels.iter().any(|&n| !(n >= 1.0)) {
            return Err(Error::invalid("information levels must be >= 1"));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be positive"));
        }
        if self.p_b < 1.0 {
            log::warn!(
                "p_b = {} < 1: the bias weight is not Lipschitz at zero ambiguity",
                self.p_b
            );
        }
        Ok(())
    }
}

/// Filtered estimate, ambiguity, and bias weight at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityState {
    pub s_hat: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl AmbiguityState {
    pub fn from_posterior(posterior: &LognormalLaw, kappa_b: f64, p_b: f64) -> Self {
        let gamma = ambiguity(posterior);
        AmbiguityState {
            s_hat: posterior.mean(),
            gamma,
            beta: bias_weight(gamma, kappa_b, p_b),
        }
    }
}

/// Conditional standard deviation of the price, in price units.
pub fn ambiguity(posterior: &LognormalLaw) -> f64 {
    posterior.std()
}

/// `1 − exp(−κ_b γ^{p_b})`.
pub fn bias_weight(gamma: f64, kappa_b: f64, p_b: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    -(-kappa_b * gamma.powf(p_b)).exp_m1()
}

/// `μ_op Ŝ (1 + c_rel γ / (Ŝ + ε))`.
pub fn opinion_drift(s_hat: f64, gamma: f64, config: &BiasConfig) -> f64 {
    config.mu_op * s_hat * (1.0 + config.c_rel * gamma / (s_hat + config.eps))
}

/// `(1 − β) α(t, x) + β ρ`.
pub fn mixed_drift<F: Fn(f64, f64) -> f64>(t: f64, x: f64, beta: f64, rho: f64, base: F) -> f64 {
    (1.0 - beta) * base(t, x) + beta * rho
}

/// A coupled (true, biased) pair and the integrands of the stability bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasPath {
    pub bundle: PathBundle,
    /// Bias weight at each grid time before the last step.
    pub beta: Vec<f64>,
    /// `∫₀ᵀ β² dt` (left Riemann sum).
    pub int_beta_sq: f64,
    /// `∫₀ᵀ β² (1 + ρ² + S²) dt` (left Riemann sum).
    pub stability_integral: f64,
}

/// Simulates the true GBM and the bias-perturbed price on one Brownian path.
///
/// The trader observes the true log-price afresh at every step; the
/// observation noise stream does not depend on `n`.
pub fn simulate_bias_pair(config: &BiasConfig, n: f64, path_index: u64) -> Result<BiasPath> {
    config.validate()?;
    let grid = config.grid;
    let dt = grid.dt();
    let floor = config.floor_rel * config.s0;
    let (mu, sigma) = (config.mu_star, config.sigma_star);

    let w = generate_brownian(config.seed, path_index, &grid);
    let truth = simulate_gbm_floored(mu, sigma, config.s0, config.floor_rel, &w, &grid)?;
    let mut obs_rng = channel_rng(config.seed, path_index, NoiseChannel::Observation);

    let mut synthetic = Vec::with_capacity(grid.n_steps + 1);
    synthetic.push(config.s0);
    let mut betas = Vec::with_capacity(grid.n_steps);
    let (mut int_beta_sq, mut stability) = (0.0, 0.0);
    let mut x = config.s0;
    for (k, dw) in w.increments.iter().enumerate() {
        let t = grid.time(k);
        let prior = gbm_log_prior(config.s0, mu, sigma, t);
        let xi: f64 = obs_rng.sample(StandardNormal);
        let post = trader_posterior_from_noise(truth[k].ln(), n, config.tau, prior, xi)?;
        let state = AmbiguityState::from_posterior(&post, config.kappa_b, config.p_b);
        let rho = opinion_drift(state.s_hat, state.gamma, config);
        let beta = state.beta;

        let b2 = beta * beta;
        int_beta_sq += b2 * dt;
        stability += b2 * (1.0 + rho * rho + truth[k] * truth[k]) * dt;
        betas.push(beta);

        let drift = mixed_drift(t, x, beta, rho, |_, y| mu * y);
        let next = euler_step(x, drift, sigma * x, dt, *dw, floor);
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        synthetic.push(next);
        x = next;
    }
    let bundle = PathBundle::new(grid, truth, synthetic, None, config.seed, path_index)?;
    Ok(BiasPath {
        bundle,
        beta: betas,
        int_beta_sq,
        stability_integral: stability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasRecord {
    pub n: f64,
    pub path_index: u64,
    pub sup_sq_error: f64,
    pub int_beta_sq: f64,
    pub stability_integral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasLevel {
    pub n: f64,
    /// Estimate of `E[sup_t |S̃ⁿ − S|²]`.
    pub sup_sq_error: MeanEstimate,
    /// Estimate of `∫₀ᵀ E[β²] dt`.
    pub int_beta_sq: MeanEstimate,
    /// Estimate of `∫₀ᵀ E[β² (1 + ρ² + S²)] dt`.
    pub stability_integral: MeanEstimate,
}

impl BiasLevel {
    /// Ratio of the squared error to the stability integrand.
    pub fn stability_ratio(&self) -> f64 {
        self.sup_sq_error.mean / self.stability_integral.mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub records: Vec<BiasRecord>,
    pub levels: Vec<BiasLevel>,
    /// Least-squares slope of `log E[sup |Δ|²]` against `log n`.
    pub slope: f64,
    pub intercept: f64,
    pub eta_target: f64,
}

impl RateReport {
    /// Smallest constant `C` with `E[sup |Δ|²] ≤ C ∫ E[β²(1 + ρ² + S²)]` at
    /// every level.
    pub fn stability_constant(&self) -> f64 {
        self.levels
            .iter()
            .map(BiasLevel::stability_ratio)
            .fold(0.0, f64::max)
    }
}

/// Monte Carlo summaries per level without the rate fit.
pub fn bias_levels(config: &BiasConfig) -> Result<(Vec<BiasRecord>, Vec<BiasLevel>)> {
    config.validate()?;
    let mut records = Vec::new();
    let mut levels = Vec::new();
    for &n in &config.info_levels {
        let paths: Vec<BiasPath> = (0..config.n_paths as u64)
            .into_par_iter()
            .map(|i| simulate_bias_pair(config, n, i))
            .collect::<Result<_>>()?;
        let level_records: Vec<BiasRecord> = paths
            .iter()
            .map(|p| BiasRecord {
                n,
                path_index: p.bundle.path_index,
                sup_sq_error: p.bundle.sup_sq_error(),
                int_beta_sq: p.int_beta_sq,
                stability_integral: p.stability_integral,
            })
            .collect();
        let col = |f: fn(&BiasRecord) -> f64| -> Vec<f64> { level_records.iter().map(f).collect() };
        levels.push(BiasLevel {
            n,
            sup_sq_error: mean_and_se(&col(|r| r.sup_sq_error)),
            int_beta_sq: mean_and_se(&col(|r| r.int_beta_sq)),
            stability_integral: mean_and_se(&col(|r| r.stability_integral)),
        });
        records.extend(level_records);
    }
    Ok((records, levels))
}

/// Estimates `E[sup_t |S̃ⁿ − S|²]` per level and fits its log-log slope in
/// `n`. The theoretical bound for this channel decays like `n^{−η}`.
pub fn rate_experiment(config: &BiasConfig, eta_target: f64) -> Result<RateReport> {
    let levels_n = &config.info_levels;
    if levels_n.len() < 3 {
        return Err(Error::invalid("rate fit needs at least three information levels"));
    }
    let (lo, hi) = levels_n
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), &n| (a.min(n), b.max(n)));
    if hi / lo < 100.0 {
        return Err(Error::invalid("information levels must span at least two decades"));
    }
    let (records, levels) = bias_levels(config)?;
    let errors: Vec<f64> = levels.iter().map(|l| l.sup_sq_error.mean).collect();
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid(
            "rate fit is degenerate: some level has zero error",
        ));
    }
    let x: Vec<f64> = levels.iter().map(|l| l.n.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (slope, intercept) = ols_fit(&x, &y)?;
    Ok(RateReport {
        records,
        levels,
        slope,
        intercept,
        eta_target,
    })
}
