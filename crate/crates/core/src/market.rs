//! Barycentric belief market: traders observe the log-price with noise that
//! shrinks like `τ_i² / n`, the market belief is the W₂ barycenter of their
//! lognormal posteriors, and the synthetic price follows coefficients that
//! depend on that barycenter through its mean and standard deviation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    barycenter_lognormal_moments, check_probability_vector, gaussian_conjugate_posterior,
    w2_barycenter_1d, w2_discrete, DiscreteMeasure1D, LognormalLaw, QuantileMixture,
};
use crate::sde::{
    channel_rng, euler_step, generate_brownian, simulate_gbm_floored, NoiseChannel,
    PathBundle, TimeGrid, DEFAULT_POSITIVITY_FLOOR,
};
use crate::stats::{mean_and_se, MeanEstimate};

/// One trader: observation noise scale and barycenter weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraderConfig {
    pub tau: f64,
    pub weight: f64,
}

/// Mean and standard deviation of the market belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefMoments {
    pub m1: f64,
    pub s: f64,
}

/// Measure-dependent drift/volatility families. Every variant collapses to
/// the true coefficients `(μ⋆x, σ⋆x)` at a Dirac belief `δ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientVariant {
    /// `b = x(μ⋆ + κ_d log(m₁/x))`, `σ = xσ⋆(1 + κ_v s/m₁)`.
    Baseline { kappa_d: f64, kappa_v: f64 },
    /// `b = b̄ + κ(m₁ − x)`, `σ = σ̄`.
    MeanRevert { kappa: f64 },
    /// `b = b̄`, `σ = σ̄(1 + κ cv)`.
    CvVol { kappa: f64, eps: f64 },
    /// `b = b̄ + κ_d(m₁ − x)`, `σ = σ̄(1 + κ_v cv)`.
    Combined { kappa_d: f64, kappa_v: f64, eps: f64 },
    /// `b = b̄(1 + κ(m₁/x − 1))`, `σ = σ̄`.
    RatioDrift { kappa: f64 },
    /// `b = b̄ − λ x cv²`, `σ = σ̄`.
    PenalizedDrift { lambda: f64, eps: f64 },
    /// `b = b̄`, `σ = σ̄ √(1 + κ((m₁ − x)/(m₁ + ε))²)`.
    QuadraticVol { kappa: f64, eps: f64 },
}

impl CoefficientVariant {
    fn params(&self) -> Vec<(&'static str, f64)> {
        use CoefficientVariant::*;
        match *self {
            Baseline { kappa_d, kappa_v } => vec![("kappa_d", kappa_d), ("kappa_v", kappa_v)],
            MeanRevert { kappa } | RatioDrift { kappa } => vec![("kappa", kappa)],
            CvVol { kappa, eps } | QuadraticVol { kappa, eps } => {
                vec![("kappa", kappa), ("eps", eps)]
            }
            Combined {
                kappa_d,
                kappa_v,
                eps,
            } => vec![("kappa_d", kappa_d), ("kappa_v", kappa_v), ("eps", eps)],
            PenalizedDrift { lambda, eps } => vec![("lambda", lambda), ("eps", eps)],
        }
    }

    /// All seven variants with the given parameter values, for sweeps.
    pub fn all(kappa: f64, kappa_d: f64, kappa_v: f64, lambda: f64, eps: f64) -> [Self; 7] {
        use CoefficientVariant::*;
        [
            Baseline { kappa_d, kappa_v },
            MeanRevert { kappa },
            CvVol { kappa, eps },
            Combined {
                kappa_d,
                kappa_v,
                eps,
            },
            RatioDrift { kappa },
            PenalizedDrift { lambda, eps },
            QuadraticVol { kappa, eps },
        ]
    }
}

impl Default for CoefficientVariant {
    fn default() -> Self {
        CoefficientVariant::Baseline {
            kappa_d: 0.35,
            kappa_v: 2.75,
        }
    }
}

/// True GBM coefficients together with a measure-dependent variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientFamily {
    pub mu_star: f64,
    pub sigma_star: f64,
    pub variant: CoefficientVariant,
}

impl CoefficientFamily {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_star.is_finite() && self.sigma_star >= 0.0 && self.sigma_star.is_finite()) {
            return Err(Error::invalid(format!(
                "true coefficients must be finite with sigma >= 0 (mu={}, sigma={})",
                self.mu_star, self.sigma_star
            )));
        }
        for (name, v) in self.variant.params() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Drift and volatility of the synthetic price at `(t, x)` under a belief
/// with moments `(m₁, s)`.
pub fn coefficients(
    _t: f64,
    x: f64,
    moments: BeliefMoments,
    family: &CoefficientFamily,
) -> Result<(f64, f64)> {
    let BeliefMoments { m1, s } = moments;
    if !(x > 0.0) {
        return Err(Error::invalid(format!("price must be positive, got {x}")));
    }
    if !(m1 > 0.0) {
        return Err(Error::invalid(format!("belief mean must be positive, got {m1}")));
    }
    let b_bar = family.mu_star * x;
    let s_bar = family.sigma_star * x;
    let cv = |eps: f64| s / (m1 + eps);
    use CoefficientVariant::*;
    let out = match family.variant {
        Baseline { kappa_d, kappa_v } => (
            x * (family.mu_star + kappa_d * (m1 / x).ln()),
            x * family.sigma_star * (1.0 + kappa_v * s / m1),
        ),
        MeanRevert { kappa } => (b_bar + kappa * (m1 - x), s_bar),
        CvVol { kappa, eps } => (b_bar, s_bar * (1.0 + kappa * cv(eps))),
        Combined {
            kappa_d,
            kappa_v,
            eps,
        } => (b_bar + kappa_d * (m1 - x), s_bar * (1.0 + kappa_v * cv(eps))),
        RatioDrift { kappa } => (b_bar * (1.0 + kappa * (m1 / x - 1.0)), s_bar),
        PenalizedDrift { lambda, eps } => (b_bar - lambda * x * cv(eps).powi(2), s_bar),
        QuadraticVol { kappa, eps } => {
            let r = (m1 - x) / (m1 + eps);
            (b_bar, s_bar * (1.0 + kappa * r * r).sqrt())
        }
    };
    Ok(out)
}

/// Model prior for the log-price at time `t`: the marginal of the true GBM.
pub fn gbm_log_prior(s0: f64, mu: f64, sigma: f64, t: f64) -> (f64, f64) {
    (s0.ln() + (mu - 0.5 * sigma * sigma) * t, sigma * sigma * t)
}

/// Posterior of the price given one noisy log-price observation whose
/// standard-normal noise draw is `xi`.
pub fn trader_posterior_from_noise(
    log_price_true: f64,
    n: f64,
    tau: f64,
    prior: (f64, f64),
    xi: f64,
) -> Result<LognormalLaw> {
    if !(n >= 1.0) {
        return Err(Error::invalid(format!("information level must be >= 1, got {n}")));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("trader noise must be > 0, got {tau}")));
    }
    let obs_var = tau * tau / n;
    let y = log_price_true + obs_var.sqrt() * xi;
    let (m, v) = gaussian_conjugate_posterior(prior.0, prior.1, y, obs_var)?;
    LognormalLaw::new(m, v.sqrt())
}

/// Draws `Y = X + ε`, `ε ~ N(0, τ²/n)`, and returns `L(S | Y)`.
pub fn trader_posterior<R: Rng + ?Sized>(
    log_price_true: f64,
    n: f64,
    trader: &TraderConfig,
    prior: (f64, f64),
    rng: &mut R,
) -> Result<LognormalLaw> {
    let xi: f64 = rng.sample(StandardNormal);
    trader_posterior_from_noise(log_price_true, n, trader.tau, prior, xi)
}

/// Market belief: the comonotone barycenter of the trader posteriors.
pub fn market_beliefs(posteriors: &[LognormalLaw], weights: &[f64]) -> Result<QuantileMixture> {
    check_probability_vector(weights, true)?;
    QuantileMixture::new(posteriors.to_vec(), weights.to_vec())
}

/// Full configuration of the increasing-information experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub s0: f64,
    pub mu_star: f64,
    pub sigma_star: f64,
    pub traders: Vec<TraderConfig>,
    pub family: CoefficientVariant,
    pub info_levels: Vec<f64>,
    pub n_paths: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    /// Positivity floor relative to `s0`.
    pub floor_rel: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        let taus = [2.0, 1.2, 2.5, 1.5];
        let weights = [0.4, 0.3, 0.2, 0.1];
        MarketConfig {
            s0: 100.0,
            mu_star: 0.08,
            sigma_star: 0.6,
            traders: taus
                .iter()
                .zip(weights)
                .map(|(&tau, weight)| TraderConfig { tau, weight })
                .collect(),
            family: CoefficientVariant::default(),
            info_levels: vec![1.0, 10.0, 100.0, 1000.0],
            n_paths: 30,
            grid: TimeGrid::default(),
            seed: 0,
            floor_rel: DEFAULT_POSITIVITY_FLOOR,
        }
    }
}

impl MarketConfig {
    pub fn coefficient_family(&self) -> CoefficientFamily {
        CoefficientFamily {
            mu_star: self.mu_star,
            sigma_star: self.sigma_star,
            variant: self.family,
        }
    }

    pub fn trader_weights(&self) -> Vec<f64> {
        self.traders.iter().map(|t| t.weight).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.s0 > 0.0) {
            return Err(Error::invalid(format!("s0 must be positive, got {}", self.s0)));
        }
        self.coefficient_family().validate()?;
        if self.traders.is_empty() {
            return Err(Error::invalid("market needs at least one trader"));
        }
        if let Some(t) = self.traders.iter().find(|t| !(t.tau > 0.0)) {
            return Err(Error::invalid(format!("trader noise must be > 0, got {}", t.tau)));
        }
        check_probability_vector(&self.trader_weights(), true)?;
        if self.info_levels.iter().any(|&n| !(n >= 1.0)) {
            return Err(Error::invalid("information levels must be >= 1"));
        }
        if self.info_levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("information levels must be strictly increasing"));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be positive"));
        }
        Ok(())
    }
}

/// One simulated row of the experiment plus the belief diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub bundle: PathBundle,
    /// `W₂²(π̃ⁿ_t, δ_{S_t})` at each grid time before the last step.
    pub w2_sq: Vec<f64>,
}

impl MarketPath {
    /// Left Riemann sum of `W₂²(π̃ⁿ_t, δ_{S_t})` over `[0, T]`.
    pub fn integrated_w2_sq(&self) -> f64 {
        self.w2_sq.iter().sum::<f64>() * self.bundle.grid.dt()
    }
}

/// Simulates the true GBM and the synthetic barycentric price on one shared
/// Brownian path. At each step every trader observes the current true
/// log-price; the observation noise stream does not depend on `n`.
pub fn simulate_market_pair(config: &MarketConfig, n: f64, path_index: u64) -> Result<MarketPath> {
    config.validate()?;
    let grid = config.grid;
    let dt = grid.dt();
    let family = config.coefficient_family();
    let weights = config.trader_weights();
    let floor = config.floor_rel * config.s0;

    let w = generate_brownian(config.seed, path_index, &grid);
    let truth = simulate_gbm_floored(
        config.mu_star,
        config.sigma_star,
        config.s0,
        config.floor_rel,
        &w,
        &grid,
    )?;
    let mut obs_rng = channel_rng(config.seed, path_index, NoiseChannel::Observation);

    let mut synthetic = Vec::with_capacity(grid.n_steps + 1);
    synthetic.push(config.s0);
    let mut w2_sq = Vec::with_capacity(grid.n_steps);
    let mut posteriors = Vec::with_capacity(config.traders.len());
    let mut x = config.s0;
    for (k, dw) in w.increments.iter().enumerate() {
        let t = grid.time(k);
        let prior = gbm_log_prior(config.s0, config.mu_star, config.sigma_star, t);
        let log_s = truth[k].ln();
        posteriors.clear();
        for trader in &config.traders {
            posteriors.push(trader_posterior(log_s, n, trader, prior, &mut obs_rng)?);
        }
        let belief = market_beliefs(&posteriors, &weights)?;
        let (m1, s) = barycenter_lognormal_moments(&belief)?;
        w2_sq.push(s * s + (m1 - truth[k]).powi(2));

        let (b, sigma) = coefficients(t, x, BeliefMoments { m1, s }, &family)?;
        let next = euler_step(x, b, sigma, dt, *dw, floor);
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        synthetic.push(next);
        x = next;
    }
    let bundle = PathBundle::new(grid, truth, synthetic, None, config.seed, path_index)?;
    Ok(MarketPath { bundle, w2_sq })
}

/// Per-path outcome of the convergence experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub n: f64,
    pub path_index: u64,
    pub sup_sq_error: f64,
    /// Time average of `W₂²(π̃ⁿ_t, δ_{S_t})`.
    pub mean_w2_sq: f64,
}

/// Monte Carlo summary for one information level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceLevel {
    pub n: f64,
    /// Estimate of `E[sup_t |S̃ⁿ − S|²]`.
    pub sup_sq_error: MeanEstimate,
    /// Estimate of `∫₀ᵀ E[W₂²(π̃ⁿ_u, δ_{S_u})] du`.
    pub integrated_w2_sq: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
    pub levels: Vec<ConvergenceLevel>,
}

/// Monte Carlo estimate of `E[sup_t |S̃ⁿ − S|²]` at every information level.
pub fn convergence_experiment(config: &MarketConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    if config.info_levels.len() < 2 {
        return Err(Error::invalid("convergence experiment needs at least two levels"));
    }
    let horizon = config.grid.horizon;
    let mut records = Vec::new();
    let mut levels = Vec::new();
    for &n in &config.info_levels {
        let paths: Vec<MarketPath> = (0..config.n_paths as u64)
            .into_par_iter()
            .map(|i| simulate_market_pair(config, n, i))
            .collect::<Result<_>>()?;
        let sup: Vec<f64> = paths.iter().map(|p| p.bundle.sup_sq_error()).collect();
        let int_w2: Vec<f64> = paths.iter().map(MarketPath::integrated_w2_sq).collect();
        records.extend(paths.iter().zip(&sup).zip(&int_w2).map(|((p, &e), &w)| {
            ConvergenceRecord {
                n,
                path_index: p.bundle.path_index,
                sup_sq_error: e,
                mean_w2_sq: w / horizon,
            }
        }));
        levels.push(ConvergenceLevel {
            n,
            sup_sq_error: mean_and_se(&sup),
            integrated_w2_sq: mean_and_se(&int_w2),
        });
    }
    Ok(ConvergenceReport { records, levels })
}

/// Two experts who each see half of a Rademacher product: both posteriors
/// are `½δ₋₁ + ½δ₊₁`, so the barycenter never approaches the Dirac at the
/// realized price. Returns the barycenter and its W₂ distance to `δ₊₁`.
pub fn rademacher_counterexample() -> Result<(DiscreteMeasure1D, f64)> {
    rademacher_counterexample_weighted([0.5, 0.5])
}

pub fn rademacher_counterexample_weighted(weights: [f64; 2]) -> Result<(DiscreteMeasure1D, f64)> {
    let coin = DiscreteMeasure1D::new(vec![-1.0, 1.0], vec![0.5, 0.5])?;
    let bar = w2_barycenter_1d(&[coin.clone(), coin.clone()], &weights)?;
    let dist = w2_discrete(&bar, &DiscreteMeasure1D::dirac(1.0)?);
    Ok((bar, dist))
}
