//! Seeded Brownian paths and explicit Euler–Maruyama integration.
//!
//! Every random stream is addressed by `(seed, path_index, channel)`. Path `i`
//! therefore has the same increments no matter how many other paths are
//! simulated, or in which order, which keeps parallel and serial runs
//! bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading days per year; the default step is one day.
pub const TRADING_DAYS: usize = 252;

/// Positivity floor for price paths, relative to the initial price.
pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-8;

/// Uniform time grid `t_k = k * dt` on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        let grid = TimeGrid { horizon, n_steps };
        grid.validate()?;
        Ok(grid)
    }

    /// Daily steps over `horizon` years.
    pub fn daily(horizon: f64) -> Result<Self> {
        let n = (horizon * TRADING_DAYS as f64).round().max(1.0) as usize;
        TimeGrid::new(horizon, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "grid horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// All `n_steps + 1` grid points.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            horizon: 1.0,
            n_steps: TRADING_DAYS,
        }
    }
}

/// Independent noise sources of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseChannel {
    /// Brownian motion of the price.
    Price,
    /// Per-step observation errors of the traders.
    Observation,
    /// Brownian motion of the unobserved drift signal.
    DriftSignal,
    /// Brownian motion of the drift-observation channel.
    SignalObservation,
    /// Random initial conditions.
    InitialState,
}

impl NoiseChannel {
    fn id(self) -> u64 {
        match self {
            NoiseChannel::Price => 0,
            NoiseChannel::Observation => 1,
            NoiseChannel::DriftSignal => 2,
            NoiseChannel::SignalObservation => 3,
            NoiseChannel::InitialState => 4,
        }
    }
}

/// Counter-based generator for `(seed, path_index, channel)`.
pub fn channel_rng(seed: u64, path_index: u64, channel: NoiseChannel) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&channel.id().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path_index);
    rng
}

/// Brownian increments on a grid, tagged with the stream that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub increments: Vec<f64>,
    pub seed: u64,
    pub path_index: u64,
}

impl BrownianPath {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Cumulative path `W_{t_k}`, starting at 0.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.increments.len() + 1);
        w.push(0.0);
        let mut acc = 0.0;
        for dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }
}

/// Price-channel Brownian increments, i.i.d. `N(0, dt)`.
pub fn generate_brownian(seed: u64, path_index: u64, grid: &TimeGrid) -> BrownianPath {
    generate_brownian_on(NoiseChannel::Price, seed, path_index, grid)
}

pub fn generate_brownian_on(
    channel: NoiseChannel,
    seed: u64,
    path_index: u64,
    grid: &TimeGrid,
) -> BrownianPath {
    let mut rng = channel_rng(seed, path_index, channel);
    let sd = grid.dt().sqrt();
    let increments = (0..grid.n_steps)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect::<Vec<f64>>();
    BrownianPath {
        increments,
        seed,
        path_index,
    }
}

fn check_path(w: &BrownianPath, grid: &TimeGrid) -> Result<()> {
    grid.validate()?;
    if w.len() != grid.n_steps {
        return Err(Error::invalid(format!(
            "Brownian path has {} increments, grid has {} steps",
            w.len(),
            grid.n_steps
        )));
    }
    Ok(())
}

/// `x_{k+1} = x_k + drift(t_k, x_k) dt + diffusion(t_k, x_k) ΔW_k`.
///
/// Returns `n_steps + 1` states. A non-finite state aborts with its step index.
pub fn euler_maruyama<D, S>(
    drift: D,
    diffusion: S,
    x0: f64,
    w: &BrownianPath,
    grid: &TimeGrid,
) -> Result<Vec<f64>>
where
    D: Fn(f64, f64) -> f64,
    S: Fn(f64, f64) -> f64,
{
    integrate(drift, diffusion, x0, w, grid, None)
}

fn integrate<D, S>(
    drift: D,
    diffusion: S,
    x0: f64,
    w: &BrownianPath,
    grid: &TimeGrid,
    floor: Option<f64>,
) -> Result<Vec<f64>>
where
    D: Fn(f64, f64) -> f64,
    S: Fn(f64, f64) -> f64,
{
    check_path(w, grid)?;
    if !x0.is_finite() {
        return Err(Error::NonFiniteState { step: 0 });
    }
    let dt = grid.dt();
    let mut path = Vec::with_capacity(grid.n_steps + 1);
    path.push(x0);
    let mut x = x0;
    for (k, dw) in w.increments.iter().enumerate() {
        let t = grid.time(k);
        let mut next = x + drift(t, x) * dt + diffusion(t, x) * dw;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        if let Some(f) = floor {
            next = next.max(f);
        }
        path.push(next);
        x = next;
    }
    Ok(path)
}

/// Euler path of `dS = μ S dt + σ S dW`, floored at `1e-8 * s0`.
pub fn simulate_gbm(
    mu: f64,
    sigma: f64,
    s0: f64,
    w: &BrownianPath,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    simulate_gbm_floored(mu, sigma, s0, DEFAULT_POSITIVITY_FLOOR, w, grid)
}

/// As [`simulate_gbm`] with the floor `floor_rel * s0`.
pub fn simulate_gbm_floored(
    mu: f64,
    sigma: f64,
    s0: f64,
    floor_rel: f64,
    w: &BrownianPath,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::invalid(format!("initial price must be positive, got {s0}")));
    }
    integrate(
        |_, x| mu * x,
        |_, x| sigma * x,
        s0,
        w,
        grid,
        Some(floor_rel * s0),
    )
}

/// Steps `x` by one Euler increment and applies the positivity floor.
#[inline]
pub(crate) fn euler_step(x: f64, drift: f64, diffusion: f64, dt: f64, dw: f64, floor: f64) -> f64 {
    (x + drift * dt + diffusion * dw).max(floor)
}

/// Coupled price paths of one experiment row: the benchmark, the synthetic
/// model, and optionally a filtered estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub true_path: Vec<f64>,
    pub synthetic_path: Vec<f64>,
    pub filtered_path: Option<Vec<f64>>,
    pub seed: u64,
    pub path_index: u64,
}

impl PathBundle {
    pub fn new(
        grid: TimeGrid,
        true_path: Vec<f64>,
        synthetic_path: Vec<f64>,
        filtered_path: Option<Vec<f64>>,
        seed: u64,
        path_index: u64,
    ) -> Result<Self> {
        let n = grid.n_steps + 1;
        let paths = std::iter::once(&true_path)
            .chain(std::iter::once(&synthetic_path))
            .chain(filtered_path.iter());
        for p in paths {
            if p.len() != n {
                return Err(Error::invalid(format!(
                    "path has {} points, grid needs {n}",
                    p.len()
                )));
            }
            if p[0] != true_path[0] {
                return Err(Error::invalid("paths in a bundle must share the initial value"));
            }
        }
        Ok(PathBundle {
            grid,
            true_path,
            synthetic_path,
            filtered_path,
            seed,
            path_index,
        })
    }

    /// `sup_t |synthetic - true|^2`.
    pub fn sup_sq_error(&self) -> f64 {
        sup_abs_diff(&self.synthetic_path, &self.true_path).powi(2)
    }
}

/// `max_k |a_k - b_k|`.
pub fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn daily() -> TimeGrid {
        TimeGrid::daily(1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        let g = daily();
        assert_eq!(g.n_steps, 252);
        let t = g.times();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t.len(), 253);
    }

    #[test]
    fn brownian_is_deterministic() {
        let g = daily();
        let a = generate_brownian(7, 0, &g);
        let b = generate_brownian(7, 0, &g);
        assert_eq!(a, b);
        assert_ne!(a, generate_brownian(7, 1, &g));
        assert_ne!(a, generate_brownian(8, 0, &g));
        assert_ne!(
            a.increments,
            generate_brownian_on(NoiseChannel::Observation, 7, 0, &g).increments
        );
    }

    #[test]
    fn brownian_moments() {
        let g = TimeGrid::new(1.0, 1_000_000).unwrap();
        let w = generate_brownian(11, 0, &g);
        let n = w.len() as f64;
        let dt = g.dt();
        let mean = w.increments.iter().sum::<f64>() / n;
        let var = w.increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // CLT: sd of the mean is sqrt(dt/n) = sqrt(dt)/1e3; allow 4 of them
        assert!(mean.abs() < 4.0 * dt.sqrt() / 1e3, "mean {mean}");
        // chi-square: relative sd of the variance is sqrt(2/n) ~ 1.4e-3
        assert!((var / dt - 1.0).abs() < 0.01, "var ratio {}", var / dt);
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let g = daily();
        let w = generate_brownian(1, 0, &g);
        let p = euler_maruyama(|_, _| 0.0, |_, _| 0.0, 100.0, &w, &g).unwrap();
        assert!(p.iter().all(|&x| x == 100.0));
    }

    #[test]
    fn deterministic_growth_matches_euler_product() {
        let g = daily();
        let w = generate_brownian(1, 0, &g);
        let p = euler_maruyama(|_, x| 0.08 * x, |_, _| 0.0, 100.0, &w, &g).unwrap();
        let want = 100.0 * (1.0 + 0.08 / 252.0_f64).powi(252);
        assert!((p[252] - want).abs() < 1e-3);
        assert!((want - 108.327).abs() < 1e-3);
        let q = simulate_gbm(0.08, 0.0, 100.0, &w, &g).unwrap();
        assert!((q[252] - want).abs() < 1e-9);
    }

    #[test]
    fn gbm_zero_coefficients_constant() {
        let g = daily();
        let w = generate_brownian(3, 0, &g);
        let p = simulate_gbm(0.0, 0.0, 42.0, &w, &g).unwrap();
        assert!(p.iter().all(|&x| x == 42.0));
        assert!(simulate_gbm(0.1, 0.2, 0.0, &w, &g).is_err());
    }

    #[test]
    fn non_finite_state_reports_step() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let w = generate_brownian(3, 0, &g);
        let err = euler_maruyama(|t, _| if t > 0.45 { f64::NAN } else { 0.0 }, |_, _| 0.0, 1.0, &w, &g)
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteState { step: 6 });
    }

    #[test]
    fn euler_log_price_strong_error_band() {
        // GBM with mu = 0, sigma = 0.2 against the exact log solution
        let g = daily();
        let sigma = 0.2;
        let n_paths = 10_000;
        let mut sq = 0.0;
        for i in 0..n_paths {
            let w = generate_brownian(5, i, &g);
            let p = simulate_gbm(0.0, sigma, 100.0, &w, &g).unwrap();
            let wt: f64 = w.increments.iter().sum();
            let exact = 100f64.ln() - 0.5 * sigma * sigma + sigma * wt;
            sq += (p[252].ln() - exact).powi(2);
        }
        let rms = (sq / n_paths as f64).sqrt();
        // strong order 1/2 in dt with constant sigma^2/sqrt(2): about 1e-3 here
        assert!(rms < 0.2 * 0.2 * (g.dt()).sqrt() * 2.0, "rms {rms}");
    }

    #[test]
    fn coupling_identical_models_coincide() {
        let g = daily();
        let w = generate_brownian(9, 4, &g);
        let a = simulate_gbm(0.05, 0.3, 100.0, &w, &g).unwrap();
        let b = euler_maruyama(|_, x| 0.05 * x, |_, x| 0.3 * x, 100.0, &w, &g).unwrap();
        assert_eq!(a, b);
    }
}
