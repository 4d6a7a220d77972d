//! Brute-force reference implementations for the test suite. Nothing here
//! calls into the library code it is used to check.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Outcome of comparing a library value against an oracle value.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub main: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Relative error against the oracle value, absolute below unit
    /// magnitude.
    pub fn new(quantity: impl Into<String>, oracle: f64, main: f64, tolerance: f64) -> Self {
        let scale = oracle.abs().max(1.0);
        let rel_error = (main - oracle).abs() / scale;
        OracleReport {
            quantity: quantity.into(),
            oracle,
            main,
            rel_error,
            tolerance,
            pass: rel_error <= tolerance,
        }
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: oracle {:.12e} main {:.12e} rel {:.2e} (tol {:.0e}) {}",
            self.quantity,
            self.oracle,
            self.main,
            self.rel_error,
            self.tolerance,
            if self.pass { "ok" } else { "FAIL" }
        )
    }
}

pub const MAX_LP_ATOMS: usize = 50;

/// Quadratic-cost transport between two finitely supported laws given as
/// `(atom, weight)` pairs, solved by the north-west-corner rule on sorted
/// atoms (optimal for convex costs on the line). Builds the plan explicitly
/// and returns `sqrt(Σ plan_ij (x_i − y_j)²)`.
pub fn transport_lp_1d(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> Result<f64, String> {
    if mu.len() > MAX_LP_ATOMS || nu.len() > MAX_LP_ATOMS {
        return Err(format!(
            "transport oracle is capped at {MAX_LP_ATOMS} atoms ({} and {})",
            mu.len(),
            nu.len()
        ));
    }
    if mu.is_empty() || nu.is_empty() {
        return Err("empty measure".into());
    }
    let mut a = mu.to_vec();
    let mut b = nu.to_vec();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut plan = vec![vec![0.0_f64; b.len()]; a.len()];
    let mut supply: Vec<f64> = a.iter().map(|p| p.1).collect();
    let mut demand: Vec<f64> = b.iter().map(|p| p.1).collect();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let m = supply[i].min(demand[j]);
        plan[i][j] += m;
        supply[i] -= m;
        demand[j] -= m;
        if supply[i] <= 1e-15 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let mut cost = 0.0;
    for (r, row) in plan.iter().enumerate() {
        for (c, m) in row.iter().enumerate() {
            cost += m * (a[r].0 - b[c].0).powi(2);
        }
    }
    Ok(cost.sqrt())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Partition function, tilted mean, and relative entropy of the tilt
/// `e^{−θρ(λ)} π(dλ) / Z` for a prior density on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltQuadrature {
    pub z: f64,
    pub log_z: f64,
    pub psi: f64,
    pub kl: f64,
}

/// Gauss–Legendre quadrature of the tilt. The density need not be
/// normalized; it is divided by its own quadrature integral.
pub fn quadrature_tilt(
    theta: f64,
    density: impl Fn(f64) -> f64,
    rho: impl Fn(f64) -> f64,
    n_points: usize,
) -> TiltQuadrature {
    let (x, w) = gauss_legendre(n_points);
    let lam: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let wq: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
    let dens: Vec<f64> = lam.iter().map(|&l| density(l)).collect();
    let mass: f64 = dens.iter().zip(&wq).map(|(d, q)| d * q).sum();
    let r: Vec<f64> = lam.iter().map(|&l| rho(l)).collect();
    let expo: Vec<f64> = r.iter().map(|v| -theta * v).collect();
    let shift = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = (0..lam.len())
        .map(|i| wq[i] * dens[i] / mass * (expo[i] - shift).exp())
        .sum();
    let log_z = shift + scaled.ln();
    let mut psi = 0.0;
    let mut kl = 0.0;
    for i in 0..lam.len() {
        // tilted density relative to the prior
        let ratio = (expo[i] - log_z).exp();
        let tilted = wq[i] * dens[i] / mass * ratio;
        psi += tilted * r[i];
        kl += tilted * (expo[i] - log_z);
    }
    TiltQuadrature {
        z: log_z.exp(),
        log_z,
        psi,
        kl,
    }
}

/// Monte Carlo moments of `Σ_i w_i e^{m_i + s_i Z}` with one shared `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoments {
    pub mean: f64,
    pub std: f64,
    pub se_mean: f64,
    pub se_std: f64,
}

pub fn mc_mixture_moments(
    components: &[(f64, f64)],
    weights: &[f64],
    n_draws: usize,
    seed: u64,
) -> McMoments {
    assert!(n_draws >= 10_000, "mixture oracle needs at least 1e4 draws");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..n_draws)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            components
                .iter()
                .zip(weights)
                .map(|((m, s), w)| w * (m + s * z).exp())
                .sum()
        })
        .collect();
    let n = n_draws as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let m2 = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = draws.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let std = var.sqrt();
    // delta method for the standard deviation
    let se_var = ((m4 - m2 * m2) / n).max(0.0).sqrt();
    McMoments {
        mean,
        std,
        se_mean: (var / n).sqrt(),
        se_std: if std > 0.0 { se_var / (2.0 * std) } else { 0.0 },
    }
}
