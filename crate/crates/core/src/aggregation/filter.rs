//! Linear-Gaussian filter for an Ornstein–Uhlenbeck drift observed through
//! `dY = a dt + R^{1/2} dB`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::TimeGrid;

/// Drift model `da = κ_a (ā − a) dt + σ_a dW^a`, observation noise `R`, and
/// the filter's initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterModel {
    pub kappa_a: f64,
    pub a_bar: f64,
    pub sigma_a: f64,
    pub r: f64,
    pub a0_hat: f64,
    pub p0: f64,
}

impl FilterModel {
    /// Filter started at the stationary law of the drift.
    pub fn stationary(kappa_a: f64, a_bar: f64, sigma_a: f64, r: f64) -> Self {
        FilterModel {
            kappa_a,
            a_bar,
            sigma_a,
            r,
            a0_hat: a_bar,
            p0: stationary_variance(kappa_a, sigma_a),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::invalid(format!("observation noise R must be > 0, got {}", self.r)));
        }
        if !(self.kappa_a >= 0.0) || !(self.sigma_a >= 0.0) || !(self.p0 >= 0.0) {
            return Err(Error::invalid(
                "drift model needs kappa_a >= 0, sigma_a >= 0, and P0 >= 0",
            ));
        }
        if !self.a_bar.is_finite() || !self.a0_hat.is_finite() || !self.p0.is_finite() {
            return Err(Error::invalid("drift model parameters must be finite"));
        }
        Ok(())
    }

    /// Positive root of `σ_a² − 2κ_a P − P²/R = 0`.
    pub fn steady_state_variance(&self) -> f64 {
        let (k, s, r) = (self.kappa_a, self.sigma_a, self.r);
        r * (-k + (k * k + s * s / r).sqrt())
    }
}

impl Default for FilterModel {
    fn default() -> Self {
        FilterModel::stationary(2.0, 0.08, 0.3, 5e-4)
    }
}

/// `σ_a² / (2 κ_a)`; infinite for a driftless random walk with noise.
pub fn stationary_variance(kappa_a: f64, sigma_a: f64) -> f64 {
    if sigma_a == 0.0 {
        0.0
    } else {
        sigma_a * sigma_a / (2.0 * kappa_a)
    }
}

/// Filtered drift and its error variance on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPath {
    pub a_hat: Vec<f64>,
    pub p: Vec<f64>,
}

/// Euler discretization of the Kalman–Bucy equations
///
/// `dâ = κ_a (ā − â) dt + (P/R)(dY − â dt)`,
/// `dP = (σ_a² − 2κ_a P − P²/R) dt`,
///
/// with `P` clamped at zero. `dy` holds the observation increments.
pub fn kalman_bucy(dy: &[f64], model: &FilterModel, grid: &TimeGrid) -> Result<FilterPath> {
    model.validate()?;
    grid.validate()?;
    if dy.len() != grid.n_steps {
        return Err(Error::invalid(format!(
            "{} observation increments for a grid of {} steps",
            dy.len(),
            grid.n_steps
        )));
    }
    let dt = grid.dt();
    let FilterModel {
        kappa_a,
        a_bar,
        sigma_a,
        r,
        a0_hat,
        p0,
    } = *model;
    let mut a_hat = Vec::with_capacity(dy.len() + 1);
    let mut p = Vec::with_capacity(dy.len() + 1);
    let (mut a, mut v) = (a0_hat, p0);
    a_hat.push(a);
    p.push(v);
    for (k, &d) in dy.iter().enumerate() {
        let gain = v / r;
        let next_a = a + kappa_a * (a_bar - a) * dt + gain * (d - a * dt);
        let next_v = (v + (sigma_a * sigma_a - 2.0 * kappa_a * v - v * v / r) * dt).max(0.0);
        if !next_a.is_finite() || !next_v.is_finite() {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        a = next_a;
        v = next_v;
        a_hat.push(a);
        p.push(v);
    }
    Ok(FilterPath { a_hat, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riccati_steady_state() {
        let m = FilterModel {
            kappa_a: 1.0,
            a_bar: 0.0,
            sigma_a: 1.0,
            r: 1.0,
            a0_hat: 0.0,
            p0: 0.0,
        };
        assert!((m.steady_state_variance() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let grid = TimeGrid::new(20.0, 20 * 252).unwrap();
        let dy = vec![0.0; grid.n_steps];
        let f = kalman_bucy(&dy, &m, &grid).unwrap();
        let last = *f.p.last().unwrap();
        assert!((last - 0.414214).abs() < 1e-4, "P = {last}");
    }

    #[test]
    fn no_drift_uncertainty_is_deterministic() {
        let m = FilterModel {
            kappa_a: 2.0,
            a_bar: 0.1,
            sigma_a: 0.0,
            r: 0.01,
            a0_hat: 0.5,
            p0: 0.0,
        };
        let grid = TimeGrid::daily(1.0).unwrap();
        let dy: Vec<f64> = (0..grid.n_steps).map(|k| (k as f64).sin()).collect();
        let f = kalman_bucy(&dy, &m, &grid).unwrap();
        assert!(f.p.iter().all(|&v| v == 0.0));
        let dt = grid.dt();
        let mut a = 0.5;
        for k in 0..grid.n_steps {
            a += 2.0 * (0.1 - a) * dt;
            assert!((f.a_hat[k + 1] - a).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_zero_observation_noise() {
        let m = FilterModel {
            r: 0.0,
            ..Default::default()
        };
        let grid = TimeGrid::daily(1.0).unwrap();
        assert!(kalman_bucy(&vec![0.0; grid.n_steps], &m, &grid).is_err());
    }
}
