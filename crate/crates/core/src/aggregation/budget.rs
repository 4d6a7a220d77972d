//! Multiplier fixed point and KL-budget calibration of the tilt.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::numerics::{brent_root_with, Bracket, RootOptions};

use super::family::{kl_at, tilt, tilted_mean, ExpertFamily};

/// Cap on bracket doublings in the scalar solves.
pub const MAX_DOUBLINGS: usize = 1_000;

/// Tilt reported when the budget cannot bind and the optimal tilt runs off
/// to infinity.
pub const THETA_MAX: f64 = 1e6;

/// Below this the calibrated tilt is indistinguishable from zero.
const THETA_RESOLUTION: f64 = 1e-300;

/// A calibrated tilt and its multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSolution {
    pub theta: f64,
    pub psi: f64,
    pub kl: f64,
    /// Lagrange multiplier of the budget; zero when the budget is slack.
    pub alpha: f64,
    pub budget_binding: bool,
}

impl TiltSolution {
    /// `ψ(θ) − â`, the drift shift the tilt induces.
    pub fn delta_shift(&self, a_hat: f64) -> f64 {
        self.psi - a_hat
    }
}

/// Adapts a fallible function for the root finder: the first error is
/// parked in `slot` and the function reports NaN from then on.
fn guarded<'a, F>(f: F, slot: &'a RefCell<Option<Error>>) -> impl FnMut(f64) -> f64 + 'a
where
    F: Fn(f64) -> Result<f64> + 'a,
{
    move |x| match f(x) {
        Ok(v) => v,
        Err(e) => {
            slot.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    }
}

/// Prefers an error parked by [`guarded`] over the solver's own outcome.
fn surface<T>(slot: &RefCell<Option<Error>>, out: Result<T>) -> Result<T> {
    match slot.borrow_mut().take() {
        Some(e) => Err(e),
        None => out,
    }
}

/// Doubles `hi` away from zero in the direction `sign` until `f` changes
/// sign relative to `f(0)`.
fn expand_bracket<F: FnMut(f64) -> f64>(f: &mut F, sign: f64, what: &str) -> Result<Bracket> {
    let f0 = f(0.0);
    let mut step = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let x = sign * step;
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NumericalFailure(format!("{what}: f({x}) = {fx}")));
        }
        if fx * f0 <= 0.0 {
            // the previous point still has the sign of f(0)
            let prev = if step == 1.0 { 0.0 } else { sign * step / 2.0 };
            return Bracket::from_fn(f, prev, x);
        }
        step *= 2.0;
    }
    Err(Error::NumericalFailure(format!(
        "{what}: no sign change within {MAX_DOUBLINGS} bracket doublings"
    )))
}

/// Unique root `θ` of `ψ(θ) = a + (α/γ)θ`.
///
/// The left side is nonincreasing and the right side strictly increasing,
/// so the residual `g(θ) = ψ(θ) − a − (α/γ)θ` has slope at most `−α/γ`.
pub fn solve_fixed_point(a: f64, alpha: f64, gamma: f64, family: &ExpertFamily) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("multiplier must be > 0, got {alpha}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("loss weight must be > 0, got {gamma}")));
    }
    if !a.is_finite() {
        return Err(Error::invalid(format!("fixed-point offset must be finite, got {a}")));
    }
    family.validate()?;
    let slope = alpha / gamma;
    let slot = RefCell::new(None);
    let mut g = guarded(|theta| Ok(tilted_mean(theta, family)? - a - slope * theta), &slot);
    let g0 = surface(&slot, Ok(g(0.0)))?;
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-10 * (1.0 + a.abs());
    let bracket = surface(&slot, expand_bracket(&mut g, g0.signum(), "fixed point"))?;
    // run to full bracket resolution; the residual is checked below
    let opts = RootOptions {
        f_tol: 0.0,
        x_tol: 0.0,
        max_iter: 400,
    };
    let theta = surface(&slot, brent_root_with(&mut g, &bracket, &opts))?;
    let residual = surface(&slot, Ok(g(theta)))?;
    if !(residual.abs() <= tol) {
        return Err(Error::NumericalFailure(format!(
            "fixed point residual {residual:e} at theta = {theta} exceeds {tol:e}"
        )));
    }
    Ok(theta)
}

/// Multiplier consistent with a tilt: `α = γ δ / θ` where `δ = ψ(θ) − â`.
pub fn back_out_alpha(delta_shift: f64, theta: f64, gamma: f64) -> f64 {
    gamma * delta_shift / theta
}

/// Largest per-time KL a discrete family can reach: the tilt piles all
/// mass on the smallest proposal. Continuous affine families are unbounded.
fn kl_supremum(family: &ExpertFamily) -> f64 {
    match family {
        ExpertFamily::Discrete { prior, drifts, .. } => {
            let lo = family.drift_range().0;
            let mass: f64 = prior
                .iter()
                .zip(drifts)
                .filter(|(_, &r)| r == lo)
                .map(|(p, _)| p)
                .sum();
            -mass.ln()
        }
        _ => f64::INFINITY,
    }
}

/// Calibrates a time-homogeneous tilt so that `T · KL(θ) = K`, then backs out
/// the multiplier `α = γ (ψ(θ) − â) / θ`.
///
/// KL grows with `θ ≥ 0` (its derivative is `θ Var`), so the root is found by
/// bracket doubling and Brent's method. When no finite tilt spends the budget
/// (a discrete family whose KL saturates below `K/T`), the budget is slack:
/// the result has `θ = THETA_MAX`, `α = 0`, and `budget_binding = false`.
pub fn calibrate_budget(
    budget: f64,
    horizon: f64,
    family: &ExpertFamily,
    gamma: f64,
) -> Result<TiltSolution> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::invalid(format!("KL budget must be > 0, got {budget}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be > 0, got {horizon}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("loss weight must be > 0, got {gamma}")));
    }
    family.validate()?;
    let a_hat = family.reference_drift();
    let target = budget / horizon;

    if target >= kl_supremum(family) {
        log::warn!("KL budget {budget} cannot bind; reporting the capped tilt");
        let t = tilt(THETA_MAX, family)?;
        return Ok(TiltSolution {
            theta: THETA_MAX,
            psi: t.mean,
            kl: t.kl,
            alpha: 0.0,
            budget_binding: false,
        });
    }

    let slot = RefCell::new(None);
    let mut h = guarded(|theta| Ok(kl_at(theta, family)? - target), &slot);
    let bracket = surface(&slot, expand_bracket(&mut h, 1.0, "budget calibration"))?;
    let opts = RootOptions {
        f_tol: 0.0,
        x_tol: 0.0,
        max_iter: 400,
    };
    let theta = surface(&slot, brent_root_with(&mut h, &bracket, &opts))?;
    let t = tilt(theta, family)?;
    let alpha = if theta > THETA_RESOLUTION {
        back_out_alpha(t.mean - a_hat, theta, gamma)
    } else {
        log::warn!("KL budget {budget} is below the tilt resolution; theta is ~0");
        f64::INFINITY
    };
    Ok(TiltSolution {
        theta,
        psi: t.mean,
        kl: t.kl,
        alpha,
        budget_binding: alpha > 0.0,
    })
}

/// Multiplier and per-step tilts of a calibration with a time-varying slope.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSolution {
    pub alpha: f64,
    pub steps: Vec<TiltSolution>,
}

impl SweepSolution {
    /// Left Riemann sum of the per-step KL over the horizon.
    pub fn integrated_kl(&self, horizon: f64) -> f64 {
        let dt = horizon / self.steps.len() as f64;
        self.steps.iter().map(|s| s.kl).sum::<f64>() * dt
    }
}

fn sweep_at(
    alpha: f64,
    gamma: f64,
    family: &ExpertFamily,
    slopes: &[f64],
) -> Result<Vec<TiltSolution>> {
    let a_hat = family.reference_drift();
    slopes
        .iter()
        .map(|&c1| {
            let f = family.with_slope(c1);
            let theta = solve_fixed_point(a_hat, alpha, gamma, &f)?;
            let t = tilt(theta, &f)?;
            Ok(TiltSolution {
                theta,
                psi: t.mean,
                kl: t.kl,
                alpha,
                budget_binding: true,
            })
        })
        .collect()
}

/// Calibrates one multiplier `α` for an affine family whose slope varies
/// over equal time steps, so that the integrated KL equals `K`.
///
/// Each step solves its own fixed point; the integrated KL falls as `α`
/// grows, and `α` is found by Brent's method on `log α`.
pub fn calibrate_budget_sweep(
    budget: f64,
    horizon: f64,
    family: &ExpertFamily,
    gamma: f64,
    slopes: &[f64],
) -> Result<SweepSolution> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::invalid(format!("KL budget must be > 0, got {budget}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be > 0, got {horizon}")));
    }
    if slopes.is_empty() {
        return Err(Error::invalid("slope schedule is empty"));
    }
    if matches!(family, ExpertFamily::Discrete { .. }) {
        return Err(Error::invalid("slope schedules need an affine family"));
    }
    let dt = horizon / slopes.len() as f64;
    let slot = RefCell::new(None);
    let mut excess = guarded(
        |log_alpha| {
            let steps = sweep_at(log_alpha.exp(), gamma, family, slopes)?;
            Ok(steps.iter().map(|s| s.kl).sum::<f64>() * dt - budget)
        },
        &slot,
    );
    // the integrated KL decreases in α
    let e0 = surface(&slot, Ok(excess(0.0)))?;
    let bracket = if e0 == 0.0 {
        Bracket::new(0.0, 0.0, 0.0, 0.0)?
    } else {
        let sign = if e0 > 0.0 { 1.0 } else { -1.0 };
        let mut prev = 0.0;
        let mut found = None;
        // |log α| up to 512
        for k in 0..11 {
            let x = sign * 0.5 * f64::from(1u32 << k);
            let ex = surface(&slot, Ok(excess(x)))?;
            if ex * e0 <= 0.0 {
                found = Some(surface(&slot, Bracket::from_fn(&mut excess, prev, x))?);
                break;
            }
            prev = x;
        }
        found.ok_or_else(|| {
            Error::NumericalFailure("alpha sweep: integrated KL never reaches the budget".into())
        })?
    };
    let opts = RootOptions {
        f_tol: 1e-10 * budget,
        x_tol: 0.0,
        max_iter: 400,
    };
    let log_alpha = surface(&slot, brent_root_with(&mut excess, &bracket, &opts))?;
    let alpha = log_alpha.exp();
    Ok(SweepSolution {
        alpha,
        steps: sweep_at(alpha, gamma, family, slopes)?,
    })
}
