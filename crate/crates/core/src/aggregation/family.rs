//! Expert proposal families and their exponential tilts.
//!
//! For a prior `π` over experts and proposals `ρ(λ)`, the tilt at `θ` is
//! `e^{−θρ(λ)} π(dλ) / Z(θ)`. Affine families `ρ = â + c₁λ` reduce every
//! tilt quantity to the moment generating function of `λ` at `v = −θc₁`,
//! which is evaluated in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_probability_vector, DiscreteMeasure1D};
use crate::numerics::{ln_kummer_1f1, log_sum_exp};

/// A prior over experts together with their proposed drifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpertFamily {
    /// `λ ~ U[0, 1]`, `ρ = â + c₁λ`.
    AffineUniform { a_hat: f64, c1: f64 },
    /// `λ ~ Beta(a_prior, b_prior)`, `ρ = â + c₁λ`.
    AffineBeta {
        a_hat: f64,
        c1: f64,
        a_prior: f64,
        b_prior: f64,
    },
    /// Finitely many experts with labels `lambdas` (strictly increasing),
    /// prior weights, and proposed drifts.
    Discrete {
        lambdas: Vec<f64>,
        prior: Vec<f64>,
        drifts: Vec<f64>,
    },
}

impl ExpertFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExpertFamily::AffineUniform { a_hat, c1 } => check_affine(*a_hat, *c1),
            ExpertFamily::AffineBeta {
                a_hat,
                c1,
                a_prior,
                b_prior,
            } => {
                check_affine(*a_hat, *c1)?;
                if !(*a_prior > 0.0 && *b_prior > 0.0) || !a_prior.is_finite() || !b_prior.is_finite()
                {
                    return Err(Error::invalid(format!(
                        "Beta prior parameters must be positive, got ({a_prior}, {b_prior})"
                    )));
                }
                Ok(())
            }
            ExpertFamily::Discrete {
                lambdas,
                prior,
                drifts,
            } => {
                if lambdas.len() != prior.len() || drifts.len() != prior.len() {
                    return Err(Error::invalid(format!(
                        "discrete family has {} labels, {} prior weights, {} drifts",
                        lambdas.len(),
                        prior.len(),
                        drifts.len()
                    )));
                }
                check_probability_vector(prior, true)?;
                if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("expert labels must be strictly increasing"));
                }
                if drifts.iter().chain(lambdas).any(|v| !v.is_finite()) {
                    return Err(Error::invalid("expert labels and drifts must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Reference drift the tilt is measured against: `â` for affine families,
    /// the smallest proposal for discrete ones.
    pub fn reference_drift(&self) -> f64 {
        match self {
            ExpertFamily::AffineUniform { a_hat, .. } | ExpertFamily::AffineBeta { a_hat, .. } => {
                *a_hat
            }
            ExpertFamily::Discrete { drifts, .. } => {
                drifts.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Essential infimum and supremum of the proposals.
    pub fn drift_range(&self) -> (f64, f64) {
        match self {
            ExpertFamily::AffineUniform { a_hat, c1 } | ExpertFamily::AffineBeta { a_hat, c1, .. } => {
                (*a_hat, a_hat + c1)
            }
            ExpertFamily::Discrete { drifts, .. } => drifts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    (lo.min(r), hi.max(r))
                }),
        }
    }

    /// Same family with the affine offset (or, for discrete families, every
    /// drift) shifted so that the reference drift becomes `a_hat`.
    pub fn with_reference(&self, a_hat: f64) -> ExpertFamily {
        let mut out = self.clone();
        match &mut out {
            ExpertFamily::AffineUniform { a_hat: a, .. } | ExpertFamily::AffineBeta { a_hat: a, .. } => {
                *a = a_hat
            }
            ExpertFamily::Discrete { drifts, .. } => {
                let shift = a_hat - self.reference_drift();
                drifts.iter_mut().for_each(|r| *r += shift);
            }
        }
        out
    }

    /// Same affine family with a new slope; discrete families are unchanged.
    pub fn with_slope(&self, slope: f64) -> ExpertFamily {
        let mut out = self.clone();
        match &mut out {
            ExpertFamily::AffineUniform { c1, .. } | ExpertFamily::AffineBeta { c1, .. } => {
                *c1 = slope
            }
            ExpertFamily::Discrete { .. } => {}
        }
        out
    }

    /// Midpoint discretization of an affine family on `n` equal cells of
    /// `[0, 1]`, weighted by the prior density. Discrete families are
    /// returned as they are.
    pub fn discretize(&self, n: usize) -> Result<ExpertFamily> {
        self.validate()?;
        if n == 0 {
            return Err(Error::invalid("discretization needs at least one expert"));
        }
        let (a_hat, c1, density): (f64, f64, Box<dyn Fn(f64) -> f64>) = match *self {
            ExpertFamily::AffineUniform { a_hat, c1 } => (a_hat, c1, Box::new(|_| 1.0)),
            ExpertFamily::AffineBeta {
                a_hat,
                c1,
                a_prior,
                b_prior,
            } => (
                a_hat,
                c1,
                Box::new(move |l: f64| {
                    ((a_prior - 1.0) * l.ln() + (b_prior - 1.0) * (-l).ln_1p()).exp()
                }),
            ),
            ExpertFamily::Discrete { .. } => return Ok(self.clone()),
        };
        let lambdas: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let raw: Vec<f64> = lambdas.iter().map(|&l| density(l)).collect();
        let total: f64 = raw.iter().sum();
        let prior: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let drifts = lambdas.iter().map(|l| a_hat + c1 * l).collect();
        Ok(ExpertFamily::Discrete {
            lambdas,
            prior,
            drifts,
        })
    }
}

fn check_affine(a_hat: f64, c1: f64) -> Result<()> {
    if !a_hat.is_finite() {
        return Err(Error::invalid(format!("affine offset must be finite, got {a_hat}")));
    }
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::invalid(format!("affine slope must be > 0, got {c1}")));
    }
    Ok(())
}

/// Everything the tilt at one `θ` determines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltMoments {
    /// `log Z(θ)`.
    pub log_partition: f64,
    /// `ψ(θ)`, the tilted mean of the proposals.
    pub mean: f64,
    /// Tilted variance of the proposals, `−ψ'(θ)`.
    pub variance: f64,
    /// `KL(tilt ‖ prior) = −θψ − log Z`.
    pub kl: f64,
}

/// The same quantities for the law of `λ` under the tilt `e^{vλ}`.
#[derive(Debug, Clone, Copy)]
struct LambdaTilt {
    ln_mgf: f64,
    mean: f64,
    var: f64,
    kl: f64,
}

pub fn tilt(theta: f64, family: &ExpertFamily) -> Result<TiltMoments> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("tilt parameter must be finite, got {theta}")));
    }
    family.validate()?;
    let out = match family {
        ExpertFamily::AffineUniform { a_hat, c1 } => {
            affine(theta, *a_hat, *c1, uniform_lambda_tilt(-theta * c1))
        }
        ExpertFamily::AffineBeta {
            a_hat,
            c1,
            a_prior,
            b_prior,
        } => affine(theta, *a_hat, *c1, beta_lambda_tilt(*a_prior, *b_prior, -theta * c1)?),
        ExpertFamily::Discrete { prior, drifts, .. } => discrete_tilt(theta, prior, drifts),
    };
    let finite = out.log_partition.is_finite() && out.mean.is_finite() && out.variance.is_finite();
    if !finite {
        return Err(Error::Overflow {
            context: format!("tilt at theta = {theta}"),
        });
    }
    Ok(out)
}

fn affine(theta: f64, a_hat: f64, c1: f64, l: LambdaTilt) -> TiltMoments {
    TiltMoments {
        log_partition: -theta * a_hat + l.ln_mgf,
        mean: a_hat + c1 * l.mean,
        variance: c1 * c1 * l.var,
        kl: l.kl,
    }
}

/// `log Z(θ)`.
pub fn log_partition(theta: f64, family: &ExpertFamily) -> Result<f64> {
    Ok(tilt(theta, family)?.log_partition)
}

/// `ψ(θ) = −d/dθ log Z(θ)`.
pub fn tilted_mean(theta: f64, family: &ExpertFamily) -> Result<f64> {
    Ok(tilt(theta, family)?.mean)
}

/// `d²/dθ² log Z(θ)`, the variance of the proposals under the tilt.
pub fn tilted_variance(theta: f64, family: &ExpertFamily) -> Result<f64> {
    Ok(tilt(theta, family)?.variance)
}

/// Relative entropy of the tilt with respect to the prior.
pub fn kl_at(theta: f64, family: &ExpertFamily) -> Result<f64> {
    Ok(tilt(theta, family)?.kl)
}

/// Tilted weights `p_j e^{−θρ_j} / Z(θ)` on the expert labels.
pub fn gibbs_weights(theta: f64, family: &ExpertFamily) -> Result<DiscreteMeasure1D> {
    family.validate()?;
    let ExpertFamily::Discrete {
        lambdas,
        prior,
        drifts,
    } = family
    else {
        return Err(Error::invalid("Gibbs weights need a discrete expert family"));
    };
    let weights = tilted_weights(theta, prior, drifts);
    DiscreteMeasure1D::new(lambdas.clone(), weights)
}

fn tilted_weights(theta: f64, prior: &[f64], drifts: &[f64]) -> Vec<f64> {
    let exps: Vec<f64> = drifts.iter().map(|r| -theta * r).collect();
    let log_p: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let log_z = log_sum_exp(&exps, &log_p);
    let mut w: Vec<f64> = exps
        .iter()
        .zip(&log_p)
        .map(|(e, lp)| (e + lp - log_z).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn discrete_tilt(theta: f64, prior: &[f64], drifts: &[f64]) -> TiltMoments {
    let exps: Vec<f64> = drifts.iter().map(|r| -theta * r).collect();
    let log_p: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let log_z = log_sum_exp(&exps, &log_p);
    let q = tilted_weights(theta, prior, drifts);
    let mean: f64 = q.iter().zip(drifts).map(|(w, r)| w * r).sum();
    let variance: f64 = q.iter().zip(drifts).map(|(w, r)| w * (r - mean).powi(2)).sum();
    // Σ q (log q − log p), skipping atoms whose tilted mass underflowed
    let kl: f64 = q
        .iter()
        .zip(&exps)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, e)| w * (e - log_z))
        .sum();
    TiltMoments {
        log_partition: log_z,
        mean,
        variance,
        kl: kl.max(0.0),
    }
}

/// `(sinh x − x) / x = Σ_{k≥1} x^{2k} / (2k+1)!`, accurate for `|x| <= 1`.
fn sinhc_minus_one(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..30 {
        term *= x2 / ((2 * k) as f64 * (2 * k + 1) as f64);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `ln(sinh x / x)`, even in `x`.
fn ln_sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        sinhc_minus_one(x).ln_1p()
    } else if x < 20.0 {
        (x.sinh() / x).ln()
    } else {
        x - std::f64::consts::LN_2 - x.ln() + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// Langevin function `coth x − 1/x`, odd in `x`.
fn langevin(x: f64) -> f64 {
    let ax = x.abs();
    let val = if ax == 0.0 {
        0.0
    } else if ax <= 1.0 {
        // (x cosh x − sinh x) / (x sinh x), numerator as a positive series
        let x2 = ax * ax;
        let mut term = ax;
        let mut num = 0.0;
        let mut fact = 1.0;
        for k in 1..30 {
            term *= x2;
            fact *= (2 * k) as f64 * (2 * k + 1) as f64;
            let t = term * (2 * k) as f64 / fact;
            num += t;
            if t <= 1e-17 * num {
                break;
            }
        }
        num / (ax * ax * (1.0 + sinhc_minus_one(ax)))
    } else {
        1.0 / ax.tanh() - 1.0 / ax
    };
    val.copysign(x)
}

/// Derivative of the Langevin function, `1/x² − 1/sinh² x`, even in `x`.
fn langevin_prime(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        1.0 / 3.0
    } else if x <= 1.0 {
        // (sinh x − x)(sinh x + x) / (x sinh x)²
        let d = x * sinhc_minus_one(x);
        let s = x + d;
        d * (s + x) / (x * s).powi(2)
    } else if x < 350.0 {
        1.0 / (x * x) - 1.0 / x.sinh().powi(2)
    } else {
        1.0 / (x * x)
    }
}

/// `λ ~ U[0, 1]` tilted by `e^{vλ}`, written in `x = v/2`:
/// `ln E e^{vλ} = x + ln(sinh x / x)`, mean `(1 + L(x))/2`, variance
/// `L'(x)/4`, and relative entropy `x L(x) − ln(sinh x / x)`.
fn uniform_lambda_tilt(v: f64) -> LambdaTilt {
    let x = 0.5 * v;
    let h = ln_sinhc(x);
    let l = langevin(x);
    LambdaTilt {
        ln_mgf: x + h,
        mean: 0.5 * (1.0 + l),
        var: 0.25 * langevin_prime(x),
        kl: (x * l - h).max(0.0),
    }
}

/// `λ ~ Beta(a, b)` tilted by `e^{vλ}`. Positive `v` is handled through the
/// reflection `1 − λ ~ Beta(b, a)` so the hypergeometric ratios are always
/// taken at a nonpositive argument, where the tilted moments of `λ` are
/// small and the variance does not cancel.
fn beta_lambda_tilt(a: f64, b: f64, v: f64) -> Result<LambdaTilt> {
    if v > 0.0 {
        let r = beta_lambda_tilt(b, a, -v)?;
        return Ok(LambdaTilt {
            ln_mgf: v + r.ln_mgf,
            mean: 1.0 - r.mean,
            var: r.var,
            kl: r.kl,
        });
    }
    let s = a + b;
    let ln_m0 = ln_kummer_1f1(a, s, v)?;
    let ln_m1 = ln_kummer_1f1(a + 1.0, s + 1.0, v)?;
    let ln_m2 = ln_kummer_1f1(a + 2.0, s + 2.0, v)?;
    let mean = a / s * (ln_m1 - ln_m0).exp();
    let second = a * (a + 1.0) / (s * (s + 1.0)) * (ln_m2 - ln_m0).exp();
    Ok(LambdaTilt {
        ln_mgf: ln_m0,
        mean,
        var: (second - mean * mean).max(0.0),
        kl: (v * mean - ln_m0).max(0.0),
    })
}
