//! Finitely supported laws on the real line and the one-dimensional
//! optimal-transport toolkit built on them.
//!
//! In one dimension the quadratic-cost optimal coupling is the comonotone
//! (quantile) coupling, so W₂ distances and barycenters reduce to sweeps over
//! the merged partition of `[0, 1]` induced by the cumulative weights.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Tolerance on `|Σ w - 1|` for probability vectors.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Default size of equal-weight quantile discretizations of continuous laws.
pub const DEFAULT_QUANTILE_POINTS: usize = 512;

pub(crate) fn check_probability_vector(weights: &[f64], strictly_positive: bool) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid("probability vector is empty"));
    }
    for (i, &w) in weights.iter().enumerate() {
        let ok = if strictly_positive { w > 0.0 } else { w >= 0.0 };
        if !ok || !w.is_finite() {
            return Err(Error::invalid(format!("weight {i} is {w}")));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// A probability measure with finitely many atoms, stored sorted by atom.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure1D {
    /// Sorts the atoms and merges duplicates. Weights must be nonnegative and
    /// sum to one.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::invalid("measure has no atoms"));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_finite()) {
            return Err(Error::invalid(format!("atom {a} is not finite")));
        }
        check_probability_vector(&weights, false)?;

        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            if atoms.last() == Some(&x) {
                *weights.last_mut().unwrap() += w;
            } else {
                atoms.push(x);
                weights.push(w);
            }
        }
        Ok(DiscreteMeasure1D { atoms, weights })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        DiscreteMeasure1D::new(vec![x], vec![1.0])
    }

    /// Equal weights on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::invalid("measure has no atoms"));
        }
        DiscreteMeasure1D::new(atoms, vec![1.0 / n as f64; n])
    }

    /// Equal-weight discretization at the midpoint levels `(k + 1/2) / n` of a
    /// quantile function.
    pub fn from_quantile_fn<Q: Fn(f64) -> f64>(n: usize, quantile: Q) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("discretization needs at least one point"));
        }
        let atoms = midpoint_levels(n).map(quantile).collect();
        DiscreteMeasure1D::uniform(atoms)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - m).powi(2))
            .sum()
    }

    /// Left-continuous quantile function `inf { x : F(x) >= u }`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.atoms.iter().zip(&self.weights) {
            acc += w;
            if acc >= u {
                return *x;
            }
        }
        *self.atoms.last().unwrap()
    }
}

fn midpoint_levels(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| (k as f64 + 0.5) / n as f64)
}

/// Walks the merged partition of `[0, 1]` induced by the cumulative weights
/// of every measure, calling `visit(mass, atom_indices)` on each cell.
fn sweep_quantile_cells<F: FnMut(f64, &[usize])>(measures: &[&DiscreteMeasure1D], mut visit: F) {
    let mut idx = vec![0usize; measures.len()];
    let mut rem: Vec<f64> = measures.iter().map(|m| m.weights[0]).collect();
    loop {
        let step = rem.iter().copied().fold(f64::INFINITY, f64::min);
        if step > 0.0 {
            visit(step, &idx);
        }
        for (i, m) in measures.iter().enumerate() {
            rem[i] -= step;
            if rem[i] <= 0.0 {
                idx[i] += 1;
                if idx[i] == m.len() {
                    return;
                }
                rem[i] = m.weights[idx[i]];
            }
        }
    }
}

/// Squared quadratic Wasserstein distance between two discrete laws.
pub fn w2_sq_discrete(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> f64 {
    let mut cost = 0.0;
    sweep_quantile_cells(&[mu, nu], |mass, idx| {
        cost += mass * (mu.atoms[idx[0]] - nu.atoms[idx[1]]).powi(2);
    });
    cost
}

/// Quadratic Wasserstein distance `(∫₀¹ |F_μ⁻¹(u) − F_ν⁻¹(u)|² du)^{1/2}`,
/// exact on the merged weight partition.
pub fn w2_discrete(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> f64 {
    w2_sq_discrete(mu, nu).sqrt()
}

/// Weighted W₂ barycenter in one dimension: the quantile average
/// `F⁻¹(u) = Σ_i w_i F_i⁻¹(u)`.
pub fn w2_barycenter_1d(
    measures: &[DiscreteMeasure1D],
    weights: &[f64],
) -> Result<DiscreteMeasure1D> {
    if measures.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} measures but {} weights",
            measures.len(),
            weights.len()
        )));
    }
    check_probability_vector(weights, true)?;
    let refs: Vec<&DiscreteMeasure1D> = measures.iter().collect();
    let mut atoms = Vec::new();
    let mut masses = Vec::new();
    sweep_quantile_cells(&refs, |mass, idx| {
        let x = refs
            .iter()
            .zip(idx)
            .zip(weights)
            .map(|((m, &i), w)| w * m.atoms[i])
            .sum::<f64>();
        atoms.push(x);
        masses.push(mass);
    });
    // the sweep stops at the first exhausted measure; renormalize the
    // rounding-level residue
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    DiscreteMeasure1D::new(atoms, masses)
}

/// `W₂²(μ, δ_z) = Var(μ) + (mean(μ) − z)²`.
pub fn w2_to_dirac(mu: &DiscreteMeasure1D, z: f64) -> f64 {
    mu.variance() + (mu.mean() - z).powi(2)
}

/// Relative entropy, with support violations kept as a tagged infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn value(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }
}

/// `KL(μ‖ν) = Σ μ_i log(μ_i / ν_i)` with `0 log 0 = 0`; infinite when μ puts
/// mass on an atom ν does not charge.
pub fn kl_discrete(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Divergence {
    let mut j = 0;
    let mut kl = 0.0;
    for (x, &m) in mu.atoms.iter().zip(&mu.weights) {
        if m == 0.0 {
            continue;
        }
        while j < nu.atoms.len() && nu.atoms[j] < *x {
            j += 1;
        }
        if j == nu.atoms.len() || nu.atoms[j] != *x || nu.weights[j] == 0.0 {
            return Divergence::Infinite;
        }
        kl += m * (m / nu.weights[j]).ln();
    }
    Divergence::Finite(kl)
}

/// Bayesian update of a Gaussian prior by one Gaussian observation.
/// Returns `(posterior mean, posterior variance)`.
pub fn gaussian_conjugate_posterior(
    prior_mean: f64,
    prior_var: f64,
    obs: f64,
    obs_var: f64,
) -> Result<(f64, f64)> {
    if !(prior_var >= 0.0) || !prior_var.is_finite() {
        return Err(Error::invalid(format!("prior variance {prior_var} must be >= 0")));
    }
    if !(obs_var > 0.0) {
        return Err(Error::invalid(format!(
            "observation variance {obs_var} must be > 0"
        )));
    }
    let total = prior_var + obs_var;
    let var = prior_var * obs_var / total;
    let mean = (obs_var * prior_mean + prior_var * obs) / total;
    Ok((mean, var))
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Law of `e^{m + s Z}` with `Z ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalLaw {
    pub m: f64,
    pub s: f64,
}

impl LognormalLaw {
    pub fn new(m: f64, s: f64) -> Result<Self> {
        if !m.is_finite() || !(s >= 0.0) || !s.is_finite() {
            return Err(Error::invalid(format!("invalid lognormal (m={m}, s={s})")));
        }
        Ok(LognormalLaw { m, s })
    }

    pub fn mean(&self) -> f64 {
        (self.m + 0.5 * self.s * self.s).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.s * self.s;
        s2.exp_m1() * (2.0 * self.m + s2).exp()
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn quantile(&self, u: f64) -> f64 {
        (self.m + self.s * standard_normal().inverse_cdf(u)).exp()
    }

    /// Equal-weight quantile discretization with `n` atoms.
    pub fn discretize(&self, n: usize) -> Result<DiscreteMeasure1D> {
        let normal = standard_normal();
        DiscreteMeasure1D::from_quantile_fn(n, |u| (self.m + self.s * normal.inverse_cdf(u)).exp())
    }
}

/// Comonotone mixture: the law of `Σ_i w_i e^{m_i + s_i Z}` with a single
/// shared `Z ~ N(0, 1)`. This is the W₂ barycenter of the lognormal laws.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMixture {
    components: Vec<LognormalLaw>,
    weights: Vec<f64>,
}

impl QuantileMixture {
    pub fn new(components: Vec<LognormalLaw>, weights: Vec<f64>) -> Result<Self> {
        if components.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        check_probability_vector(&weights, false)?;
        Ok(QuantileMixture {
            components,
            weights,
        })
    }

    pub fn components(&self) -> &[LognormalLaw] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Value of the mixture at a given standard-normal level `z`.
    pub fn at(&self, z: f64) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (c.m + c.s * z).exp())
            .sum()
    }

    pub fn discretize(&self, n: usize) -> Result<DiscreteMeasure1D> {
        let normal = standard_normal();
        DiscreteMeasure1D::from_quantile_fn(n, |u| self.at(normal.inverse_cdf(u)))
    }
}

/// Closed-form mean and standard deviation of a comonotone lognormal mixture.
///
/// The variance is accumulated as `Σ_ij w_i w_j E_i E_j (e^{s_i s_j} − 1)`,
/// which is exactly zero when every `s_i` vanishes.
pub fn barycenter_lognormal_moments(mix: &QuantileMixture) -> Result<(f64, f64)> {
    let means: Vec<f64> = mix
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let e = c.mean();
            if e.is_finite() {
                Ok(e)
            } else {
                Err(Error::Overflow {
                    context: format!("mean of mixture component {i}"),
                })
            }
        })
        .collect::<Result<_>>()?;
    let mean: f64 = means.iter().zip(&mix.weights).map(|(e, w)| e * w).sum();
    let mut var = 0.0;
    for (i, ci) in mix.components.iter().enumerate() {
        for (j, cj) in mix.components.iter().enumerate() {
            var += mix.weights[i] * mix.weights[j] * means[i] * means[j] * (ci.s * cj.s).exp_m1();
        }
        if !var.is_finite() {
            return Err(Error::Overflow {
                context: format!("second moment at mixture component {i}"),
            });
        }
    }
    Ok((mean, var.max(0.0).sqrt()))
}
