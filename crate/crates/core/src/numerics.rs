//! Special functions and scalar root finding shared by the model modules.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative stopping threshold for the hypergeometric power series.
pub const SERIES_REL_TOL: f64 = 1e-16;

/// Hard cap on the number of series terms before reporting failure.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// Largest argument magnitude accepted by [`kummer_1f1`]; beyond it the value
/// itself overflows an `f64`. Use [`ln_kummer_1f1`] there.
pub const KUMMER_MAX_ARG: f64 = 700.0;

/// Positive arguments above this use the large-argument asymptotic expansion.
const ASYMPTOTIC_SWITCH: f64 = 1_000.0;

const RESCALE: f64 = 1e250;

/// Natural log of the power series `sum_k (a)_k / (b)_k x^k / k!` for `x >= 0`.
///
/// With `a, b > 0` every term is positive, so there is no cancellation; the
/// running sum is rescaled to stay inside the `f64` range.
fn ln_series_nonneg(a: f64, b: f64, x: f64) -> Result<f64> {
    debug_assert!(x >= 0.0);
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut ln_scale = 0.0_f64;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        let ratio = (a + kf) / (b + kf) * x / (kf + 1.0);
        term *= ratio;
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            ln_scale += RESCALE.ln();
        }
        // past the peak of the terms and below the relative threshold
        if ratio.abs() < 1.0 && term.abs() <= SERIES_REL_TOL * sum.abs() {
            return Ok(ln_scale + sum.ln());
        }
        if term == 0.0 {
            return Ok(ln_scale + sum.ln());
        }
    }
    Err(Error::NumericalFailure(format!(
        "1F1({a}; {b}; {x}) series did not converge in {MAX_SERIES_TERMS} terms"
    )))
}

/// Large-`x` expansion `Γ(b)/Γ(a) e^x x^(a-b) Σ (b-a)_k (1-a)_k / (k! x^k)`.
fn ln_asymptotic(a: f64, b: f64, x: f64) -> f64 {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 0..200 {
        let kf = k as f64;
        let next = term * (b - a + kf) * (1.0 - a + kf) / ((kf + 1.0) * x);
        if next.abs() >= term.abs() && k > 0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    ln_gamma(b) - ln_gamma(a) + x + (a - b) * x.ln() + sum.ln()
}

fn ln_kummer_nonneg(a: f64, b: f64, x: f64) -> Result<f64> {
    if x > ASYMPTOTIC_SWITCH && a > 0.0 {
        Ok(ln_asymptotic(a, b, x))
    } else {
        ln_series_nonneg(a, b, x)
    }
}

fn check_params(a: f64, b: f64, u: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!(
            "1F1 requires a, b > 0 (got a={a}, b={b})"
        )));
    }
    if !u.is_finite() {
        return Err(Error::invalid(format!("1F1 argument must be finite (got {u})")));
    }
    Ok(())
}

/// Natural log of Kummer's confluent hypergeometric function `1F1(a; b; u)`.
///
/// Nonnegative arguments are summed directly. Negative arguments go through
/// Kummer's transformation `1F1(a; b; u) = e^u 1F1(b-a; b; -u)`, whose series
/// has positive terms when `b > a`. Valid for any finite `u` when `b >= a > 0`.
pub fn ln_kummer_1f1(a: f64, b: f64, u: f64) -> Result<f64> {
    check_params(a, b, u)?;
    if u == 0.0 {
        return Ok(0.0);
    }
    if u > 0.0 {
        return ln_kummer_nonneg(a, b, u);
    }
    let c = b - a;
    if c == 0.0 {
        return Ok(u);
    }
    if c > 0.0 {
        return Ok(u + ln_kummer_nonneg(c, b, -u)?);
    }
    // b < a: alternating series, accepted only where it is still positive
    let v = direct_series(a, b, u)?;
    if v <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "1F1({a}; {b}; {u}) is not positive; log undefined"
        )));
    }
    Ok(v.ln())
}

fn direct_series(a: f64, b: f64, u: f64) -> Result<f64> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        let ratio = (a + kf) / (b + kf) * u / (kf + 1.0);
        term *= ratio;
        sum += term;
        if ratio.abs() < 1.0 && term.abs() <= SERIES_REL_TOL * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NumericalFailure(format!(
        "1F1({a}; {b}; {u}) series did not converge in {MAX_SERIES_TERMS} terms"
    )))
}

/// Kummer's confluent hypergeometric function `1F1(a; b; u)` for `|u| <= 700`.
pub fn kummer_1f1(a: f64, b: f64, u: f64) -> Result<f64> {
    check_params(a, b, u)?;
    if u.abs() > KUMMER_MAX_ARG {
        return Err(Error::invalid(format!(
            "|u| = {} exceeds {KUMMER_MAX_ARG}; use ln_kummer_1f1",
            u.abs()
        )));
    }
    Ok(ln_kummer_1f1(a, b, u)?.exp())
}

/// A root-bracketing interval with the function values at its ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// Builds a bracket, rejecting intervals without a sign change.
    pub fn new(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && f_lo.is_finite() && f_hi.is_finite()) {
            return Err(Error::invalid("bracket endpoints and values must be finite"));
        }
        if f_lo * f_hi > 0.0 {
            return Err(Error::invalid(format!(
                "no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
            )));
        }
        let (lo, hi, f_lo, f_hi) = if lo <= hi {
            (lo, hi, f_lo, f_hi)
        } else {
            (hi, lo, f_hi, f_lo)
        };
        Ok(Bracket { lo, hi, f_lo, f_hi })
    }

    /// Evaluates `f` at both ends and builds the bracket.
    pub fn from_fn<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Self> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        Bracket::new(lo, hi, f_lo, f_hi)
    }
}

/// Stopping rules for [`brent_root_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Stop once the bracket half-width is below `x_tol * (1 + |x|)`.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl RootOptions {
    pub fn uniform(tol: f64) -> Self {
        RootOptions {
            f_tol: tol,
            x_tol: tol,
            max_iter: 200,
        }
    }
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions::uniform(1e-12)
    }
}

/// Brent's method: inverse quadratic interpolation safeguarded by bisection.
///
/// Stops when `|f(root)| <= tol` or the bracket shrinks below
/// `tol * (1 + |root|)`, with at most 200 iterations.
pub fn brent_root<F: FnMut(f64) -> f64>(f: F, bracket: &Bracket, tol: f64) -> Result<f64> {
    brent_root_with(f, bracket, &RootOptions::uniform(tol))
}

pub fn brent_root_with<F: FnMut(f64) -> f64>(
    mut f: F,
    bracket: &Bracket,
    opts: &RootOptions,
) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..opts.max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.x_tol * (1.0 + b.abs());
        let xm = 0.5 * (c - b);
        if fb == 0.0 || fb.abs() <= opts.f_tol || xm.abs() <= tol1 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "root function returned {fb} at {b}"
            )));
        }
    }
    Err(Error::IterationCap { best: b })
}

/// `log Σ_i exp(values_i + log_weights_i)`, shifted by the maximum term.
///
/// Returns `-inf` for empty input or when every term is `-inf`.
pub fn log_sum_exp(values: &[f64], log_weights: &[f64]) -> f64 {
    assert_eq!(
        values.len(),
        log_weights.len(),
        "log_sum_exp: values and log-weights differ in length"
    );
    let max = values
        .iter()
        .zip(log_weights)
        .map(|(v, w)| v + w)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values
        .iter()
        .zip(log_weights)
        .map(|(v, w)| (v + w - max).exp())
        .sum();
    max + sum.ln()
}
