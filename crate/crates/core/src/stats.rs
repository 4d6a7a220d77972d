//! Small Monte Carlo summaries used by the experiments.

use crate::error::{Error, Result};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

pub fn mean_and_se(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            se: f64::NAN,
            count: 0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        se,
        count: n,
    }
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("regression needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("regression design has zero variance"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, c) = ols_fit(&x, &y).unwrap();
        assert!((s + 0.5).abs() < 1e-15 && (c - 2.0).abs() < 1e-15);
        assert!(ols_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn standard_error() {
        let e = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
