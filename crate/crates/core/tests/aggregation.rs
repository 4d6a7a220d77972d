mod oracles;

use beliefsim_core::aggregation::{
    aggregation_experiment, calibrate_budget, gibbs_weights, kalman_bucy, kl_at, solve_fixed_point,
    tilt, tilted_mean, AggregationConfig, ExpertFamily, FilterModel,
};
use beliefsim_core::numerics::{brent_root, Bracket};
use beliefsim_core::TimeGrid;
use oracles::quadrature_tilt;
use proptest::prelude::*;

fn affine() -> impl Strategy<Value = ExpertFamily> {
    prop_oneof![
        (-0.5..0.5_f64, 0.05..2.0_f64).prop_map(|(a_hat, c1)| ExpertFamily::AffineUniform { a_hat, c1 }),
        (-0.5..0.5_f64, 0.05..2.0_f64, 0.5..6.0_f64, 0.5..6.0_f64).prop_map(|(a_hat, c1, a, b)| {
            ExpertFamily::AffineBeta {
                a_hat,
                c1,
                a_prior: a,
                b_prior: b,
            }
        }),
    ]
}

fn any_family() -> impl Strategy<Value = ExpertFamily> {
    prop_oneof![
        affine(),
        prop::collection::vec((0.0..1.0_f64, 0.05..1.0_f64), 2..25).prop_map(|v| {
            let n = v.len();
            let total: f64 = v.iter().map(|p| p.1).sum();
            let lambdas: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
            let mut drifts: Vec<f64> = v.iter().map(|p| p.0).collect();
            drifts.sort_by(f64::total_cmp);
            ExpertFamily::Discrete {
                lambdas,
                prior: v.iter().map(|p| p.1 / total).collect(),
                drifts,
            }
        }),
    ]
}

proptest! {
    #[test]
    fn tilted_mean_stays_in_range_and_falls(f in any_family(), t in -80.0..80.0_f64) {
        let (lo, hi) = f.drift_range();
        let m = tilt(t, &f).unwrap();
        prop_assert!(m.mean >= lo - 1e-12 && m.mean <= hi + 1e-12);
        prop_assert!(m.variance >= 0.0);
        prop_assert!(m.kl >= -1e-14);
        let later = tilted_mean(t + 0.5, &f).unwrap();
        prop_assert!(later <= m.mean + 1e-12);
    }

    #[test]
    fn kl_matches_fine_discretization(f in affine(), t in -40.0..40.0_f64) {
        // midpoint cells converge slowly where the Beta density has a singular derivative
        if let ExpertFamily::AffineBeta { a_prior, b_prior, .. } = f {
            prop_assume!(a_prior >= 2.0 && b_prior >= 2.0);
        }
        let fine = f.discretize(10_000).unwrap();
        let exact = kl_at(t, &f).unwrap();
        let approx = kl_at(t, &fine).unwrap();
        prop_assert!((exact - approx).abs() <= 1e-6 * exact.max(1.0), "{exact} vs {approx}");
    }

    #[test]
    fn closed_form_matches_quadrature(a in 1.0..6.0_f64, b in 1.0..6.0_f64, t in -30.0..30.0_f64) {
        // integer exponents keep the density polynomial, which the nodes integrate well
        let a = a.round();
        let b = b.round();
        let f = ExpertFamily::AffineBeta { a_hat: 0.0, c1: 1.0, a_prior: a, b_prior: b };
        let q = quadrature_tilt(t, |l: f64| l.powf(a - 1.0) * (1.0 - l).powf(b - 1.0), |l| l, 200);
        let m = tilt(t, &f).unwrap();
        prop_assert!((m.log_partition - q.log_z).abs() <= 1e-10 * (1.0 + q.log_z.abs()));
        prop_assert!((m.mean - q.psi).abs() <= 1e-10);
        prop_assert!((m.kl - q.kl).abs() <= 1e-10 * (1.0 + q.kl));
    }

    #[test]
    fn fixed_point_satisfies_its_equation(
        f in any_family(),
        alpha in 1e-4..10.0_f64,
        gamma in 0.1..5.0_f64,
    ) {
        let a = f.reference_drift();
        let theta = solve_fixed_point(a, alpha, gamma, &f).unwrap();
        let psi = tilted_mean(theta, &f).unwrap();
        prop_assert!((psi - a - alpha / gamma * theta).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn kl_falls_as_multiplier_doubles(
        f in any_family(),
        alpha in 1e-4..10.0_f64,
        gamma in 0.1..5.0_f64,
    ) {
        let a = f.reference_drift();
        let k1 = kl_at(solve_fixed_point(a, alpha, gamma, &f).unwrap(), &f).unwrap();
        let k2 = kl_at(solve_fixed_point(a, 2.0 * alpha, gamma, &f).unwrap(), &f).unwrap();
        prop_assert!(k2 <= k1 * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn calibration_is_monotone_in_the_budget(f in affine(), k in 0.01..10.0_f64) {
        let s1 = calibrate_budget(k, 1.0, &f, 1.0).unwrap();
        let s2 = calibrate_budget(2.0 * k, 1.0, &f, 1.0).unwrap();
        let a_hat = f.reference_drift();
        prop_assert!(s2.theta > s1.theta);
        prop_assert!(s2.alpha < s1.alpha);
        prop_assert!(s2.delta_shift(a_hat) < s1.delta_shift(a_hat));
    }
}

#[test]
fn brent_agrees_with_bisection() {
    let f = ExpertFamily::AffineUniform { a_hat: 0.0, c1: 1.0 };
    let g = |t: f64| tilted_mean(t, &f).unwrap() - 0.25;
    let bracket = Bracket::from_fn(&mut { g }, 0.0, 20.0).unwrap();
    let brent = brent_root(g, &bracket, 1e-14).unwrap();
    let (mut lo, mut hi) = (0.0_f64, 20.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((brent - 0.5 * (lo + hi)).abs() <= 1e-10, "{brent} vs {lo}");
}

#[test]
fn gibbs_weights_concentrate_on_the_smallest_drift() {
    let f = ExpertFamily::Discrete {
        lambdas: vec![0.0, 0.5, 1.0],
        prior: vec![0.2, 0.5, 0.3],
        drifts: vec![0.1, 0.3, 0.2],
    };
    let w = gibbs_weights(500.0, &f).unwrap();
    assert!(w.weights()[0] >= 1.0 - 1e-6);
    let flat = gibbs_weights(0.0, &f).unwrap();
    assert_eq!(flat.weights(), &[0.2, 0.5, 0.3]);
}

#[test]
fn filter_tracks_the_drift() {
    let config = AggregationConfig::default();
    let report = aggregation_experiment(&config).unwrap();
    assert_eq!(report.bound_violations(), 0);
    assert!(report.mean_correlation.mean >= 0.5, "{:?}", report.mean_correlation);
    // larger budgets pull the synthetic price toward the filtered one
    let gaps: Vec<f64> = (0..config.budgets.len()).map(|i| report.mean_sup_gap(i)).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn filter_variance_reaches_steady_state() {
    let m = FilterModel {
        p0: 0.0,
        ..FilterModel::default()
    };
    let grid = TimeGrid::daily(5.0).unwrap();
    let f = kalman_bucy(&vec![0.0; grid.n_steps], &m, &grid).unwrap();
    let p = *f.p.last().unwrap();
    let target = m.steady_state_variance();
    assert!((p - target).abs() <= 0.02 * target, "{p} vs {target}");
}
