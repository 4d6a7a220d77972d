//! KL-budgeted aggregation of expert drift proposals.
//!
//! A trader tilts a prior over experts by `e^{−θρ}` and spends a relative
//! entropy budget `K` over the horizon. The tilt's mean `ψ(θ)` shifts the
//! filtered drift of a synthetic price; large budgets collapse the synthetic
//! price onto the filtered one.

mod budget;
mod family;
mod filter;
mod simulate;

pub use budget::{
    back_out_alpha, calibrate_budget, calibrate_budget_sweep, solve_fixed_point, SweepSolution, TiltSolution,
    MAX_DOUBLINGS, THETA_MAX,
};
pub use family::{
    gibbs_weights, kl_at, log_partition, tilt, tilted_mean, tilted_variance, ExpertFamily,
    TiltMoments,
};
pub use filter::{kalman_bucy, stationary_variance, FilterModel, FilterPath};
pub use simulate::{
    aggregation_experiment, simulate_aggregation_triplet, AggregationConfig, AggregationPath,
    AggregationReport, BudgetPath, ExpertPrior, SignalPath,
};
