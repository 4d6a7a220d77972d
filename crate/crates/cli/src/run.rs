//! Runs one configured experiment and writes its table and figure.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use beliefsim_core::aggregation::{aggregation_experiment, simulate_aggregation_triplet};
use beliefsim_core::bias::{rate_experiment, simulate_bias_pair};
use beliefsim_core::market::{convergence_experiment, simulate_market_pair};
use log::info;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::HarnessError;
use crate::svg::{render_svg, Layout, Panel, Series};
use crate::table::{ResultTable, TableMetadata};

/// Paths written by a run, next to the table itself.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub csv: PathBuf,
    pub figure: PathBuf,
}

/// Path 0 is drawn in the figures.
const SHOWN_PATH: u64 = 0;

fn model_err(kind: ExperimentKind) -> impl Fn(beliefsim_core::Error) -> HarnessError {
    move |e| HarnessError::model(format!("{kind} experiment"), e)
}

fn level_label(n: f64) -> String {
    if n >= 1e5 {
        format!("n = {n:.0e}")
    } else {
        format!("n = {n}")
    }
}

fn market(config: &ExperimentConfig) -> Result<(ResultTable, Vec<Panel>), HarnessError> {
    let err = model_err(ExperimentKind::MarketConvergence);
    let mc = config.market()?;
    let report = convergence_experiment(&mc).map_err(&err)?;
    let mut table = ResultTable::new([
        "n",
        "sup_sq_error",
        "sup_sq_error_se",
        "integrated_w2_sq",
        "integrated_w2_sq_se",
    ]);
    for l in &report.levels {
        table.push(vec![
            l.n,
            l.sup_sq_error.mean,
            l.sup_sq_error.se,
            l.integrated_w2_sq.mean,
            l.integrated_w2_sq.se,
        ])?;
    }
    let times = mc.grid.times();
    let mut panels = Vec::new();
    for &n in &mc.info_levels {
        let p = simulate_market_pair(&mc, n, SHOWN_PATH).map_err(&err)?;
        panels.push(Panel {
            title: format!("{}: prices", level_label(n)),
            series: vec![
                Series::new("true", times.clone(), p.bundle.true_path.clone()),
                Series::new("synthetic", times.clone(), p.bundle.synthetic_path.clone()),
            ],
        });
        panels.push(Panel {
            title: format!("{}: W2^2 of belief to true price", level_label(n)),
            series: vec![Series::new("W2^2", times[..p.w2_sq.len()].to_vec(), p.w2_sq.clone())],
        });
    }
    Ok((table, panels))
}

fn bias(config: &ExperimentConfig) -> Result<(ResultTable, Vec<Panel>), HarnessError> {
    let err = model_err(ExperimentKind::BiasShrink);
    let (bc, eta) = config.bias()?;
    let report = rate_experiment(&bc, eta).map_err(&err)?;
    info!(
        "bias_shrink: fitted slope {:.4} (target -{eta}), stability constant {:.4}",
        report.slope,
        report.stability_constant()
    );
    let mut table = ResultTable::new([
        "n",
        "sup_sq_error",
        "sup_sq_error_se",
        "int_beta_sq",
        "int_beta_sq_se",
        "stability_integral",
        "stability_ratio",
        "fitted_log_error",
    ]);
    for l in &report.levels {
        table.push(vec![
            l.n,
            l.sup_sq_error.mean,
            l.sup_sq_error.se,
            l.int_beta_sq.mean,
            l.int_beta_sq.se,
            l.stability_integral.mean,
            l.stability_ratio(),
            report.intercept + report.slope * l.n.ln(),
        ])?;
    }
    let times = bc.grid.times();
    let mut panels = Vec::new();
    for &n in &bc.info_levels {
        let p = simulate_bias_pair(&bc, n, SHOWN_PATH).map_err(&err)?;
        panels.push(Panel {
            title: format!("{}: prices", level_label(n)),
            series: vec![
                Series::new("true", times.clone(), p.bundle.true_path.clone()),
                Series::new("biased", times.clone(), p.bundle.synthetic_path.clone()),
            ],
        });
        panels.push(Panel {
            title: format!("{}: bias weight", level_label(n)),
            series: vec![Series::new("beta", times[..p.beta.len()].to_vec(), p.beta.clone())],
        });
    }
    Ok((table, panels))
}

fn aggregate(config: &ExperimentConfig) -> Result<(ResultTable, Vec<Panel>), HarnessError> {
    let err = model_err(ExperimentKind::Aggregate);
    let ac = config.aggregation()?;
    let report = aggregation_experiment(&ac).map_err(&err)?;
    info!(
        "aggregate: mean drift/filter correlation {:.4}, {} bound violations",
        report.mean_correlation.mean,
        report.bound_violations()
    );
    let mut table = ResultTable::new([
        "K",
        "theta",
        "alpha",
        "kl_per_T",
        "delta_shift",
        "mean_sup_log_gap",
        "mean_gap_bound",
        "bound_violations",
    ]);
    // the calibrated family is centered at zero, so ψ itself is the shift
    for (i, (k, t)) in ac.budgets.iter().zip(&report.tilts).enumerate() {
        let bounds: Vec<f64> = report.paths.iter().map(|p| p.per_budget[i].gap_bound).collect();
        let violations = report
            .paths
            .iter()
            .filter(|p| p.per_budget[i].violates_bound())
            .count();
        table.push(vec![
            *k,
            t.theta,
            t.alpha,
            t.kl,
            t.delta_shift(0.0),
            report.mean_sup_gap(i),
            bounds.iter().sum::<f64>() / bounds.len() as f64,
            violations as f64,
        ])?;
    }
    let times = ac.grid.times();
    let shown = simulate_aggregation_triplet(&ac, &report.tilts, SHOWN_PATH).map_err(&err)?;
    let mut panels = Vec::new();
    for b in &shown.per_budget {
        let filtered = b.bundle.filtered_path.clone().unwrap_or_default();
        let gap: Vec<f64> = b
            .bundle
            .synthetic_path
            .iter()
            .zip(&filtered)
            .map(|(s, f)| (s.ln() - f.ln()).abs())
            .collect();
        panels.push(Panel {
            title: format!("K = {}: prices", b.budget),
            series: vec![
                Series::new("true", times.clone(), b.bundle.true_path.clone()),
                Series::new("filtered", times.clone(), filtered),
                Series::new("synthetic", times.clone(), b.bundle.synthetic_path.clone()),
            ],
        });
        panels.push(Panel {
            title: format!("K = {}: |log synthetic - log filtered|", b.budget),
            series: vec![Series::new("gap", times.clone(), gap)],
        });
    }
    Ok((table, panels))
}

/// Executes the experiment and writes `<kind>.csv`, `<kind>.meta.json`, and
/// `<kind>.svg` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let kind = config.kind();
    info!("running {kind} with seed {} and {} paths", config.seed, config.n_paths);
    let (mut table, panels) = match kind {
        ExperimentKind::MarketConvergence => market(config)?,
        ExperimentKind::BiasShrink => bias(config)?,
        ExperimentKind::Aggregate => aggregate(config)?,
    };
    table.metadata = Some(TableMetadata {
        kind: kind.to_string(),
        seed: config.seed,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config_hash: config.hash(),
    });

    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let stem = kind.as_str();
    table.save(out_dir, stem)?;
    let rows = panels.len().div_ceil(2);
    let svg = render_svg(
        stem,
        &panels,
        Layout {
            rows,
            cols: 2,
            common_y: true,
        },
    )?;
    let figure = out_dir.join(format!("{stem}.svg"));
    std::fs::write(&figure, svg).map_err(|e| HarnessError::Io {
        path: figure.clone(),
        source: e,
    })?;
    Ok(RunOutput {
        table,
        csv: out_dir.join(format!("{stem}.csv")),
        figure,
    })
}
