//! TOML experiment configuration. Every section is optional; missing keys
//! take the reference parameter values and unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use beliefsim_core::aggregation::{AggregationConfig, ExpertPrior, FilterModel};
use beliefsim_core::bias::BiasConfig;
use beliefsim_core::market::{CoefficientVariant, MarketConfig, TraderConfig};
use beliefsim_core::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MarketConvergence,
    BiasShrink,
    Aggregate,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::MarketConvergence => "market_convergence",
            ExperimentKind::BiasShrink => "bias_shrink",
            ExperimentKind::Aggregate => "aggregate",
        }
    }

    fn section(self) -> &'static str {
        match self {
            ExperimentKind::MarketConvergence => "market",
            ExperimentKind::BiasShrink => "bias",
            ExperimentKind::Aggregate => "aggregate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "market_convergence" => Ok(ExperimentKind::MarketConvergence),
            "bias_shrink" => Ok(ExperimentKind::BiasShrink),
            "aggregate" => Ok(ExperimentKind::Aggregate),
            other => Err(HarnessError::config(
                "kind",
                format!("unknown experiment kind `{other}` (expected market_convergence, bias_shrink, or aggregate)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    pub n_steps: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = TimeGrid::default();
        GridSection {
            horizon: g.horizon,
            n_steps: g.n_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub s0: f64,
    pub mu_star: f64,
    pub sigma_star: f64,
    pub weights: Vec<f64>,
    pub taus: Vec<f64>,
    pub family: CoefficientVariant,
    pub info_levels: Vec<f64>,
    pub floor_rel: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        let d = MarketConfig::default();
        MarketSection {
            s0: d.s0,
            mu_star: d.mu_star,
            sigma_star: d.sigma_star,
            weights: d.traders.iter().map(|t| t.weight).collect(),
            taus: d.traders.iter().map(|t| t.tau).collect(),
            family: d.family,
            info_levels: d.info_levels,
            floor_rel: d.floor_rel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSection {
    pub s0: f64,
    pub mu_star: f64,
    pub sigma_star: f64,
    pub tau: f64,
    pub kappa_b: f64,
    pub p_b: f64,
    pub mu_op: f64,
    pub c_rel: f64,
    pub eps: f64,
    pub info_levels: Vec<f64>,
    pub floor_rel: f64,
    /// Decay exponent the fitted rate is compared against.
    pub eta_target: f64,
}

impl Default for BiasSection {
    fn default() -> Self {
        let d = BiasConfig::default();
        BiasSection {
            s0: d.s0,
            mu_star: d.mu_star,
            sigma_star: d.sigma_star,
            tau: d.tau,
            kappa_b: d.kappa_b,
            p_b: d.p_b,
            mu_op: d.mu_op,
            c_rel: d.c_rel,
            eps: d.eps,
            info_levels: d.info_levels,
            floor_rel: d.floor_rel,
            eta_target: 0.5,
        }
    }
}

/// Drift model; the filter starts at the stationary law unless `a0_hat` or
/// `p0` is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub kappa_a: f64,
    pub a_bar: f64,
    pub sigma_a: f64,
    pub r: f64,
    pub a0_hat: Option<f64>,
    pub p0: Option<f64>,
}

impl Default for FilterSection {
    fn default() -> Self {
        let d = FilterModel::default();
        FilterSection {
            kappa_a: d.kappa_a,
            a_bar: d.a_bar,
            sigma_a: d.sigma_a,
            r: d.r,
            a0_hat: None,
            p0: None,
        }
    }
}

impl FilterSection {
    fn model(&self) -> FilterModel {
        let base = FilterModel::stationary(self.kappa_a, self.a_bar, self.sigma_a, self.r);
        FilterModel {
            a0_hat: self.a0_hat.unwrap_or(base.a0_hat),
            p0: self.p0.unwrap_or(base.p0),
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateSection {
    pub s0: f64,
    pub sigma: f64,
    pub c1: f64,
    pub beta: f64,
    pub gamma: f64,
    pub budgets: Vec<f64>,
    pub prior: ExpertPrior,
    pub filter: FilterSection,
}

impl Default for AggregateSection {
    fn default() -> Self {
        let d = AggregationConfig::default();
        AggregateSection {
            s0: d.s0,
            sigma: d.sigma,
            c1: d.c1,
            beta: d.beta,
            gamma: d.gamma,
            budgets: d.budgets,
            prior: d.prior,
            filter: FilterSection::default(),
        }
    }
}

/// Raw file layout before the kind is resolved.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<ExperimentKind>,
    seed: Option<u64>,
    n_paths: Option<usize>,
    out_dir: Option<PathBuf>,
    grid: Option<GridSection>,
    market: Option<MarketSection>,
    bias: Option<BiasSection>,
    aggregate: Option<AggregateSection>,
}

/// Parameters of one experiment, resolved against the defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    MarketConvergence(MarketSection),
    BiasShrink(BiasSection),
    Aggregate(AggregateSection),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub grid: GridSection,
    pub model: Model,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for one kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let model = match kind {
            ExperimentKind::MarketConvergence => Model::MarketConvergence(MarketSection::default()),
            ExperimentKind::BiasShrink => Model::BiasShrink(BiasSection::default()),
            ExperimentKind::Aggregate => Model::Aggregate(AggregateSection::default()),
        };
        ExperimentConfig {
            seed: 0,
            n_paths: 30,
            grid: GridSection::default(),
            model,
            out_dir: None,
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        match self.model {
            Model::MarketConvergence(_) => ExperimentKind::MarketConvergence,
            Model::BiasShrink(_) => ExperimentKind::BiasShrink,
            Model::Aggregate(_) => ExperimentKind::Aggregate,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid, HarnessError> {
        TimeGrid::new(self.grid.horizon, self.grid.n_steps)
            .map_err(|e| HarnessError::config("grid", e.to_string()))
    }

    pub fn market(&self) -> Result<MarketConfig, HarnessError> {
        let Model::MarketConvergence(m) = &self.model else {
            return Err(HarnessError::config("kind", "not a market_convergence config"));
        };
        if m.weights.len() != m.taus.len() {
            return Err(HarnessError::config(
                "market.taus",
                format!("{} trader weights but {} noise scales", m.weights.len(), m.taus.len()),
            ));
        }
        let c = MarketConfig {
            s0: m.s0,
            mu_star: m.mu_star,
            sigma_star: m.sigma_star,
            traders: m
                .taus
                .iter()
                .zip(&m.weights)
                .map(|(&tau, &weight)| TraderConfig { tau, weight })
                .collect(),
            family: m.family,
            info_levels: m.info_levels.clone(),
            n_paths: self.n_paths,
            grid: self.grid()?,
            seed: self.seed,
            floor_rel: m.floor_rel,
        };
        c.validate().map_err(|e| HarnessError::config("market", e.to_string()))?;
        Ok(c)
    }

    pub fn bias(&self) -> Result<(BiasConfig, f64), HarnessError> {
        let Model::BiasShrink(b) = &self.model else {
            return Err(HarnessError::config("kind", "not a bias_shrink config"));
        };
        let c = BiasConfig {
            s0: b.s0,
            mu_star: b.mu_star,
            sigma_star: b.sigma_star,
            tau: b.tau,
            kappa_b: b.kappa_b,
            p_b: b.p_b,
            mu_op: b.mu_op,
            c_rel: b.c_rel,
            eps: b.eps,
            info_levels: b.info_levels.clone(),
            n_paths: self.n_paths,
            grid: self.grid()?,
            seed: self.seed,
            floor_rel: b.floor_rel,
        };
        c.validate().map_err(|e| HarnessError::config("bias", e.to_string()))?;
        Ok((c, b.eta_target))
    }

    pub fn aggregation(&self) -> Result<AggregationConfig, HarnessError> {
        let Model::Aggregate(a) = &self.model else {
            return Err(HarnessError::config("kind", "not an aggregate config"));
        };
        let c = AggregationConfig {
            s0: a.s0,
            sigma: a.sigma,
            filter: a.filter.model(),
            prior: a.prior,
            c1: a.c1,
            beta: a.beta,
            gamma: a.gamma,
            budgets: a.budgets.clone(),
            n_paths: self.n_paths,
            grid: self.grid()?,
            seed: self.seed,
        };
        c.validate().map_err(|e| HarnessError::config("aggregate", e.to_string()))?;
        Ok(c)
    }

    /// Checks the module-level configuration for the selected kind.
    pub fn validate(&self) -> Result<(), HarnessError> {
        match self.kind() {
            ExperimentKind::MarketConvergence => self.market().map(|_| ()),
            ExperimentKind::BiasShrink => self.bias().map(|_| ()),
            ExperimentKind::Aggregate => self.aggregation().map(|_| ()),
        }
    }

    /// SHA-256 of the canonical JSON form. Field order is fixed by the
    /// types, so the hash does not depend on key order in the source file.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses a configuration document. `kind` overrides (and must agree with)
/// a `kind` key in the file; one of the two is required.
pub fn parse_config(text: &str, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, HarnessError> {
    let de = toml::Deserializer::parse(text).map_err(|e| parse_error(text, &e))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let line = inner.span().map(|s| line_of(text, s.start));
        HarnessError::Config {
            key: if path == "." { String::new() } else { path },
            line,
            message: inner.message().to_string(),
        }
    })?;

    let kind = match (kind, raw.kind) {
        (Some(k), Some(f)) if k != f => {
            return Err(HarnessError::config(
                "kind",
                format!("file declares `{f}` but `{k}` was requested"),
            ))
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(HarnessError::config("kind", "missing required key")),
    };
    let sections = [
        ("market", raw.market.is_some()),
        ("bias", raw.bias.is_some()),
        ("aggregate", raw.aggregate.is_some()),
    ];
    if let Some((name, _)) = sections.iter().find(|(n, present)| *present && *n != kind.section()) {
        return Err(HarnessError::config(
            *name,
            format!("section does not apply to a {kind} experiment"),
        ));
    }

    let mut config = ExperimentConfig::defaults(kind);
    if let Some(seed) = raw.seed {
        config.seed = seed;
    }
    if let Some(n) = raw.n_paths {
        config.n_paths = n;
    }
    if let Some(g) = raw.grid {
        config.grid = g;
    }
    config.out_dir = raw.out_dir;
    config.model = match kind {
        ExperimentKind::MarketConvergence => {
            Model::MarketConvergence(raw.market.unwrap_or_default())
        }
        ExperimentKind::BiasShrink => Model::BiasShrink(raw.bias.unwrap_or_default()),
        ExperimentKind::Aggregate => Model::Aggregate(raw.aggregate.unwrap_or_default()),
    };
    config.validate()?;
    Ok(config)
}

fn parse_error(text: &str, e: &toml::de::Error) -> HarnessError {
    HarnessError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    }
}

pub fn load_config(path: &Path, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text, kind)
}
