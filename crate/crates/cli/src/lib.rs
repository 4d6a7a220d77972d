//! Experiment harness: TOML configuration, seeded batch runs, CSV tables,
//! and SVG panel figures.

pub mod config;
pub mod error;
pub mod run;
pub mod svg;
pub mod table;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind};
pub use error::HarnessError;
pub use run::{run_experiment, RunOutput};
pub use svg::{render_svg, Layout, Panel, Series};
pub use table::{ResultTable, TableMetadata};
