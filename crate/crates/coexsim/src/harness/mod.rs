//! Campaign orchestration: configuration, execution, and result export.
//!
//! The harness turns a declarative TOML campaign (sweep axes × scheme
//! variants × Monte Carlo depth) into deterministic CSV/JSON outputs. See
//! [`config::CampaignConfig`] for the schema, [`campaign::run_campaign`] for
//! execution semantics, and [`figures::emit_figure_data`] for the plot-ready
//! exports.

pub mod campaign;
pub mod config;
pub mod figures;
pub mod output;

pub use campaign::{
    run_campaign, run_point, variant_keys, PointData, PointOutcome, ResultBundle, VariantData,
    VariantKey,
};
pub use config::{apply_override, load_campaign, CampaignConfig, PointAxes};
pub use figures::{emit_figure_data, FigureId};
pub use output::{resolve_output_dir, write_outputs, OUTPUT_ROOT_ENV};
