//! Command-line front end for the coexistence simulator.
//!
//! Subcommands:
//! * `run` — execute the campaign and write per-point tables plus
//!   `summary.json` under the output directory;
//! * `validate` — parse and check a configuration, reporting every problem;
//! * `emit-figures` — recompute the campaign deterministically and write
//!   figure-ready CSV exports plus a manifest.
//!
//! Exit codes: 0 on success, 1 for configuration problems, 2 for runtime
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use coexsim::error::{Result, SimError};
use coexsim::harness::campaign::PointOutcome;
use coexsim::harness::{
    emit_figure_data, load_campaign, resolve_output_dir, run_campaign, variant_keys,
    write_outputs, CampaignConfig, FigureId,
};

#[derive(Parser)]
#[command(name = "coexsim", version, about = "Multicell downlink coexistence simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the campaign and write result tables and a summary.
    Run(CommonArgs),
    /// Check a configuration and report every problem found.
    Validate(CommonArgs),
    /// Recompute the campaign and write figure-ready data exports.
    EmitFigures(EmitArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Campaign TOML file; omit to use the built-in default campaign.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one configuration key (TOML literal on the right-hand
    /// side), e.g. --set sweep.tau_c=[300,580]. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,

    /// Snapshot count per sweep point (overrides the configuration).
    #[arg(long)]
    snapshots: Option<u32>,

    /// Output directory (overrides the configuration).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Emit one figure family (se-cdf, availability, outage-vs-activation)
    /// instead of all of them.
    #[arg(long, value_name = "NAME")]
    figure: Option<String>,
}

fn load(common: &CommonArgs) -> Result<CampaignConfig> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            SimError::invalid_config(vec![format!(
                "cannot read configuration file '{}': {e}",
                path.display()
            )])
        })?,
        None => String::new(),
    };
    let mut cfg = load_campaign(&text, &common.set)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(snapshots) = common.snapshots {
        cfg.snapshots = snapshots;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    Ok(cfg)
}

fn cmd_run(common: &CommonArgs) -> Result<()> {
    let cfg = load(common)?;
    cfg.validate()?;
    let bundle = run_campaign(&cfg)?;
    let root = resolve_output_dir(&cfg.output_dir);
    let files = write_outputs(&bundle, &root)?;

    for outcome in &bundle.points {
        match outcome {
            PointOutcome::Done(point) => {
                let worst = point
                    .variants
                    .iter()
                    .filter_map(|v| v.availability)
                    .fold(f64::INFINITY, f64::min);
                let availability = if worst.is_finite() {
                    format!("{worst:.4}")
                } else {
                    "n/a".to_string()
                };
                println!(
                    "point {:04} done: {} variants, min availability {}",
                    point.axes.index,
                    point.variants.len(),
                    availability
                );
            }
            PointOutcome::Failed { axes, error } => {
                println!("point {:04} FAILED: {error}", axes.index);
            }
        }
    }
    println!("wrote {} files under {}", files.len(), root.display());
    eprintln!("campaign wall time: {:.2?}", bundle.wall);

    let failed = bundle.failed_points();
    if failed == bundle.points.len() {
        return Err(SimError::numerics(format!(
            "all {failed} sweep points failed; see the messages above"
        )));
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {} points failed", bundle.points.len());
    }
    Ok(())
}

fn cmd_validate(common: &CommonArgs) -> Result<()> {
    let cfg = load(common)?;
    cfg.validate()?;
    let points = cfg.points().len();
    let variants = variant_keys(&cfg).len();
    println!(
        "configuration OK: {points} sweep point(s) x {variants} variant(s), \
         {} snapshots x {} realizations each, output '{}'",
        cfg.snapshots, cfg.realizations, cfg.output_dir
    );
    Ok(())
}

fn cmd_emit_figures(args: &EmitArgs) -> Result<()> {
    let which = args
        .figure
        .as_deref()
        .map(FigureId::from_str)
        .transpose()?;
    let cfg = load(&args.common)?;
    cfg.validate()?;
    let bundle = run_campaign(&cfg)?;
    let root = resolve_output_dir(&cfg.output_dir).join("figures");
    let files = emit_figure_data(&bundle, &root, which)?;
    for file in &files {
        println!("wrote {}", file.display());
    }
    eprintln!("campaign wall time: {:.2?}", bundle.wall);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Validate(common) => cmd_validate(common),
        Command::EmitFigures(args) => cmd_emit_figures(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
