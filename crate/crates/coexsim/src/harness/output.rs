//! Deterministic result serialization: per-point CSV tables plus a
//! machine-readable campaign summary.
//!
//! Every file written here is a pure function of (configuration, seed), so a
//! rerun reproduces it byte for byte. Timing and other run-dependent data
//! stay out of these files deliberately.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::campaign::{
    power_label, PointOutcome, ResultBundle, VariantCounters, VariantData,
};
use crate::harness::config::PointAxes;
use crate::power::PowerScheme;

/// Environment variable that re-roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "COEXSIM_OUTPUT_ROOT";

/// Resolves the configured output directory against `COEXSIM_OUTPUT_ROOT`.
/// Absolute paths are used as-is; relative paths are joined under the root
/// when the variable is set and non-empty.
pub fn resolve_output_dir(configured: &str) -> PathBuf {
    let path = PathBuf::from(configured);
    if path.is_absolute() {
        return path;
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path,
    }
}

/// Directory name for one sweep point, e.g. `point_0003`.
pub fn point_dir_name(index: usize) -> String {
    format!("point_{index:04}")
}

/// Writes all per-point tables and the summary; returns the created files.
pub fn write_outputs(bundle: &ResultBundle, root: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(root)?;
    let mut written = Vec::new();
    for outcome in &bundle.points {
        let PointOutcome::Done(point) = outcome else {
            continue;
        };
        let dir = root.join(point_dir_name(point.axes.index));
        std::fs::create_dir_all(&dir)?;

        let path = dir.join("embb_se.csv");
        std::fs::write(&path, embb_csv(point.axes.index, &point.variants)?)?;
        written.push(path);

        let path = dir.join("urllc_eps.csv");
        std::fs::write(&path, urllc_csv(point.axes.index, &point.variants)?)?;
        written.push(path);

        let path = dir.join("outage.csv");
        std::fs::write(&path, outage_csv(point.axes.index, &point.variants)?)?;
        written.push(path);
    }
    let path = root.join("summary.json");
    std::fs::write(&path, summary_json(bundle)?)?;
    written.push(path);
    Ok(written)
}

fn embb_csv(point: usize, variants: &[VariantData]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "point", "mode", "precoder", "power", "snapshot", "cell", "user", "se",
    ])?;
    for v in variants {
        let (mode, precoder, power) = variant_columns(v);
        for row in &v.embb {
            w.write_record([
                point.to_string(),
                mode.clone(),
                precoder.clone(),
                power.clone(),
                row.snapshot.to_string(),
                row.cell.to_string(),
                row.user.to_string(),
                row.se.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().expect("writing to a Vec cannot fail"))
}

fn urllc_csv(point: usize, variants: &[VariantData]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "point",
        "mode",
        "precoder",
        "power",
        "snapshot",
        "cell",
        "user",
        "active_slots",
        "samples",
        "eps",
        "s_star",
        "flat",
    ])?;
    for v in variants {
        let (mode, precoder, power) = variant_columns(v);
        for row in &v.urllc {
            w.write_record([
                point.to_string(),
                mode.clone(),
                precoder.clone(),
                power.clone(),
                row.snapshot.to_string(),
                row.cell.to_string(),
                row.user.to_string(),
                row.active_slots.to_string(),
                row.samples.to_string(),
                row.eps.to_string(),
                row.s_star.to_string(),
                row.flat.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().expect("writing to a Vec cannot fail"))
}

fn outage_csv(point: usize, variants: &[VariantData]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "point",
        "mode",
        "precoder",
        "power",
        "cell",
        "outage_frames",
        "frames",
        "rate",
    ])?;
    for v in variants {
        let (mode, precoder, power) = variant_columns(v);
        for (cell, &count) in v.outage_frames.iter().enumerate() {
            let rate = if v.frames == 0 {
                0.0
            } else {
                count as f64 / v.frames as f64
            };
            w.write_record([
                point.to_string(),
                mode.clone(),
                precoder.clone(),
                power.clone(),
                cell.to_string(),
                count.to_string(),
                v.frames.to_string(),
                rate.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().expect("writing to a Vec cannot fail"))
}

pub(crate) fn variant_columns(v: &VariantData) -> (String, String, String) {
    (
        v.key.mode.to_string(),
        v.key.precoder.to_string(),
        power_label(&v.key.power),
    )
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: ToolInfo,
    seed: u64,
    config_digest: &'a str,
    snapshots: u32,
    realizations: u32,
    frames_per_snapshot: u32,
    epsilon_target: f64,
    total_points: usize,
    failed_points: usize,
    points: Vec<PointSummary<'a>>,
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct PointSummary<'a> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    axes: &'a PointAxes,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_rel_eig: Option<f64>,
    variants: Vec<VariantSummary<'a>>,
}

#[derive(Serialize)]
struct VariantSummary<'a> {
    label: String,
    mode: &'a crate::frame::CoexMode,
    precoder: &'a crate::precoding::Precoder,
    power: &'a PowerScheme,
    availability: Option<f64>,
    mean_cell_sum_se: f64,
    outage_rate: f64,
    outage_frames: &'a [u64],
    frames: u64,
    measured_urllc_users: usize,
    counters: &'a VariantCounters,
}

/// Renders the campaign summary as pretty JSON (deterministic byte-wise).
pub fn summary_json(bundle: &ResultBundle) -> Result<Vec<u8>> {
    let points = bundle
        .points
        .iter()
        .map(|outcome| match outcome {
            PointOutcome::Done(point) => PointSummary {
                status: "done",
                error: None,
                axes: &point.axes,
                worst_rel_eig: Some(point.worst_rel_eig),
                variants: point
                    .variants
                    .iter()
                    .map(|v| VariantSummary {
                        label: v.key.label(),
                        mode: &v.key.mode,
                        precoder: &v.key.precoder,
                        power: &v.key.power,
                        availability: v.availability,
                        mean_cell_sum_se: v.mean_cell_sum_se,
                        outage_rate: v.outage_rate(),
                        outage_frames: &v.outage_frames,
                        frames: v.frames,
                        measured_urllc_users: v.urllc.len(),
                        counters: &v.counters,
                    })
                    .collect(),
            },
            PointOutcome::Failed { axes, error } => PointSummary {
                status: "failed",
                error: Some(error),
                axes,
                worst_rel_eig: None,
                variants: Vec::new(),
            },
        })
        .collect();
    let summary = Summary {
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        seed: bundle.config.seed,
        config_digest: &bundle.config_digest,
        snapshots: bundle.config.snapshots,
        realizations: bundle.config.realizations,
        frames_per_snapshot: bundle.config.frames_per_snapshot,
        epsilon_target: bundle.config.epsilon_target,
        total_points: bundle.points.len(),
        failed_points: bundle.failed_points(),
        points,
    };
    let mut text = serde_json::to_vec_pretty(&summary)?;
    text.push(b'\n');
    Ok(text)
}
