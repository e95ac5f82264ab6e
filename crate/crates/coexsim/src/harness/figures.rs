//! Figure-ready data exports derived from a finished campaign.
//!
//! Three families are supported:
//! * `se-cdf` — empirical CDF of the per-cell broadband sum spectral
//!   efficiency, one curve per (point, variant);
//! * `availability` — network availability (fraction of measured low-latency
//!   users meeting the error target) per (point, variant), alongside the
//!   sweep coordinates;
//! * `outage-vs-activation` — broadband service outage of the blanking mode
//!   versus the activation probability, with the closed-form prediction in a
//!   companion column.
//!
//! Requesting a family for which the bundle holds no data is an error; the
//! exports never silently produce an empty table.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::frame::{analytic_punc_outage, CoexMode};
use crate::harness::campaign::{PointOutcome, ResultBundle};
use crate::harness::output::variant_columns;

/// One exportable figure family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    SeCdf,
    Availability,
    OutageVsActivation,
}

impl FigureId {
    pub const ALL: [FigureId; 3] = [
        FigureId::SeCdf,
        FigureId::Availability,
        FigureId::OutageVsActivation,
    ];

    /// Stable identifier used on the command line and in the manifest.
    pub fn id(self) -> &'static str {
        match self {
            FigureId::SeCdf => "se-cdf",
            FigureId::Availability => "availability",
            FigureId::OutageVsActivation => "outage-vs-activation",
        }
    }

    /// File the family is written to, relative to the figures directory.
    pub fn file_name(self) -> &'static str {
        match self {
            FigureId::SeCdf => "se_cdf.csv",
            FigureId::Availability => "availability.csv",
            FigureId::OutageVsActivation => "outage_vs_activation.csv",
        }
    }
}

impl std::str::FromStr for FigureId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se-cdf" => Ok(FigureId::SeCdf),
            "availability" => Ok(FigureId::Availability),
            "outage-vs-activation" => Ok(FigureId::OutageVsActivation),
            other => Err(SimError::Figure(format!(
                "unknown figure '{other}'; expected one of: se-cdf, availability, \
                 outage-vs-activation"
            ))),
        }
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    id: &'static str,
    file: &'static str,
    rows: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_digest: &'a str,
    seed: u64,
    figures: Vec<ManifestEntry>,
}

/// Writes the requested figure family (or all of them) plus `manifest.json`
/// into `dir`; returns the created files.
pub fn emit_figure_data(
    bundle: &ResultBundle,
    dir: &Path,
    which: Option<FigureId>,
) -> Result<Vec<PathBuf>> {
    let families: Vec<FigureId> = match which {
        Some(one) => vec![one],
        None => FigureId::ALL.to_vec(),
    };
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for family in families {
        let (bytes, rows) = match family {
            FigureId::SeCdf => se_cdf_csv(bundle)?,
            FigureId::Availability => availability_csv(bundle)?,
            FigureId::OutageVsActivation => outage_csv(bundle)?,
        };
        if rows == 0 {
            return Err(SimError::Figure(format!(
                "figure '{}' has no data in this campaign (no completed point \
                 produced the quantities it plots)",
                family.id()
            )));
        }
        let path = dir.join(family.file_name());
        std::fs::write(&path, bytes)?;
        written.push(path);
        entries.push(ManifestEntry {
            id: family.id(),
            file: family.file_name(),
            rows,
        });
    }
    let manifest = Manifest {
        config_digest: &bundle.config_digest,
        seed: bundle.config.seed,
        figures: entries,
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    let path = dir.join("manifest.json");
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

/// Empirical CDF of per-cell broadband sum SE, one curve per (point, variant).
fn se_cdf_csv(bundle: &ResultBundle) -> Result<(Vec<u8>, usize)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["point", "mode", "precoder", "power", "se", "cdf"])?;
    let mut rows = 0usize;
    for outcome in &bundle.points {
        let PointOutcome::Done(point) = outcome else {
            continue;
        };
        for v in &point.variants {
            let cells = v.outage_frames.len();
            let snapshots = bundle.config.snapshots as usize;
            // Per-(snapshot, cell) broadband sum, from the per-user rows.
            let mut sums = vec![0.0f64; snapshots * cells];
            for row in &v.embb {
                sums[row.snapshot as usize * cells + row.cell] += row.se;
            }
            sums.sort_by(|a, b| a.partial_cmp(b).expect("spectral efficiencies are finite"));
            let n = sums.len() as f64;
            let (mode, precoder, power) = variant_columns(v);
            for (i, se) in sums.iter().enumerate() {
                w.write_record([
                    point.axes.index.to_string(),
                    mode.clone(),
                    precoder.clone(),
                    power.clone(),
                    se.to_string(),
                    (((i + 1) as f64) / n).to_string(),
                ])?;
                rows += 1;
            }
        }
    }
    Ok((w.into_inner().expect("writing to a Vec cannot fail"), rows))
}

/// Network availability per (point, variant) with sweep coordinates.
fn availability_csv(bundle: &ResultBundle) -> Result<(Vec<u8>, usize)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "point",
        "users_per_cell",
        "urllc_fraction",
        "activation_prob",
        "tau_p",
        "slots",
        "tau_c",
        "mode",
        "precoder",
        "power",
        "availability",
        "measured_users",
    ])?;
    let mut rows = 0usize;
    for outcome in &bundle.points {
        let PointOutcome::Done(point) = outcome else {
            continue;
        };
        for v in &point.variants {
            let Some(eta) = v.availability else {
                continue; // nothing measured for this variant
            };
            let (mode, precoder, power) = variant_columns(v);
            w.write_record([
                point.axes.index.to_string(),
                point.axes.users_per_cell.to_string(),
                point.axes.urllc_fraction.to_string(),
                point.axes.activation_prob.to_string(),
                point.axes.tau_p.to_string(),
                point.axes.slots.to_string(),
                point.axes.tau_c.to_string(),
                mode,
                precoder,
                power,
                eta.to_string(),
                v.urllc.len().to_string(),
            ])?;
            rows += 1;
        }
    }
    Ok((w.into_inner().expect("writing to a Vec cannot fail"), rows))
}

/// Blanking-mode broadband outage vs activation probability, with the
/// closed-form prediction for comparison.
fn outage_csv(bundle: &ResultBundle) -> Result<(Vec<u8>, usize)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "point",
        "activation_prob",
        "slots",
        "k_urllc",
        "precoder",
        "power",
        "empirical",
        "analytic",
    ])?;
    let mut rows = 0usize;
    for outcome in &bundle.points {
        let PointOutcome::Done(point) = outcome else {
            continue;
        };
        let k_urllc = bundle.config.network_for(&point.axes).k_urllc();
        let analytic =
            analytic_punc_outage(point.axes.activation_prob, k_urllc, point.axes.slots);
        for v in &point.variants {
            if v.key.mode != CoexMode::Puncturing {
                continue;
            }
            let (_, precoder, power) = variant_columns(v);
            w.write_record([
                point.axes.index.to_string(),
                point.axes.activation_prob.to_string(),
                point.axes.slots.to_string(),
                k_urllc.to_string(),
                precoder,
                power,
                v.outage_rate().to_string(),
                analytic.to_string(),
            ])?;
            rows += 1;
        }
    }
    Ok((w.into_inner().expect("writing to a Vec cannot fail"), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    #[test]
    fn figure_ids_round_trip() {
        for id in FigureId::ALL {
            assert_eq!(FigureId::from_str(id.id()).unwrap(), id);
        }
        let err = FigureId::from_str("se_cdf").unwrap_err();
        assert!(err.to_string().contains("se-cdf"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn all_families_emit_with_manifest_and_monotone_cdf() {
        let cfg = crate::harness::campaign::tiny_test_campaign();
        let bundle = crate::harness::campaign::run_campaign(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_figure_data(&bundle, dir.path(), None).unwrap();
        assert_eq!(files.len(), 4); // three families + manifest

        let cdf = std::fs::read_to_string(dir.path().join("se_cdf.csv")).unwrap();
        let mut last_cdf = 0.0;
        let mut last_se = f64::NEG_INFINITY;
        let mut curve = String::new();
        for line in cdf.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let key = format!("{},{},{},{}", cols[0], cols[1], cols[2], cols[3]);
            let se: f64 = cols[4].parse().unwrap();
            let p: f64 = cols[5].parse().unwrap();
            if key != curve {
                curve = key;
                last_cdf = 0.0;
                last_se = f64::NEG_INFINITY;
            }
            assert!(se >= last_se, "sum SE not sorted within a curve");
            assert!(p > last_cdf && p <= 1.0, "CDF not increasing");
            last_se = se;
            last_cdf = p;
        }
        // 2 variants x (2 snapshots x 1 cell) points per curve.
        assert_eq!(cdf.lines().count(), 1 + 4);

        let avail = std::fs::read_to_string(dir.path().join("availability.csv")).unwrap();
        assert_eq!(avail.lines().count(), 1 + 2); // one row per variant
        let outage =
            std::fs::read_to_string(dir.path().join("outage_vs_activation.csv")).unwrap();
        assert_eq!(outage.lines().count(), 1 + 1); // blanking-mode variants only
        let last = outage.lines().last().unwrap();
        let cols: Vec<&str> = last.split(',').collect();
        let empirical: f64 = cols[6].parse().unwrap();
        let analytic: f64 = cols[7].parse().unwrap();
        assert!((0.0..=1.0).contains(&empirical));
        let expected = analytic_punc_outage(0.6, 2, 3);
        assert!((analytic - expected).abs() < 1e-15);

        let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        for id in FigureId::ALL {
            assert!(manifest.contains(id.id()), "manifest missing {}", id.id());
        }
    }

    #[test]
    fn missing_figure_data_is_an_error_not_an_empty_file() {
        let mut cfg = crate::harness::campaign::tiny_test_campaign();
        // Without blanking variants the outage family has nothing to plot.
        cfg.variants.modes = vec![CoexMode::Superposition];
        let bundle = crate::harness::campaign::run_campaign(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err =
            emit_figure_data(&bundle, dir.path(), Some(FigureId::OutageVsActivation)).unwrap_err();
        assert!(matches!(err, SimError::Figure(_)));
        assert!(err.to_string().contains("outage-vs-activation"));
        assert!(!dir.path().join("outage_vs_activation.csv").exists());
        // The other families still emit on request.
        emit_figure_data(&bundle, dir.path(), Some(FigureId::SeCdf)).unwrap();
        assert!(dir.path().join("se_cdf.csv").exists());
    }
}
