//! Campaign execution: the outer Monte Carlo loops.
//!
//! A campaign evaluates every sweep point of a [`CampaignConfig`]. Each point
//! draws `snapshots` independent networks; within a snapshot one shared
//! channel ensemble feeds every scheme variant, so variant comparisons are
//! paired sample-by-sample. Snapshots run in parallel and are merged in index
//! order, keeping all outputs independent of thread scheduling. A failure
//! while simulating one point is recorded as that point's outcome and does
//! not abort the rest of the campaign.

use rayon::prelude::*;
use serde::Serialize;

use crate::embb::evaluate_frame;
use crate::error::{Result, SimError};
use crate::estimation::{estimate_channels, ChannelSampler, EstimatorPrep};
use crate::frame::{assign_pilots, draw_activations, ActivationMatrix, CoexMode};
use crate::harness::config::{CampaignConfig, PointAxes};
use crate::power::{epa, fpa, opa_max_prod_sinr, PowerAllocation, PowerScheme, SinrStats};
use crate::precoding::{accumulate_effective_channels, EffectiveChannels, Precoder};
use crate::rng::{Purpose, SnapshotRng};
use crate::scenario::{draw_snapshot, UserField};
use crate::urllc::{network_availability, optimize_user_eps, slot_samples, UrllcSample};

/// One (mode, precoder, power) combination evaluated at every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantKey {
    pub mode: CoexMode,
    pub precoder: Precoder,
    pub power: PowerScheme,
}

impl VariantKey {
    /// Compact label, e.g. `spc/mmse/fpa[nu=0.5;omega=0.6]`.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.mode, self.precoder, power_label(&self.power))
    }
}

/// Stable text form of a power policy, including its parameters.
pub fn power_label(scheme: &PowerScheme) -> String {
    match scheme {
        PowerScheme::Epa => "epa".to_string(),
        PowerScheme::Fpa { nu, omega } => format!("fpa[nu={nu};omega={omega}]"),
        PowerScheme::Opa => "opa".to_string(),
    }
}

/// Broadband result for one user in one snapshot (mean over frames).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbbRow {
    pub snapshot: u32,
    pub cell: usize,
    pub user: usize,
    /// Spectral efficiency in bit/s/Hz, averaged over the simulated frames.
    pub se: f64,
}

/// Low-latency result for one user in one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct UrllcRow {
    pub snapshot: u32,
    pub cell: usize,
    pub user: usize,
    /// Slots (across all frames) in which the user was scheduled.
    pub active_slots: u32,
    /// Channel samples pooled into the error-probability estimate.
    pub samples: u32,
    /// Estimated decoding error probability at the tuned parameter.
    pub eps: f64,
    /// Tuned value of the decoder tilt `s`.
    pub s_star: f64,
    /// True when the objective was flat in `s` (estimate is degenerate).
    pub flat: bool,
}

/// Numerical health counters accumulated over one variant at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct VariantCounters {
    /// Error-probability evaluations clamped into [0, 1].
    pub clipped: u64,
    /// Channel samples whose evaluation failed (counted as errors).
    pub skipped: u64,
    /// Users whose tilt objective was flat.
    pub flat_users: u64,
    /// Low-latency users never scheduled in any simulated slot.
    pub never_active: u64,
    /// Broadband SINR denominators floored to the numerical guard.
    pub floored_denominators: u64,
    /// Gradient-ascent iterations spent in optimized power allocation.
    pub opa_iterations: u64,
    /// Optimized power allocations solved.
    pub opa_runs: u64,
}

impl VariantCounters {
    fn absorb(&mut self, other: &VariantCounters) {
        self.clipped += other.clipped;
        self.skipped += other.skipped;
        self.flat_users += other.flat_users;
        self.never_active += other.never_active;
        self.floored_denominators += other.floored_denominators;
        self.opa_iterations += other.opa_iterations;
        self.opa_runs += other.opa_runs;
    }
}

/// Everything measured for one scheme variant at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantData {
    pub key: VariantKey,
    /// One row per (snapshot, broadband user).
    pub embb: Vec<EmbbRow>,
    /// One row per (snapshot, scheduled low-latency user).
    pub urllc: Vec<UrllcRow>,
    /// Per-cell count of frames with zero broadband service.
    pub outage_frames: Vec<u64>,
    /// Frames simulated per cell.
    pub frames: u64,
    /// Fraction of measured low-latency users meeting the error target
    /// (`None` when no user was measured).
    pub availability: Option<f64>,
    /// Mean over (snapshot, cell) of the per-cell broadband sum SE.
    pub mean_cell_sum_se: f64,
    pub counters: VariantCounters,
}

impl VariantData {
    /// Network-wide broadband outage rate: outage frames over all frames.
    pub fn outage_rate(&self) -> f64 {
        let total: u64 = self.outage_frames.iter().sum();
        let frames = self.frames * self.outage_frames.len() as u64;
        if frames == 0 {
            0.0
        } else {
            total as f64 / frames as f64
        }
    }
}

/// Completed measurements for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    pub axes: PointAxes,
    pub variants: Vec<VariantData>,
    /// Worst relative eigenvalue clipped by the correlation square roots.
    pub worst_rel_eig: f64,
}

/// Outcome of simulating one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum PointOutcome {
    Done(PointData),
    Failed { axes: PointAxes, error: String },
}

impl PointOutcome {
    pub fn axes(&self) -> &PointAxes {
        match self {
            PointOutcome::Done(data) => &data.axes,
            PointOutcome::Failed { axes, .. } => axes,
        }
    }
}

/// Results of a whole campaign, pending serialization.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub config: CampaignConfig,
    /// Digest of the resolved configuration, recorded in the summary.
    pub config_digest: String,
    pub points: Vec<PointOutcome>,
    /// Wall-clock duration of the run (not written to deterministic files).
    pub wall: std::time::Duration,
}

impl ResultBundle {
    /// Number of points that failed.
    pub fn failed_points(&self) -> usize {
        self.points
            .iter()
            .filter(|p| matches!(p, PointOutcome::Failed { .. }))
            .count()
    }
}

/// Runs every sweep point. Errors only when the configuration itself is
/// invalid; per-point simulation failures become `PointOutcome::Failed`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<ResultBundle> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let points = cfg.points();
    let mut outcomes = Vec::with_capacity(points.len());
    for axes in points {
        outcomes.push(point_outcome(cfg, axes));
    }
    Ok(ResultBundle {
        config: cfg.clone(),
        config_digest: cfg.digest(),
        points: outcomes,
        wall: started.elapsed(),
    })
}

/// Simulates one point and folds any failure into the outcome, so a broken
/// point cannot abort the surrounding campaign.
pub fn point_outcome(cfg: &CampaignConfig, axes: PointAxes) -> PointOutcome {
    match run_point(cfg, &axes) {
        Ok(data) => PointOutcome::Done(data),
        Err(err) => PointOutcome::Failed {
            axes,
            error: err.to_string(),
        },
    }
}

/// Enumerates the scheme variants in deterministic order.
pub fn variant_keys(cfg: &CampaignConfig) -> Vec<VariantKey> {
    let mut keys = Vec::new();
    for &mode in &cfg.variants.modes {
        for &precoder in &cfg.variants.precoders {
            for &power in &cfg.variants.power {
                keys.push(VariantKey {
                    mode,
                    precoder,
                    power,
                });
            }
        }
    }
    keys
}

/// Simulates one sweep point across all snapshots and variants.
pub fn run_point(cfg: &CampaignConfig, axes: &PointAxes) -> Result<PointData> {
    let variants = variant_keys(cfg);
    let yields: Vec<SnapshotYield> = (0..cfg.snapshots)
        .into_par_iter()
        .map(|snap| run_snapshot(cfg, axes, &variants, snap))
        .collect::<Result<Vec<_>>>()?;

    let mut worst_rel_eig: f64 = 0.0;
    let mut merged: Vec<VariantData> = variants
        .iter()
        .map(|key| VariantData {
            key: key.clone(),
            embb: Vec::new(),
            urllc: Vec::new(),
            outage_frames: vec![0; cfg.network.cells],
            frames: 0,
            availability: None,
            mean_cell_sum_se: 0.0,
            counters: VariantCounters::default(),
        })
        .collect();

    for snap_yield in &yields {
        worst_rel_eig = worst_rel_eig.max(snap_yield.worst_rel_eig);
        for (dst, src) in merged.iter_mut().zip(&snap_yield.variants) {
            dst.embb.extend_from_slice(&src.embb);
            dst.urllc.extend_from_slice(&src.urllc);
            for (o, &n) in dst.outage_frames.iter_mut().zip(&src.outage_frames) {
                *o += u64::from(n);
            }
            dst.frames += u64::from(cfg.frames_per_snapshot);
            dst.counters.absorb(&src.counters);
        }
    }

    for variant in &mut merged {
        let eps: Vec<f64> = variant.urllc.iter().map(|r| r.eps).collect();
        variant.availability = if eps.is_empty() {
            None
        } else {
            Some(network_availability(&eps, cfg.epsilon_target)?)
        };
        let cells = cfg.network.cells as f64;
        let snapshots = cfg.snapshots as f64;
        let total_se: f64 = variant.embb.iter().map(|r| r.se).sum();
        variant.mean_cell_sum_se = total_se / (cells * snapshots);
    }

    Ok(PointData {
        axes: axes.clone(),
        variants: merged,
        worst_rel_eig,
    })
}

/// Per-snapshot measurements for every variant, in variant order.
struct SnapshotYield {
    variants: Vec<VariantSnapshotYield>,
    worst_rel_eig: f64,
}

#[derive(Default)]
struct VariantSnapshotYield {
    embb: Vec<EmbbRow>,
    urllc: Vec<UrllcRow>,
    outage_frames: Vec<u32>,
    counters: VariantCounters,
}

fn run_snapshot(
    cfg: &CampaignConfig,
    axes: &PointAxes,
    variants: &[VariantKey],
    snap: u32,
) -> Result<SnapshotYield> {
    let net = cfg.network_for(axes);
    let point_id = u32::try_from(axes.index).expect("point count is bounded");
    let rng = SnapshotRng::new(cfg.seed, point_id, snap);
    let snapshot = draw_snapshot(&net, &rng)?;
    let cells = net.cells;
    let users = net.users_per_cell;
    let k_u = net.k_urllc();

    // Pilots are assigned once per snapshot and shared by every variant.
    let pilot_frame = cfg.frame_for(axes, CoexMode::Puncturing);
    let mut pilot_rng = rng.stream(Purpose::PilotAssign);
    let plan = assign_pilots(&pilot_frame, cells, users, k_u, &mut pilot_rng)?;

    let cross_cell = variants.iter().any(|v| v.precoder == Precoder::Mmse);
    let ul_powers = UserField::filled(cells, users, net.ul_power_w);
    let prep = EstimatorPrep::new(&snapshot, &plan, &ul_powers, net.noise_ul_w, cross_cell)?;
    let sampler = ChannelSampler::new(&snapshot)?;

    // One channel ensemble per precoder, shared across modes and powers.
    let mut precoders: Vec<Precoder> = Vec::new();
    for v in variants {
        if !precoders.contains(&v.precoder) {
            precoders.push(v.precoder);
        }
    }
    let mut stats: Vec<EffectiveChannels> = precoders
        .iter()
        .map(|_| EffectiveChannels::new(cells, users, k_u))
        .collect();
    let total = cfg.realizations as usize;
    let chunk_len = cfg.chunk_realizations as usize;
    let mut done = 0usize;
    let mut chunk_idx = 0u32;
    while done < total {
        let n = chunk_len.min(total - done);
        let est = estimate_channels(&sampler, &prep, &plan, n, chunk_idx, &rng)?;
        for (slot, &precoder) in precoders.iter().enumerate() {
            accumulate_effective_channels(&mut stats[slot], precoder, &est, &prep)?;
        }
        done += n;
        chunk_idx += 1;
    }

    // Sum-SINR statistics per precoder, needed by optimized power only.
    let need_opa = variants.iter().any(|v| v.power == PowerScheme::Opa);
    let sinr_stats: Vec<Option<SinrStats>> = stats
        .iter()
        .map(|s| need_opa.then(|| SinrStats::from_stats(s, net.noise_dl_w)))
        .collect();

    // Activation patterns are drawn once per frame and shared by every
    // variant; modes only reinterpret the same Bernoulli draws.
    let frames = cfg.frames_per_snapshot as usize;
    let base_acts: Vec<ActivationMatrix> = (0..frames)
        .map(|f| {
            let mut act_rng = rng.lane(Purpose::Activations, f as u32);
            draw_activations(&pilot_frame, cells, k_u, &mut act_rng)
        })
        .collect();

    let beta_own = UserField::from_fn(cells, users, |j, k| snapshot.beta[(j, j, k)]);

    let mut out = SnapshotYield {
        variants: Vec::with_capacity(variants.len()),
        worst_rel_eig: sampler.worst_rel_eig,
    };
    for key in variants {
        let precoder_slot = precoders
            .iter()
            .position(|&p| p == key.precoder)
            .expect("every variant precoder was collected");
        let result = run_variant(
            cfg,
            axes,
            key,
            snap,
            &stats[precoder_slot],
            sinr_stats[precoder_slot].as_ref(),
            &base_acts,
            &beta_own,
            net.noise_dl_w,
            net.max_bs_power_w,
        )?;
        out.variants.push(result);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_variant(
    cfg: &CampaignConfig,
    axes: &PointAxes,
    key: &VariantKey,
    snap: u32,
    stats: &EffectiveChannels,
    sinr_stats: Option<&SinrStats>,
    base_acts: &[ActivationMatrix],
    beta_own: &UserField<f64>,
    noise_dl_w: f64,
    rho_max_w: f64,
) -> Result<VariantSnapshotYield> {
    let frame = cfg.frame_for(axes, key.mode);
    let cells = stats.cells();
    let users = stats.users();
    let k_u = stats.k_urllc();
    let mut y = VariantSnapshotYield {
        outage_frames: vec![0; cells],
        ..Default::default()
    };

    let mut se_sum = UserField::filled(cells, users, 0.0f64);
    let mut pooled: Vec<Vec<UrllcSample>> = vec![Vec::new(); cells * k_u];
    let mut active_slots = vec![0u32; cells * k_u];

    for acts_base in base_acts {
        // Reinterpret the shared activation pattern under this mode.
        let acts = ActivationMatrix::from_fn(
            acts_base.slots(),
            cells,
            k_u,
            key.mode,
            |t, j, k| acts_base.is_active(t, j, k),
        );
        let mut allocs: Vec<PowerAllocation> = Vec::with_capacity(frame.slots);
        for t in 0..frame.slots {
            let alloc = match key.power {
                PowerScheme::Epa => epa(&acts, t, users, rho_max_w),
                PowerScheme::Fpa { nu, omega } => {
                    fpa(&acts, t, users, beta_own, nu, omega, rho_max_w)
                }
                PowerScheme::Opa => {
                    let sinr = sinr_stats.expect("sum-SINR statistics exist when OPA runs");
                    let (alloc, report) = opa_max_prod_sinr(sinr, &acts, t, rho_max_w)?;
                    y.counters.opa_iterations += report.iterations as u64;
                    y.counters.opa_runs += 1;
                    alloc
                }
            };
            alloc.assert_budget();
            allocs.push(alloc);
        }

        let metrics = evaluate_frame(stats, &allocs, &frame, noise_dl_w);
        y.counters.floored_denominators += metrics.floored_denominators as u64;
        for j in 0..cells {
            if metrics.outage[j] {
                y.outage_frames[j] += 1;
            }
            for k in k_u..users {
                se_sum[(j, k)] += metrics.se[(j, k)];
            }
        }

        for j in 0..cells {
            for k in 0..k_u {
                for (t, alloc) in allocs.iter().enumerate() {
                    let _ = t;
                    let samples = slot_samples(stats, alloc, noise_dl_w, j, k);
                    if !samples.is_empty() {
                        active_slots[j * k_u + k] += 1;
                        pooled[j * k_u + k].extend(samples);
                    }
                }
            }
        }
    }

    let frames = base_acts.len() as f64;
    for j in 0..cells {
        for k in k_u..users {
            y.embb.push(EmbbRow {
                snapshot: snap,
                cell: j,
                user: k,
                se: se_sum[(j, k)] / frames,
            });
        }
    }

    let n_d = frame.slot_len();
    let rate = frame.rate_nats();
    for j in 0..cells {
        for k in 0..k_u {
            let samples = &pooled[j * k_u + k];
            match optimize_user_eps(samples, stats.g_hat(j, k), n_d, rate) {
                Some(user_eps) => {
                    y.counters.clipped += user_eps.clipped as u64;
                    y.counters.skipped += user_eps.skipped as u64;
                    y.counters.flat_users += u64::from(user_eps.flat);
                    y.urllc.push(UrllcRow {
                        snapshot: snap,
                        cell: j,
                        user: k,
                        active_slots: active_slots[j * k_u + k],
                        samples: samples.len() as u32,
                        eps: user_eps.eps,
                        s_star: user_eps.s_star,
                        flat: user_eps.flat,
                    });
                }
                None => {
                    y.counters.never_active += 1;
                }
            }
        }
    }

    if y.urllc.len() + y.counters.never_active as usize != cells * k_u {
        return Err(SimError::numerics(format!(
            "low-latency accounting mismatch in snapshot {snap}: {} measured + {} idle != {}",
            y.urllc.len(),
            y.counters.never_active,
            cells * k_u
        )));
    }
    Ok(y)
}

/// Small single-cell campaign used by the harness test suites.
#[cfg(test)]
pub(crate) fn tiny_test_campaign() -> CampaignConfig {
    let mut cfg = CampaignConfig::default();
    cfg.seed = 7;
    cfg.snapshots = 2;
    cfg.realizations = 12;
    cfg.chunk_realizations = 5;
    cfg.frames_per_snapshot = 3;
    cfg.network.cells = 1;
    cfg.network.antennas = 4;
    cfg.frame.payload_bits = 8; // keep the 5-symbol slots decodable
    cfg.sweep.users_per_cell = vec![5];
    cfg.sweep.urllc_fraction = vec![0.4];
    cfg.sweep.activation_prob = vec![0.6];
    cfg.sweep.tau_p = vec![5];
    cfg.sweep.slots = vec![3];
    cfg.sweep.tau_c = vec![20];
    cfg.variants.modes = vec![CoexMode::Puncturing, CoexMode::Superposition];
    cfg.variants.precoders = vec![Precoder::Mr];
    cfg.variants.power = vec![PowerScheme::Epa];
    cfg
}
