//! Broadband-user performance: effective SINR, spectral efficiency, and
//! service outage.
//!
//! All quantities hang off the effective-channel expectations collected
//! during precoding. A user's slot SINR is
//!
//! ```text
//!           ϱ_own |E g_own|²
//! ─────────────────────────────────────────────
//! Σ_src ϱ_src E|g_src|²  −  ϱ_own |E g_own|²  +  σ²_dl
//! ```
//!
//! with ϱ the *effective* per-slot powers (activation and puncturing
//! gates already applied), and the spectral efficiency averages the slot
//! rates with the training-overhead prelog applied exactly once:
//!
//! ```text
//! SE = (τ_d / τ_c) · (1/T) · Σ_t log2(1 + SINR_t),   τ_d = τ_c − τ_p.
//! ```

use crate::frame::FrameConfig;
use crate::power::PowerAllocation;
use crate::precoding::EffectiveChannels;
use crate::scenario::UserField;

/// Slot SINR of one user from the ensemble statistics and the slot's
/// effective powers.
///
/// The denominator is positive by construction when the statistics come
/// from one consistent ensemble; if rounding ever drives it nonpositive
/// the value is floored at `σ²_dl · 10⁻⁶` and `floored` is incremented so
/// the event is visible downstream.
pub fn slot_sinr(
    stats: &EffectiveChannels,
    alloc: &PowerAllocation,
    noise_dl_w: f64,
    cell: usize,
    user: usize,
    floored: &mut usize,
) -> f64 {
    let num = alloc.rho[(cell, user)] * stats.g_hat(cell, user).norm_sqr();
    let mut den = noise_dl_w - num;
    for l in 0..stats.cells() {
        for i in 0..stats.users() {
            den += alloc.rho[(l, i)] * stats.mean_gain2((l, i), (cell, user));
        }
    }
    if den <= 0.0 {
        *floored += 1;
        den = noise_dl_w * 1e-6;
    }
    num / den
}

/// Spectral efficiency from one frame's slot SINRs (bits/s/Hz).
pub fn se_from_sinrs(sinrs: &[f64], tau_p: usize, tau_c: usize) -> f64 {
    assert!(!sinrs.is_empty() && tau_c > tau_p);
    let tau_d = (tau_c - tau_p) as f64;
    let mean_rate =
        sinrs.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / sinrs.len() as f64;
    (tau_d / tau_c as f64) * mean_rate
}

/// Broadband metrics of one frame on one snapshot.
#[derive(Debug, Clone)]
pub struct EmbbMetrics {
    /// Per-slot SINR of every broadband user (low-latency entries 0).
    pub sinr: Vec<UserField<f64>>,
    /// Spectral efficiency per user (0 for low-latency entries).
    pub se: UserField<f64>,
    /// Per-cell sum of broadband spectral efficiency.
    pub cell_sum_se: Vec<f64>,
    /// Per-cell indicator of a frame with no broadband service at all.
    pub outage: Vec<bool>,
    /// Number of SINR denominators that had to be floored (expected 0).
    pub floored_denominators: usize,
}

/// Evaluate one frame: `allocs` holds the slot-by-slot effective powers
/// produced for this frame's activation pattern.
pub fn evaluate_frame(
    stats: &EffectiveChannels,
    allocs: &[PowerAllocation],
    frame: &FrameConfig,
    noise_dl_w: f64,
) -> EmbbMetrics {
    assert_eq!(allocs.len(), frame.slots);
    let cells = stats.cells();
    let users = stats.users();
    let k_u = stats.k_urllc();
    let mut floored = 0usize;

    let mut sinr = Vec::with_capacity(frame.slots);
    for alloc in allocs {
        assert_eq!(alloc.k_urllc(), k_u);
        let mut slot = UserField::filled(cells, users, 0.0);
        for j in 0..cells {
            for k in k_u..users {
                slot[(j, k)] = slot_sinr(stats, alloc, noise_dl_w, j, k, &mut floored);
            }
        }
        sinr.push(slot);
    }

    let mut se = UserField::filled(cells, users, 0.0);
    let mut cell_sum_se = vec![0.0; cells];
    for j in 0..cells {
        for k in k_u..users {
            let per_slot: Vec<f64> = sinr.iter().map(|s| s[(j, k)]).collect();
            let value = se_from_sinrs(&per_slot, frame.tau_p, frame.tau_c);
            se[(j, k)] = value;
            cell_sum_se[j] += value;
        }
    }
    let outage = cell_sum_se.iter().map(|&s| s == 0.0).collect();

    EmbbMetrics { sinr, se, cell_sum_se, outage, floored_denominators: floored }
}

/// Service-outage bookkeeping across frames and snapshots.
#[derive(Debug, Clone, Default)]
pub struct ServiceOutage {
    counts: Vec<usize>,
    frames: usize,
}

impl ServiceOutage {
    pub fn new(cells: usize) -> Self {
        Self { counts: vec![0; cells], frames: 0 }
    }

    pub fn record(&mut self, metrics: &EmbbMetrics) {
        assert_eq!(metrics.outage.len(), self.counts.len());
        for (count, &hit) in self.counts.iter_mut().zip(&metrics.outage) {
            *count += hit as usize;
        }
        self.frames += 1;
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Outage frequency of one cell.
    pub fn rate(&self, cell: usize) -> f64 {
        self.counts[cell] as f64 / self.frames as f64
    }

    /// Outage frequency pooled over every (cell, frame) pair.
    pub fn network_rate(&self) -> f64 {
        let total: usize = self.counts.iter().sum();
        total as f64 / (self.frames * self.counts.len()) as f64
    }
}
