//! Low-latency (URLLC) error-probability evaluation.
//!
//! Per user, the simulator averages the conditional saddlepoint error
//! probability over the channel/precoder realization ensemble and over the
//! slots in which the user was scheduled, then optimizes the decoder
//! parameter `s` once per (snapshot, user). Network availability is the
//! fraction of users whose optimized error probability meets the target.

pub mod rcus;
pub mod saddlepoint;

pub use saddlepoint::{
    info_density, saddlepoint_epsilon, Branch, EpsReport, SaddlepointContext, S_MAX, S_MIN,
};

use crate::error::{Result, SimError};
use crate::power::PowerAllocation;
use crate::precoding::EffectiveChannels;
use crate::C64;

/// One conditional evaluation point for a low-latency user: the realized
/// effective channel, the symbol power of the slot, and the conditional
/// noise-plus-interference power of that (realization, slot) pair.
#[derive(Debug, Clone, Copy)]
pub struct UrllcSample {
    /// Realized own effective channel.
    pub g: C64,
    /// Symbol power in the slot (W).
    pub rho: f64,
    /// Interference-plus-noise power conditioned on the realization (W).
    pub sigma2: f64,
}

/// Builds the conditional samples contributed by one slot's power allocation
/// for the low-latency user `(cell, user)`: one sample per channel
/// realization, or none when the user holds no power in the slot.
///
/// The conditional noise-plus-interference power sums the realized cross
/// gains of every other stream (skipping the user's own term rather than
/// subtracting it, so no cancellation occurs) plus the thermal noise floor.
pub fn slot_samples(
    stats: &EffectiveChannels,
    alloc: &PowerAllocation,
    noise_dl_w: f64,
    cell: usize,
    user: usize,
) -> Vec<UrllcSample> {
    assert!(noise_dl_w > 0.0, "noise power must be positive");
    let rho = alloc.rho_u(cell, user);
    if rho == 0.0 {
        return Vec::new();
    }
    let cells = stats.cells();
    let users = stats.users();
    let dim = cells * users;
    let own = cell * users + user;
    let g_own = stats.urllc_g_own(cell, user);
    let gain2 = stats.urllc_gain2(cell, user);
    let mut rho_flat = vec![0.0; dim];
    for l in 0..cells {
        for i in 0..users {
            rho_flat[l * users + i] = alloc.rho[(l, i)];
        }
    }
    (0..stats.realizations())
        .map(|n| {
            let row = &gain2[n * dim..(n + 1) * dim];
            let mut interference = 0.0;
            for (src, &g2) in row.iter().enumerate() {
                if src != own {
                    interference += rho_flat[src] * g2;
                }
            }
            UrllcSample {
                g: g_own[n],
                rho,
                sigma2: interference + noise_dl_w,
            }
        })
        .collect()
}

/// Ensemble-averaged conditional error probability at one decoder parameter.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleEps {
    /// Mean error probability over all samples (skipped samples count as 1).
    pub eps: f64,
    /// Samples whose raw approximation fell outside `[0, 1]` and was clamped.
    pub clipped: usize,
    /// Samples whose evaluation failed (degenerate channel, root-search or
    /// numerical failure); they contribute an error probability of one.
    pub skipped: usize,
}

/// Averages the conditional saddlepoint error probability over `samples` at
/// decoder parameter `s`, blocklength `n_d`, and rate `rate_nats`.
pub fn ensemble_eps(
    samples: &[UrllcSample],
    g_hat: C64,
    s: f64,
    n_d: usize,
    rate_nats: f64,
) -> EnsembleEps {
    assert!(!samples.is_empty(), "ensemble needs at least one sample");
    let mut sum = 0.0;
    let mut clipped = 0usize;
    let mut skipped = 0usize;
    for sample in samples {
        let eval = SaddlepointContext::new(sample.g, g_hat, sample.rho, sample.sigma2, s, n_d)
            .and_then(|ctx| saddlepoint_epsilon(&ctx, rate_nats));
        match eval {
            Ok(rep) => {
                if rep.clipped {
                    clipped += 1;
                }
                sum += rep.eps;
            }
            Err(_) => {
                skipped += 1;
                sum += 1.0;
            }
        }
    }
    EnsembleEps {
        eps: sum / samples.len() as f64,
        clipped,
        skipped,
    }
}

/// Error probability of one user after optimizing the decoder parameter.
#[derive(Debug, Clone, Copy)]
pub struct UserEps {
    /// Ensemble error probability at the optimized decoder parameter.
    pub eps: f64,
    /// Optimized decoder parameter, in units of the reciprocal mean
    /// effective noise power of the samples — interference plus noise plus
    /// the channel-mismatch power `rho |g - g_hat|^2` seen by the
    /// nearest-neighbor decoder — so the natural optimum is near `1`
    /// regardless of the power units used.
    pub s_star: f64,
    /// True when the objective was flat across the search range (degenerate
    /// channel); `s_star` is then the geometric midpoint of the range.
    pub flat: bool,
    /// Clip events accumulated over every objective evaluation.
    pub clipped: usize,
    /// Skipped (failed) conditional evaluations accumulated over every
    /// objective evaluation.
    pub skipped: usize,
    /// Conditional samples the user contributed (realizations x active slots).
    pub samples: usize,
}

/// Relative spread below which the objective counts as flat in `s`.
const FLAT_REL_SPREAD: f64 = 1e-9;
/// Absolute tolerance on `ln s` for the golden-section search (equivalently
/// a relative tolerance on `s`).
const LN_S_TOL: f64 = 1e-3;

/// Minimizes the ensemble error probability over the decoder parameter by
/// golden-section search on `ln s` in `[ln S_MIN, ln S_MAX]`, returning the
/// best evaluation seen. Returns `None` when `samples` is empty (user never
/// scheduled). A flat objective (e.g. a degenerate channel whose error is
/// one for every `s`) is flagged and resolved to the midpoint.
///
/// The decoder parameter only enters through products with powers, so the
/// error probability is invariant under `(rho, sigma2, s) -> (rho/c,
/// sigma2/c, s*c)`. The samples are therefore normalized first so that the
/// fixed search range stays meaningful for any power unit system. The
/// reference power is the mean *effective* noise — interference plus noise
/// plus the mismatch power `rho |g - g_hat|^2` that the nearest-neighbor
/// decoder suffers for treating the ensemble-mean channel as exact. The
/// per-sample optimum sits near the reciprocal of that sample's effective
/// noise (for a matched sample it is exactly `1/sigma2`), so normalizing by
/// the ensemble mean places the searched optimum near `1` even when channel
/// hardening leaves a mismatch much larger than the interference floor. The
/// returned `s_star` is in those normalized units.
pub fn optimize_user_eps(
    samples: &[UrllcSample],
    g_hat: C64,
    n_d: usize,
    rate_nats: f64,
) -> Option<UserEps> {
    if samples.is_empty() {
        return None;
    }
    let mean_effective_noise = samples
        .iter()
        .map(|s| s.rho * (s.g - g_hat).norm_sqr() + s.sigma2)
        .sum::<f64>()
        / samples.len() as f64;
    let scale = if mean_effective_noise.is_finite() && mean_effective_noise > 0.0 {
        mean_effective_noise
    } else {
        1.0
    };
    let normalized: Vec<UrllcSample> = samples
        .iter()
        .map(|s| UrllcSample {
            g: s.g,
            rho: s.rho / scale,
            sigma2: s.sigma2 / scale,
        })
        .collect();
    let mut clipped = 0usize;
    let mut skipped = 0usize;
    let mut evaluate = |ln_s: f64| -> f64 {
        let r = ensemble_eps(&normalized, g_hat, ln_s.exp(), n_d, rate_nats);
        clipped += r.clipped;
        skipped += r.skipped;
        r.eps
    };
    let (mut a, mut b) = (S_MIN.ln(), S_MAX.ln());
    let mid = 0.5 * (a + b);

    // Flatness probe at the ends and midpoint of the search range.
    let probes = [a, mid, b];
    let probe_vals: Vec<f64> = probes.iter().map(|&p| evaluate(p)).collect();
    let vmax = probe_vals.iter().cloned().fold(f64::MIN, f64::max);
    let vmin = probe_vals.iter().cloned().fold(f64::MAX, f64::min);
    if vmax - vmin <= FLAT_REL_SPREAD * vmax.max(f64::MIN_POSITIVE) {
        return Some(UserEps {
            eps: probe_vals[1],
            s_star: mid.exp(),
            flat: true,
            clipped,
            skipped,
            samples: samples.len(),
        });
    }

    // Track the best point seen anywhere, probes included.
    let mut best = (probes[0], probe_vals[0]);
    for (&p, &v) in probes.iter().zip(&probe_vals).skip(1) {
        if v < best.1 {
            best = (p, v);
        }
    }

    let inv_phi = (3.0 - 5.0_f64.sqrt()) / 2.0;
    let mut c = a + inv_phi * (b - a);
    let mut d = b - inv_phi * (b - a);
    let mut fc = evaluate(c);
    let mut fd = evaluate(d);
    while b - a > LN_S_TOL {
        if fc < best.1 {
            best = (c, fc);
        }
        if fd < best.1 {
            best = (d, fd);
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = a + inv_phi * (b - a);
            fc = evaluate(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = b - inv_phi * (b - a);
            fd = evaluate(d);
        }
    }
    if fc < best.1 {
        best = (c, fc);
    }
    if fd < best.1 {
        best = (d, fd);
    }
    Some(UserEps {
        eps: best.1,
        s_star: best.0.exp(),
        flat: false,
        clipped,
        skipped,
        samples: samples.len(),
    })
}

/// Fraction of users whose error probability meets the target (at most
/// `target`). Errors when no user contributed an error probability, since
/// availability over an empty set is undefined.
pub fn network_availability(eps: &[f64], target: f64) -> Result<f64> {
    if eps.is_empty() {
        return Err(SimError::numerics(
            "network availability over an empty user set is undefined",
        ));
    }
    assert!(target > 0.0, "availability target must be positive");
    let met = eps.iter().filter(|&&e| e <= target).count();
    Ok(met as f64 / eps.len() as f64)
}
