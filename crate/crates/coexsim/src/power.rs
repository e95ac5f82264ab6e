//! Per-slot downlink power allocation under a per-BS sum-power budget.
//!
//! Three schemes are provided:
//!
//! * **EPA** — the budget is split equally over every transmission the
//!   BS actually makes this slot;
//! * **FPA** — shares are proportional to `β^ν` with a tunable weight
//!   `ω` steering budget toward the low-latency users;
//! * **OPA** — the powers maximize the product of the active users'
//!   SINRs. In log-power variables the objective is concave and the
//!   per-BS equality budget becomes a softmax reparametrization, so
//!   plain gradient ascent with a backtracking line search finds the
//!   global optimum.
//!
//! All schemes store *effective* powers: entries already include the
//! activation/puncturing gate, so an idle transmission holds exactly 0
//! and the per-BS budget `Σ_k ρ[j][k] = ρ_max` holds with equality
//! whenever BS `j` serves anyone in the slot.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::frame::ActivationMatrix;
use crate::precoding::EffectiveChannels;
use crate::scenario::UserField;
use crate::{Result, SimError};

/// Relative tolerance on the per-BS budget equality.
pub const BUDGET_REL_TOL: f64 = 1e-9;

const OPA_MAX_ITERS: usize = 10_000;
const OPA_REL_TOL: f64 = 1e-8;

/// Which allocation rule produced a [`PowerAllocation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum PowerScheme {
    Epa,
    Fpa { nu: f64, omega: f64 },
    Opa,
}

impl std::fmt::Display for PowerScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PowerScheme::Epa => f.write_str("epa"),
            PowerScheme::Fpa { .. } => f.write_str("fpa"),
            PowerScheme::Opa => f.write_str("opa"),
        }
    }
}

/// Effective downlink powers for one slot, in watts per transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub scheme: PowerScheme,
    /// ρ[cell][user]: effective transmit power, 0 for every transmission
    /// the BS does not make (inactive low-latency user, punctured
    /// broadband user).
    pub rho: UserField<f64>,
    k_urllc: usize,
    rho_max_w: f64,
    idle_cells: Vec<bool>,
}

impl PowerAllocation {
    fn zeros(scheme: PowerScheme, cells: usize, users: usize, k_urllc: usize, rho_max_w: f64) -> Self {
        Self {
            scheme,
            rho: UserField::filled(cells, users, 0.0),
            k_urllc,
            rho_max_w,
            idle_cells: vec![true; cells],
        }
    }

    /// Assemble an allocation from explicit effective powers; a cell is
    /// idle exactly when its whole row is zero.
    pub fn from_rho(
        scheme: PowerScheme,
        rho: UserField<f64>,
        k_urllc: usize,
        rho_max_w: f64,
    ) -> Self {
        let idle_cells = (0..rho.cells())
            .map(|j| (0..rho.users()).all(|k| rho[(j, k)] == 0.0))
            .collect();
        Self { scheme, rho, k_urllc, rho_max_w, idle_cells }
    }

    pub fn k_urllc(&self) -> usize {
        self.k_urllc
    }

    pub fn rho_max_w(&self) -> f64 {
        self.rho_max_w
    }

    /// Power of low-latency user `i` of `cell`.
    pub fn rho_u(&self, cell: usize, i: usize) -> f64 {
        assert!(i < self.k_urllc);
        self.rho[(cell, i)]
    }

    /// Power of broadband user `e` (0-based within the broadband block)
    /// of `cell`.
    pub fn rho_e(&self, cell: usize, e: usize) -> f64 {
        self.rho[(cell, self.k_urllc + e)]
    }

    /// True when the BS transmits to nobody this slot.
    pub fn is_idle(&self, cell: usize) -> bool {
        self.idle_cells[cell]
    }

    pub fn all_idle(&self) -> bool {
        self.idle_cells.iter().all(|&x| x)
    }

    /// Signed budget violation `Σ_k ρ[cell][k] − ρ_max` (zero expected on
    /// serving cells, −ρ_max on idle ones).
    pub fn budget_residual(&self, cell: usize) -> f64 {
        let spent: f64 = (0..self.rho.users()).map(|k| self.rho[(cell, k)]).sum();
        spent - self.rho_max_w
    }

    /// Panics unless every serving cell meets its budget with equality
    /// (relative tolerance [`BUDGET_REL_TOL`]) and no power is negative.
    pub fn assert_budget(&self) {
        for j in 0..self.rho.cells() {
            for k in 0..self.rho.users() {
                assert!(self.rho[(j, k)] >= 0.0, "negative power at ({j},{k})");
            }
            if !self.is_idle(j) {
                let res = self.budget_residual(j).abs();
                assert!(
                    res <= BUDGET_REL_TOL * self.rho_max_w,
                    "budget residual {res} at cell {j}"
                );
            } else {
                assert!(self.budget_residual(j) == -self.rho_max_w);
            }
        }
    }
}

/// Equal-share allocation: the budget is divided by the number of
/// transmissions the BS makes this slot (`Ã K_e + Σ A`).
pub fn epa(
    acts: &ActivationMatrix,
    slot: usize,
    users: usize,
    rho_max_w: f64,
) -> PowerAllocation {
    let cells = acts.cells();
    let k_u = acts.k_urllc();
    let k_e = users - k_u;
    let mut out = PowerAllocation::zeros(PowerScheme::Epa, cells, users, k_u, rho_max_w);
    for j in 0..cells {
        let coex = acts.coex(slot, j);
        let denom = coex * k_e as f64 + acts.active_count(slot, j) as f64;
        if denom == 0.0 {
            continue;
        }
        out.idle_cells[j] = false;
        let share = rho_max_w / denom;
        for i in 0..k_u {
            if acts.is_active(slot, j, i) {
                out.rho[(j, i)] = share;
            }
        }
        for k in k_u..users {
            out.rho[(j, k)] = coex * share;
        }
    }
    out
}

/// Weighted fractional allocation: shares proportional to `β^ν`, with
/// weight `ω ∈ (0,1)` on the low-latency side:
///
/// ```text
/// ρ_u[j][i] = ω ρ_max A[j][i] β[j][i]^ν / D_j
/// ρ_e[j][k] = (1−ω) ρ_max Ã_j β[j][k]^ν / D_j
/// D_j = (1−ω) Ã_j Σ_e β^ν + ω Σ_u A β^ν
/// ```
pub fn fpa(
    acts: &ActivationMatrix,
    slot: usize,
    users: usize,
    beta_own: &UserField<f64>,
    nu: f64,
    omega: f64,
    rho_max_w: f64,
) -> PowerAllocation {
    assert!(omega > 0.0 && omega < 1.0, "omega must lie in (0,1), got {omega}");
    let cells = acts.cells();
    let k_u = acts.k_urllc();
    let scheme = PowerScheme::Fpa { nu, omega };
    let mut out = PowerAllocation::zeros(scheme, cells, users, k_u, rho_max_w);
    for j in 0..cells {
        let coex = acts.coex(slot, j);
        let mut d = 0.0;
        for i in 0..k_u {
            if acts.is_active(slot, j, i) {
                d += omega * beta_own[(j, i)].powf(nu);
            }
        }
        for k in k_u..users {
            d += (1.0 - omega) * coex * beta_own[(j, k)].powf(nu);
        }
        if d == 0.0 {
            continue;
        }
        out.idle_cells[j] = false;
        for i in 0..k_u {
            if acts.is_active(slot, j, i) {
                out.rho[(j, i)] = omega * rho_max_w * beta_own[(j, i)].powf(nu) / d;
            }
        }
        for k in k_u..users {
            out.rho[(j, k)] = (1.0 - omega) * rho_max_w * coex * beta_own[(j, k)].powf(nu) / d;
        }
    }
    out
}

/// Expectation statistics entering the per-user SINR
///
/// ```text
/// SINR[j,k] = ρ[j,k]·signal[j,k] /
///             (Σ_src ρ[src]·interference[src → j,k] + σ²_dl)
/// ```
///
/// with `signal = |E g_own|²` and the own-transmission interference
/// entry reduced to the hardening residual `E|g_own|² − |E g_own|²`.
#[derive(Debug, Clone)]
pub struct SinrStats {
    cells: usize,
    users: usize,
    signal: Vec<f64>,
    /// [src, dst] in flat `cell·users + user` indices.
    interference: Array2<f64>,
    noise_dl_w: f64,
}

impl SinrStats {
    pub fn new(
        cells: usize,
        users: usize,
        signal: Vec<f64>,
        interference: Array2<f64>,
        noise_dl_w: f64,
    ) -> Self {
        let dim = cells * users;
        assert_eq!(signal.len(), dim);
        assert_eq!(interference.shape(), [dim, dim]);
        assert!(noise_dl_w > 0.0);
        assert!(signal.iter().all(|&x| x >= 0.0));
        assert!(interference.iter().all(|&x| x >= 0.0));
        Self { cells, users, signal, interference, noise_dl_w }
    }

    /// Extract the statistics from accumulated effective channels.
    pub fn from_stats(stats: &EffectiveChannels, noise_dl_w: f64) -> Self {
        let cells = stats.cells();
        let users = stats.users();
        let dim = cells * users;
        let mut signal = vec![0.0; dim];
        let mut interference = Array2::<f64>::zeros((dim, dim));
        for j in 0..cells {
            for k in 0..users {
                let dst = stats.flat(j, k);
                signal[dst] = stats.g_hat(j, k).norm_sqr();
                for l in 0..cells {
                    for i in 0..users {
                        let src = stats.flat(l, i);
                        let mut c = stats.mean_gain2((l, i), (j, k));
                        if src == dst {
                            c = (c - signal[dst]).max(0.0);
                        }
                        interference[[src, dst]] = c;
                    }
                }
            }
        }
        Self::new(cells, users, signal, interference, noise_dl_w)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn noise_dl_w(&self) -> f64 {
        self.noise_dl_w
    }

    fn flat(&self, cell: usize, user: usize) -> usize {
        cell * self.users + user
    }

    /// SINR of one user under the given effective powers; 0 whenever the
    /// serving transmission is off.
    pub fn sinr(&self, alloc: &PowerAllocation, cell: usize, user: usize) -> f64 {
        let dst = self.flat(cell, user);
        let num = alloc.rho[(cell, user)] * self.signal[dst];
        let mut den = self.noise_dl_w;
        for l in 0..self.cells {
            for i in 0..self.users {
                den += alloc.rho[(l, i)] * self.interference[[self.flat(l, i), dst]];
            }
        }
        num / den
    }
}

/// Transmissions a BS makes in a slot, per cell, in flat user indices.
fn active_sets(acts: &ActivationMatrix, slot: usize, users: usize) -> Vec<Vec<usize>> {
    let k_u = acts.k_urllc();
    (0..acts.cells())
        .map(|j| {
            let mut set = Vec::new();
            for i in 0..k_u {
                if acts.is_active(slot, j, i) {
                    set.push(i);
                }
            }
            if acts.coex(slot, j) == 1.0 {
                set.extend(k_u..users);
            }
            set
        })
        .collect()
}

/// Σ ln SINR over the slot's active users — the log of the product the
/// optimal allocation maximizes. Users with an off serving transmission
/// contribute a fictitious factor of 1 (they are simply skipped).
pub fn product_sinr_objective(
    stats: &SinrStats,
    alloc: &PowerAllocation,
    acts: &ActivationMatrix,
    slot: usize,
) -> f64 {
    let mut total = 0.0;
    for (j, set) in active_sets(acts, slot, stats.users).iter().enumerate() {
        for &k in set {
            total += stats.sinr(alloc, j, k).max(f64::MIN_POSITIVE).ln();
        }
    }
    total
}

/// Convergence diagnostics of the product-SINR solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpaReport {
    pub iterations: usize,
    /// Final Σ ln SINR over active users.
    pub objective: f64,
    /// Objective of the equal-share starting point.
    pub init_objective: f64,
}

/// Allocate powers maximizing the product of the active users' SINRs
/// subject to the per-BS budget (met with equality).
///
/// Log-power variables make the objective concave; per-cell softmax
/// shares keep every iterate exactly on the budget. Gradient ascent with
/// Armijo backtracking converges to the global optimum; iteration stops
/// when the relative objective gain drops below 1e-8.
///
/// A slot in which no BS transmits is a no-op: all-zero powers and a
/// zero-iteration report.
pub fn opa_max_prod_sinr(
    stats: &SinrStats,
    acts: &ActivationMatrix,
    slot: usize,
    rho_max_w: f64,
) -> Result<(PowerAllocation, OpaReport)> {
    let cells = stats.cells;
    let users = stats.users;
    assert_eq!(acts.cells(), cells);
    let sets = active_sets(acts, slot, users);
    let k_u = acts.k_urllc();

    // Flat list of optimization variables: (cell, user, flat dst).
    let vars: Vec<(usize, usize)> = sets
        .iter()
        .enumerate()
        .flat_map(|(j, set)| set.iter().map(move |&k| (j, k)))
        .collect();
    let n = vars.len();
    let mut alloc =
        PowerAllocation::zeros(PowerScheme::Opa, cells, users, k_u, rho_max_w);
    for (j, set) in sets.iter().enumerate() {
        if !set.is_empty() {
            alloc.idle_cells[j] = false;
        }
    }
    if n == 0 {
        let report = OpaReport { iterations: 0, objective: 0.0, init_objective: 0.0 };
        return Ok((alloc, report));
    }

    // Active destinations with their signal/interference rows restricted
    // to active sources.
    let dsts: Vec<usize> = vars.iter().map(|&(j, k)| stats.flat(j, k)).collect();
    let ln_signal: Vec<f64> = dsts
        .iter()
        .map(|&d| stats.signal[d].max(f64::MIN_POSITIVE).ln())
        .collect();
    // c[v][d] over active pairs.
    let c: Vec<Vec<f64>> = dsts
        .iter()
        .map(|&src_flat| {
            dsts.iter().map(|&dst_flat| stats.interference[[src_flat, dst_flat]]).collect()
        })
        .collect();

    // Per-cell variable ranges for the softmax blocks.
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for set in &sets {
        blocks.push((start, start + set.len()));
        start += set.len();
    }

    let powers = |x: &[f64]| -> Vec<f64> {
        let mut rho = vec![0.0; n];
        for &(lo, hi) in &blocks {
            if lo == hi {
                continue;
            }
            let max = x[lo..hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in lo..hi {
                rho[v] = (x[v] - max).exp();
                z += rho[v];
            }
            for v in lo..hi {
                rho[v] *= rho_max_w / z;
            }
        }
        rho
    };

    // Σ_d [ln a_d + ln ρ_d − ln(Σ_v c[v][d] ρ_v + σ²)], with the
    // denominators returned for gradient reuse.
    let objective = |rho: &[f64]| -> (f64, Vec<f64>) {
        let mut denom = vec![stats.noise_dl_w; n];
        for d in 0..n {
            for v in 0..n {
                denom[d] += c[v][d] * rho[v];
            }
        }
        let mut f = 0.0;
        for d in 0..n {
            f += ln_signal[d] + rho[d].ln() - denom[d].ln();
        }
        (f, denom)
    };

    let mut x = vec![0.0; n];
    let mut rho = powers(&x);
    let (mut f, mut denom) = objective(&rho);
    let init_objective = f;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_rel = f64::INFINITY;

    while iterations < OPA_MAX_ITERS {
        iterations += 1;
        // ∂F/∂θ_v = 1 − ρ_v Σ_d c[v][d]/denom_d, then chain through the
        // softmax blocks.
        let mut g_theta = vec![0.0; n];
        for v in 0..n {
            let mut load = 0.0;
            for d in 0..n {
                load += c[v][d] / denom[d];
            }
            g_theta[v] = 1.0 - rho[v] * load;
        }
        let mut grad = vec![0.0; n];
        for &(lo, hi) in &blocks {
            if lo == hi {
                continue;
            }
            let total: f64 = g_theta[lo..hi].iter().sum();
            for v in lo..hi {
                grad[v] = g_theta[v] - (rho[v] / rho_max_w) * total;
            }
        }
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() <= 1e-12 {
            converged = true;
            break;
        }

        let mut step = 1.0;
        let (x_next, f_next, rho_next, denom_next) = loop {
            let x_try: Vec<f64> =
                x.iter().zip(&grad).map(|(xv, gv)| xv + step * gv).collect();
            let rho_try = powers(&x_try);
            let (f_try, denom_try) = objective(&rho_try);
            if f_try >= f + 1e-4 * step * gnorm2 {
                break (x_try, f_try, rho_try, denom_try);
            }
            step *= 0.5;
            if step < 1e-18 {
                break (x.clone(), f, rho.clone(), denom.clone());
            }
        };
        last_rel = (f_next - f) / f.abs().max(1.0);
        x = x_next;
        rho = rho_next;
        denom = denom_next;
        f = f_next;
        if last_rel <= OPA_REL_TOL {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(SimError::Numerics(format!(
            "product-SINR power solver did not converge within {OPA_MAX_ITERS} \
             iterations (last relative objective change {last_rel:.3e})"
        )));
    }

    for (v, &(j, k)) in vars.iter().enumerate() {
        alloc.rho[(j, k)] = rho[v];
    }
    Ok((alloc, OpaReport { iterations, objective: f, init_objective }))
}
