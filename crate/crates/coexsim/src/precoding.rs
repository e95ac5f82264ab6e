//! Downlink precoding and effective-channel statistics.
//!
//! For every channel realization each BS builds one normalized precoding
//! vector per served user from the channel estimates (never the true
//! channels). The scalar effective channels
//!
//! ```text
//! g[l,i → j,k] = (h[l][j][k])ᴴ · w[l][i]
//! ```
//!
//! couple transmission `(l,i)` to user `(j,k)`; downstream rate and
//! error-probability computations consume only these scalars through
//! [`EffectiveChannels`], which accumulates
//!
//! * the mean own-cell effective channel (the hardening proxy the
//!   receivers rely on),
//! * second moments `E|g|²` for every (transmission, user) pair, and
//! * the per-realization effective channels toward low-latency users,
//!   which their non-asymptotic error analysis needs realization by
//!   realization.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::estimation::{EstimationResult, EstimatorPrep};
use crate::linalg::{adjoint, HermChol};
use crate::scenario::UserField;
use crate::{C64, Result, SimError};

/// Downlink precoding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precoder {
    /// Maximum ratio: `w ∝ ĥ`.
    Mr,
    /// Regularized zero-forcing against own-cell estimates:
    /// `W ∝ Ĥ (ĤᴴĤ + σ²_ul P⁻¹)⁻¹`.
    Rzf,
    /// Network-wide MMSE using all cells' estimates and the estimation
    /// error statistics:
    /// `W ∝ (Σ_l Ĥ_l P_l Ĥ_lᴴ + Υ + σ²_ul I)⁻¹ Ĥ_own P_own`.
    Mmse,
}

impl std::fmt::Display for Precoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precoder::Mr => "mr",
            Precoder::Rzf => "rzf",
            Precoder::Mmse => "mmse",
        })
    }
}

/// Own-cell estimates of BS `bs` for realization `n`, as an M×K matrix.
fn own_estimates(est: &EstimationResult, bs: usize, n: usize) -> Array2<C64> {
    let users = est.h.users();
    let m = est.h_hat(bs, bs, 0).nrows();
    let mut a = Array2::<C64>::zeros((m, users));
    for k in 0..users {
        a.column_mut(k).assign(&est.h_hat(bs, bs, k).column(n));
    }
    a
}

/// Scale every column to unit Euclidean norm.
fn normalize_columns(w: &mut Array2<C64>) -> Result<()> {
    for mut col in w.columns_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(SimError::Numerics(
                "precoding vector has zero norm and cannot be normalized".into(),
            ));
        }
        col.mapv_inplace(|z| z / norm);
    }
    Ok(())
}

/// Normalized precoding matrix (one unit-norm column per served user)
/// for one BS and one realization.
pub fn precoding_matrix(
    precoder: Precoder,
    bs: usize,
    realization: usize,
    est: &EstimationResult,
    prep: &EstimatorPrep,
) -> Result<Array2<C64>> {
    let cells = est.h.cells();
    let users = est.h.users();
    let noise = prep.noise_ul_w();
    let mut w = match precoder {
        Precoder::Mr => own_estimates(est, bs, realization),
        Precoder::Rzf => {
            let a = own_estimates(est, bs, realization);
            // K×K system: B = ĤᴴĤ + σ² P⁻¹, W = Ĥ B⁻¹ = (B⁻¹ Ĥᴴ)ᴴ.
            let mut b = adjoint(&a).dot(&a);
            for k in 0..users {
                let p = prep.ul_power(bs, k);
                if !(p > 0.0) {
                    return Err(SimError::Numerics(format!(
                        "regularized zero-forcing needs positive uplink power, \
                         user ({bs},{k}) has {p}"
                    )));
                }
                b[[k, k]] += C64::new(noise / p, 0.0);
            }
            let chol = HermChol::new(&b)?;
            adjoint(&chol.solve_mat(&adjoint(&a))?)
        }
        Precoder::Mmse => {
            if !prep.cross_cell() {
                return Err(SimError::Numerics(
                    "network MMSE precoding requires cross-cell channel estimation".into(),
                ));
            }
            let m = est.h_hat(bs, bs, 0).nrows();
            // Stack every cell's estimates, columns scaled by √p, so the
            // quadratic term is a single product.
            let mut stacked = Array2::<C64>::zeros((m, cells * users));
            for l in 0..cells {
                for k in 0..users {
                    let p = prep.ul_power(l, k);
                    let mut col = stacked.column_mut(l * users + k);
                    col.assign(&est.h_hat(bs, l, k).column(realization));
                    col.mapv_inplace(|z| z * p.sqrt());
                }
            }
            let mut z = stacked.dot(&adjoint(&stacked));
            z += prep.upsilon(bs);
            for d in 0..m {
                z[[d, d]] += C64::new(noise, 0.0);
            }
            let a = own_estimates(est, bs, realization);
            let chol = HermChol::new(&z)?;
            let mut w = chol.solve_mat(&a)?;
            for k in 0..users {
                let p = C64::new(prep.ul_power(bs, k), 0.0);
                w.column_mut(k).mapv_inplace(|v| v * p);
            }
            w
        }
    };
    normalize_columns(&mut w)?;
    Ok(w)
}

/// Streaming moments of the effective channels, accumulated one
/// realization at a time so arbitrarily large ensembles fit in memory.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    cells: usize,
    users: usize,
    k_urllc: usize,
    realizations: usize,
    sum_g_own: UserField<C64>,
    /// Σ_n |g[src → dst]|², flat indices `cell · users + user`.
    sum_gain2: Array2<f64>,
    /// Per-realization own effective channel of each low-latency user.
    urllc_g_own: UserField<Vec<C64>>,
    /// Per-realization |g[src → dst]|² toward each low-latency user,
    /// realization-major: entry `n · (cells·users) + src`.
    urllc_gain2: UserField<Vec<f64>>,
}

impl EffectiveChannels {
    pub fn new(cells: usize, users: usize, k_urllc: usize) -> Self {
        assert!(k_urllc <= users);
        let dim = cells * users;
        Self {
            cells,
            users,
            k_urllc,
            realizations: 0,
            sum_g_own: UserField::filled(cells, users, C64::new(0.0, 0.0)),
            sum_gain2: Array2::zeros((dim, dim)),
            urllc_g_own: UserField::filled(cells, users, Vec::new()),
            urllc_gain2: UserField::filled(cells, users, Vec::new()),
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn k_urllc(&self) -> usize {
        self.k_urllc
    }

    pub fn realizations(&self) -> usize {
        self.realizations
    }

    /// Flat transmission/user index.
    pub fn flat(&self, cell: usize, user: usize) -> usize {
        debug_assert!(cell < self.cells && user < self.users);
        cell * self.users + user
    }

    /// Fold in one realization. `g_per_bs[l]` must be the (L·K)×K matrix
    /// `H_lᴴ W_l`: entry `[dst, i]` is the effective channel from BS l's
    /// transmission to user `i` toward destination user `dst` (flat).
    pub fn record_realization(&mut self, g_per_bs: &[Array2<C64>]) {
        assert_eq!(g_per_bs.len(), self.cells);
        let dim = self.cells * self.users;
        for (l, g) in g_per_bs.iter().enumerate() {
            assert_eq!(g.shape(), [dim, self.users]);
            for i in 0..self.users {
                let src = l * self.users + i;
                for dst in 0..dim {
                    self.sum_gain2[[src, dst]] += g[[dst, i]].norm_sqr();
                }
            }
        }
        for j in 0..self.cells {
            for k in 0..self.users {
                let dst = self.flat(j, k);
                self.sum_g_own[(j, k)] += g_per_bs[j][[dst, k]];
                if k < self.k_urllc {
                    self.urllc_g_own[(j, k)].push(g_per_bs[j][[dst, k]]);
                    let row = &mut self.urllc_gain2[(j, k)];
                    for l in 0..self.cells {
                        for i in 0..self.users {
                            row.push(g_per_bs[l][[dst, i]].norm_sqr());
                        }
                    }
                }
            }
        }
        self.realizations += 1;
    }

    /// Mean own-cell effective channel `ĝ = E[g_own]` — the statistical
    /// channel knowledge available at user `(cell, user)`.
    pub fn g_hat(&self, cell: usize, user: usize) -> C64 {
        self.sum_g_own[(cell, user)] / self.realizations as f64
    }

    /// `E|g[src → dst]|²`.
    pub fn mean_gain2(&self, src: (usize, usize), dst: (usize, usize)) -> f64 {
        self.sum_gain2[[self.flat(src.0, src.1), self.flat(dst.0, dst.1)]]
            / self.realizations as f64
    }

    /// Per-realization own effective channel of a low-latency user.
    pub fn urllc_g_own(&self, cell: usize, user: usize) -> &[C64] {
        assert!(user < self.k_urllc, "not a low-latency user");
        &self.urllc_g_own[(cell, user)]
    }

    /// Per-realization squared effective channels toward a low-latency
    /// user, realization-major (`n · cells · users + src`).
    pub fn urllc_gain2(&self, cell: usize, user: usize) -> &[f64] {
        assert!(user < self.k_urllc, "not a low-latency user");
        &self.urllc_gain2[(cell, user)]
    }
}

/// Precode one chunk of estimated channels and fold the resulting
/// effective channels into `stats`. Chunks must be fed in ascending
/// order for the per-realization low-latency records to line up with
/// the drawing order.
pub fn accumulate_effective_channels(
    stats: &mut EffectiveChannels,
    precoder: Precoder,
    est: &EstimationResult,
    prep: &EstimatorPrep,
) -> Result<()> {
    let cells = est.h.cells();
    let users = est.h.users();
    assert_eq!((cells, users), (stats.cells, stats.users));
    let m = est.h[(0, 0, 0)].nrows();
    for n in 0..est.realizations() {
        let mut g_per_bs = Vec::with_capacity(cells);
        for l in 0..cells {
            let w = precoding_matrix(precoder, l, n, est, prep)?;
            // True channels at BS l toward every user, M×(L·K).
            let mut h_l = Array2::<C64>::zeros((m, cells * users));
            for j in 0..cells {
                for k in 0..users {
                    h_l.column_mut(j * users + k).assign(&est.h[(l, j, k)].column(n));
                }
            }
            g_per_bs.push(adjoint(&h_l).dot(&w));
        }
        stats.record_realization(&g_per_bs);
    }
    Ok(())
}
