//! Uplink training: correlated channel realizations, despread pilot
//! observations, and MMSE channel estimation under pilot contamination.
//!
//! The expensive statistical objects are split from the per-realization
//! work so a snapshot's worth of realizations can stream through in
//! chunks:
//!
//! * [`ChannelSampler`] holds the correlation square roots (one
//!   eigendecomposition per link, computed once per snapshot);
//! * [`EstimatorPrep`] holds, per (BS, pilot), the Cholesky factor of the
//!   regularized pilot-sum covariance, and per covered link the
//!   realization-independent estimation matrix and error covariance;
//! * [`estimate_channels`] draws a chunk of channel realizations, forms
//!   the despread observations, and applies the estimation matrices —
//!   all heavy lifting lands in matrix–matrix products.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::frame::PilotPlan;
use crate::linalg::{adjoint, psd_sqrt, HermChol};
use crate::rng::{standard_cn, Purpose, SnapshotRng};
use crate::scenario::{LinkField, ScenarioSnapshot, UserField};
use crate::{C64, Result, SimError};

/// M×N matrix of i.i.d. standard complex Gaussian entries, drawn in
/// row-major order from the given stream.
pub fn standard_cn_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| standard_cn(rng))
}

/// Correlation square roots for every link of a snapshot; drawing a
/// channel realization is then one matrix product per link.
pub struct ChannelSampler {
    b: LinkField<Array2<C64>>,
    /// Most negative relative eigenvalue encountered while factoring the
    /// correlation matrices (diagnostic; bounded below by the PSD guard).
    pub worst_rel_eig: f64,
}

impl ChannelSampler {
    pub fn new(snapshot: &ScenarioSnapshot) -> Result<Self> {
        let cells = snapshot.cells();
        let users = snapshot.users_per_cell();
        let mut worst: f64 = 0.0;
        let mut data = Vec::with_capacity(cells * cells * users);
        for j in 0..cells {
            for l in 0..cells {
                for k in 0..users {
                    let (b, report) = psd_sqrt(&snapshot.corr[(j, l, k)])?;
                    if report.max_eig > 0.0 {
                        worst = worst.min(report.min_eig / report.max_eig);
                    }
                    data.push(b);
                }
            }
        }
        Ok(Self { b: LinkField::from_vec(cells, users, data), worst_rel_eig: worst })
    }

    pub fn cells(&self) -> usize {
        self.b.cells()
    }

    pub fn users(&self) -> usize {
        self.b.users()
    }

    pub fn antennas(&self) -> usize {
        self.b[(0, 0, 0)].nrows()
    }

    /// Draw `realizations` independent channels per link: each link gets
    /// an independent standard complex Gaussian block (links visited in
    /// (BS, cell, user) order) mapped through its correlation square root.
    pub fn draw(&self, realizations: usize, rng: &mut ChaCha8Rng) -> LinkField<Array2<C64>> {
        let m = self.antennas();
        LinkField::from_fn(self.cells(), self.users(), |j, l, k| {
            let x = standard_cn_matrix(m, realizations, rng);
            self.b[(j, l, k)].dot(&x)
        })
    }
}

/// Despread observation of one pilot at one BS for a batch of
/// realizations:
///
/// ```text
/// y = τ_p · Σ_{(l,i) ∈ group} √p_li · h[bs][l][i]  +  n,
/// n ~ CN(0, τ_p σ²_ul I)
/// ```
///
/// `noise` must be a standard complex Gaussian block; it is scaled to the
/// despread noise variance here.
pub fn despread_pilot(
    h: &LinkField<Array2<C64>>,
    group: &[(usize, usize)],
    bs: usize,
    ul_powers: &UserField<f64>,
    tau_p: usize,
    noise: &Array2<C64>,
    noise_ul_w: f64,
) -> Array2<C64> {
    let mut y = noise * C64::new((tau_p as f64 * noise_ul_w).sqrt(), 0.0);
    for &(l, i) in group {
        let scale = C64::new(tau_p as f64 * ul_powers[(l, i)].sqrt(), 0.0);
        y.scaled_add(scale, &h[(bs, l, i)]);
    }
    y
}

/// Regularized covariance of the despread observation of `group`'s pilot
/// at BS `bs` (the matrix whose inverse appears in the MMSE estimator):
/// `Σ_{(l,i) ∈ group} p_li τ_p R[bs][l][i] + σ²_ul I`.
pub fn pilot_sum_covariance(
    snapshot: &ScenarioSnapshot,
    group: &[(usize, usize)],
    bs: usize,
    ul_powers: &UserField<f64>,
    tau_p: usize,
    noise_ul_w: f64,
) -> Array2<C64> {
    let m = snapshot.antennas();
    let mut s = Array2::<C64>::eye(m) * C64::new(noise_ul_w, 0.0);
    for &(l, i) in group {
        let scale = C64::new(ul_powers[(l, i)] * tau_p as f64, 0.0);
        s.scaled_add(scale, &snapshot.corr[(bs, l, i)]);
    }
    s
}

/// MMSE estimate `√p R Ψ y` for a batch of observations, with `Ψ` given
/// through the Cholesky factor of its inverse. `R Ψ` is evaluated as
/// `(Ψ R)^H`, which holds because both matrices are Hermitian.
pub fn mmse_estimate(
    r: &Array2<C64>,
    psi_inv: &HermChol,
    ul_power_w: f64,
    y: &Array2<C64>,
) -> Result<Array2<C64>> {
    let psi_r = psi_inv.solve_mat(r)?;
    Ok(adjoint(&psi_r).dot(y) * C64::new(ul_power_w.sqrt(), 0.0))
}

/// Estimation-error covariance `C = R − p τ_p R Ψ R`, symmetrized against
/// solve round-off.
pub fn error_covariance(
    r: &Array2<C64>,
    psi_inv: &HermChol,
    ul_power_w: f64,
    tau_p: usize,
) -> Result<Array2<C64>> {
    let psi_r = psi_inv.solve_mat(r)?;
    let r_psi_r = adjoint(&psi_r).dot(r);
    let c = r - &(r_psi_r * C64::new(ul_power_w * tau_p as f64, 0.0));
    Ok((&c + &adjoint(&c)) * C64::new(0.5, 0.0))
}

/// Realization-independent estimation state for one (snapshot, pilot
/// plan): per-(BS, pilot) Cholesky factors of the pilot-sum covariance,
/// per-link estimation matrices `√p (Ψ R)^H` and error covariances, and —
/// when cross-cell estimation is on — the per-BS total error covariance
/// `Υ_j = Σ_{l,i} p_li C[j][l][i]`.
pub struct EstimatorPrep {
    cells: usize,
    users: usize,
    tau_p: usize,
    cross_cell: bool,
    ul_powers: UserField<f64>,
    noise_ul_w: f64,
    psi_inv: Vec<Option<HermChol>>,
    e_mat: LinkField<Option<Array2<C64>>>,
    c_mat: LinkField<Option<Array2<C64>>>,
    upsilon: Vec<Array2<C64>>,
}

impl EstimatorPrep {
    /// `cross_cell` controls whether BS j also estimates the channels of
    /// users in other cells (required by network-wide MMSE precoding
    /// only; it multiplies the matrix work by the cell count).
    pub fn new(
        snapshot: &ScenarioSnapshot,
        plan: &PilotPlan,
        ul_powers: &UserField<f64>,
        noise_ul_w: f64,
        cross_cell: bool,
    ) -> Result<Self> {
        if !(noise_ul_w > 0.0) {
            return Err(SimError::Numerics(format!(
                "pilot-sum covariance needs positive uplink noise for \
                 regularization, got {noise_ul_w}"
            )));
        }
        let cells = snapshot.cells();
        let users = snapshot.users_per_cell();
        let tau_p = plan.tau_p();

        let mut psi_inv: Vec<Option<HermChol>> = vec![None; cells * tau_p];
        for j in 0..cells {
            for p in 0..tau_p {
                let group = plan.group(p);
                if group.is_empty() {
                    continue;
                }
                let s = pilot_sum_covariance(snapshot, group, j, ul_powers, tau_p, noise_ul_w);
                psi_inv[j * tau_p + p] = Some(HermChol::new(&s)?);
            }
        }

        let mut e_mat = LinkField::filled(cells, users, None);
        let mut c_mat = LinkField::filled(cells, users, None);
        for j in 0..cells {
            for l in 0..cells {
                if !cross_cell && l != j {
                    continue;
                }
                for k in 0..users {
                    let chol = psi_inv[j * tau_p + plan.pilot(l, k)]
                        .as_ref()
                        .expect("every assigned pilot has a factor");
                    let r = &snapshot.corr[(j, l, k)];
                    let p_ul = ul_powers[(l, k)];
                    let psi_r = chol.solve_mat(r)?;
                    e_mat[(j, l, k)] =
                        Some(adjoint(&psi_r) * C64::new(p_ul.sqrt(), 0.0));
                    c_mat[(j, l, k)] = Some(error_covariance(r, chol, p_ul, tau_p)?);
                }
            }
        }

        let mut upsilon = Vec::new();
        if cross_cell {
            let m = snapshot.antennas();
            for j in 0..cells {
                let mut total = Array2::<C64>::zeros((m, m));
                for l in 0..cells {
                    for k in 0..users {
                        let c = c_mat[(j, l, k)].as_ref().expect("cross-cell fill");
                        total.scaled_add(C64::new(ul_powers[(l, k)], 0.0), c);
                    }
                }
                upsilon.push(total);
            }
        }

        Ok(Self {
            cells,
            users,
            tau_p,
            cross_cell,
            ul_powers: ul_powers.clone(),
            noise_ul_w,
            psi_inv,
            e_mat,
            c_mat,
            upsilon,
        })
    }

    pub fn cross_cell(&self) -> bool {
        self.cross_cell
    }

    /// Uplink transmit power of one user, in watts.
    pub fn ul_power(&self, cell: usize, user: usize) -> f64 {
        self.ul_powers[(cell, user)]
    }

    /// Uplink noise power, in watts.
    pub fn noise_ul_w(&self) -> f64 {
        self.noise_ul_w
    }

    /// Cholesky factor of the pilot-sum covariance of pilot `p` at BS `j`
    /// (present exactly when some user sends `p`).
    pub fn psi_inv(&self, bs: usize, pilot: usize) -> Option<&HermChol> {
        self.psi_inv[bs * self.tau_p + pilot].as_ref()
    }

    /// Error covariance `C[bs][cell][user]`; panics for a cross-cell link
    /// when cross-cell estimation was not requested.
    pub fn error_cov(&self, bs: usize, cell: usize, user: usize) -> &Array2<C64> {
        self.c_mat[(bs, cell, user)]
            .as_ref()
            .expect("error covariance not computed for this link; enable cross_cell")
    }

    /// Per-BS total weighted error covariance `Υ_j` (cross-cell only).
    pub fn upsilon(&self, bs: usize) -> &Array2<C64> {
        assert!(self.cross_cell, "Υ requires cross-cell estimation");
        &self.upsilon[bs]
    }
}

/// True channels and their MMSE estimates for a chunk of realizations.
pub struct EstimationResult {
    realizations: usize,
    /// True channels, M×N per link.
    pub h: LinkField<Array2<C64>>,
    h_hat: LinkField<Option<Array2<C64>>>,
}

impl EstimationResult {
    pub fn realizations(&self) -> usize {
        self.realizations
    }

    /// Estimate `ĥ[bs][cell][user]`, M×N; the error `h − ĥ` is exact per
    /// realization by construction. Panics for a cross-cell link when
    /// cross-cell estimation was not requested.
    pub fn h_hat(&self, bs: usize, cell: usize, user: usize) -> &Array2<C64> {
        self.h_hat[(bs, cell, user)]
            .as_ref()
            .expect("estimate not computed for this link; enable cross_cell")
    }
}

/// Draw one chunk of channel realizations and estimate them.
///
/// The channel and pilot-noise streams are selected by `chunk`, so
/// successive chunks extend the same ensemble deterministically and
/// independently of how work is batched. Everything that varies with the
/// precoder choice happens downstream; two runs differing only in
/// `cross_cell` see bit-identical channels, observations, and own-cell
/// estimates.
pub fn estimate_channels(
    sampler: &ChannelSampler,
    prep: &EstimatorPrep,
    plan: &PilotPlan,
    realizations: usize,
    chunk: u32,
    rng: &SnapshotRng,
) -> Result<EstimationResult> {
    let cells = prep.cells;
    let users = prep.users;
    let tau_p = prep.tau_p;
    let m = sampler.antennas();

    let mut channel_rng = rng.lane(Purpose::Channels, chunk);
    let h = sampler.draw(realizations, &mut channel_rng);

    // One observation per (BS, used pilot), shared by every user of the
    // group; the shared noise and contamination terms are what correlate
    // co-pilot estimates.
    let mut noise_rng = rng.lane(Purpose::PilotNoise, chunk);
    let mut y: Vec<Option<Array2<C64>>> = vec![None; cells * tau_p];
    for j in 0..cells {
        for p in 0..tau_p {
            let group = plan.group(p);
            if group.is_empty() {
                continue;
            }
            let noise = standard_cn_matrix(m, realizations, &mut noise_rng);
            y[j * tau_p + p] = Some(despread_pilot(
                &h,
                group,
                j,
                &prep.ul_powers,
                tau_p,
                &noise,
                prep.noise_ul_w,
            ));
        }
    }

    let mut h_hat = LinkField::filled(cells, users, None);
    for j in 0..cells {
        for l in 0..cells {
            if !prep.cross_cell && l != j {
                continue;
            }
            for k in 0..users {
                let e = prep.e_mat[(j, l, k)].as_ref().expect("covered link");
                let obs = y[j * tau_p + plan.pilot(l, k)].as_ref().expect("used pilot");
                h_hat[(j, l, k)] = Some(e.dot(obs));
            }
        }
    }

    Ok(EstimationResult { realizations, h, h_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameConfig;
    use crate::linalg::eigh;
    use crate::scenario::local_scattering_correlation;
    use crate::testutil::{synthetic_snapshot, white_snapshot};

    fn rng_at(master: u64) -> SnapshotRng {
        SnapshotRng::new(master, 0, 0)
    }

    fn test_stream(master: u64) -> ChaCha8Rng {
        rng_at(master).stream(Purpose::Test)
    }

    fn frobenius(a: &Array2<C64>) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn sample_cov(draws: &Array2<C64>) -> Array2<C64> {
        let n = draws.ncols() as f64;
        draws.dot(&adjoint(draws)) / C64::new(n, 0.0)
    }

    fn unit_plan(cells: usize, users: usize, k_urllc: usize, tau_p: usize) -> PilotPlan {
        let frame = FrameConfig { tau_p, tau_c: 20 * tau_p, ..FrameConfig::default() };
        crate::frame::assign_pilots(&frame, cells, users, k_urllc, &mut test_stream(999))
            .unwrap()
    }

    #[test]
    fn white_channels_have_componentwise_variance_beta() {
        let beta = 0.7;
        let snap = white_snapshot(1, 1, 0, 4, beta);
        let sampler = ChannelSampler::new(&snap).unwrap();
        let h = sampler.draw(10_000, &mut test_stream(1));
        let block = &h[(0, 0, 0)];
        for row in block.rows() {
            let var = row.iter().map(|z| z.norm_sqr()).sum::<f64>() / row.len() as f64;
            assert!((var - beta).abs() < 0.05 * beta, "var {var}");
        }
    }

    #[test]
    fn rank_one_correlation_gives_collinear_draws() {
        let m = 5;
        let r = local_scattering_correlation(m, 0.3, 0.0, 1.0).unwrap();
        let snap = synthetic_snapshot(1, 1, 0, |_, _, _| r.clone());
        let sampler = ChannelSampler::new(&snap).unwrap();
        let h = sampler.draw(50, &mut test_stream(2));
        let (vals, vecs) = eigh(&r).unwrap();
        let v = vecs.column(m - 1);
        assert!(vals[m - 2].abs() < 1e-9 * vals[m - 1]);
        for col in h[(0, 0, 0)].columns() {
            let dot: C64 = v.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            let proj = dot.norm_sqr();
            let norm2: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            assert!((proj - norm2).abs() <= 1e-10 * norm2);
        }
    }

    #[test]
    fn sample_covariance_recovers_correlation() {
        let r = local_scattering_correlation(4, -0.8, 30.0, 2.5).unwrap();
        let snap = synthetic_snapshot(1, 1, 0, |_, _, _| r.clone());
        let sampler = ChannelSampler::new(&snap).unwrap();
        let h = sampler.draw(100_000, &mut test_stream(3));
        let cov = sample_cov(&h[(0, 0, 0)]);
        let err = frobenius(&(&cov - &r)) / frobenius(&r);
        assert!(err < 0.02, "relative Frobenius error {err}");
    }

    #[test]
    fn despread_clean_observation_is_scaled_channel() {
        let snap = white_snapshot(1, 1, 0, 3, 1.0);
        let sampler = ChannelSampler::new(&snap).unwrap();
        let h = sampler.draw(4, &mut test_stream(4));
        let powers = UserField::filled(1, 1, 0.25);
        let zero_noise = Array2::<C64>::zeros((3, 4));
        let y = despread_pilot(&h, &[(0, 0)], 0, &powers, 16, &zero_noise, 0.0);
        let expected = &h[(0, 0, 0)] * C64::new(16.0 * 0.5, 0.0);
        assert!(frobenius(&(&y - &expected)) < 1e-12);
    }

    #[test]
    fn despread_is_symmetric_in_equal_co_pilot_users() {
        let snap = white_snapshot(2, 1, 0, 3, 1.0);
        let sampler = ChannelSampler::new(&snap).unwrap();
        let h = sampler.draw(4, &mut test_stream(5));
        let powers = UserField::filled(2, 1, 0.5);
        let group = [(0, 0), (1, 0)];
        let noise = standard_cn_matrix(3, 4, &mut test_stream(6));
        let y = despread_pilot(&h, &group, 0, &powers, 8, &noise, 0.2);
        let manual = (&h[(0, 0, 0)] + &h[(0, 1, 0)]) * C64::new(8.0 * 0.5f64.sqrt(), 0.0)
            + &noise * C64::new((8.0 * 0.2f64).sqrt(), 0.0);
        assert!(frobenius(&(&y - &manual)) < 1e-12);
    }

    #[test]
    fn despread_variance_matches_moment_formula() {
        // Two white co-pilot users with distinct gains and powers.
        let (b0, b1) = (1.4, 0.3);
        let (p0, p1) = (0.6, 1.1);
        let tau_p = 8;
        let sigma2 = 0.35;
        let snap = synthetic_snapshot(2, 1, 0, |_, l, _| {
            Array2::<C64>::eye(3) * C64::new(if l == 0 { b0 } else { b1 }, 0.0)
        });
        let sampler = ChannelSampler::new(&snap).unwrap();
        let n = 20_000;
        let h = sampler.draw(n, &mut test_stream(7));
        let mut powers = UserField::filled(2, 1, 0.0);
        powers[(0, 0)] = p0;
        powers[(1, 0)] = p1;
        let noise = standard_cn_matrix(3, n, &mut test_stream(8));
        let y = despread_pilot(&h, &[(0, 0), (1, 0)], 0, &powers, tau_p, &noise, sigma2);
        let t = tau_p as f64;
        let expected = t * t * (p0 * b0 + p1 * b1) + t * sigma2;
        let var = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / (3 * n) as f64;
        assert!(
            (var - expected).abs() < 0.05 * expected,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn white_uncontaminated_estimate_matches_scalar_mmse() {
        let (beta, p_ul, tau_p, sigma2) = (0.8, 0.5, 16usize, 0.3);
        let snap = white_snapshot(1, 1, 0, 4, beta);
        let sampler = ChannelSampler::new(&snap).unwrap();
        let h = sampler.draw(6, &mut test_stream(9));
        let powers = UserField::filled(1, 1, p_ul);
        let noise = standard_cn_matrix(4, 6, &mut test_stream(10));
        let y = despread_pilot(&h, &[(0, 0)], 0, &powers, tau_p, &noise, sigma2);

        let s = pilot_sum_covariance(&snap, &[(0, 0)], 0, &powers, tau_p, sigma2);
        let chol = HermChol::new(&s).unwrap();
        let h_hat = mmse_estimate(&snap.corr[(0, 0, 0)], &chol, p_ul, &y).unwrap();

        let t = tau_p as f64;
        let gain = p_ul * t * beta / (p_ul * t * beta + sigma2);
        let expected = &y * C64::new(gain / (p_ul.sqrt() * t), 0.0);
        assert!(frobenius(&(&h_hat - &expected)) <= 1e-12 * frobenius(&expected));

        let c = error_covariance(&snap.corr[(0, 0, 0)], &chol, p_ul, tau_p).unwrap();
        let expected_c = beta * sigma2 / (p_ul * t * beta + sigma2);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { expected_c } else { 0.0 };
                assert!((c[[i, j]] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_uncontaminated_estimate_recovers_channel() {
        let snap = white_snapshot(1, 1, 0, 3, 1.0);
        let sampler = ChannelSampler::new(&snap).unwrap();
        let h = sampler.draw(5, &mut test_stream(11));
        let powers = UserField::filled(1, 1, 1.0);
        let tiny = 1e-12;
        let zero_noise = Array2::<C64>::zeros((3, 5));
        let y = despread_pilot(&h, &[(0, 0)], 0, &powers, 8, &zero_noise, tiny);
        let s = pilot_sum_covariance(&snap, &[(0, 0)], 0, &powers, 8, tiny);
        let chol = HermChol::new(&s).unwrap();
        let h_hat = mmse_estimate(&snap.corr[(0, 0, 0)], &chol, 1.0, &y).unwrap();
        let err = frobenius(&(&h_hat - &h[(0, 0, 0)])) / frobenius(&h[(0, 0, 0)]);
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn estimate_covariance_matches_r_minus_c() {
        let r = local_scattering_correlation(4, 0.4, 20.0, 1.2).unwrap();
        let snap = synthetic_snapshot(1, 2, 1, |_, _, _| r.clone());
        let plan = unit_plan(1, 2, 1, 4);
        let powers = UserField::filled(1, 2, 0.9);
        let prep = EstimatorPrep::new(&snap, &plan, &powers, 0.2, false).unwrap();
        let sampler = ChannelSampler::new(&snap).unwrap();
        let est =
            estimate_channels(&sampler, &prep, &plan, 100_000, 0, &rng_at(12)).unwrap();

        let cov = sample_cov(est.h_hat(0, 0, 0));
        let expected = &r - prep.error_cov(0, 0, 0);
        let err = frobenius(&(&cov - &expected)) / frobenius(&expected);
        assert!(err < 0.02, "relative Frobenius error {err}");
    }

    #[test]
    fn estimate_and_error_are_uncorrelated() {
        let r = local_scattering_correlation(4, -0.2, 35.0, 0.9).unwrap();
        let snap = synthetic_snapshot(1, 1, 0, |_, _, _| r.clone());
        let plan = unit_plan(1, 1, 0, 2);
        let powers = UserField::filled(1, 1, 0.7);
        let prep = EstimatorPrep::new(&snap, &plan, &powers, 0.15, false).unwrap();
        let sampler = ChannelSampler::new(&snap).unwrap();
        let est =
            estimate_channels(&sampler, &prep, &plan, 20_000, 0, &rng_at(13)).unwrap();

        let h_hat = est.h_hat(0, 0, 0);
        let h_err = &est.h[(0, 0, 0)] - h_hat;
        let n = h_hat.ncols() as f64;
        let cross = h_hat.dot(&adjoint(&h_err)) / C64::new(n, 0.0);
        assert!(frobenius(&cross) <= 0.03 * frobenius(&r), "cross {}", frobenius(&cross));
    }

    #[test]
    fn co_pilot_estimates_are_positively_correlated() {
        // Two cells, one user each, same pilot, white channels: BS 0's
        // estimates of the two users differ only by scalar gains applied
        // to the same observation.
        let snap = white_snapshot(2, 1, 0, 3, 1.0);
        let mut index = UserField::filled(2, 1, 0usize);
        index[(0, 0)] = 0;
        index[(1, 0)] = 0;
        let plan = PilotPlan::from_indices(4, index);
        let powers = UserField::filled(2, 1, 0.8);
        let prep = EstimatorPrep::new(&snap, &plan, &powers, 0.25, true).unwrap();
        let sampler = ChannelSampler::new(&snap).unwrap();
        let est =
            estimate_channels(&sampler, &prep, &plan, 5_000, 0, &rng_at(14)).unwrap();

        let a = est.h_hat(0, 0, 0);
        let b = est.h_hat(0, 1, 0);
        let n = a.ncols() as f64;
        let cross = a.dot(&adjoint(b)) / C64::new(n, 0.0);
        let corr = (0..3).map(|i| cross[[i, i]].re).sum::<f64>() / 3.0;
        assert!(corr > 0.1, "co-pilot correlation {corr}");
    }

    #[test]
    fn error_covariance_never_exceeds_r() {
        let r0 = local_scattering_correlation(8, 0.9, 25.0, 1.0).unwrap();
        let r1 = local_scattering_correlation(8, -1.1, 25.0, 0.4).unwrap();
        let snap = synthetic_snapshot(2, 1, 0, |_, l, _| if l == 0 { r0.clone() } else { r1.clone() });
        let mut index = UserField::filled(2, 1, 0usize);
        index[(0, 0)] = 0;
        index[(1, 0)] = 0;
        let plan = PilotPlan::from_indices(2, index);
        let powers = UserField::filled(2, 1, 0.6);
        let prep = EstimatorPrep::new(&snap, &plan, &powers, 0.1, true).unwrap();
        for j in 0..2 {
            for l in 0..2 {
                let c = prep.error_cov(j, l, 0);
                let r = &snap.corr[(j, l, 0)];
                let diff = r - c;
                let (vals, _) = eigh(&diff).unwrap();
                let max = vals[vals.len() - 1].max(f64::MIN_POSITIVE);
                assert!(vals[0] >= -1e-9 * max, "R - C min eig {}", vals[0]);
                let (cvals, _) = eigh(c).unwrap();
                let cmax = cvals[cvals.len() - 1].max(f64::MIN_POSITIVE);
                assert!(cvals[0] >= -1e-9 * cmax, "C min eig {}", cvals[0]);
            }
        }
    }

    #[test]
    fn contaminated_twin_matches_direct_formula() {
        let r = local_scattering_correlation(5, 0.2, 25.0, 0.8).unwrap();
        let snap = synthetic_snapshot(2, 1, 0, |_, _, _| r.clone());
        let mut index = UserField::filled(2, 1, 0usize);
        index[(0, 0)] = 0;
        index[(1, 0)] = 0;
        let plan = PilotPlan::from_indices(3, index);
        let (p_ul, tau_p, sigma2) = (0.9, 3usize, 0.2);
        let powers = UserField::filled(2, 1, p_ul);
        let prep = EstimatorPrep::new(&snap, &plan, &powers, sigma2, false).unwrap();

        // C = R − pτ_p R (2pτ_p R + σ² I)^{-1} R evaluated independently.
        let t = tau_p as f64;
        let s = &r * C64::new(2.0 * p_ul * t, 0.0)
            + Array2::<C64>::eye(5) * C64::new(sigma2, 0.0);
        let chol = HermChol::new(&s).unwrap();
        let sr = chol.solve_mat(&r).unwrap();
        let expected = &r - &(adjoint(&sr).dot(&r) * C64::new(p_ul * t, 0.0));
        let got = prep.error_cov(0, 0, 0);
        assert!(frobenius(&(got - &expected)) <= 1e-10 * frobenius(&expected));
    }

    #[test]
    fn chunks_are_deterministic_and_disjoint() {
        let snap = white_snapshot(1, 2, 1, 3, 1.0);
        let plan = unit_plan(1, 2, 1, 4);
        let powers = UserField::filled(1, 2, 0.5);
        let prep = EstimatorPrep::new(&snap, &plan, &powers, 0.2, false).unwrap();
        let sampler = ChannelSampler::new(&snap).unwrap();

        let a = estimate_channels(&sampler, &prep, &plan, 10, 0, &rng_at(15)).unwrap();
        let b = estimate_channels(&sampler, &prep, &plan, 10, 0, &rng_at(15)).unwrap();
        assert_eq!(a.h, b.h);
        assert_eq!(a.h_hat(0, 0, 0), b.h_hat(0, 0, 0));

        let c = estimate_channels(&sampler, &prep, &plan, 10, 1, &rng_at(15)).unwrap();
        assert_ne!(a.h[(0, 0, 0)], c.h[(0, 0, 0)]);
    }

    #[test]
    fn upsilon_sums_weighted_error_covariances() {
        let snap = white_snapshot(2, 2, 1, 3, 0.5);
        let plan = unit_plan(2, 2, 1, 8);
        let mut powers = UserField::filled(2, 2, 0.0);
        powers[(0, 0)] = 0.3;
        powers[(0, 1)] = 0.7;
        powers[(1, 0)] = 1.1;
        powers[(1, 1)] = 0.2;
        let prep = EstimatorPrep::new(&snap, &plan, &powers, 0.4, true).unwrap();
        for j in 0..2 {
            let mut manual = Array2::<C64>::zeros((3, 3));
            for l in 0..2 {
                for k in 0..2 {
                    manual.scaled_add(C64::new(powers[(l, k)], 0.0), prep.error_cov(j, l, k));
                }
            }
            assert!(frobenius(&(&manual - prep.upsilon(j))) < 1e-14);
        }
    }
}
