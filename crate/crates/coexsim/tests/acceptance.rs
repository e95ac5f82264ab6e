//! Acceptance suite: nine end-to-end checks that gate the simulator.
//!
//! Each test prints one `ACCEPTANCE <id>: PASS/FAIL` line (visible with
//! `--nocapture`; on failure the line is also in the panic message).

use coexsim::frame::{analytic_punc_outage, ActivationMatrix, CoexMode};
use coexsim::harness::{run_campaign, run_point, CampaignConfig, PointOutcome};
use coexsim::power::{
    epa, fpa, opa_max_prod_sinr, product_sinr_objective, PowerAllocation, PowerScheme, SinrStats,
};
use coexsim::precoding::{EffectiveChannels, Precoder};
use coexsim::rng::{Purpose, SnapshotRng};
use coexsim::scenario::UserField;
use coexsim::urllc::rcus::rcus_epsilon;
use coexsim::urllc::{info_density, optimize_user_eps, SaddlepointContext, UrllcSample};
use coexsim::C64;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

/// Prints the per-criterion verdict line and fails the test on FAIL.
fn report(id: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id}: {verdict} — {details}");
    assert!(pass, "ACCEPTANCE {id}: FAIL — {details}");
}

fn test_rng(seed: u64, lane: u32) -> rand_chacha::ChaCha8Rng {
    SnapshotRng::new(seed, 0, 0).lane(Purpose::Test, lane)
}

fn complex_draw(rng: &mut rand_chacha::ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) / 2f64.sqrt()
}

// ---------------------------------------------------------------------------
// c1: blanking-mode broadband outage matches the closed-form prediction.
// ---------------------------------------------------------------------------

#[test]
fn c1_blanking_outage_matches_analytic() {
    // (users, urllc fraction, activation prob) giving K_u = 4, 6, 10.
    let cases = [(5usize, 0.8, 10f64.powf(-0.5)), (8, 0.75, 0.1), (16, 0.625, 0.1)];
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, &(users, frac, a_u)) in cases.iter().enumerate() {
        let mut cfg = CampaignConfig::default();
        cfg.seed = 101 + i as u64;
        cfg.snapshots = 100;
        cfg.realizations = 2;
        cfg.chunk_realizations = 2;
        cfg.frames_per_snapshot = 100; // 10^4 frames in total
        cfg.network.cells = 1;
        cfg.network.antennas = 2;
        cfg.frame.payload_bits = 8;
        cfg.sweep.users_per_cell = vec![users];
        cfg.sweep.urllc_fraction = vec![frac];
        cfg.sweep.activation_prob = vec![a_u];
        cfg.sweep.tau_p = vec![users];
        cfg.sweep.slots = vec![5];
        cfg.sweep.tau_c = vec![users + 20];
        cfg.variants.modes = vec![CoexMode::Puncturing];
        cfg.variants.precoders = vec![Precoder::Mr];
        cfg.variants.power = vec![PowerScheme::Epa];
        cfg.validate().unwrap();

        let point = run_point(&cfg, &cfg.points()[0]).unwrap();
        let v = &point.variants[0];
        let frames = v.frames as f64;
        assert_eq!(v.frames, 10_000);
        let empirical = v.outage_rate();
        let k_u = (users as f64 * frac).round() as usize;
        let analytic = analytic_punc_outage(a_u, k_u, 5);
        let sigma = (analytic * (1.0 - analytic) / frames).sqrt();
        let ok = (empirical - analytic).abs() <= 3.0 * sigma;
        pass &= ok;
        lines.push(format!(
            "K_u={k_u}: empirical {empirical:.4} vs analytic {analytic:.4} (3σ = {:.4})",
            3.0 * sigma
        ));
    }
    report("c1 blanking outage vs closed form", pass, &lines.join("; "));
}

// ---------------------------------------------------------------------------
// c2: saddlepoint error probability tracks the random-coding-union bound.
// ---------------------------------------------------------------------------

#[test]
fn c2_saddlepoint_tracks_rcus_bound() {
    let n_d = 100usize;
    let rate = 160.0 * std::f64::consts::LN_2 / n_d as f64;
    let g = C64::new(1.0, 0.0);
    let g_hat = g;
    let sigma2 = 1.0;

    let saddle = |rho: f64| {
        let samples = [UrllcSample { g, rho, sigma2 }];
        let ue = optimize_user_eps(&samples, g_hat, n_d, rate).expect("one sample");
        (ue.eps, ue.s_star)
    };

    let mut lines = Vec::new();
    let mut pass = true;
    for (i, &target) in [1e-1f64, 1e-3, 1e-6].iter().enumerate() {
        // Error probability decreases monotonically in the symbol power;
        // bisect ln(rho) until the saddlepoint value hits the target.
        let (mut lo, mut hi) = (0.0f64, 4.0f64);
        assert!(saddle(lo.exp()).0 > target && saddle(hi.exp()).0 < target);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if saddle(mid.exp()).0 > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rho = (0.5 * (lo + hi)).exp();
        let (eps_sp, s_star) = saddle(rho);

        let mut rng = test_rng(202, i as u32);
        let eps_rcus = rcus_epsilon(g, g_hat, rho, sigma2, s_star, n_d, rate, 10_000_000, &mut rng);
        let ok = eps_rcus > 0.0 && {
            let rel = (eps_sp.log10() - eps_rcus.log10()).abs() / eps_rcus.log10().abs();
            rel <= 0.15
        };
        pass &= ok;
        lines.push(format!(
            "target {target:.0e}: saddlepoint {eps_sp:.3e} vs sampled bound {eps_rcus:.3e}"
        ));
    }
    report(
        "c2 saddlepoint vs sampled union bound (10^7 draws)",
        pass,
        &lines.join("; "),
    );
}

// ---------------------------------------------------------------------------
// c3: the information-density CGF vanishes at zero and its slope matches
// the Monte Carlo mean.
// ---------------------------------------------------------------------------

#[test]
fn c3_cgf_moment_identities() {
    let mut worst_z = 0.0f64;
    for lane in 0..20u32 {
        let mut rng = test_rng(303, lane);
        let g_hat = C64::new(1.2, 0.4) + complex_draw(&mut rng) * 0.25;
        let g = g_hat + complex_draw(&mut rng) * 0.08;
        let rho = 0.6 + rng.random::<f64>() * 1.2;
        let sigma2 = 0.3 + rng.random::<f64>() * 0.4;
        let s = (rng.random::<f64>() * 1.7 - 1.0).exp();
        let ctx = SaddlepointContext::new(g, g_hat, rho, sigma2, s, 100).unwrap();

        // Exact-zero requirement, bitwise.
        assert_eq!(ctx.cgf(0.0).unwrap(), 0.0, "cgf(0) must be exactly zero");

        let n = 1_000_000usize;
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        let sqrt_rho = rho.sqrt();
        let sqrt_sigma = sigma2.sqrt();
        for _ in 0..n {
            let q = complex_draw(&mut rng) * sqrt_rho;
            let z = complex_draw(&mut rng) * sqrt_sigma;
            let y = g * q + z;
            let i_s = info_density(s, q, y, g_hat, rho);
            sum += i_s;
            sum_sq += i_s * i_s;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let sigma_mc = (var / n as f64).sqrt();
        let z_score = (ctx.cgf_d1(0.0).unwrap() + mean).abs() / sigma_mc;
        worst_z = worst_z.max(z_score);
    }
    report(
        "c3 CGF zero point and first moment",
        worst_z <= 3.0,
        &format!("cgf(0) exactly 0 in 20 contexts; worst slope z-score {worst_z:.2} (limit 3)"),
    );
}

// ---------------------------------------------------------------------------
// c4: the weighted allocation with a flat exponent reduces to equal power,
// bit for bit.
// ---------------------------------------------------------------------------

#[test]
fn c4_weighted_allocation_reduces_to_equal_power() {
    let mut rng = test_rng(404, 0);
    for i in 0..1000usize {
        let cells = 1 + i % 3;
        let users = 2 + i % 5;
        let k_u = i % users;
        let slots = 1 + i % 3;
        let mode = if i % 2 == 0 {
            CoexMode::Puncturing
        } else {
            CoexMode::Superposition
        };
        let acts = ActivationMatrix::from_fn(slots, cells, k_u, mode, |_, _, _| {
            rng.random::<f64>() < 0.5
        });
        let slot = i % slots;
        let beta = UserField::from_fn(cells, users, |_, _| {
            10f64.powf(-12.0 + 6.0 * rng.random::<f64>())
        });
        let rho_max = (4.0 * rng.random::<f64>()).exp();
        let equal = epa(&acts, slot, users, rho_max);
        let weighted = fpa(&acts, slot, users, &beta, 0.0, 0.5, rho_max);
        assert_eq!(
            equal.rho, weighted.rho,
            "allocation {i} differs between the equal and flat-weighted policies"
        );
    }
    report(
        "c4 flat-exponent weighted allocation equals equal power",
        true,
        "bit-identical powers across 1000 random activation slices",
    );
}

// ---------------------------------------------------------------------------
// c5: every power policy exhausts the per-BS budget with equality on every
// non-idle slot of a 50-snapshot campaign.
// ---------------------------------------------------------------------------

#[test]
fn c5_power_budget_met_with_equality() {
    use coexsim::estimation::{estimate_channels, ChannelSampler, EstimatorPrep};
    use coexsim::frame::{assign_pilots, draw_activations};
    use coexsim::precoding::accumulate_effective_channels;
    use coexsim::scenario::draw_snapshot;

    let mut cfg = CampaignConfig::default();
    cfg.network.cells = 1;
    cfg.network.antennas = 6;
    cfg.sweep.users_per_cell = vec![4];
    cfg.sweep.urllc_fraction = vec![0.5];
    cfg.sweep.activation_prob = vec![0.4];
    cfg.sweep.tau_p = vec![4];
    cfg.sweep.slots = vec![3];
    cfg.sweep.tau_c = vec![16];
    cfg.validate().unwrap();
    let axes = &cfg.points()[0];
    let net = cfg.network_for(axes);

    let mut worst_rel = 0.0f64;
    let mut allocations = 0usize;
    for snap in 0..50u32 {
        let rng = SnapshotRng::new(505, 0, snap);
        let snapshot = draw_snapshot(&net, &rng).unwrap();
        let mode = if snap % 2 == 0 {
            CoexMode::Puncturing
        } else {
            CoexMode::Superposition
        };
        let frame = cfg.frame_for(axes, mode);
        let mut pilot_rng = rng.stream(Purpose::PilotAssign);
        let plan = assign_pilots(&frame, 1, 4, 2, &mut pilot_rng).unwrap();
        let ul = UserField::filled(1, 4, net.ul_power_w);
        let prep = EstimatorPrep::new(&snapshot, &plan, &ul, net.noise_ul_w, false).unwrap();
        let sampler = ChannelSampler::new(&snapshot).unwrap();
        let est = estimate_channels(&sampler, &prep, &plan, 8, 0, &rng).unwrap();
        let mut stats = EffectiveChannels::new(1, 4, 2);
        accumulate_effective_channels(&mut stats, Precoder::Mr, &est, &prep).unwrap();
        let sinr = SinrStats::from_stats(&stats, net.noise_dl_w);
        let beta = UserField::from_fn(1, 4, |j, k| snapshot.beta[(j, j, k)]);

        for f in 0..3u32 {
            let mut act_rng = rng.lane(Purpose::Activations, f);
            let acts = draw_activations(&frame, 1, 2, &mut act_rng);
            for t in 0..3usize {
                let mut allocs = vec![
                    epa(&acts, t, 4, net.max_bs_power_w),
                    fpa(&acts, t, 4, &beta, 0.3, 0.5, net.max_bs_power_w),
                    fpa(&acts, t, 4, &beta, 1.0, 0.25, net.max_bs_power_w),
                ];
                let (opa_alloc, _) = opa_max_prod_sinr(&sinr, &acts, t, net.max_bs_power_w).unwrap();
                allocs.push(opa_alloc);
                for alloc in &allocs {
                    for cell in 0..1usize {
                        if !alloc.is_idle(cell) {
                            let rel = alloc.budget_residual(cell).abs() / net.max_bs_power_w;
                            worst_rel = worst_rel.max(rel);
                            allocations += 1;
                        }
                    }
                }
            }
        }
    }
    report(
        "c5 transmit budget equality",
        worst_rel <= 1e-9 && allocations > 0,
        &format!("worst relative residual {worst_rel:.2e} over {allocations} non-idle allocations"),
    );
}

// ---------------------------------------------------------------------------
// c6: the optimized allocation dominates the heuristics and matches a grid
// search on small instances.
// ---------------------------------------------------------------------------

#[test]
fn c6_optimized_power_dominates_and_matches_grid() {
    let mut rng = test_rng(606, 0);
    let noise = 0.1;

    // Random instances: fabricated effective-channel ensembles.
    let mut worst_gap = f64::INFINITY;
    for i in 0..100usize {
        let cells = 1 + i % 2;
        let users = 2 + i % 3;
        let k_u = i % users; // strictly fewer low-latency than total users
        let mut stats = EffectiveChannels::new(cells, users, k_u);
        let dim = cells * users;
        for _ in 0..3 {
            let g_per_bs: Vec<Array2<C64>> = (0..cells)
                .map(|_| Array2::from_shape_fn((dim, users), |_| complex_draw(&mut rng) * 1.5))
                .collect();
            stats.record_realization(&g_per_bs);
        }
        let sinr = SinrStats::from_stats(&stats, noise);
        let acts = ActivationMatrix::from_fn(1, cells, k_u, CoexMode::Superposition, |_, _, _| {
            rng.random::<f64>() < 0.6
        });
        let rho_max = (3.0 * rng.random::<f64>()).exp();
        let (opa_alloc, opa_report) = opa_max_prod_sinr(&sinr, &acts, 0, rho_max).unwrap();
        let obj_opa = product_sinr_objective(&sinr, &opa_alloc, &acts, 0);
        assert!(
            (obj_opa - opa_report.objective).abs() <= 1e-6 * obj_opa.abs().max(1.0),
            "reported objective disagrees with re-evaluation"
        );
        let obj_epa = product_sinr_objective(&sinr, &epa(&acts, 0, users, rho_max), &acts, 0);
        let beta = UserField::from_fn(cells, users, |_, _| rng.random::<f64>() + 0.1);
        let obj_fpa = product_sinr_objective(
            &sinr,
            &fpa(&acts, 0, users, &beta, 0.8, 0.4, rho_max),
            &acts,
            0,
        );
        let gap = obj_opa - obj_epa.max(obj_fpa);
        worst_gap = worst_gap.min(gap);
    }
    let dominance_ok = worst_gap >= -1e-9;

    // Grid oracle on single-cell three-user instances: exhaustive simplex
    // search with 1% power steps.
    let mut worst_vs_grid = f64::INFINITY;
    for i in 0..10usize {
        let mut stats = EffectiveChannels::new(1, 3, 0);
        for _ in 0..3 {
            let g = Array2::from_shape_fn((3, 3), |_| complex_draw(&mut rng) * 1.5);
            stats.record_realization(&[g]);
        }
        let sinr = SinrStats::from_stats(&stats, noise);
        let acts = ActivationMatrix::from_fn(1, 1, 0, CoexMode::Superposition, |_, _, _| false);
        let rho_max = 2.0 + i as f64 * 0.5;
        let (opa_alloc, _) = opa_max_prod_sinr(&sinr, &acts, 0, rho_max).unwrap();
        let obj_opa = product_sinr_objective(&sinr, &opa_alloc, &acts, 0);

        let mut best_grid = f64::NEG_INFINITY;
        for a in 0..=100usize {
            for b in 0..=(100 - a) {
                let c = 100 - a - b;
                let shares = [a, b, c];
                let rho = UserField::from_fn(1, 3, |_, k| shares[k] as f64 / 100.0 * rho_max);
                let alloc = PowerAllocation::from_rho(PowerScheme::Opa, rho, 0, rho_max);
                let obj = product_sinr_objective(&sinr, &alloc, &acts, 0);
                best_grid = best_grid.max(obj);
            }
        }
        // "Within 0.1% of the grid product": log-product gap of ln(0.999).
        worst_vs_grid = worst_vs_grid.min(obj_opa - best_grid);
    }
    let grid_ok = worst_vs_grid >= (1.0f64 - 0.001).ln();

    report(
        "c6 optimized power dominance and grid oracle",
        dominance_ok && grid_ok,
        &format!(
            "min objective lead over heuristics {worst_gap:.2e} (limit -1e-9); \
             min log-product lead over 1% grid {worst_vs_grid:.2e} (limit {:.2e})",
            (1.0f64 - 0.001).ln()
        ),
    );
}

// ---------------------------------------------------------------------------
// c7: spectral-efficiency ordering across precoders and modes at full
// network dimensions (reduced ensemble depth).
// ---------------------------------------------------------------------------

#[test]
fn c7_precoder_and_mode_ordering() {
    let mut cfg = CampaignConfig::default();
    cfg.seed = 707;
    cfg.snapshots = 100;
    cfg.realizations = 32;
    cfg.chunk_realizations = 32;
    cfg.frames_per_snapshot = 5;
    cfg.variants.power = vec![PowerScheme::Epa];
    cfg.validate().unwrap();

    let point = run_point(&cfg, &cfg.points()[0]).unwrap();
    let se = |mode: CoexMode, precoder: Precoder| -> f64 {
        point
            .variants
            .iter()
            .find(|v| v.key.mode == mode && v.key.precoder == precoder)
            .expect("variant simulated")
            .mean_cell_sum_se
    };

    let mut pass = true;
    let mut lines = Vec::new();
    for mode in [CoexMode::Puncturing, CoexMode::Superposition] {
        let mr = se(mode, Precoder::Mr);
        let rzf = se(mode, Precoder::Rzf);
        let mmse = se(mode, Precoder::Mmse);
        pass &= mmse >= rzf && rzf >= mr;
        lines.push(format!("{mode}: MR {mr:.2}, RZF {rzf:.2}, M-MMSE {mmse:.2}"));
    }
    for precoder in [Precoder::Mr, Precoder::Rzf, Precoder::Mmse] {
        let punc = se(CoexMode::Puncturing, precoder);
        let spc = se(CoexMode::Superposition, precoder);
        pass &= spc > punc;
        lines.push(format!("{precoder}: blanking {punc:.2} < overlay {spc:.2}"));
    }
    report(
        "c7 precoder and coexistence-mode ordering",
        pass,
        &lines.join("; "),
    );
}

// ---------------------------------------------------------------------------
// c8: network availability lands in the expected bands at desk scale.
// ---------------------------------------------------------------------------

#[test]
fn c8_availability_desk_scale_anchors() {
    // Long-block configuration: 10 users per cell, 110-symbol slots.
    let mut high = CampaignConfig::default();
    high.seed = 808;
    high.snapshots = 50;
    high.realizations = 48;
    high.chunk_realizations = 48;
    high.frames_per_snapshot = 10;
    high.sweep.users_per_cell = vec![10];
    high.sweep.urllc_fraction = vec![0.2];
    high.sweep.activation_prob = vec![0.1];
    high.sweep.tau_p = vec![30];
    high.sweep.slots = vec![5];
    high.sweep.tau_c = vec![580];
    high.variants.modes = vec![CoexMode::Superposition];
    high.variants.precoders = vec![Precoder::Mmse];
    high.variants.power = vec![PowerScheme::Fpa { nu: 0.0, omega: 0.2 }];
    high.validate().unwrap();
    let point = run_point(&high, &high.points()[0]).unwrap();
    let eta_high = point.variants[0]
        .availability
        .expect("low-latency users were measured");

    // Short-block, heavily loaded configuration: 60 users per cell,
    // 24-symbol slots; essentially no user can meet the target.
    let mut low = CampaignConfig::default();
    low.seed = 809;
    low.snapshots = 8;
    low.realizations = 24;
    low.chunk_realizations = 24;
    low.frames_per_snapshot = 10;
    low.sweep.users_per_cell = vec![60];
    low.sweep.urllc_fraction = vec![0.2];
    low.sweep.activation_prob = vec![0.1];
    low.sweep.tau_p = vec![180];
    low.sweep.slots = vec![5];
    low.sweep.tau_c = vec![300];
    low.variants.modes = vec![CoexMode::Superposition];
    low.variants.precoders = vec![Precoder::Mmse];
    low.variants.power = vec![PowerScheme::Fpa { nu: 0.0, omega: 0.2 }];
    low.validate().unwrap();
    let point = run_point(&low, &low.points()[0]).unwrap();
    let eta_low = point.variants[0]
        .availability
        .expect("low-latency users were measured");

    report(
        "c8 availability bands at desk scale",
        eta_high >= 0.95 && eta_low <= 0.05,
        &format!("long blocks: {eta_high:.4} (need >= 0.95); short blocks: {eta_low:.4} (need <= 0.05)"),
    );
}

// ---------------------------------------------------------------------------
// c9: structural invariants on a 20-snapshot smoke campaign.
// ---------------------------------------------------------------------------

#[test]
fn c9_structural_invariants_smoke() {
    use coexsim::frame::assign_pilots;
    use coexsim::harness::{emit_figure_data, write_outputs};
    use coexsim::scenario::draw_snapshot;
    use coexsim::urllc::{S_MAX, S_MIN};

    let mut cfg = CampaignConfig::default();
    cfg.seed = 909;
    cfg.snapshots = 20;
    cfg.realizations = 16;
    cfg.chunk_realizations = 8;
    cfg.frames_per_snapshot = 3;
    cfg.network.antennas = 16;
    cfg.frame.payload_bits = 40;
    cfg.sweep.users_per_cell = vec![8];
    cfg.sweep.urllc_fraction = vec![0.25];
    cfg.sweep.activation_prob = vec![0.2];
    cfg.sweep.tau_p = vec![24];
    cfg.sweep.slots = vec![5];
    cfg.sweep.tau_c = vec![124];
    cfg.validate().unwrap();

    let mut issues: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            issues.push(what.to_string());
        }
    };

    // Correlation-model invariants on one snapshot: Hermitian matrices with
    // the trace pinned to antennas x large-scale fade, and tiny spectral
    // clipping.
    let axes = cfg.points().remove(0);
    let net = cfg.network_for(&axes);
    let snapshot = draw_snapshot(&net, &SnapshotRng::new(cfg.seed, 0, 0)).unwrap();
    let m = net.antennas;
    for bs in 0..net.cells {
        for cell in 0..net.cells {
            for user in 0..net.users_per_cell {
                let r = &snapshot.corr[(bs, cell, user)];
                let beta = snapshot.beta[(bs, cell, user)];
                let trace: f64 = (0..m).map(|i| r[[i, i]].re).sum();
                check(
                    (trace / (m as f64 * beta) - 1.0).abs() < 1e-10,
                    "correlation trace must equal antennas x large-scale fade",
                );
                let mut herm = true;
                for i in 0..m {
                    for j in 0..i {
                        herm &= (r[[i, j]] - r[[j, i]].conj()).norm() < 1e-12;
                    }
                }
                check(herm, "correlation matrices must be Hermitian");
            }
        }
    }

    // Pilot plan: the groups partition the user population.
    let frame = cfg.frame_for(&axes, CoexMode::Puncturing);
    let mut pilot_rng = SnapshotRng::new(cfg.seed, 0, 0).stream(Purpose::PilotAssign);
    let plan = assign_pilots(
        &frame,
        net.cells,
        net.users_per_cell,
        net.k_urllc(),
        &mut pilot_rng,
    )
    .unwrap();
    let mut seen = vec![false; net.cells * net.users_per_cell];
    for p in 0..plan.tau_p() {
        for &(cell, user) in plan.group(p) {
            let idx = cell * net.users_per_cell + user;
            check(!seen[idx], "pilot groups must be disjoint");
            seen[idx] = true;
            check(plan.pilot(cell, user) == p, "group membership must match pilot index");
        }
    }
    check(seen.iter().all(|&s| s), "every user must hold a pilot");

    // Full campaign: counts, ranges, and deterministic outputs.
    let bundle_a = run_campaign(&cfg).unwrap();
    let bundle_b = run_campaign(&cfg).unwrap();
    check(bundle_a.failed_points() == 0, "no point may fail");
    let PointOutcome::Done(point) = &bundle_a.points[0] else {
        panic!("smoke point failed");
    };
    check(
        point.worst_rel_eig < 1e-8,
        "spectral clipping must stay at rounding level",
    );
    check(point.variants.len() == 18, "all 18 variants must be simulated");
    let k_u = net.k_urllc();
    let k_e = net.users_per_cell - k_u;
    for v in &point.variants {
        check(
            v.embb.len() == 20 * net.cells * k_e,
            "one broadband row per (snapshot, broadband user)",
        );
        check(
            v.urllc.len() + v.counters.never_active as usize == 20 * net.cells * k_u,
            "low-latency rows plus idle users must account for everyone",
        );
        check(v.frames == 60, "frame accounting must match the configuration");
        for row in &v.embb {
            check(row.se.is_finite() && row.se >= 0.0, "spectral efficiency in range");
        }
        for row in &v.urllc {
            check((0.0..=1.0).contains(&row.eps), "error probability in [0, 1]");
            check(
                (S_MIN..=S_MAX).contains(&row.s_star),
                "decoder parameter within the search range",
            );
            check(row.samples > 0 && row.active_slots > 0, "measured users saw traffic");
        }
        if let Some(eta) = v.availability {
            check((0.0..=1.0).contains(&eta), "availability in [0, 1]");
        }
        let rate = v.outage_rate();
        check((0.0..=1.0).contains(&rate), "outage rate in [0, 1]");
        if v.key.power == PowerScheme::Opa {
            check(
                v.counters.opa_runs == 20 * 3 * 5,
                "one optimized allocation per (snapshot, frame, slot)",
            );
        }
        if v.key.mode == CoexMode::Superposition {
            check(
                v.outage_frames.iter().all(|&c| c == 0),
                "the overlay mode never silences a cell entirely",
            );
        }
    }

    // Determinism of the bundle and of every serialized byte.
    match (&bundle_a.points[0], &bundle_b.points[0]) {
        (PointOutcome::Done(a), PointOutcome::Done(b)) => check(a == b, "reruns must match"),
        _ => check(false, "reruns must succeed"),
    }
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let files_a = write_outputs(&bundle_a, dir_a.path()).unwrap();
    let files_b = write_outputs(&bundle_b, dir_b.path()).unwrap();
    for (a, b) in files_a.iter().zip(&files_b) {
        check(
            std::fs::read(a).unwrap() == std::fs::read(b).unwrap(),
            "serialized outputs must be byte-identical across reruns",
        );
    }

    // Figure exports: CDF curves must be monotone in both coordinates.
    let fig_dir = tempfile::tempdir().unwrap();
    emit_figure_data(&bundle_a, fig_dir.path(), None).unwrap();
    let cdf = std::fs::read_to_string(fig_dir.path().join("se_cdf.csv")).unwrap();
    let mut curve = String::new();
    let (mut last_se, mut last_p) = (f64::NEG_INFINITY, 0.0f64);
    for line in cdf.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let key = cols[..4].join(",");
        let se: f64 = cols[4].parse().unwrap();
        let p: f64 = cols[5].parse().unwrap();
        if key != curve {
            curve = key;
            last_se = f64::NEG_INFINITY;
            last_p = 0.0;
        }
        check(se >= last_se && p > last_p && p <= 1.0, "CDF must be monotone");
        last_se = se;
        last_p = p;
    }

    let detail = if issues.is_empty() {
        "correlation, pilot-partition, count, range, determinism, and export checks all hold"
            .to_string()
    } else {
        issues.sort();
        issues.dedup();
        format!("violations: {}", issues.join(" | "))
    };
    report("c9 structural invariants smoke", issues.is_empty(), &detail);
}
