//! Monte Carlo evaluation of the random-coding union bound with parameter
//! `s` (RCUS) — the quantity the saddlepoint expansion approximates.
//!
//! For an `m`-codeword Gaussian codebook over `n_d` channel uses the bound is
//!
//! ```text
//! eps = Pr[ sum_n i_s(q[n], y[n]) <= ln((m - 1) / r) ],    r ~ U(0, 1),
//! ```
//!
//! with `q ~ CN(0, rho)` i.i.d., `y = g q + z`, `z ~ CN(0, sigma2)` i.i.d.
//! This module samples that probability literally — fresh symbol, noise, and
//! threshold draws per codeword — so it shares no numerics with the
//! saddlepoint path beyond the scalar information density.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::estimation::standard_cn_matrix;
use crate::urllc::saddlepoint::info_density;
use crate::C64;

/// `ln(m - 1)` for `m = exp(n_d * rate)` codewords, evaluated stably:
/// `ln(e^x - 1) = x + ln(1 - e^{-x})` avoids overflow for large payloads.
pub fn ln_m_minus_one(n_d: usize, rate_nats: f64) -> f64 {
    let x = n_d as f64 * rate_nats;
    x + (-(-x).exp()).ln_1p()
}

/// Draws one standard complex normal scalar.
fn draw_cn(rng: &mut ChaCha8Rng) -> C64 {
    standard_cn_matrix(1, 1, rng)[[0, 0]]
}

/// Sum of the generalized information density over one codeword's `n_d`
/// channel uses, with fresh symbol and noise draws.
pub fn sample_info_density_sum(
    g: C64,
    g_hat: C64,
    rho: f64,
    sigma2: f64,
    s: f64,
    n_d: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let sqrt_rho = rho.sqrt();
    let sqrt_sigma = sigma2.sqrt();
    let mut acc = 0.0;
    for _ in 0..n_d {
        let q = draw_cn(rng) * sqrt_rho;
        let z = draw_cn(rng) * sqrt_sigma;
        let y = g * q + z;
        acc += info_density(s, q, y, g_hat, rho);
    }
    acc
}

/// Monte Carlo RCUS error probability for one conditional channel: the
/// fraction of `samples` draws in which the accumulated information density
/// falls below the randomized threshold `ln(m - 1) - ln(r)`.
pub fn rcus_epsilon(
    g: C64,
    g_hat: C64,
    rho: f64,
    sigma2: f64,
    s: f64,
    n_d: usize,
    rate_nats: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    assert!(samples > 0, "RCUS needs at least one sample");
    let base = ln_m_minus_one(n_d, rate_nats);
    let mut hits = 0usize;
    for _ in 0..samples {
        let acc = sample_info_density_sum(g, g_hat, rho, sigma2, s, n_d, rng);
        let r: f64 = rng.random();
        if acc <= base - r.ln() {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}
