//! Saddlepoint approximation of the finite-blocklength decoding error
//! probability under scaled nearest-neighbor (mismatched) decoding.
//!
//! The receiver observes `n_d` channel uses of `y = g q + z` with
//! `q ~ CN(0, rho)`, `z ~ CN(0, sigma2)`, and decodes against its channel
//! estimate `g_hat` using the generalized information density
//!
//! ```text
//! i_s(q, y) = -s|y - g_hat q|^2 + s|y|^2 / (1 + s rho |g_hat|^2)
//!             + ln(1 + s rho |g_hat|^2),    s > 0.
//! ```
//!
//! The error probability of a rate-`R` (nats per channel use) code is
//! approximated through the cumulant generating function (CGF) of `-i_s`,
//! which is available in closed form for the conditionally Gaussian channel:
//! all cumulants reduce to three positive constants `zeta_a`, `zeta_b`, `mu`.
//! The approximation solves `R = -cgf'(eps)` for the saddlepoint `eps` and
//! applies one of three expansions depending on where `eps` lands:
//! `eps in [0, 1]` (rate between critical rate and generalized mutual
//! information), `eps > 1` (rate below critical rate), `eps < 0` (rate above
//! the generalized mutual information, error tending to one).

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::error::{Result, SimError};
use crate::C64;

/// Lower bound of the decoder-parameter search range for `s`.
pub const S_MIN: f64 = 1e-2;
/// Upper bound of the decoder-parameter search range for `s`.
pub const S_MAX: f64 = 1e2;

/// Argument above which `ln_q` switches from `erfc` to the asymptotic
/// expansion of the Gaussian tail.
const LN_Q_ASYMPTOTIC_SWITCH: f64 = 8.0;

/// Absolute tolerance of the saddlepoint root search (scaled by the bracket
/// magnitude for roots far from the origin).
const ROOT_TOL: f64 = 1e-10;

/// Natural log of the standard normal upper tail `Q(x)`.
///
/// Uses `erfc` directly for `x <= 8` and the asymptotic expansion
/// `Q(x) ~ phi(x)/x * (1 - 1/x^2 + 3/x^4 - ...)` beyond, where `erfc`
/// would keep working but downstream products `exp(a) * Q(x)` need the
/// log-domain form to survive exponents of several hundred.
pub fn ln_q(x: f64) -> f64 {
    if x <= LN_Q_ASYMPTOTIC_SWITCH {
        (0.5 * erfc(x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Terms (2k-1)!!/x^{2k}; at x = 8 the k = 7 term is ~1e-9 relative,
        // so truncation error is far below the erfc branch's rounding noise.
        let inv2 = 1.0 / (x * x);
        let mut series = 1.0;
        let mut term = 1.0;
        let mut sign = 1.0;
        for k in 1..=7u32 {
            term *= (2 * k - 1) as f64 * inv2;
            sign = -sign;
            series += sign * term;
        }
        -0.5 * x * x - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// Generalized information density of one channel use for decoder
/// parameter `s`, observation `y`, transmitted symbol `q`, channel
/// estimate `g_hat`, and symbol power `rho`.
pub fn info_density(s: f64, q: C64, y: C64, g_hat: C64, rho: f64) -> f64 {
    let c = s * rho * g_hat.norm_sqr();
    let resid = y - g_hat * q;
    -s * resid.norm_sqr() + s * y.norm_sqr() / (1.0 + c) + c.ln_1p()
}

/// Which expansion produced an error-probability value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `eps in [0, 1]`: rate between the critical rate and the generalized
    /// mutual information.
    Central,
    /// `eps > 1`: rate below the critical rate (very reliable regime).
    BelowCritical,
    /// `eps < 0`: rate above the generalized mutual information (error
    /// probability approaches one).
    AboveGmi,
}

/// Result of one saddlepoint evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EpsReport {
    /// Error probability clamped to `[0, 1]`.
    pub eps: f64,
    /// Raw approximation value before clamping.
    pub raw: f64,
    /// True when `raw` fell outside `[0, 1]`.
    pub clipped: bool,
    /// Expansion branch that was used.
    pub branch: Branch,
    /// Saddlepoint location solving `rate = -cgf'(eps)`.
    pub saddle: f64,
}

/// Closed-form CGF of the negative information density for one conditional
/// channel realization, together with everything needed to evaluate the
/// three-branch error-probability approximation.
#[derive(Debug, Clone)]
pub struct SaddlepointContext {
    /// True effective channel of this realization.
    pub g: C64,
    /// Channel estimate the decoder treats as truth.
    pub g_hat: C64,
    /// Symbol power (W).
    pub rho: f64,
    /// Conditional noise-plus-interference power (W).
    pub sigma2: f64,
    /// Decoder parameter.
    pub s: f64,
    /// Channel uses carrying the codeword.
    pub n_d: usize,
    /// `ln(1 + s rho |g_hat|^2)`.
    c3: f64,
    zeta_a: f64,
    zeta_b: f64,
    mu: f64,
    /// Linear CGF-denominator coefficient `zeta_b - zeta_a`.
    lin: f64,
    /// Quadratic CGF-denominator coefficient `zeta_a zeta_b (1 - mu)`.
    quad: f64,
    /// Lower edge of the CGF domain (may be `-inf`).
    eps_lo: f64,
    /// Upper edge of the CGF domain (may be `+inf`).
    eps_hi: f64,
}

impl SaddlepointContext {
    /// Builds the CGF constants for one conditional realization.
    ///
    /// Errors if `s`, `sigma2` are not strictly positive and finite, if
    /// `rho` is negative or non-finite, or if `n_d` is zero.
    pub fn new(g: C64, g_hat: C64, rho: f64, sigma2: f64, s: f64, n_d: usize) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(SimError::numerics(format!(
                "saddlepoint decoder parameter s must be positive and finite, got {s}"
            )));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(SimError::numerics(format!(
                "saddlepoint noise power must be positive and finite, got {sigma2}"
            )));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(SimError::numerics(format!(
                "saddlepoint symbol power must be non-negative and finite, got {rho}"
            )));
        }
        if n_d == 0 {
            return Err(SimError::numerics(
                "saddlepoint blocklength must be at least one channel use",
            ));
        }
        if !(g.re.is_finite() && g.im.is_finite() && g_hat.re.is_finite() && g_hat.im.is_finite()) {
            return Err(SimError::numerics(
                "saddlepoint channel coefficients must be finite",
            ));
        }
        let c = s * rho * g_hat.norm_sqr();
        let c3 = c.ln_1p();
        let zeta_a = s * (rho * (g - g_hat).norm_sqr() + sigma2);
        let zeta_b = s * (rho * g.norm_sqr() + sigma2) / (1.0 + c);
        // mu's numerator is |rho |g|^2 + sigma2 - conj(g) g_hat rho|^2 with the
        // first two terms real; form the complex difference explicitly.
        let cross = Complex64::new(rho * g.norm_sqr() + sigma2, 0.0) - g.conj() * g_hat * rho;
        let mu = s * s * cross.norm_sqr() / (zeta_a * zeta_b * (1.0 + c));
        let lin = zeta_b - zeta_a;
        let quad = zeta_a * zeta_b * (1.0 - mu);
        let (eps_lo, eps_hi) = cgf_domain(lin, quad);
        Ok(Self {
            g,
            g_hat,
            rho,
            sigma2,
            s,
            n_d,
            c3,
            zeta_a,
            zeta_b,
            mu,
            lin,
            quad,
            eps_lo,
            eps_hi,
        })
    }

    /// `zeta_a`, `zeta_b`, `mu` — the three CGF constants.
    pub fn constants(&self) -> (f64, f64, f64) {
        (self.zeta_a, self.zeta_b, self.mu)
    }

    /// Open interval on which the CGF is finite.
    pub fn domain(&self) -> (f64, f64) {
        (self.eps_lo, self.eps_hi)
    }

    /// CGF denominator `D(eps) = 1 + (zeta_b - zeta_a) eps
    /// - zeta_a zeta_b (1 - mu) eps^2`; positive exactly on the domain.
    fn denom(&self, eps: f64) -> f64 {
        1.0 + self.lin * eps - self.quad * eps * eps
    }

    fn denom_d1(&self, eps: f64) -> f64 {
        self.lin - 2.0 * self.quad * eps
    }

    fn check_domain(&self, eps: f64) -> Result<f64> {
        let d = self.denom(eps);
        if eps > self.eps_lo && eps < self.eps_hi && d > 0.0 {
            Ok(d)
        } else {
            Err(SimError::numerics(format!(
                "CGF argument {eps} outside domain ({}, {})",
                self.eps_lo, self.eps_hi
            )))
        }
    }

    /// CGF `upsilon(eps) = -eps ln(1 + s rho |g_hat|^2) - ln D(eps)`.
    pub fn cgf(&self, eps: f64) -> Result<f64> {
        let d = self.check_domain(eps)?;
        Ok(-eps * self.c3 - d.ln())
    }

    /// First CGF derivative `upsilon'(eps)`.
    pub fn cgf_d1(&self, eps: f64) -> Result<f64> {
        let d = self.check_domain(eps)?;
        Ok(-self.c3 - self.denom_d1(eps) / d)
    }

    /// Second CGF derivative `upsilon''(eps)`; positive on the domain for
    /// any non-degenerate channel.
    pub fn cgf_d2(&self, eps: f64) -> Result<f64> {
        let d = self.check_domain(eps)?;
        let r = self.denom_d1(eps) / d;
        Ok(r * r + 2.0 * self.quad / d)
    }

    /// Generalized mutual information `-upsilon'(0)` in nats per channel
    /// use; the largest rate with a positive error exponent.
    pub fn gmi(&self) -> f64 {
        self.c3 + self.lin
    }

    /// Critical rate `-upsilon'(1)`, when `1` lies inside the CGF domain.
    pub fn critical_rate(&self) -> Option<f64> {
        self.cgf_d1(1.0).ok().map(|v| -v)
    }
}

/// Domain of the CGF: the connected component of `{D > 0}` containing zero,
/// where `D(eps) = 1 + lin*eps - quad*eps^2` and `D(0) = 1`.
fn cgf_domain(lin: f64, quad: f64) -> (f64, f64) {
    if quad > 0.0 {
        // Concave parabola with D(0) = 1: two real roots bracketing zero.
        let disc = (lin * lin + 4.0 * quad).sqrt();
        ((lin - disc) / (2.0 * quad), (lin + disc) / (2.0 * quad))
    } else if quad == 0.0 {
        if lin > 0.0 {
            (-1.0 / lin, f64::INFINITY)
        } else if lin < 0.0 {
            (f64::NEG_INFINITY, -1.0 / lin)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    } else {
        // Convex parabola with D(0) = 1: zero, one, or two roots on the same
        // side of the origin; the component containing zero is bounded only
        // on that side.
        let disc = lin * lin + 4.0 * quad;
        if disc <= 0.0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let sq = disc.sqrt();
        let r1 = (lin - sq) / (2.0 * quad);
        let r2 = (lin + sq) / (2.0 * quad);
        let (lo_root, hi_root) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        if lo_root > 0.0 {
            (f64::NEG_INFINITY, lo_root)
        } else if hi_root < 0.0 {
            (hi_root, f64::INFINITY)
        } else {
            // Roots straddle zero with a convex D(0) = 1 > 0: impossible,
            // but fall back to the full line rather than panic.
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }
}

/// Solves `rate = -cgf'(eps)` by bisection.
///
/// `-cgf'` is strictly decreasing, equals the generalized mutual information
/// at zero, and diverges toward the domain edges, so a sign change always
/// exists when a root does. The bracket grows geometrically from zero toward
/// the relevant domain edge; failure to find a sign change is reported with
/// the bracket diagnostics.
fn solve_saddle(ctx: &SaddlepointContext, rate: f64) -> Result<f64> {
    // phi(eps) = -cgf'(eps) - rate; None when eps fell out of the domain
    // (treated as the overshot side during bracketing/bisection).
    let phi = |eps: f64| ctx.cgf_d1(eps).ok().map(|v| -v - rate);
    let f0 = ctx.gmi() - rate;
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let toward_upper = f0 > 0.0;
    let edge = if toward_upper { ctx.eps_hi } else { ctx.eps_lo };

    // Grow the bracket from 0 toward the edge until phi changes sign.
    let mut lo = 0.0_f64;
    let mut hi = None;
    for k in 1..=70u32 {
        let cand = if edge.is_finite() {
            edge * (1.0 - 0.5_f64.powi(k as i32))
        } else if toward_upper {
            2.0_f64.powi(k as i32 - 1)
        } else {
            -(2.0_f64.powi(k as i32 - 1))
        };
        match phi(cand) {
            Some(v) if (v > 0.0) == toward_upper => lo = cand,
            // Sign flipped, or the candidate rounded out of the domain right
            // at the edge where phi has the flipped sign anyway.
            _ => {
                hi = Some(cand);
                break;
            }
        }
    }
    let Some(mut hi) = hi else {
        return Err(SimError::numerics(format!(
            "saddlepoint root bracket not found: rate {rate}, gmi {}, domain ({}, {}), \
             last bracket end {lo}",
            ctx.gmi(),
            ctx.eps_lo,
            ctx.eps_hi
        )));
    };

    // Bisection; `lo` keeps the sign of phi(0), `hi` the flipped side.
    for _ in 0..500 {
        let scale = 1.0_f64.max(lo.abs()).max(hi.abs());
        if (hi - lo).abs() <= ROOT_TOL * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match phi(mid) {
            Some(v) if (v > 0.0) == toward_upper => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ln Psi(l)` with `Psi(l) = exp(k l^2 / 2) Q(l sqrt(k))` for `k > 0`.
fn ln_psi(l: f64, k: f64) -> f64 {
    0.5 * k * l * l + ln_q(l * k.sqrt())
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// Saddlepoint approximation of the error probability at `rate` nats per
/// channel use for the conditional channel in `ctx`.
///
/// Solves for the saddlepoint, evaluates the branch expansion in the log
/// domain, clamps the result to `[0, 1]`, and reports which branch fired
/// along with the raw (unclamped) value. Errors signal a failed root search,
/// a non-convex CGF (degenerate channel), or a non-finite result; callers
/// count such instances and skip them.
pub fn saddlepoint_epsilon(ctx: &SaddlepointContext, rate: f64) -> Result<EpsReport> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(SimError::numerics(format!(
            "code rate must be positive and finite, got {rate}"
        )));
    }
    let saddle = solve_saddle(ctx, rate)?;
    let n = ctx.n_d as f64;

    let (raw, branch) = if (0.0..=1.0).contains(&saddle) {
        let v = ctx.cgf(saddle)?;
        let v2 = ctx.cgf_d2(saddle)?;
        if v2 <= 0.0 {
            return Err(SimError::numerics(format!(
                "CGF not convex at saddlepoint {saddle}: second derivative {v2}"
            )));
        }
        debug_assert!(
            rate <= ctx.gmi() + 1e-6 * (1.0 + rate),
            "central branch requires rate <= GMI"
        );
        let k = n * v2;
        let ln_pref = n * (v + saddle * rate);
        let sum = log_sum_exp(ln_psi(saddle, k), ln_psi(1.0 - saddle, k));
        ((ln_pref + sum).exp(), Branch::Central)
    } else if saddle > 1.0 {
        let v1 = ctx.cgf(1.0)?;
        let v2 = ctx.cgf_d2(1.0)?;
        if v2 <= 0.0 {
            return Err(SimError::numerics(format!(
                "CGF not convex at unit argument: second derivative {v2}"
            )));
        }
        let r_cr = -ctx.cgf_d1(1.0)?;
        debug_assert!(
            rate <= r_cr + 1e-6 * (1.0 + rate),
            "below-critical branch requires rate <= critical rate"
        );
        let k = n * v2;
        let sk = k.sqrt();
        let delta = n * (r_cr - rate);
        let t1 = delta + 0.5 * k + ln_q(sk + delta / sk);
        let t2 = ln_q(-delta / sk);
        let ln_pref = n * (v1 + rate);
        ((ln_pref + log_sum_exp(t1, t2)).exp(), Branch::BelowCritical)
    } else {
        let v = ctx.cgf(saddle)?;
        let v2 = ctx.cgf_d2(saddle)?;
        if v2 <= 0.0 {
            return Err(SimError::numerics(format!(
                "CGF not convex at saddlepoint {saddle}: second derivative {v2}"
            )));
        }
        debug_assert!(
            rate >= ctx.gmi() - 1e-6 * (1.0 + rate),
            "above-GMI branch requires rate >= GMI"
        );
        let k = n * v2;
        let ln_pref = n * (v + saddle * rate);
        // Psi is decreasing in its first argument, so with -saddle < 1 -
        // saddle the difference below is non-negative.
        let a = (ln_pref + ln_psi(-saddle, k)).exp();
        let b = (ln_pref + ln_psi(1.0 - saddle, k)).exp();
        (1.0 - (a - b), Branch::AboveGmi)
    };

    if !raw.is_finite() {
        return Err(SimError::numerics(format!(
            "saddlepoint approximation produced a non-finite value at rate {rate}, \
             saddle {saddle}"
        )));
    }
    Ok(EpsReport {
        eps: raw.clamp(0.0, 1.0),
        raw,
        clipped: !(0.0..=1.0).contains(&raw),
        branch,
        saddle,
    })
}
