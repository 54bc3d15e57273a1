//! Standard normal building blocks evaluated in the log domain.
//!
//! The lower tail (`t < -5`) goes through the Laplace continued fraction for
//! the Mills ratio, so `log Φ(t)` stays finite far past the point where
//! `Φ(t)` underflows and the truncated-normal moments keep full relative
//! precision.

use libm::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

/// `½·log(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the continued-fraction branch is used.
pub const TAIL_SEAM: f64 = -5.0;

#[inline]
pub fn norm_logpdf(t: f64) -> f64 {
    -0.5 * t * t - LN_SQRT_2PI
}

#[inline]
pub fn norm_pdf(t: f64) -> f64 {
    norm_logpdf(t).exp()
}

#[inline]
pub fn norm_cdf(t: f64) -> f64 {
    0.5 * erfc(-t * FRAC_1_SQRT_2)
}

/// Tail quantities of the Laplace continued fraction at `x = -t > 0`.
///
/// With `T_k = k / (x + T_{k+1})`, returns `(T_1, T_2)`. The Mills ratio
/// is `1 / (x + T_1)`.
fn mills_tails(x: f64) -> (f64, f64) {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..10_000 {
        let a = (j + 1) as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    let t2 = f;
    let t1 = 1.0 / (x + t2);
    (t1, t2)
}

/// `log Φ(t)`, finite for every finite `t`.
pub fn log_ndtr(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if t > 5.0 {
        (-0.5 * erfc(t * FRAC_1_SQRT_2)).ln_1p()
    } else if t >= TAIL_SEAM {
        (0.5 * erfc(-t * FRAC_1_SQRT_2)).ln()
    } else {
        let x = -t;
        let (t1, _) = mills_tails(x);
        norm_logpdf(t) - (x + t1).ln()
    }
}

/// Inverse Mills ratio `φ(t)/Φ(t)`.
pub fn inverse_mills(t: f64) -> f64 {
    truncated_moments(t).hazard
}

/// Moments of `Z | Z > -t` for standard normal `Z`, expressed through the
/// hazard `Δ = φ(t)/Φ(t)`.
///
/// `mean_shift = t + Δ` is `E[Z + t | Z > -t]`, and `var_factor = 1 − Δ(t + Δ)`
/// is `Var[Z | Z > -t]`. Both are computed without cancellation in the tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub hazard: f64,
    pub mean_shift: f64,
    pub var_factor: f64,
}

pub fn truncated_moments(t: f64) -> TruncatedMoments {
    if t >= TAIL_SEAM {
        let hazard = if t > 38.0 { 0.0 } else { norm_pdf(t) / norm_cdf(t) };
        let mean_shift = t + hazard;
        let var_factor = (1.0 - hazard * mean_shift).max(0.0);
        TruncatedMoments { hazard, mean_shift, var_factor }
    } else {
        let x = -t;
        let (t1, t2) = mills_tails(x);
        TruncatedMoments {
            hazard: x + t1,
            mean_shift: t1,
            var_factor: (t1 * (t2 - t1)).max(0.0),
        }
    }
}

/// `log(e^a + e^b + …)` with the maximum shifted out. Empty or all `-∞`
/// input gives `-∞`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}
