//! Conditional maximization steps of the penalized ECM algorithm and the
//! expected complete-data objective they ascend.

use super::estep::EStepCache;
use super::optim::{brent_max, brent_root, cubic_roots};
use crate::density::{delta_of_lambda, lambda_of_delta, SnMixture};
use crate::error::{Error, Result};
use crate::penalty::{penalty_lambda, penalty_lambda_azzalini, LambdaPenalty, PenaltySpec};

/// Closest approach to `|δ| = 1` used when the shape equation has no
/// interior root.
pub const DELTA_EDGE: f64 = 1.0 - 1e-9;

/// Weighted sums for one component at a fixed location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentStats {
    /// `Σ_j α_ij`
    pub weight: f64,
    /// `Σ_j α_ij γ_ij`
    pub s0: f64,
    /// `Σ_j α_ij β_ij (x_j − μ_i)`
    pub s1: f64,
    /// `Σ_j α_ij (x_j − μ_i)²`
    pub s2: f64,
}

pub fn component_stats(data: &[f64], cache: &EStepCache, i: usize, mu: f64) -> ComponentStats {
    let mut st = ComponentStats { weight: 0.0, s0: 0.0, s1: 0.0, s2: 0.0 };
    for (j, &x) in data.iter().enumerate() {
        let a = cache.alpha(j, i);
        let r = x - mu;
        st.weight += a;
        st.s0 += a * cache.gamma(j, i);
        st.s1 += a * cache.beta(j, i) * r;
        st.s2 += a * r * r;
    }
    st
}

fn check_dims(data: &[f64], cache: &EStepCache, vectors: &[&[f64]]) -> Result<()> {
    if data.len() != cache.n() {
        return Err(Error::Dimension { expected: cache.n(), found: data.len() });
    }
    for v in vectors {
        if v.len() != cache.p() {
            return Err(Error::Dimension { expected: cache.p(), found: v.len() });
        }
    }
    Ok(())
}

/// Location update for one component given `δ` from the previous iterate.
pub(crate) fn mu_update(data: &[f64], cache: &EStepCache, i: usize, delta: f64) -> (f64, f64) {
    let (mut w, mut wx, mut wb) = (0.0, 0.0, 0.0);
    for (j, &x) in data.iter().enumerate() {
        let a = cache.alpha(j, i);
        w += a;
        wx += a * x;
        wb += a * cache.beta(j, i);
    }
    ((wx - delta * wb) / w, w)
}

/// Scale update with the τ-augmented complete data.
#[inline]
pub(crate) fn sigma2_update(st: &ComponentStats, delta: f64, a_n: f64, s_n2: f64) -> f64 {
    let u = (1.0 - delta) * (1.0 + delta);
    (st.s0 - 2.0 * delta * st.s1 + st.s2 + 2.0 * a_n * u * s_n2) / (2.0 * u * (a_n + st.weight))
}

/// Scale update for a component whose shape is held at zero. The latent τ
/// then carries no information about the scale and the complete data reduce
/// to `(X, Z)`.
#[inline]
pub(crate) fn sigma2_update_symmetric(st: &ComponentStats, a_n: f64, s_n2: f64) -> f64 {
    (st.s2 + 2.0 * a_n * s_n2) / (st.weight + 2.0 * a_n)
}

/// Objective restricted to one component's shape, in the `δ` coordinate.
pub(crate) fn q_shape(st: &ComponentStats, sigma2: f64, delta: f64, pen: &LambdaPenalty) -> f64 {
    let lambda = lambda_of_delta(delta);
    q_shape_lambda(st, sigma2, lambda, pen)
}

pub(crate) fn q_shape_lambda(st: &ComponentStats, sigma2: f64, lambda: f64, pen: &LambdaPenalty) -> f64 {
    let l2 = lambda * lambda;
    let delta = delta_of_lambda(lambda);
    let quad = st.s0 - 2.0 * delta * st.s1 + st.s2;
    let pen_value = match *pen {
        LambdaPenalty::None => 0.0,
        LambdaPenalty::Proposed { b_n } => penalty_lambda(lambda, b_n),
        LambdaPenalty::Azzalini { c1, c2 } => penalty_lambda_azzalini(lambda, c1, c2),
    };
    0.5 * st.weight * l2.ln_1p() - quad * (1.0 + l2) / (2.0 * sigma2) + pen_value
}

/// Result of one shape update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeUpdate {
    pub lambda: f64,
    /// No interior stationary point; the edge of `(-1, 1)` was used.
    pub at_edge: bool,
}

fn pick_best(st: &ComponentStats, sigma2: f64, pen: &LambdaPenalty, candidates: &[f64]) -> Option<f64> {
    candidates
        .iter()
        .copied()
        .filter(|d| d.abs() < 1.0)
        .map(|d| (d, q_shape(st, sigma2, d, pen)))
        .filter(|(_, v)| !v.is_nan())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(d, _)| d)
}

fn edge_update(st: &ComponentStats, sigma2: f64, pen: &LambdaPenalty) -> ShapeUpdate {
    let d = pick_best(st, sigma2, pen, &[-DELTA_EDGE, DELTA_EDGE]).unwrap_or(0.0);
    ShapeUpdate { lambda: lambda_of_delta(d), at_edge: true }
}

/// Shape update under the proposed penalty (or none): real roots of
/// `−δ³σ²(2b_n + A) + (1 + δ²)S₁ − δ(S₀ + S₂ − σ²A) = 0`.
pub(crate) fn lambda_update_cubic(st: &ComponentStats, sigma2: f64, b_n: f64) -> ShapeUpdate {
    let pen = LambdaPenalty::Proposed { b_n };
    let roots = cubic_roots(
        -sigma2 * (2.0 * b_n + st.weight),
        st.s1,
        -(st.s0 + st.s2 - sigma2 * st.weight),
        st.s1,
    );
    match pick_best(st, sigma2, &pen, &roots) {
        Some(d) => ShapeUpdate { lambda: lambda_of_delta(d), at_edge: false },
        None => edge_update(st, sigma2, &pen),
    }
}

/// Stationarity equation of the shape under the Azzalini penalty.
pub(crate) fn azzalini_equation(st: &ComponentStats, sigma2: f64, delta: f64, c1: f64, c2: f64) -> f64 {
    let u = (1.0 - delta) * (1.0 + delta);
    let w = 1.0 - (1.0 - c2) * delta * delta;
    sigma2 * delta * u * (st.weight - 2.0 * c1 * c2 / w) + (1.0 + delta * delta) * st.s1 - delta * (st.s0 + st.s2)
}

const AZZALINI_GRID: usize = 400;

pub(crate) fn lambda_update_azzalini(st: &ComponentStats, sigma2: f64, c1: f64, c2: f64) -> ShapeUpdate {
    let pen = LambdaPenalty::Azzalini { c1, c2 };
    let h = |d: f64| azzalini_equation(st, sigma2, d, c1, c2);
    let step = 2.0 * DELTA_EDGE / AZZALINI_GRID as f64;
    let mut candidates = Vec::new();
    let mut prev_d = -DELTA_EDGE;
    let mut prev_h = h(prev_d);
    let (mut best_grid, mut best_q) = (prev_d, q_shape(st, sigma2, prev_d, &pen));
    for k in 1..=AZZALINI_GRID {
        let d = (-DELTA_EDGE + step * k as f64).min(DELTA_EDGE);
        let hv = h(d);
        if hv == 0.0 {
            candidates.push(d);
        } else if prev_h.signum() != hv.signum() && prev_h != 0.0 {
            if let Some(r) = brent_root(h, prev_d, d, 1e-15) {
                candidates.push(r);
            }
        }
        let qv = q_shape(st, sigma2, d, &pen);
        if qv > best_q {
            best_q = qv;
            best_grid = d;
        }
        prev_d = d;
        prev_h = hv;
    }
    if candidates.is_empty() {
        return edge_update(st, sigma2, &pen);
    }
    // guard against a root pair hidden inside one grid cell
    let (refined, _) = brent_max(
        |d| q_shape(st, sigma2, d, &pen),
        (best_grid - step).max(-DELTA_EDGE),
        (best_grid + step).min(DELTA_EDGE),
        1e-13,
    );
    let mut d = pick_best(st, sigma2, &pen, &candidates).unwrap_or(0.0);
    let q_root = q_shape(st, sigma2, d, &pen);
    if q_shape(st, sigma2, refined, &pen) > q_root + 1e-12 * (1.0 + q_root.abs()) {
        d = refined;
    }
    ShapeUpdate { lambda: lambda_of_delta(d), at_edge: false }
}

pub(crate) fn lambda_update(st: &ComponentStats, sigma2: f64, pen: &LambdaPenalty) -> ShapeUpdate {
    match *pen {
        LambdaPenalty::None => lambda_update_cubic(st, sigma2, 0.0),
        LambdaPenalty::Proposed { b_n } => lambda_update_cubic(st, sigma2, b_n),
        LambdaPenalty::Azzalini { c1, c2 } => lambda_update_azzalini(st, sigma2, c1, c2),
    }
}

/// CM-step 1: `π_i = n⁻¹ Σ_j α_ij`, renormalized.
pub fn cm_step_pi(cache: &EStepCache) -> Vec<f64> {
    let mut w = cache.column_sums();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// CM-step 2.
pub fn cm_step_mu(data: &[f64], cache: &EStepCache, lambda_current: &[f64]) -> Result<Vec<f64>> {
    check_dims(data, cache, &[lambda_current])?;
    (0..cache.p())
        .map(|i| {
            let (mu, w) = mu_update(data, cache, i, delta_of_lambda(lambda_current[i]));
            if w > 0.0 && mu.is_finite() {
                Ok(mu)
            } else {
                Err(Error::DegenerateComponent { index: i, reason: "zero total responsibility".into() })
            }
        })
        .collect()
}

/// CM-step 3.
pub fn cm_step_sigma2(
    data: &[f64],
    cache: &EStepCache,
    mu_new: &[f64],
    lambda_current: &[f64],
    pen: &PenaltySpec,
) -> Result<Vec<f64>> {
    check_dims(data, cache, &[mu_new, lambda_current])?;
    let (a_n, s_n2) = pen.sigma_terms();
    (0..cache.p())
        .map(|i| {
            let st = component_stats(data, cache, i, mu_new[i]);
            let s2 = sigma2_update(&st, delta_of_lambda(lambda_current[i]), a_n, s_n2);
            if s2 > 0.0 && s2.is_finite() {
                Ok(s2)
            } else {
                Err(Error::DegenerateComponent { index: i, reason: format!("scale update gave {s2}") })
            }
        })
        .collect()
}

/// CM-step 4 for the proposed shape penalty (or no penalty).
pub fn cm_step_lambda(
    data: &[f64],
    cache: &EStepCache,
    mu_new: &[f64],
    sigma2_new: &[f64],
    pen: &PenaltySpec,
) -> Result<Vec<f64>> {
    check_dims(data, cache, &[mu_new, sigma2_new])?;
    let b_n = match pen.lambda {
        LambdaPenalty::None => 0.0,
        LambdaPenalty::Proposed { b_n } => b_n,
        LambdaPenalty::Azzalini { .. } => {
            return Err(Error::domain("cm_step_lambda needs the proposed shape penalty; use cm_step_lambda_azzalini"))
        }
    };
    Ok((0..cache.p())
        .map(|i| lambda_update_cubic(&component_stats(data, cache, i, mu_new[i]), sigma2_new[i], b_n).lambda)
        .collect())
}

/// CM-step 4 under the Azzalini penalty.
pub fn cm_step_lambda_azzalini(
    data: &[f64],
    cache: &EStepCache,
    mu_new: &[f64],
    sigma2_new: &[f64],
    c1: f64,
    c2: f64,
) -> Result<Vec<f64>> {
    check_dims(data, cache, &[mu_new, sigma2_new])?;
    if !(c1 >= 0.0 && c2 > 0.0) {
        return Err(Error::domain(format!("invalid Azzalini constants c1={c1} c2={c2}")));
    }
    Ok((0..cache.p())
        .map(|i| {
            let st = component_stats(data, cache, i, mu_new[i]);
            if c1 == 0.0 {
                lambda_update_cubic(&st, sigma2_new[i], 0.0).lambda
            } else {
                lambda_update_azzalini(&st, sigma2_new[i], c1, c2).lambda
            }
        })
        .collect())
}

/// Penalized expected complete-data log-likelihood `Q(Ψ | Ψ^(t))`, additive
/// constants dropped.
pub fn q_function(psi: &SnMixture, data: &[f64], cache: &EStepCache, pen: &PenaltySpec) -> Result<f64> {
    psi.validate()?;
    if psi.order() != cache.p() {
        return Err(Error::Dimension { expected: cache.p(), found: psi.order() });
    }
    check_dims(data, cache, &[])?;
    let mut total = 0.0;
    for (i, c) in psi.components.iter().enumerate() {
        let st = component_stats(data, cache, i, c.mu);
        if st.weight > 0.0 {
            total += st.weight * psi.weights[i].ln();
        }
        total += -st.weight * c.sigma2.ln() + q_shape_lambda(&st, c.sigma2, c.lambda, &pen.lambda);
        total += pen.sigma_value(c.sigma2);
    }
    Ok(total)
}
