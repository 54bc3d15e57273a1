//! Penalties on component scales and shapes, and the penalized objective.

use serde::{Deserialize, Serialize};

use crate::density::SnMixture;
use crate::error::{Error, Result};

/// Default `c_a` in `a_n = c_a / n`.
pub const DEFAULT_C_A: f64 = 1.0;
/// Default `c_b` in `b_n = c_b / log n`.
pub const DEFAULT_C_B: f64 = 0.05;
/// Azzalini–Arellano-Valle constants.
pub const AZZALINI_C1: f64 = 0.876;
pub const AZZALINI_C2: f64 = 0.856;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaPenalty {
    None,
    /// `-a_n (s_n²/σ² + log(σ²/s_n²) - 1)`.
    Proposed { a_n: f64, s_n2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaPenalty {
    None,
    /// `-b_n (λ² - log(1 + λ²))`.
    Proposed { b_n: f64 },
    /// `-c₁ log(1 + c₂ λ²)`.
    Azzalini { c1: f64, c2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub sigma: SigmaPenalty,
    pub lambda: LambdaPenalty,
}

impl Default for PenaltySpec {
    fn default() -> Self {
        Self::none()
    }
}

impl PenaltySpec {
    /// No penalty: the plain log-likelihood.
    pub const fn none() -> Self {
        PenaltySpec { sigma: SigmaPenalty::None, lambda: LambdaPenalty::None }
    }

    /// Both proposed penalties with `a_n = c_a/n`, `b_n = c_b/log n` and
    /// `s_n²` the sample variance of `data`.
    pub fn proposed(data: &[f64], c_a: f64, c_b: f64) -> Result<Self> {
        let (a_n, b_n) = tuning(data.len(), c_a, c_b)?;
        let s_n2 = sample_variance(data)?;
        Ok(PenaltySpec { sigma: SigmaPenalty::Proposed { a_n, s_n2 }, lambda: LambdaPenalty::Proposed { b_n } })
    }

    /// Shape penalty only (`σ` unpenalized).
    pub fn proposed_lambda_only(n: usize, c_b: f64) -> Result<Self> {
        let (_, b_n) = tuning(n, 0.0, c_b)?;
        Ok(PenaltySpec { sigma: SigmaPenalty::None, lambda: LambdaPenalty::Proposed { b_n } })
    }

    pub fn azzalini() -> Self {
        PenaltySpec {
            sigma: SigmaPenalty::None,
            lambda: LambdaPenalty::Azzalini { c1: AZZALINI_C1, c2: AZZALINI_C2 },
        }
    }

    pub fn with_sigma(mut self, sigma: SigmaPenalty) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn is_none(&self) -> bool {
        matches!(self.sigma, SigmaPenalty::None) && matches!(self.lambda, LambdaPenalty::None)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self.sigma {
            SigmaPenalty::None => {}
            SigmaPenalty::Proposed { a_n, s_n2 } => {
                if !ok(a_n) || !(s_n2 > 0.0 && s_n2.is_finite()) {
                    return Err(Error::domain(format!("invalid sigma penalty a_n={a_n} s_n2={s_n2}")));
                }
            }
        }
        match self.lambda {
            LambdaPenalty::None => {}
            LambdaPenalty::Proposed { b_n } if ok(b_n) => {}
            LambdaPenalty::Azzalini { c1, c2 } if ok(c1) && c2 > 0.0 && c2.is_finite() => {}
            other => return Err(Error::domain(format!("invalid lambda penalty {other:?}"))),
        }
        Ok(())
    }

    /// `(a_n, s_n²)`, with `a_n = 0` when the scale penalty is off.
    pub(crate) fn sigma_terms(&self) -> (f64, f64) {
        match self.sigma {
            SigmaPenalty::None => (0.0, 1.0),
            SigmaPenalty::Proposed { a_n, s_n2 } => (a_n, s_n2),
        }
    }

    pub fn sigma_value(&self, sigma2: f64) -> f64 {
        match self.sigma {
            SigmaPenalty::None => 0.0,
            SigmaPenalty::Proposed { a_n, s_n2 } => sigma_term(sigma2, a_n, s_n2),
        }
    }

    pub fn lambda_value(&self, lambda: f64) -> f64 {
        match self.lambda {
            LambdaPenalty::None => 0.0,
            LambdaPenalty::Proposed { b_n } => penalty_lambda(lambda, b_n),
            LambdaPenalty::Azzalini { c1, c2 } => penalty_lambda_azzalini(lambda, c1, c2),
        }
    }

    /// `Σ_k p_n(σ_k) + Σ_k p_n(λ_k)`.
    pub fn total(&self, psi: &SnMixture) -> f64 {
        psi.components.iter().map(|c| self.sigma_value(c.sigma2) + self.lambda_value(c.lambda)).sum()
    }
}

#[inline]
fn sigma_term(sigma2: f64, a_n: f64, s_n2: f64) -> f64 {
    if a_n == 0.0 {
        return 0.0;
    }
    let r = s_n2 / sigma2;
    -a_n * (r - r.ln() - 1.0)
}

pub fn penalty_sigma(sigma2: f64, a_n: f64, s_n2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(s_n2 > 0.0) || !(a_n >= 0.0) {
        return Err(Error::domain(format!("invalid tuning a_n={a_n} s_n2={s_n2}")));
    }
    Ok(sigma_term(sigma2, a_n, s_n2))
}

pub fn penalty_lambda(lambda: f64, b_n: f64) -> f64 {
    if b_n == 0.0 {
        return 0.0;
    }
    let l2 = lambda * lambda;
    -b_n * (l2 - l2.ln_1p())
}

pub fn penalty_lambda_azzalini(lambda: f64, c1: f64, c2: f64) -> f64 {
    -c1 * (c2 * lambda * lambda).ln_1p()
}

/// `(a_n, b_n) = (c_a/n, c_b/log n)`.
pub fn tuning(n: usize, c_a: f64, c_b: f64) -> Result<(f64, f64)> {
    tuning_real(n as f64, c_a, c_b)
}

pub(crate) fn tuning_real(n: f64, c_a: f64, c_b: f64) -> Result<(f64, f64)> {
    if !(n >= 2.0) {
        return Err(Error::domain(format!("tuning requires n >= 2, got {n}")));
    }
    Ok((c_a / n, c_b / n.ln()))
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance(data: &[f64]) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::domain("sample variance needs at least two observations"));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    Ok(data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// `pℓ_n(Ψ) = ℓ_n(Ψ) + Σ p_n(σ_k) + Σ p_n(λ_k)`.
pub fn penalized_loglik(data: &[f64], psi: &SnMixture, pen: &PenaltySpec) -> Result<f64> {
    pen.validate()?;
    let ll = crate::density::loglik(data, psi)?;
    if pen.is_none() {
        return Ok(ll);
    }
    Ok(ll + pen.total(psi))
}
