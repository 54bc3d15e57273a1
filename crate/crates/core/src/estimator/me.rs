use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::fit::{fit, FitConfig, FitResult, InitScheme};
use crate::density::SnMixture;
use crate::error::{Error, Result};
use crate::metrics::SIGMA2_DEGENERACY;
use crate::penalty::PenaltySpec;

/// Shapes at or beyond this magnitude are treated as divergent.
pub const ME_LAMBDA_FLAG: f64 = 30.0;
const LR_TOL: f64 = 1e-3;
const MAX_BISECTIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeResult {
    /// Modified shapes, in the component order of the input fit.
    pub lambda: Vec<f64>,
    /// Degrees of freedom: number of flagged components.
    pub nu: usize,
    /// Common shrink factor applied to flagged shapes (1 when none flagged).
    pub shrink: f64,
    /// Likelihood-ratio statistic at the returned shapes.
    pub lr: f64,
    pub critical: f64,
    /// Profile maximizer at the returned shapes.
    pub psi: SnMixture,
}

/// Shrinks divergent shapes of an MLE fit to the farthest point on the path
/// `t·λ̂` not rejected by the profile likelihood-ratio test at `level`.
pub fn profile_lrt_me(data: &[f64], mle_fit: &FitResult, level: f64) -> Result<MeResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0,1), got {level}")));
    }
    let psi_hat = &mle_fit.psi;
    if mle_fit.degenerate_sigma || psi_hat.components.iter().any(|c| c.sigma2 < SIGMA2_DEGENERACY) {
        return Err(Error::Validity(
            "the likelihood-ratio modification is not valid when a scale estimate has collapsed".into(),
        ));
    }
    let flagged: Vec<bool> = psi_hat.components.iter().map(|c| c.lambda.abs() >= ME_LAMBDA_FLAG).collect();
    let nu = flagged.iter().filter(|f| **f).count();
    let lambda_hat = psi_hat.lambdas();
    if nu == 0 {
        return Ok(MeResult { lambda: lambda_hat, nu, shrink: 1.0, lr: 0.0, critical: 0.0, psi: psi_hat.clone() });
    }
    let critical = ChiSquared::new(nu as f64)
        .map_err(|e| Error::domain(e.to_string()))?
        .inverse_cdf(1.0 - level);
    let l_hat = mle_fit.loglik;
    let p = psi_hat.order();

    let profile = |t: f64| -> Result<(f64, SnMixture)> {
        let mut start = psi_hat.clone();
        for (c, &f) in start.components.iter_mut().zip(&flagged) {
            if f {
                c.lambda *= t;
            }
        }
        let cfg = FitConfig::new(PenaltySpec::none(), InitScheme::Explicit(start)).fixed_lambda(flagged.clone());
        let r = fit(data, p, &cfg)?;
        Ok((2.0 * (l_hat - r.loglik), r.psi))
    };

    let (lr0, psi0) = profile(0.0)?;
    if lr0 <= critical {
        return Ok(finish(psi0, nu, 0.0, lr0, critical, &flagged, &lambda_hat));
    }
    // lo is rejected, hi is not.
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut lr_hi, mut psi_hi) = profile(1.0)?;
    for _ in 0..MAX_BISECTIONS {
        if (lr_hi - critical).abs() < LR_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (lr, psi) = profile(mid)?;
        if lr <= critical {
            hi = mid;
            lr_hi = lr;
            psi_hi = psi;
        } else {
            lo = mid;
        }
    }
    Ok(finish(psi_hi, nu, hi, lr_hi, critical, &flagged, &lambda_hat))
}

fn finish(psi: SnMixture, nu: usize, t: f64, lr: f64, critical: f64, flagged: &[bool], lambda_hat: &[f64]) -> MeResult {
    let lambda = lambda_hat.iter().zip(flagged).map(|(&l, &f)| if f { t * l } else { l }).collect();
    MeResult { lambda, nu, shrink: t, lr, critical, psi }
}
