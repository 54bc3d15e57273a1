use crate::density::SnMixture;
use crate::error::{Error, Result};
use crate::special::{log_sum_exp, truncated_moments};

/// Conditional expectations of the latent quantities given the data.
///
/// Matrices are stored row-major, one row per observation and one column per
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepCache {
    n: usize,
    p: usize,
    /// Posterior membership probabilities `α_ij`.
    pub alpha: Vec<f64>,
    /// `β_ij = E[τ | x_j, Z_ij = 1]`.
    pub beta: Vec<f64>,
    /// `γ_ij = E[τ² | x_j, Z_ij = 1]`.
    pub gamma: Vec<f64>,
    /// Log-likelihood of the parameters the cache was computed at.
    pub loglik: f64,
}

impl EStepCache {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn alpha(&self, j: usize, i: usize) -> f64 {
        self.alpha[j * self.p + i]
    }

    #[inline]
    pub fn beta(&self, j: usize, i: usize) -> f64 {
        self.beta[j * self.p + i]
    }

    #[inline]
    pub fn gamma(&self, j: usize, i: usize) -> f64 {
        self.gamma[j * self.p + i]
    }

    /// `Σ_j α_ij` for each component.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.p];
        for row in self.alpha.chunks_exact(self.p) {
            for (s, a) in sums.iter_mut().zip(row) {
                *s += a;
            }
        }
        sums
    }

    /// Assembles a cache from explicit matrices (testing and diagnostics).
    pub fn from_parts(n: usize, p: usize, alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        for v in [&alpha, &beta, &gamma] {
            if v.len() != n * p {
                return Err(Error::Dimension { expected: n * p, found: v.len() });
            }
        }
        Ok(EStepCache { n, p, alpha, beta, gamma, loglik: f64::NAN })
    }
}

pub fn e_step(data: &[f64], psi: &SnMixture) -> Result<EStepCache> {
    if data.is_empty() {
        return Err(Error::domain("E-step on empty data"));
    }
    psi.validate()?;
    Ok(e_step_unchecked(data, psi))
}

pub(crate) fn e_step_unchecked(data: &[f64], psi: &SnMixture) -> EStepCache {
    let n = data.len();
    let p = psi.order();
    let mut alpha = vec![0.0; n * p];
    let mut beta = vec![0.0; n * p];
    let mut gamma = vec![0.0; n * p];
    let mut log_terms = vec![f64::NEG_INFINITY; p];
    let mut loglik = 0.0;

    let log_weights: Vec<f64> = psi.weights.iter().map(|w| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY }).collect();
    let scales: Vec<(f64, f64)> = psi
        .components
        .iter()
        .map(|c| {
            let sigma = c.sigma();
            // σ_τ = σ √(1 − δ²) = σ / √(1 + λ²)
            (sigma, sigma / 1.0_f64.hypot(c.lambda))
        })
        .collect();

    for (j, &x) in data.iter().enumerate() {
        let row = j * p;
        for (i, c) in psi.components.iter().enumerate() {
            log_terms[i] = if log_weights[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                log_weights[i] + c.logpdf_unchecked(x)
            };
            let (sigma, sigma_tau) = scales[i];
            let t = c.lambda * (x - c.mu) / sigma;
            let m = truncated_moments(t);
            let b = sigma_tau * m.mean_shift;
            beta[row + i] = b;
            gamma[row + i] = b * b + sigma_tau * sigma_tau * m.var_factor;
        }
        let total = log_sum_exp(&log_terms);
        loglik += total;
        if total.is_finite() {
            for i in 0..p {
                alpha[row + i] = (log_terms[i] - total).exp();
            }
            let s: f64 = alpha[row..row + p].iter().sum();
            alpha[row..row + p].iter_mut().for_each(|a| *a /= s);
        } else {
            // every component assigns zero density; spread by weight
            alpha[row..row + p].copy_from_slice(&psi.weights);
        }
    }
    EStepCache { n, p, alpha, beta, gamma, loglik }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SnComponent;

    #[test]
    fn single_component_has_unit_membership() {
        let psi = SnMixture::single(SnComponent::new(0.0, 2.0, 3.0).unwrap());
        let cache = e_step(&[-1.0, 0.0, 2.5], &psi).unwrap();
        assert!(cache.alpha.iter().all(|a| *a == 1.0));
    }

    #[test]
    fn symmetric_components_give_half_normal_moments() {
        let psi = SnMixture::new(
            vec![0.5, 0.5],
            vec![SnComponent::new(-1.0, 4.0, 0.0).unwrap(), SnComponent::new(1.0, 0.25, 0.0).unwrap()],
        )
        .unwrap();
        let cache = e_step(&[-2.0, 0.3, 1.1], &psi).unwrap();
        for j in 0..3 {
            assert!((cache.beta(j, 0) - 2.0 * 0.797_884_560_802_865_4).abs() < 1e-14);
            assert!((cache.beta(j, 1) - 0.5 * 0.797_884_560_802_865_4).abs() < 1e-14);
            assert!((cache.gamma(j, 0) - 4.0).abs() < 1e-13);
            assert!((cache.gamma(j, 1) - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn rows_normalized_and_moments_ordered() {
        let psi = SnMixture::new(
            vec![0.3, 0.7],
            vec![SnComponent::new(-2.0, 1.0, 40.0).unwrap(), SnComponent::new(2.0, 0.5, -25.0).unwrap()],
        )
        .unwrap();
        let data: Vec<f64> = (0..200).map(|k| -8.0 + 0.08 * k as f64).collect();
        let cache = e_step(&data, &psi).unwrap();
        for j in 0..data.len() {
            let s: f64 = (0..2).map(|i| cache.alpha(j, i)).sum();
            assert!((s - 1.0).abs() < 1e-10);
            for i in 0..2 {
                let (a, b, g) = (cache.alpha(j, i), cache.beta(j, i), cache.gamma(j, i));
                assert!((0.0..=1.0).contains(&a));
                assert!(b >= 0.0);
                assert!(g >= b * b);
            }
        }
        assert!(cache.loglik.is_finite());
    }

    #[test]
    fn rejects_bad_inputs() {
        let psi = SnMixture::single(SnComponent::new(0.0, 1.0, 0.0).unwrap());
        assert!(e_step(&[], &psi).is_err());
        assert!(EStepCache::from_parts(2, 2, vec![0.0; 3], vec![0.0; 4], vec![0.0; 4]).is_err());
    }
}
