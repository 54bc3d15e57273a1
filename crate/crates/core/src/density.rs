//! Skew-normal component and mixture densities.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::special::{log_ndtr, log_sum_exp, norm_logpdf};

/// One skew-normal component: location `mu`, squared scale `sigma2` and
/// shape `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnComponent {
    pub mu: f64,
    pub sigma2: f64,
    pub lambda: f64,
}

impl SnComponent {
    pub fn new(mu: f64, sigma2: f64, lambda: f64) -> Result<Self> {
        let c = SnComponent { mu, sigma2, lambda };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::domain(format!("sigma2 must be positive and finite, got {}", self.sigma2)));
        }
        if !self.mu.is_finite() || !self.lambda.is_finite() {
            return Err(Error::domain(format!(
                "mu and lambda must be finite, got mu={} lambda={}",
                self.mu, self.lambda
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        delta_of_lambda(self.lambda)
    }

    /// `E[X] = μ + σ δ √(2/π)`.
    pub fn mean(&self) -> f64 {
        self.mu + self.sigma() * self.delta() * (2.0 / std::f64::consts::PI).sqrt()
    }

    /// `Var[X] = σ²(1 − 2δ²/π)`.
    pub fn variance(&self) -> f64 {
        let d = self.delta();
        self.sigma2 * (1.0 - 2.0 * d * d / std::f64::consts::PI)
    }

    /// Log density without validation; callers guarantee `sigma2 > 0`.
    #[inline]
    pub(crate) fn logpdf_unchecked(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma();
        let base = -0.5 * self.sigma2.ln() + norm_logpdf(z);
        if self.lambda == 0.0 {
            base
        } else {
            LN_2 + base + log_ndtr(self.lambda * z)
        }
    }
}

/// Finite mixture of skew-normal components. Also stands for the discrete
/// mixing distribution placing mass `weights[k]` on `components[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnMixture {
    pub weights: Vec<f64>,
    pub components: Vec<SnComponent>,
}

impl SnMixture {
    pub fn new(weights: Vec<f64>, components: Vec<SnComponent>) -> Result<Self> {
        let m = SnMixture { weights, components };
        m.validate()?;
        Ok(m)
    }

    pub fn single(component: SnComponent) -> Self {
        SnMixture { weights: vec![1.0], components: vec![component] }
    }

    /// Number of components `p`.
    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::domain("mixture needs at least one component"));
        }
        if self.weights.len() != self.components.len() {
            return Err(Error::Dimension { expected: self.components.len(), found: self.weights.len() });
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("mixing weights must be finite and non-negative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("mixing weights sum to {total}, not 1")));
        }
        self.components.iter().try_for_each(SnComponent::validate)
    }

    /// Rescales the weights to sum to one.
    pub fn normalized(mut self) -> Self {
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= total);
        }
        self
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| w * c.mean()).sum()
    }

    pub fn mus(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mu).collect()
    }

    pub fn sigma2s(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.sigma2).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.lambda).collect()
    }

    pub(crate) fn logpdf_unchecked(&self, x: f64, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        for (w, c) in self.weights.iter().zip(&self.components) {
            if *w > 0.0 {
                scratch.push(w.ln() + c.logpdf_unchecked(x));
            }
        }
        log_sum_exp(scratch)
    }

    pub(crate) fn loglik_unchecked(&self, data: &[f64]) -> f64 {
        let mut scratch = Vec::with_capacity(self.order());
        data.iter().map(|&x| self.logpdf_unchecked(x, &mut scratch)).sum()
    }
}

/// `δ(λ) = λ / √(1 + λ²)`.
#[inline]
pub fn delta_of_lambda(lambda: f64) -> f64 {
    lambda / 1.0_f64.hypot(lambda)
}

/// Inverse of [`delta_of_lambda`] on `(-1, 1)`.
#[inline]
pub fn lambda_of_delta(delta: f64) -> f64 {
    delta / ((1.0 - delta) * (1.0 + delta)).sqrt()
}

/// `log f_SN(x; θ)`.
pub fn sn_logpdf(x: f64, theta: &SnComponent) -> Result<f64> {
    theta.validate()?;
    Ok(theta.logpdf_unchecked(x))
}

/// `log Σ_k π_k f_SN(x; θ_k)`.
pub fn mixture_logpdf(x: f64, psi: &SnMixture) -> Result<f64> {
    psi.validate()?;
    Ok(psi.logpdf_unchecked(x, &mut Vec::with_capacity(psi.order())))
}

/// Log-likelihood `Σ_i log f(x_i; Ψ)`.
pub fn loglik(data: &[f64], psi: &SnMixture) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::domain("log-likelihood of empty data"));
    }
    psi.validate()?;
    Ok(psi.loglik_unchecked(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn comp(mu: f64, s2: f64, l: f64) -> SnComponent {
        SnComponent::new(mu, s2, l).unwrap()
    }

    fn model_one() -> SnMixture {
        SnMixture::new(vec![0.5, 0.5], vec![comp(-2.0, 1.0, 2.0), comp(2.0, 2.0, 1.0)]).unwrap()
    }

    #[test]
    fn symmetric_case_is_normal() {
        let v = sn_logpdf(0.0, &comp(0.0, 1.0, 0.0)).unwrap();
        assert!((v - (-0.918_938_533_204_672_8)).abs() < 1e-15);
        let v = sn_logpdf(0.0, &comp(0.0, 1.0, 5.0)).unwrap();
        assert!((v - (-0.918_938_533_204_672_8)).abs() < 1e-14);
    }

    #[test]
    fn lower_tail_point() {
        // log(2 φ(-1) Φ(-5)) at 50 digits
        let v = sn_logpdf(-1.0, &comp(0.0, 1.0, 5.0)).unwrap();
        assert!((v - (-15.790_789_746_633_453)).abs() < 1e-12);
    }

    #[test]
    fn stays_finite_deep_in_the_tail() {
        let v = sn_logpdf(-30.0, &comp(0.0, 1.0, 10.0)).unwrap();
        assert!(v.is_finite() && v < -40_000.0);
    }

    #[test]
    fn rejects_invalid_components() {
        assert!(SnComponent::new(0.0, 0.0, 1.0).is_err());
        assert!(SnComponent::new(0.0, -1.0, 1.0).is_err());
        assert!(SnComponent::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(SnComponent::new(0.0, 1.0, f64::INFINITY).is_err());
        let bad = SnComponent { mu: 0.0, sigma2: f64::INFINITY, lambda: 0.0 };
        assert!(sn_logpdf(0.0, &bad).is_err());
    }

    #[test]
    fn mixture_at_origin_model_one() {
        // direct 50-digit summation of the two weighted densities
        let v = mixture_logpdf(0.0, &model_one()).unwrap();
        assert!((v - (-2.778_184_081_903_357_7)).abs() < 1e-12);
    }

    #[test]
    fn single_component_mixture_matches_component() {
        let c = comp(1.0, 2.0, -3.0);
        let m = SnMixture::single(c);
        for x in [-3.0, 0.0, 1.0, 4.5] {
            assert!((mixture_logpdf(x, &m).unwrap() - sn_logpdf(x, &c).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weight_duplicate_matches_split_weight() {
        let c = comp(0.5, 1.5, 2.0);
        let a = SnMixture::new(vec![1.0, 0.0], vec![c, c]).unwrap();
        let b = SnMixture::new(vec![0.5, 0.5], vec![c, c]).unwrap();
        for x in [-2.0, 0.0, 3.0] {
            assert!((mixture_logpdf(x, &a).unwrap() - mixture_logpdf(x, &b).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn loglik_contracts() {
        let psi = model_one();
        assert!(loglik(&[], &psi).is_err());
        assert_eq!(loglik(&[0.3], &psi).unwrap(), mixture_logpdf(0.3, &psi).unwrap());
        let data = [-2.5, -1.0, 0.2, 1.7, 3.9];
        let doubled: Vec<f64> = data.iter().chain(data.iter()).copied().collect();
        let l1 = loglik(&data, &psi).unwrap();
        assert!((loglik(&doubled, &psi).unwrap() - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn mixture_validation() {
        let c = comp(0.0, 1.0, 0.0);
        assert!(SnMixture::new(vec![], vec![]).is_err());
        assert!(SnMixture::new(vec![0.5], vec![c, c]).is_err());
        assert!(SnMixture::new(vec![0.7, 0.7], vec![c, c]).is_err());
        assert!(SnMixture::new(vec![1.2, -0.2], vec![c, c]).is_err());
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta_of_lambda(0.0), 0.0);
        assert!((delta_of_lambda(1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 2e-16);
        assert!((delta_of_lambda(-3.0) + 3.0 / 10f64.sqrt()).abs() < 2e-16);
        assert!(delta_of_lambda(1e300) <= 1.0);
    }

    /// Composite Simpson's rule on an even number of panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = f(a) + f(b);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn densities_integrate_to_one() {
        for &l in &[-10.0, -1.0, 0.0, 1.0, 10.0] {
            for &s2 in &[0.25, 1.0, 4.0] {
                let c = comp(0.7, s2, l);
                let s = c.sigma();
                let total = simpson(|x| c.logpdf_unchecked(x).exp(), c.mu - 12.0 * s, c.mu + 12.0 * s, 20_000);
                assert!((total - 1.0).abs() < 1e-6, "λ={l} σ²={s2}: {total}");
            }
        }
    }

    proptest! {
        #[test]
        fn delta_is_odd_and_bounded(l in -1e6f64..1e6) {
            let d = delta_of_lambda(l);
            prop_assert!(d > -1.0 && d < 1.0 || l.abs() > 1e7);
            prop_assert_eq!(delta_of_lambda(-l), -d);
            if l.abs() < 1e3 {
                prop_assert!((lambda_of_delta(d) - l).abs() <= 1e-9 * (1.0 + l.abs()));
            }
        }

        #[test]
        fn lambda_zero_is_gaussian(x in -50.0f64..50.0, mu in -10.0f64..10.0, s2 in 0.01f64..100.0) {
            let v = sn_logpdf(x, &comp(mu, s2, 0.0)).unwrap();
            let z = (x - mu) / s2.sqrt();
            let reference = -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI * s2).ln();
            prop_assert!((v - reference).abs() <= 1e-14 * (1.0 + reference.abs()));
        }

        #[test]
        fn mixture_is_permutation_invariant(
            x in -10.0f64..10.0,
            mus in proptest::collection::vec(-5.0f64..5.0, 3),
            lams in proptest::collection::vec(-8.0f64..8.0, 3),
        ) {
            let comps: Vec<_> = (0..3).map(|k| comp(mus[k], 0.5 + k as f64, lams[k])).collect();
            let a = SnMixture::new(vec![0.2, 0.3, 0.5], comps.clone()).unwrap();
            let b = SnMixture::new(vec![0.5, 0.2, 0.3], vec![comps[2], comps[0], comps[1]]).unwrap();
            let (va, vb) = (mixture_logpdf(x, &a).unwrap(), mixture_logpdf(x, &b).unwrap());
            prop_assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
        }
    }
}
