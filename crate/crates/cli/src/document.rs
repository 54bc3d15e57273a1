//! JSON model document.

use serde::{Deserialize, Serialize};
use snmix::{PenaltySpec, SnComponent, SnMixture};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub estimator: String,
    pub algorithm: String,
    pub objective: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate_sigma: bool,
    pub divergent_lambda: bool,
    pub penalty: PenaltySpec,
    pub seed: u64,
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeMetadata {
    pub level: f64,
    pub nu: usize,
    pub shrink: f64,
    pub lr: f64,
    pub critical: f64,
    /// Shapes of the MLE before modification.
    pub mle_lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub p: usize,
    pub weights: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub me: Option<MeMetadata>,
}

impl ModelDocument {
    pub fn from_mixture(psi: &SnMixture) -> Self {
        ModelDocument {
            schema_version: SCHEMA_VERSION,
            p: psi.order(),
            weights: psi.weights.clone(),
            mu: psi.mus(),
            sigma2: psi.sigma2s(),
            lambda: psi.lambdas(),
            fit: None,
            me: None,
        }
    }

    pub fn to_mixture(&self) -> snmix::Result<SnMixture> {
        let p = self.p;
        for len in [self.weights.len(), self.mu.len(), self.sigma2.len(), self.lambda.len()] {
            if len != p {
                return Err(snmix::Error::Dimension { expected: p, found: len });
            }
        }
        let components = (0..p)
            .map(|k| SnComponent::new(self.mu[k], self.sigma2[k], self.lambda[k]))
            .collect::<snmix::Result<Vec<_>>>()?;
        SnMixture::new(self.weights.clone(), components)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}
