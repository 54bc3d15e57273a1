//! Draws from skew-normal components and mixtures through the latent
//! half-normal representation.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::density::{SnComponent, SnMixture};
use crate::error::{Error, Result};

/// Seeded random stream. Same seed, same sequence.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        RngHandle { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for replication `index` of a run seeded by `master`.
    pub fn child(master: u64, index: u64) -> Self {
        Self::new(derive_seed(master, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-independent child seed for `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// `|N(0, σ²)|`.
pub fn sample_half_normal(sigma: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("half-normal scale must be positive, got {sigma}")));
    }
    Ok(sigma * rng.standard_normal().abs())
}

#[inline]
fn draw_sn(theta: &SnComponent, rng: &mut RngHandle) -> f64 {
    let sigma = theta.sigma();
    let delta = theta.delta();
    let tau = sigma * rng.standard_normal().abs();
    let spread = ((1.0 - delta) * (1.0 + delta)).sqrt() * sigma;
    theta.mu + delta * tau + spread * rng.standard_normal()
}

pub fn sample_sn(theta: &SnComponent, rng: &mut RngHandle) -> Result<f64> {
    theta.validate()?;
    Ok(draw_sn(theta, rng))
}

/// Picks component `k` with probability `weights[k]` from one uniform draw.
fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding gap above the last cumulative weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

pub fn sample_mixture(psi: &SnMixture, n: usize, rng: &mut RngHandle) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    psi.validate()?;
    Ok(sample_labelled(psi, n, rng).into_iter().map(|(x, _)| x).collect())
}

/// Draws with the generating component index attached.
pub fn sample_labelled(psi: &SnMixture, n: usize, rng: &mut RngHandle) -> Vec<(f64, usize)> {
    (0..n)
        .map(|_| {
            let k = pick(&psi.weights, rng.uniform());
            (draw_sn(&psi.components[k], rng), k)
        })
        .collect()
}
