//! Starting values for the EM iterations.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::density::{lambda_of_delta, SnComponent, SnMixture};
use crate::error::{Error, Result};
use crate::estimator::label_sort;
use crate::sampler::RngHandle;

pub const MIN_START_SIGMA2: f64 = 1e-6;
pub const MAX_START_LAMBDA: f64 = 50.0;
const KMEANS_MAX_ITER: usize = 100;
const MAX_RESEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitTag {
    KmeansMoments,
    TrueValue,
    Explicit,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitReport {
    pub psi0: SnMixture,
    pub scheme: InitTag,
    pub seed: Option<u64>,
}

/// Largest skewness a skew-normal can reach, `√2(4−π)/(π−2)^{3/2}`.
pub fn max_sn_skewness() -> f64 {
    2f64.sqrt() * (4.0 - PI) / (PI - 2.0).powf(1.5)
}

/// Method-of-moments skew-normal fit from mean, variance and skewness.
pub fn moments_to_component(mean: f64, variance: f64, skewness: f64) -> SnComponent {
    let g_max = 0.99 * max_sn_skewness();
    let g = skewness.clamp(-g_max, g_max);
    let g23 = g.abs().powf(2.0 / 3.0);
    let k = ((4.0 - PI) / 2.0).powf(2.0 / 3.0);
    let delta = g.signum() * (0.5 * PI * g23 / (g23 + k)).sqrt();
    let delta = if g == 0.0 { 0.0 } else { delta };
    let lambda = lambda_of_delta(delta);
    let sigma2 = variance / (1.0 - 2.0 * delta * delta / PI);
    let mu = mean - sigma2.sqrt() * delta * (2.0 / PI).sqrt();
    SnComponent { mu, sigma2, lambda }
}

fn clamp_start(c: &mut SnComponent) {
    if !(c.sigma2 >= MIN_START_SIGMA2) {
        c.sigma2 = MIN_START_SIGMA2;
    }
    if !c.lambda.is_finite() {
        c.lambda = 0.0;
    }
    c.lambda = c.lambda.clamp(-MAX_START_LAMBDA, MAX_START_LAMBDA);
}

fn kmeans_plus_plus(data: &[f64], p: usize, rng: &mut RngHandle) -> Vec<f64> {
    let n = data.len();
    let mut centers = Vec::with_capacity(p);
    centers.push(data[(rng.uniform() * n as f64) as usize % n]);
    let mut d2: Vec<f64> = data.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < p {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (j, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = j;
                    break;
                }
            }
            chosen
        } else {
            (rng.uniform() * n as f64) as usize % n
        };
        let c = data[idx];
        centers.push(c);
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min((x - c).powi(2));
        }
    }
    centers
}

fn assign(data: &[f64], centers: &[f64], labels: &mut [usize]) -> bool {
    let mut changed = false;
    for (l, x) in labels.iter_mut().zip(data) {
        let best = centers
            .iter()
            .enumerate()
            .min_by(|a, b| (x - a.1).abs().total_cmp(&(x - b.1).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        if *l != best {
            *l = best;
            changed = true;
        }
    }
    changed
}

/// Lloyd iterations; `None` when a cluster empties.
fn lloyd(data: &[f64], mut centers: Vec<f64>) -> Option<Vec<usize>> {
    let p = centers.len();
    let mut labels = vec![usize::MAX; data.len()];
    for _ in 0..KMEANS_MAX_ITER {
        let changed = assign(data, &centers, &mut labels);
        let mut sums = vec![0.0; p];
        let mut counts = vec![0usize; p];
        for (x, &l) in data.iter().zip(&labels) {
            sums[l] += x;
            counts[l] += 1;
        }
        if counts.contains(&0) {
            return None;
        }
        for k in 0..p {
            centers[k] = sums[k] / counts[k] as f64;
        }
        if !changed {
            break;
        }
    }
    Some(labels)
}

/// Splits the largest cluster at its median until none is empty.
fn split_largest(data: &[f64], labels: &mut [usize], p: usize) {
    loop {
        let mut counts = vec![0usize; p];
        labels.iter().for_each(|&l| counts[l.min(p - 1)] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let largest = (0..p).max_by_key(|&k| counts[k]).unwrap_or(0);
        let mut members: Vec<usize> = (0..data.len()).filter(|&j| labels[j] == largest).collect();
        members.sort_by(|&a, &b| data[a].total_cmp(&data[b]));
        for &j in &members[members.len() / 2..] {
            labels[j] = empty;
        }
    }
}

fn cluster_moments(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let variance = if values.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    (mean, variance, skew)
}

/// K-means (k-means++ seeding) partition followed by per-cluster moment
/// matching.
pub fn kmeans_moments_init(data: &[f64], p: usize, seed: u64) -> Result<InitReport> {
    if p == 0 {
        return Err(Error::domain("number of components must be positive"));
    }
    if data.len() < 3 * p {
        return Err(Error::domain(format!("need at least {} observations for {p} components", 3 * p)));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("data contain non-finite values"));
    }
    let mut rng = RngHandle::new(seed);
    let mut labels = None;
    for _ in 0..MAX_RESEEDS {
        let centers = kmeans_plus_plus(data, p, &mut rng);
        if let Some(l) = lloyd(data, centers) {
            labels = Some(l);
            break;
        }
    }
    let labels = labels.unwrap_or_else(|| {
        let centers = kmeans_plus_plus(data, p, &mut rng);
        let mut l = vec![0; data.len()];
        assign(data, &centers, &mut l);
        split_largest(data, &mut l, p);
        l
    });

    let n = data.len() as f64;
    let mut weights = Vec::with_capacity(p);
    let mut components = Vec::with_capacity(p);
    for k in 0..p {
        let members: Vec<f64> = data.iter().zip(&labels).filter(|(_, &l)| l == k).map(|(x, _)| *x).collect();
        weights.push(members.len() as f64 / n);
        let (mean, var, skew) = cluster_moments(&members);
        let mut c = moments_to_component(mean, var, skew);
        clamp_start(&mut c);
        components.push(c);
    }
    let psi0 = label_sort(&SnMixture { weights, components }.normalized());
    Ok(InitReport { psi0, scheme: InitTag::KmeansMoments, seed: Some(seed) })
}

/// Starts from the supplied mixture, label-sorted, weights renormalized when
/// they are off by at most 1e-9.
pub fn true_value_init(psi_true: &SnMixture) -> Result<InitReport> {
    let total: f64 = psi_true.weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("weights sum to {total}")));
    }
    let psi0 = psi_true.clone().normalized();
    psi0.validate()?;
    Ok(InitReport { psi0: label_sort(&psi0), scheme: InitTag::TrueValue, seed: None })
}

/// Spreads `p` components over the `p0` components of `psi_true`
/// round-robin, jittering locations by `N(0, 0.1²)` and splitting weights.
pub fn perturbed_init(psi_true: &SnMixture, p: usize, seed: u64) -> Result<InitReport> {
    psi_true.validate()?;
    let truth = label_sort(psi_true);
    let p0 = truth.order();
    if p < p0 {
        return Err(Error::domain(format!("cannot perturb {p0} components into {p}")));
    }
    let mut omega = vec![0usize; p0];
    (0..p).for_each(|i| omega[i % p0] += 1);
    let mut rng = RngHandle::new(seed);
    let mut weights = Vec::with_capacity(p);
    let mut components = Vec::with_capacity(p);
    for i in 0..p {
        let j = i % p0;
        let mut c = truth.components[j];
        c.mu += 0.1 * rng.standard_normal();
        clamp_start(&mut c);
        components.push(c);
        weights.push(truth.weights[j] / omega[j] as f64);
    }
    let psi0 = label_sort(&SnMixture { weights, components });
    Ok(InitReport { psi0, scheme: InitTag::Perturbed, seed: Some(seed) })
}
