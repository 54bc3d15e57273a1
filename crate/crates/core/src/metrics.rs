//! Distances between mixing distributions, degeneracy accounting and
//! bias/RMSE aggregation.
//!
//! Both distances integrate `|Ψa − Ψb|`, a step function whose jumps sit on
//! the atom coordinates. Cells between consecutive breakpoints are therefore
//! integrated exactly and the grid resolution never changes the value.

use serde::{Deserialize, Serialize};

use crate::density::SnMixture;
use crate::error::{Error, Result};

pub const SIGMA2_DEGENERACY: f64 = 1e-10;
pub const LAMBDA_DIVERGENCE: f64 = 100.0;

/// Bound on `D`: the total mass of the weight `exp(-|μ| - σ² - |λ|)`.
pub const D_MAX: f64 = 4.0;

/// Box in transformed coordinates `(μ, ln σ² / 5, T(λ) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub resolution: usize,
}

impl Default for BoxRegion {
    fn default() -> Self {
        BoxRegion { lower: [-5.0, -15.0, -10.0], upper: [10.0, 1.0, 5.0], resolution: 64 }
    }
}

impl BoxRegion {
    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !(self.lower[a] < self.upper[a]) || !self.lower[a].is_finite() || !self.upper[a].is_finite() {
                return Err(Error::domain(format!("box axis {a} has empty or infinite range")));
            }
        }
        if self.resolution < 8 {
            return Err(Error::domain("box resolution must be at least 8"));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.upper[a] - self.lower[a]).product()
    }
}

/// Signed log transform used for shapes: `sign(λ)·ln(1 + |λ|)`.
pub fn signed_log(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().ln_1p()
}

/// Maps `(μ, σ², λ)` into the coordinates of [`BoxRegion`].
pub fn transform_theta(mu: f64, sigma2: f64, lambda: f64) -> [f64; 3] {
    [mu, sigma2.ln() / 5.0, signed_log(lambda) / 2.0]
}

/// `Ψ(θ) = Σ πₖ I(θₖ ≤ θ)` with componentwise ordering.
pub fn mixing_cdf(psi: &SnMixture, theta: (f64, f64, f64)) -> f64 {
    let (m, s, l) = theta;
    psi.weights
        .iter()
        .zip(&psi.components)
        .filter(|(_, c)| c.mu <= m && c.sigma2 <= s && c.lambda <= l)
        .map(|(w, _)| w)
        .sum()
}

struct Atoms {
    coords: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

fn cdf_at(atoms: &Atoms, point: &[f64; 3]) -> f64 {
    atoms
        .coords
        .iter()
        .zip(&atoms.weights)
        .filter(|(c, _)| (0..3).all(|a| c[a] <= point[a]))
        .map(|(_, w)| w)
        .sum()
}

fn breakpoints(a: &Atoms, b: &Atoms, axis: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = a.coords.iter().chain(&b.coords).map(|c| c[axis]).filter(|x| *x > lo && *x < hi).collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Integral of `|Ψa − Ψb|` against a product measure whose per-axis cell
/// mass is `mass(axis, lo, hi)`.
fn step_integral(a: &Atoms, b: &Atoms, bounds: [(f64, f64); 3], mass: impl Fn(usize, f64, f64) -> f64) -> f64 {
    let axes: Vec<Vec<f64>> = (0..3).map(|k| breakpoints(a, b, k, bounds[k].0, bounds[k].1)).collect();
    let cell_mass: Vec<Vec<f64>> = (0..3).map(|k| axes[k].windows(2).map(|w| mass(k, w[0], w[1])).collect()).collect();
    let mut total = 0.0;
    for (i, wi) in axes[0].windows(2).enumerate() {
        for (j, wj) in axes[1].windows(2).enumerate() {
            for (k, wk) in axes[2].windows(2).enumerate() {
                // The lower corner sees the same atoms as the cell interior.
                let point = [wi[0], wj[0], wk[0]];
                let diff = (cdf_at(a, &point) - cdf_at(b, &point)).abs();
                if diff > 0.0 {
                    total += diff * cell_mass[0][i] * cell_mass[1][j] * cell_mass[2][k];
                }
            }
        }
    }
    total
}

/// Antiderivative of `exp(-|t|)`, finite at ±∞.
fn laplace_antiderivative(t: f64) -> f64 {
    if t.is_infinite() {
        t.signum()
    } else {
        t.signum() * -(-t.abs()).exp_m1()
    }
}

fn raw_atoms(psi: &SnMixture) -> Atoms {
    Atoms {
        coords: psi.components.iter().map(|c| [c.mu, c.sigma2, c.lambda]).collect(),
        weights: psi.weights.clone(),
    }
}

/// `D(Ψa, Ψb) = ∫ |Ψa(θ) − Ψb(θ)| exp(−|θ|) dθ` over `ℝ × (0,∞) × ℝ`,
/// with `|θ| = |μ| + σ² + |λ|`. `resolution` is validated for interface
/// parity with [`distance_dstar`]; cells are integrated exactly.
pub fn distance_d(a: &SnMixture, b: &SnMixture, resolution: usize) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if resolution < 8 {
        return Err(Error::domain("grid resolution must be at least 8"));
    }
    let (aa, bb) = (raw_atoms(a), raw_atoms(b));
    let inf = f64::INFINITY;
    let bounds = [(-inf, inf), (0.0, inf), (-inf, inf)];
    Ok(step_integral(&aa, &bb, bounds, |_, lo, hi| laplace_antiderivative(hi) - laplace_antiderivative(lo)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DstarValue {
    pub value: f64,
    /// Some atom fell outside the region and was moved to its boundary.
    pub clamped: bool,
}

/// `D*(Ψa, Ψb) = ∫_region |Ψa − Ψb| dθ` in transformed coordinates.
pub fn distance_dstar(a: &SnMixture, b: &SnMixture, region: &BoxRegion) -> Result<DstarValue> {
    a.validate()?;
    b.validate()?;
    region.validate()?;
    let mut clamped = false;
    let mut atoms = |psi: &SnMixture| Atoms {
        coords: psi
            .components
            .iter()
            .map(|c| {
                let mut t = transform_theta(c.mu, c.sigma2, c.lambda);
                for k in 0..3 {
                    let v = t[k].clamp(region.lower[k], region.upper[k]);
                    clamped |= v != t[k];
                    t[k] = v;
                }
                t
            })
            .collect(),
        weights: psi.weights.clone(),
    };
    let (aa, bb) = (atoms(a), atoms(b));
    let bounds = [0, 1, 2].map(|k| (region.lower[k], region.upper[k]));
    let value = step_integral(&aa, &bb, bounds, |_, lo, hi| hi - lo);
    Ok(DstarValue { value, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyFlags {
    pub sigma_degenerate: bool,
    pub lambda_divergent: bool,
    pub min_sigma2: f64,
    pub max_abs_lambda: f64,
}

pub fn degeneracy_flags(psi: &SnMixture) -> DegeneracyFlags {
    let min_sigma2 = psi.components.iter().map(|c| c.sigma2).fold(f64::INFINITY, f64::min);
    let max_abs_lambda = psi.components.iter().map(|c| c.lambda.abs()).fold(0.0, f64::max);
    DegeneracyFlags {
        sigma_degenerate: min_sigma2 < SIGMA2_DEGENERACY,
        lambda_divergent: max_abs_lambda > LAMBDA_DIVERGENCE,
        min_sigma2,
        max_abs_lambda,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamError {
    pub param: String,
    pub bias: f64,
    pub rmse: f64,
}

/// Parameter names in report order, 1-based component index.
pub fn param_names(p: usize, log_sigma: bool) -> Vec<String> {
    let mut names = Vec::with_capacity(4 * p);
    for k in 1..=p {
        names.push(format!("mu{k}"));
        names.push(if log_sigma { format!("log_sigma2_{k}") } else { format!("sigma2_{k}") });
        names.push(format!("lambda{k}"));
        names.push(format!("pi{k}"));
    }
    names
}

fn flatten(psi: &SnMixture, log_sigma: bool) -> Vec<f64> {
    let mut v = Vec::with_capacity(4 * psi.order());
    for (w, c) in psi.weights.iter().zip(&psi.components) {
        v.push(c.mu);
        v.push(if log_sigma { c.sigma2.ln() } else { c.sigma2 });
        v.push(c.lambda);
        v.push(*w);
    }
    v
}

/// Bias and RMSE of each coordinate over label-sorted estimates.
pub fn bias_rmse(estimates: &[SnMixture], truth: &SnMixture, log_sigma: bool) -> Result<Vec<ParamError>> {
    if estimates.is_empty() {
        return Err(Error::domain("no estimates to aggregate"));
    }
    let p = truth.order();
    if let Some(bad) = estimates.iter().find(|e| e.order() != p) {
        return Err(Error::Dimension { expected: p, found: bad.order() });
    }
    let t = flatten(truth, log_sigma);
    let mut sum = vec![0.0; t.len()];
    let mut sq = vec![0.0; t.len()];
    for e in estimates {
        for (k, v) in flatten(e, log_sigma).into_iter().enumerate() {
            let d = v - t[k];
            sum[k] += d;
            sq[k] += d * d;
        }
    }
    let m = estimates.len() as f64;
    Ok(param_names(p, log_sigma)
        .into_iter()
        .enumerate()
        .map(|(k, param)| ParamError { param, bias: sum[k] / m, rmse: (sq[k] / m).sqrt() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SnComponent;
    use proptest::prelude::*;

    fn model_one() -> SnMixture {
        SnMixture::new(
            vec![0.5, 0.5],
            vec![SnComponent::new(-2.0, 1.0, 2.0).unwrap(), SnComponent::new(2.0, 2.0, 1.0).unwrap()],
        )
        .unwrap()
    }

    fn mixture(atoms: &[(f64, f64, f64, f64)]) -> SnMixture {
        let total: f64 = atoms.iter().map(|a| a.0).sum();
        SnMixture::new(
            atoms.iter().map(|a| a.0 / total).collect(),
            atoms.iter().map(|a| SnComponent::new(a.1, a.2, a.3).unwrap()).collect(),
        )
        .unwrap()
    }

    /// Midpoint rule over a uniform grid, independent of the breakpoint
    /// construction.
    fn dstar_midpoint(a: &SnMixture, b: &SnMixture, r: &BoxRegion, res: usize) -> f64 {
        let h: Vec<f64> = (0..3).map(|k| (r.upper[k] - r.lower[k]) / res as f64).collect();
        let tr = |psi: &SnMixture| -> Vec<([f64; 3], f64)> {
            psi.components
                .iter()
                .zip(&psi.weights)
                .map(|(c, w)| (transform_theta(c.mu, c.sigma2, c.lambda), *w))
                .collect()
        };
        let (ta, tb) = (tr(a), tr(b));
        let cdf = |atoms: &[([f64; 3], f64)], u: [f64; 3]| -> f64 {
            atoms.iter().filter(|(c, _)| (0..3).all(|k| c[k] <= u[k])).map(|(_, w)| w).sum()
        };
        let mut s = 0.0;
        for i in 0..res {
            for j in 0..res {
                for k in 0..res {
                    let u = [
                        r.lower[0] + (i as f64 + 0.5) * h[0],
                        r.lower[1] + (j as f64 + 0.5) * h[1],
                        r.lower[2] + (k as f64 + 0.5) * h[2],
                    ];
                    s += (cdf(&ta, u) - cdf(&tb, u)).abs();
                }
            }
        }
        s * h[0] * h[1] * h[2]
    }

    #[test]
    fn mixing_cdf_examples() {
        let m = model_one();
        assert_eq!(mixing_cdf(&m, (100.0, 100.0, 100.0)), 1.0);
        assert_eq!(mixing_cdf(&m, (-100.0, 0.0, -100.0)), 0.0);
        assert_eq!(mixing_cdf(&m, (0.0, 1.5, 1.5)), 0.0);
        assert_eq!(mixing_cdf(&m, (0.0, 1.5, 2.0)), 0.5);
    }

    #[test]
    fn degeneracy_examples() {
        let f = degeneracy_flags(&model_one());
        assert_eq!(f, DegeneracyFlags { sigma_degenerate: false, lambda_divergent: false, min_sigma2: 1.0, max_abs_lambda: 2.0 });
        let m = mixture(&[(1.0, 0.0, 1e-12, 0.0), (1.0, 1.0, 1.0, 0.0)]);
        assert!(degeneracy_flags(&m).sigma_degenerate);
        let m = mixture(&[(1.0, 0.0, 1.0, 150.0), (1.0, 1.0, 1.0, -1.0)]);
        let f = degeneracy_flags(&m);
        assert!(f.lambda_divergent && f.max_abs_lambda == 150.0);
    }

    #[test]
    fn d_of_single_atoms_closed_form() {
        // Two one-atom mixtures differing in μ only: |Ψa−Ψb| = 1 on
        // [0,1)×[1,∞)×[0,∞) in (μ, σ², λ).
        let a = mixture(&[(1.0, 0.0, 1.0, 0.0)]);
        let b = mixture(&[(1.0, 1.0, 1.0, 0.0)]);
        let expected = (1.0 - (-1.0f64).exp()) * (-1.0f64).exp() * 1.0;
        assert!((distance_d(&a, &b, 64).unwrap() - expected).abs() < 1e-15);
        assert!(distance_d(&a, &a, 64).unwrap() == 0.0);
        assert!(distance_d(&a, &b, 4).is_err());
    }

    #[test]
    fn d_is_resolution_free_and_bounded() {
        let a = model_one();
        let b = mixture(&[(0.3, -1.0, 0.5, -3.0), (0.7, 4.0, 3.0, 1.0)]);
        let v = distance_d(&a, &b, 64).unwrap();
        assert_eq!(v, distance_d(&a, &b, 128).unwrap());
        assert!(v > 0.0 && v <= D_MAX);
        // A far atom against a near one approaches the bound.
        let far = mixture(&[(1.0, -1e3, 1e-9, -1e3)]);
        let near = mixture(&[(1.0, 1e3, 1e3, 1e3)]);
        assert!((distance_d(&far, &near, 8).unwrap() - D_MAX).abs() < 1e-6);
    }

    #[test]
    fn dstar_matches_midpoint_oracle() {
        let r = BoxRegion::default();
        let a = model_one();
        let mut b = model_one();
        b.components[1].mu += 1.0;
        let exact = distance_dstar(&a, &b, &r).unwrap();
        assert!(!exact.clamped);
        // Only μ₂ moved: difference region is [2,3) × [ln2/5, 1] × [ln2/2, 5].
        let closed = 1.0 * (1.0 - 2f64.ln() / 5.0) * (5.0 - 2f64.ln() / 2.0) * 0.5;
        assert!((exact.value - closed).abs() < 1e-12);
        assert_eq!(exact.value, distance_dstar(&a, &b, &BoxRegion { resolution: 128, ..r }).unwrap().value);
    }

    /// Atom whose transformed coordinates are the grid nodes `(i, j, k)`.
    fn grid_atom(r: &BoxRegion, res: usize, node: [usize; 3]) -> SnComponent {
        let g: Vec<f64> = (0..3).map(|a| r.lower[a] + node[a] as f64 * (r.upper[a] - r.lower[a]) / res as f64).collect();
        let lambda = g[2].signum() * (2.0 * g[2].abs()).exp_m1();
        SnComponent { mu: g[0], sigma2: (5.0 * g[1]).exp(), lambda }
    }

    #[test]
    fn dstar_matches_midpoint_on_aligned_atoms() {
        // With every jump on a grid plane the midpoint rule is exact.
        let r = BoxRegion::default();
        let res = 30;
        let at = |n| grid_atom(&r, res, n);
        let a = SnMixture { weights: vec![0.2, 0.5, 0.3], components: vec![at([4, 20, 10]), at([12, 27, 22]), at([20, 9, 25])] };
        let b = SnMixture { weights: vec![0.6, 0.4], components: vec![at([6, 25, 3]), at([18, 13, 17])] };
        let exact = distance_dstar(&a, &b, &r).unwrap();
        assert!(!exact.clamped);
        let mid = dstar_midpoint(&a, &b, &r, res);
        assert!((exact.value - mid).abs() < 1e-9 * mid, "{} vs {mid}", exact.value);
    }

    #[test]
    fn dstar_clamps_outside_atoms() {
        let a = mixture(&[(1.0, 50.0, 1.0, 0.0)]);
        let b = mixture(&[(1.0, 0.0, 1.0, 0.0)]);
        let v = distance_dstar(&a, &b, &BoxRegion::default()).unwrap();
        assert!(v.clamped);
        assert!(v.value > 0.0);
        let bad = BoxRegion { resolution: 2, ..BoxRegion::default() };
        assert!(distance_dstar(&a, &b, &bad).is_err());
    }

    #[test]
    fn bias_rmse_examples() {
        let t = model_one();
        let r = bias_rmse(&[t.clone(), t.clone()], &t, false).unwrap();
        assert!(r.iter().all(|e| e.bias == 0.0 && e.rmse == 0.0));
        assert_eq!(r[0].param, "mu1");
        let mut e1 = t.clone();
        e1.components[0].mu += 0.3;
        e1.components[1].lambda -= 1.0;
        let mut e2 = t.clone();
        e2.components[0].mu -= 0.1;
        e2.components[1].sigma2 = 2.0 * std::f64::consts::E;
        let r = bias_rmse(&[e1.clone(), e2], &t, true).unwrap();
        let get = |n: &str| r.iter().find(|e| e.param == n).unwrap().clone();
        assert!((get("mu1").bias - 0.1).abs() < 1e-15);
        assert!((get("mu1").rmse - (0.05f64).sqrt()).abs() < 1e-15);
        assert!((get("log_sigma2_2").bias - 0.5).abs() < 1e-15);
        assert!((get("lambda2").rmse - 0.5f64.sqrt()).abs() < 1e-15);
        let single = bias_rmse(&[e1], &t, false).unwrap();
        assert!((single[0].bias - 0.3).abs() < 1e-15 && (single[0].rmse - 0.3).abs() < 1e-15);
        let one = mixture(&[(1.0, 0.0, 1.0, 0.0)]);
        assert!(bias_rmse(&[one], &t, false).is_err());
        assert!(bias_rmse(&[], &t, false).is_err());
    }

    fn arb_mixture() -> impl Strategy<Value = SnMixture> {
        prop::collection::vec((0.05f64..1.0, -4.0f64..8.0, 0.01f64..3.0, -20.0f64..20.0), 1..4).prop_map(|v| {
            let total: f64 = v.iter().map(|a| a.0).sum();
            SnMixture {
                weights: v.iter().map(|a| a.0 / total).collect(),
                components: v.iter().map(|a| SnComponent { mu: a.1, sigma2: a.2, lambda: a.3 }).collect(),
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn distances_are_symmetric(a in arb_mixture(), b in arb_mixture()) {
            let r = BoxRegion::default();
            prop_assert!((distance_d(&a, &b, 64).unwrap() - distance_d(&b, &a, 64).unwrap()).abs() < 1e-12);
            prop_assert!((distance_dstar(&a, &b, &r).unwrap().value - distance_dstar(&b, &a, &r).unwrap().value).abs() < 1e-12);
        }

        #[test]
        fn distances_satisfy_triangle(a in arb_mixture(), b in arb_mixture(), c in arb_mixture()) {
            let r = BoxRegion::default();
            let d = |x: &SnMixture, y: &SnMixture| distance_d(x, y, 64).unwrap();
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-3);
            let ds = |x: &SnMixture, y: &SnMixture| distance_dstar(x, y, &r).unwrap().value;
            prop_assert!(ds(&a, &c) <= ds(&a, &b) + ds(&b, &c) + 1e-3);
        }

        #[test]
        fn identity_of_indiscernibles(a in arb_mixture(), b in arb_mixture()) {
            let r = BoxRegion::default();
            prop_assert_eq!(distance_d(&a, &a, 64).unwrap(), 0.0);
            prop_assert_eq!(distance_dstar(&a, &a, &r).unwrap().value, 0.0);
            let mut rev = a.clone();
            rev.weights.reverse();
            rev.components.reverse();
            prop_assert!(distance_d(&a, &rev, 64).unwrap().abs() < 1e-15);
            if a != b {
                prop_assert!(distance_d(&a, &b, 64).unwrap() > 0.0);
            }
        }

        #[test]
        fn mixing_cdf_is_monotone(a in arb_mixture(), m in -5.0f64..9.0, s in 0.0f64..4.0, l in -25.0f64..25.0, dm in 0.0f64..2.0, ds in 0.0f64..2.0, dl in 0.0f64..5.0) {
            let lo = mixing_cdf(&a, (m, s, l));
            prop_assert!(mixing_cdf(&a, (m + dm, s, l)) >= lo);
            prop_assert!(mixing_cdf(&a, (m, s + ds, l)) >= lo);
            prop_assert!(mixing_cdf(&a, (m, s, l + dl)) >= lo);
        }
    }
}
