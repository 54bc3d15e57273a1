use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cmstep::{
    component_stats, lambda_update, mu_update, q_function, sigma2_update, sigma2_update_symmetric, DELTA_EDGE,
};
use super::estep::{e_step_unchecked, EStepCache};
use super::optim::{brent_max, grid_then_brent};
use crate::density::{lambda_of_delta, SnMixture};
use crate::error::{Error, Result};
use crate::init::{kmeans_moments_init, perturbed_init, true_value_init};
use crate::metrics::{degeneracy_flags, LAMBDA_DIVERGENCE};
use crate::penalty::{LambdaPenalty, PenaltySpec, SigmaPenalty};
use crate::sampler::derive_seed;

pub const DEFAULT_MAX_ITER: usize = 2000;
pub const DEFAULT_REL_TOL: f64 = 1e-6;
/// Components with less total responsibility are held fixed for the iteration.
pub const FREEZE_WEIGHT: f64 = 1e-8;
/// Iteration stops once an estimate is this close to a singularity.
pub const SINGULAR_SIGMA2: f64 = 1e-12;
pub const SINGULAR_LAMBDA: f64 = 1e6;

const CML_GRID: usize = 41;
const CML_MAX_SWEEPS: usize = 100;
const CML_BRACKET: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ecm,
    Ecme,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitScheme {
    KMeansMoments { seed: u64 },
    TrueValue(SnMixture),
    Explicit(SnMixture),
    Perturbed { truth: SnMixture, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub algorithm: Algorithm,
    pub penalty: PenaltySpec,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub init: InitScheme,
    /// Per-component mask (in initial order) of shapes held at their start
    /// values.
    pub fixed_lambda: Option<Vec<bool>>,
}

impl FitConfig {
    pub fn new(penalty: PenaltySpec, init: InitScheme) -> Self {
        FitConfig {
            algorithm: Algorithm::Ecm,
            penalty,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
            init,
            fixed_lambda: None,
        }
    }

    pub fn algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn fixed_lambda(mut self, mask: Vec<bool>) -> Self {
        self.fixed_lambda = Some(mask);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::domain("rel_tol must be positive and max_iter at least 1"));
        }
        self.penalty.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted mixture, components ordered by location.
    pub psi: SnMixture,
    /// Penalized log-likelihood at every iterate, starting value first.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some `σ̂² < 1e-10`.
    pub degenerate_sigma: bool,
    /// Some `|λ̂| > 100`.
    pub divergent_lambda: bool,
    /// Stopped early at (or numerically past) a likelihood singularity.
    pub singular: bool,
    /// Some component was held fixed for lack of responsibility.
    pub frozen_components: bool,
    /// Unpenalized log-likelihood at `psi`.
    pub loglik: f64,
    pub penalty: PenaltySpec,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate_sigma || self.divergent_lambda
    }
}

/// Permutes components (with weights) so locations ascend.
pub fn label_sort(psi: &SnMixture) -> SnMixture {
    let mut idx: Vec<usize> = (0..psi.order()).collect();
    idx.sort_by(|&a, &b| {
        let (ca, cb) = (&psi.components[a], &psi.components[b]);
        ca.mu
            .total_cmp(&cb.mu)
            .then(ca.sigma2.total_cmp(&cb.sigma2))
            .then(ca.lambda.total_cmp(&cb.lambda))
    });
    SnMixture {
        weights: idx.iter().map(|&k| psi.weights[k]).collect(),
        components: idx.iter().map(|&k| psi.components[k]).collect(),
    }
}

fn starting_mixture(data: &[f64], p: usize, init: &InitScheme) -> Result<SnMixture> {
    let psi = match init {
        InitScheme::KMeansMoments { seed } => kmeans_moments_init(data, p, *seed)?.psi0,
        InitScheme::TrueValue(t) => true_value_init(t)?.psi0,
        InitScheme::Explicit(m) => {
            m.validate()?;
            m.clone()
        }
        InitScheme::Perturbed { truth, seed } => perturbed_init(truth, p, *seed)?.psi0,
    };
    if psi.order() != p {
        return Err(Error::Dimension { expected: p, found: psi.order() });
    }
    Ok(psi)
}

fn at_singularity(psi: &SnMixture) -> bool {
    psi.components.iter().any(|c| c.sigma2 < SINGULAR_SIGMA2 || c.lambda.abs() > SINGULAR_LAMBDA)
}

/// Outcome of one CM sweep.
enum Update {
    Next { psi: SnMixture, frozen: bool },
    Singular,
}

struct Engine<'a> {
    data: &'a [f64],
    pen: &'a PenaltySpec,
    algorithm: Algorithm,
    fixed: &'a [bool],
    rel_tol: f64,
}

impl Engine<'_> {
    fn symmetric_fixed(&self, psi: &SnMixture, i: usize) -> bool {
        self.fixed[i] && psi.components[i].lambda == 0.0
    }

    fn cm_update(&self, cache: &EStepCache, psi: &SnMixture, first: bool) -> Update {
        let data = self.data;
        let p = psi.order();
        let sums = cache.column_sums();
        let total: f64 = sums.iter().sum();
        let mut next = psi.clone();
        next.weights = sums.iter().map(|s| s / total).collect();
        let active: Vec<bool> = sums.iter().map(|&s| s >= FREEZE_WEIGHT).collect();
        let frozen = active.iter().any(|a| !a);
        let check_q = cfg!(debug_assertions)
            && !(0..p).any(|i| self.symmetric_fixed(psi, i))
            && psi.components.iter().all(|c| c.sigma2 > 1e-8 && c.lambda.abs() < 1e4);
        let q = |m: &SnMixture| q_function(m, data, cache, self.pen).unwrap_or(f64::NAN);
        let mut q_prev = if check_q { q(psi) } else { 0.0 };
        let mut assert_ascent = |m: &SnMixture, step: &str| {
            if check_q {
                let qv = q(m);
                debug_assert!(
                    !(qv < q_prev - 1e-7 * (1.0 + q_prev.abs())),
                    "CM-step {step} lowered Q: {q_prev} -> {qv}"
                );
                q_prev = qv;
            }
        };
        assert_ascent(&next, "1");

        let (a_n, s_n2) = self.pen.sigma_terms();
        let mut stats = Vec::with_capacity(p);
        for i in 0..p {
            if !active[i] {
                stats.push(None);
                continue;
            }
            let delta = psi.components[i].delta();
            let (mu, _) = mu_update(data, cache, i, delta);
            if !mu.is_finite() {
                return Update::Singular;
            }
            next.components[i].mu = mu;
            stats.push(Some(component_stats(data, cache, i, mu)));
        }
        assert_ascent(&next, "2");

        for i in 0..p {
            let Some(st) = &stats[i] else { continue };
            let s2 = if self.symmetric_fixed(psi, i) {
                sigma2_update_symmetric(st, a_n, s_n2)
            } else {
                sigma2_update(st, psi.components[i].delta(), a_n, s_n2)
            };
            if !(s2 > 0.0 && s2.is_finite()) {
                return Update::Singular;
            }
            next.components[i].sigma2 = s2;
        }
        assert_ascent(&next, "3");

        match self.algorithm {
            Algorithm::Ecm => {
                for i in 0..p {
                    let Some(st) = &stats[i] else { continue };
                    if self.fixed[i] {
                        continue;
                    }
                    next.components[i].lambda = lambda_update(st, next.components[i].sigma2, &self.pen.lambda).lambda;
                }
                assert_ascent(&next, "4");
            }
            Algorithm::Ecme => {
                let mask: Vec<bool> = (0..p).map(|i| active[i] && !self.fixed[i]).collect();
                cml_sweeps(data, &mut next, &self.pen.lambda, &mask, self.rel_tol, first);
            }
        }
        Update::Next { psi: next, frozen }
    }
}

/// Coordinate-wise maximization of the penalized log-likelihood over the
/// shapes flagged in `active`, other parameters held. `global` scans all of
/// `(-1, 1)` in δ; otherwise the search starts from a bracket around the
/// current value and widens while the optimum sits on its boundary.
fn cml_sweeps(data: &[f64], psi: &mut SnMixture, pen: &LambdaPenalty, active: &[bool], rel_tol: f64, global: bool) {
    let p = psi.order();
    let n = data.len();
    let mut log_terms = vec![0.0; n * p];
    let refresh = |psi: &SnMixture, i: usize, log_terms: &mut [f64]| {
        let lw = if psi.weights[i] > 0.0 { psi.weights[i].ln() } else { f64::NEG_INFINITY };
        for (j, &x) in data.iter().enumerate() {
            log_terms[j * p + i] = lw + psi.components[i].logpdf_unchecked(x);
        }
    };
    for i in 0..p {
        refresh(psi, i, &mut log_terms);
    }
    let shape_pen = PenaltySpec { sigma: SigmaPenalty::None, lambda: *pen };
    let mut rest = vec![0.0; n];

    for _ in 0..CML_MAX_SWEEPS {
        let mut gain = 0.0;
        let mut level = 0.0;
        for i in 0..p {
            if !active[i] {
                continue;
            }
            for (j, r) in rest.iter_mut().enumerate() {
                let row = &log_terms[j * p..(j + 1) * p];
                let m = row.iter().enumerate().filter(|(k, _)| *k != i).fold(f64::NEG_INFINITY, |a, (_, v)| a.max(*v));
                *r = if m == f64::NEG_INFINITY {
                    m
                } else {
                    m + row.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| (v - m).exp()).sum::<f64>().ln()
                };
            }
            let lw = psi.weights[i].ln();
            let base = psi.components[i];
            let objective = |d: f64| {
                let mut c = base;
                c.lambda = lambda_of_delta(d);
                let mut s = 0.0;
                for (j, &x) in data.iter().enumerate() {
                    let (a, b) = (rest[j], lw + c.logpdf_unchecked(x));
                    let m = a.max(b);
                    s += if m == f64::NEG_INFINITY { m } else { m + ((a - m).exp() + (b - m).exp()).ln() };
                }
                s + shape_pen.lambda_value(c.lambda)
            };
            let d0 = base.delta();
            let current = objective(d0);
            let (d, v) = if global {
                grid_then_brent(objective, -DELTA_EDGE, DELTA_EDGE, CML_GRID, 1e-12)
            } else {
                let mut w = CML_BRACKET;
                loop {
                    let (lo, hi) = ((d0 - w).max(-DELTA_EDGE), (d0 + w).min(DELTA_EDGE));
                    let (d, v) = brent_max(objective, lo, hi, 1e-12);
                    let interior = (d - lo > 1e-6 || lo == -DELTA_EDGE) && (hi - d > 1e-6 || hi == DELTA_EDGE);
                    if interior || (lo == -DELTA_EDGE && hi == DELTA_EDGE) {
                        break (d, v);
                    }
                    w *= 4.0;
                }
            };
            level = current;
            if v > current {
                gain += v - current;
                psi.components[i].lambda = lambda_of_delta(d);
                level = v;
                refresh(psi, i, &mut log_terms);
            }
        }
        if gain <= rel_tol * (1.0 + level.abs()) {
            break;
        }
    }
}

/// CML-step: shapes maximizing the penalized log-likelihood with weights,
/// locations and scales held at `psi_partial`.
pub fn cml_step(data: &[f64], psi_partial: &SnMixture, pen: &PenaltySpec) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::domain("CML-step on empty data"));
    }
    psi_partial.validate()?;
    pen.validate()?;
    let mut psi = psi_partial.clone();
    let mask = vec![true; psi.order()];
    cml_sweeps(data, &mut psi, &pen.lambda, &mask, 1e-12, true);
    Ok(psi.lambdas())
}

/// Penalized ECM / ECME fit of a `p`-component mixture.
pub fn fit(data: &[f64], p: usize, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if p == 0 {
        return Err(Error::domain("number of components must be positive"));
    }
    if data.len() < 3 * p {
        return Err(Error::domain(format!("need at least {} observations for {p} components", 3 * p)));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("data contain non-finite values"));
    }
    let mut psi = starting_mixture(data, p, &cfg.init)?;
    let fixed = match &cfg.fixed_lambda {
        Some(m) if m.len() != p => return Err(Error::Dimension { expected: p, found: m.len() }),
        Some(m) => m.clone(),
        None => vec![false; p],
    };
    let engine = Engine { data, pen: &cfg.penalty, algorithm: cfg.algorithm, fixed: &fixed, rel_tol: cfg.rel_tol };

    let mut trace = Vec::new();
    let mut prev: Option<SnMixture> = None;
    let mut converged = false;
    let mut singular = false;
    let mut sigma_collapse = false;
    let mut frozen_any = false;
    let mut iterations = 0;
    let mut loglik;
    loop {
        let cache = e_step_unchecked(data, &psi);
        loglik = cache.loglik;
        let obj = cache.loglik + cfg.penalty.total(&psi);
        if !obj.is_finite() {
            singular = true;
            sigma_collapse = psi.components.iter().all(|c| c.lambda.abs() <= LAMBDA_DIVERGENCE);
            if let Some(p) = prev.take() {
                psi = p;
                loglik = psi.loglik_unchecked(data);
            }
            break;
        }
        if let Some(&last) = trace.last() {
            let last: f64 = last;
            trace.push(obj);
            if (obj - last).abs() / (last.abs() + 1.0) < cfg.rel_tol {
                converged = true;
                break;
            }
        } else {
            trace.push(obj);
        }
        if at_singularity(&psi) {
            singular = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        match engine.cm_update(&cache, &psi, iterations == 0) {
            Update::Next { psi: next, frozen } => {
                frozen_any |= frozen;
                prev = Some(std::mem::replace(&mut psi, next));
                iterations += 1;
            }
            Update::Singular => {
                singular = true;
                sigma_collapse = true;
                break;
            }
        }
    }

    let flags = degeneracy_flags(&psi);
    let lambda_singular = singular && !sigma_collapse && !flags.sigma_degenerate;
    Ok(FitResult {
        psi: label_sort(&psi),
        objective_trace: trace,
        iterations,
        converged,
        degenerate_sigma: flags.sigma_degenerate || sigma_collapse,
        divergent_lambda: flags.lambda_divergent || lambda_singular,
        singular,
        frozen_components: frozen_any,
        loglik,
        penalty: cfg.penalty,
    })
}

/// Runs `starts` K-means initializations with seeds derived from `seed` and
/// keeps the best objective, preferring fits free of degeneracy flags.
pub fn fit_multistart(data: &[f64], p: usize, cfg: &FitConfig, starts: usize, seed: u64) -> Result<FitResult> {
    let cfgs: Vec<FitConfig> = (0..starts.max(1) as u64)
        .map(|k| FitConfig { init: InitScheme::KMeansMoments { seed: derive_seed(seed, k) }, ..cfg.clone() })
        .collect();
    let fits: Vec<Result<FitResult>> = cfgs.par_iter().map(|c| fit(data, p, c)).collect();
    best_of(fits)
}

/// Best objective among successful fits; non-degenerate fits win over
/// degenerate ones, ties go to the earliest.
pub fn best_of(fits: Vec<Result<FitResult>>) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for f in fits {
        match f {
            Ok(f) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (b.is_degenerate() && !f.is_degenerate())
                            || (b.is_degenerate() == f.is_degenerate() && f.objective() > b.objective())
                    }
                };
                if better {
                    best = Some(f);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or_else(|| Error::domain("no fits were run")))
}
