//! Monte-Carlo replication harness.
//!
//! Replication `r` at sample size `n` draws its data from a child seed of
//! `(master_seed, n, r)`, so every estimator sees the same samples and the
//! thread count never affects a report.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{SnComponent, SnMixture};
use crate::error::{Error, Result};
use crate::estimator::{fit, profile_lrt_me, Algorithm, FitConfig, FitResult, InitScheme};
use crate::metrics::{bias_rmse, degeneracy_flags, distance_dstar, BoxRegion, ParamError};
use crate::penalty::{PenaltySpec, SigmaPenalty, DEFAULT_C_A, DEFAULT_C_B};
use crate::sampler::{derive_seed, sample_mixture, RngHandle};

pub const DEFAULT_REPLICATIONS: usize = 200;
pub const DEFAULT_PERTURBED_STARTS: usize = 10;
pub const ME_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mle,
    Pmle,
    /// Profile likelihood-ratio modification of the MLE.
    Me,
    /// Azzalini shape penalty with the proposed scale penalty.
    Mple,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "MLE",
            EstimatorKind::Pmle => "PMLE",
            EstimatorKind::Me => "ME",
            EstimatorKind::Mple => "MPLE",
        }
    }

    /// Penalty used by the underlying fit (the ME starts from the MLE).
    pub fn penalty(self, data: &[f64], c_a: f64, c_b: f64) -> Result<PenaltySpec> {
        Ok(match self {
            EstimatorKind::Mle | EstimatorKind::Me => PenaltySpec::none(),
            EstimatorKind::Pmle => PenaltySpec::proposed(data, c_a, c_b)?,
            EstimatorKind::Mple => {
                let sigma = PenaltySpec::proposed(data, c_a, c_b)?.sigma;
                PenaltySpec::azzalini().with_sigma(sigma)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    TrueValue,
    KMeans,
    Perturbed,
}

impl InitKind {
    pub fn label(self) -> &'static str {
        match self {
            InitKind::TrueValue => "true-value",
            InitKind::KMeans => "k-means",
            InitKind::Perturbed => "perturbed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub name: String,
    pub truth: SnMixture,
    pub sample_sizes: Vec<usize>,
    /// Fitted orders; orders above the truth's always use perturbed starts.
    pub fit_orders: Vec<usize>,
    pub replications: usize,
    pub estimators: Vec<EstimatorKind>,
    pub init_schemes: Vec<InitKind>,
    pub master_seed: u64,
    /// Report `ln σ²` errors instead of `σ²`.
    #[serde(default)]
    pub log_sigma: bool,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_starts")]
    pub perturbed_starts: usize,
    #[serde(default = "default_c_a")]
    pub c_a: f64,
    #[serde(default = "default_c_b")]
    pub c_b: f64,
    #[serde(default)]
    pub region: BoxRegion,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Ecm
}
fn default_starts() -> usize {
    DEFAULT_PERTURBED_STARTS
}
fn default_c_a() -> f64 {
    DEFAULT_C_A
}
fn default_c_b() -> f64 {
    DEFAULT_C_B
}

fn component(mu: f64, sigma2: f64, lambda: f64) -> SnComponent {
    SnComponent { mu, sigma2, lambda }
}

pub fn model_one() -> SnMixture {
    SnMixture { weights: vec![0.5, 0.5], components: vec![component(-2.0, 1.0, 2.0), component(2.0, 2.0, 1.0)] }
}

pub fn model_two() -> SnMixture {
    SnMixture { weights: vec![0.5, 0.5], components: vec![component(-1.0, 2.0, 1.0), component(1.5, 2.0, -1.0)] }
}

impl StudySpec {
    fn base(name: &str, truth: SnMixture, master_seed: u64) -> Self {
        StudySpec {
            name: name.into(),
            fit_orders: vec![truth.order()],
            truth,
            sample_sizes: vec![100, 200],
            replications: DEFAULT_REPLICATIONS,
            estimators: vec![EstimatorKind::Mle, EstimatorKind::Pmle],
            init_schemes: vec![InitKind::TrueValue, InitKind::KMeans],
            master_seed,
            log_sigma: false,
            algorithm: Algorithm::Ecm,
            perturbed_starts: DEFAULT_PERTURBED_STARTS,
            c_a: DEFAULT_C_A,
            c_b: DEFAULT_C_B,
            region: BoxRegion::default(),
        }
    }

    pub fn model_one(master_seed: u64) -> Self {
        Self::base("model1", model_one(), master_seed)
    }

    /// Scales are compared on the log scale for this model.
    pub fn model_two(master_seed: u64) -> Self {
        StudySpec { log_sigma: true, ..Self::base("model2", model_two(), master_seed) }
    }

    pub fn order_study(master_seed: u64) -> Self {
        StudySpec {
            sample_sizes: vec![100, 200, 500],
            fit_orders: vec![2, 3, 4, 5],
            init_schemes: vec![InitKind::Perturbed],
            ..Self::base("order-study", model_one(), master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        self.region.validate()?;
        if self.replications == 0 {
            return Err(Error::domain("replications must be at least 1"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 10) {
            return Err(Error::domain("sample sizes must be at least 10"));
        }
        let p0 = self.truth.order();
        if self.fit_orders.is_empty() || self.fit_orders.iter().any(|&p| p < p0) {
            return Err(Error::domain("fitted orders must be at least the true order"));
        }
        if self.estimators.is_empty() || self.init_schemes.is_empty() {
            return Err(Error::domain("at least one estimator and one init scheme are required"));
        }
        if self.perturbed_starts == 0 {
            return Err(Error::domain("perturbed_starts must be positive"));
        }
        Ok(())
    }

    /// `(p, init)` pairs actually run.
    fn fit_cells(&self) -> Vec<(usize, InitKind)> {
        let p0 = self.truth.order();
        let mut cells = Vec::new();
        for &p in &self.fit_orders {
            if p > p0 {
                cells.push((p, InitKind::Perturbed));
            } else {
                cells.extend(self.init_schemes.iter().map(|&i| (p, i)));
            }
        }
        cells.dedup();
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub p: usize,
    pub init: InitKind,
    pub reps: usize,
    pub failures: usize,
    pub sigma_degenerate: usize,
    pub lambda_divergent: usize,
    pub min_sigma2: f64,
    pub max_abs_lambda: f64,
    pub mean_dstar: f64,
    pub dstar_clamped: usize,
    /// Empty when the fitted order differs from the truth's.
    pub params: Vec<ParamError>,
}

impl CellReport {
    pub fn param(&self, name: &str) -> Option<&ParamError> {
        self.params.iter().find(|e| e.param == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub name: String,
    pub master_seed: u64,
    pub replications: usize,
    pub cells: Vec<CellReport>,
    pub elapsed_seconds: f64,
}

pub const STUDY_CSV_HEADER: [&str; 14] = [
    "estimator",
    "n",
    "p",
    "init",
    "param",
    "bias",
    "rmse",
    "reps",
    "failures",
    "sigma_degenerate",
    "lambda_divergent",
    "min_sigma2",
    "max_abs_lambda",
    "mean_dstar",
];

impl StudyReport {
    pub fn cell(&self, estimator: EstimatorKind, n: usize, p: usize, init: InitKind) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.estimator == estimator && c.n == n && c.p == p && c.init == init)
    }

    /// One row per (cell, parameter); cells without parameter errors get a
    /// single row with empty `param`, `bias` and `rmse`. Timing is omitted
    /// so reruns compare byte for byte.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(STUDY_CSV_HEADER).map_err(csv_err)?;
        for c in &self.cells {
            let tail = [
                c.reps.to_string(),
                c.failures.to_string(),
                c.sigma_degenerate.to_string(),
                c.lambda_divergent.to_string(),
                c.min_sigma2.to_string(),
                c.max_abs_lambda.to_string(),
                c.mean_dstar.to_string(),
            ];
            let head = [c.estimator.label().to_string(), c.n.to_string(), c.p.to_string(), c.init.label().to_string()];
            let rows: Vec<[String; 3]> = if c.params.is_empty() {
                vec![Default::default()]
            } else {
                c.params.iter().map(|e| [e.param.clone(), e.bias.to_string(), e.rmse.to_string()]).collect()
            };
            for r in rows {
                w.write_record(head.iter().chain(&r).chain(&tail)).map_err(csv_err)?;
            }
        }
        into_string(w)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::domain(format!("csv: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::domain(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::domain(e.to_string()))
}

/// Keeps the largest objective, earliest on ties.
fn best_objective(fits: impl IntoIterator<Item = Result<FitResult>>) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    let mut err = None;
    for f in fits {
        match f {
            Ok(f) if best.as_ref().is_none_or(|b| f.objective() > b.objective()) => best = Some(f),
            Ok(_) => {}
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| err.unwrap_or_else(|| Error::domain("no starts")))
}

struct Outcome {
    psi: Option<SnMixture>,
}

fn fit_one(
    spec: &StudySpec,
    data: &[f64],
    p: usize,
    init: InitKind,
    penalty: PenaltySpec,
    seed: u64,
) -> Result<FitResult> {
    let cfg = |scheme| FitConfig::new(penalty, scheme).algorithm(spec.algorithm);
    match init {
        InitKind::TrueValue if p == spec.truth.order() => fit(data, p, &cfg(InitScheme::TrueValue(spec.truth.clone()))),
        InitKind::KMeans => fit(data, p, &cfg(InitScheme::KMeansMoments { seed: derive_seed(seed, 0) })),
        _ => best_objective((0..spec.perturbed_starts as u64).map(|k| {
            let scheme = InitScheme::Perturbed { truth: spec.truth.clone(), seed: derive_seed(seed, 1 + k) };
            fit(data, p, &cfg(scheme))
        })),
    }
}

/// All estimator outcomes for one replication, ordered like `cells`.
fn replicate(spec: &StudySpec, n: usize, r: usize, cells: &[(usize, InitKind)]) -> Vec<Outcome> {
    let seed = derive_seed(derive_seed(spec.master_seed, n as u64), r as u64);
    let Ok(data) = sample_mixture(&spec.truth, n, &mut RngHandle::new(seed)) else {
        return (0..cells.len() * spec.estimators.len()).map(|_| Outcome { psi: None }).collect();
    };
    let mut out = Vec::new();
    for &(p, init) in cells {
        let mut mle: Option<Result<FitResult>> = None;
        for &est in &spec.estimators {
            let fitted = |kind: EstimatorKind| -> Result<FitResult> {
                fit_one(spec, &data, p, init, kind.penalty(&data, spec.c_a, spec.c_b)?, seed)
            };
            let psi = match est {
                EstimatorKind::Me => {
                    let m = mle.get_or_insert_with(|| fitted(EstimatorKind::Mle));
                    m.as_ref().ok().and_then(|m| profile_lrt_me(&data, m, ME_LEVEL).ok()).map(|me| me.psi)
                }
                EstimatorKind::Mle => {
                    let m = mle.get_or_insert_with(|| fitted(EstimatorKind::Mle));
                    m.as_ref().ok().map(|m| m.psi.clone())
                }
                _ => fitted(est).ok().map(|f| f.psi),
            };
            out.push(Outcome { psi });
        }
    }
    out
}

pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    spec.validate()?;
    let start = Instant::now();
    let fit_cells = spec.fit_cells();
    let p0 = spec.truth.order();
    let mut cells = Vec::new();
    for &n in &spec.sample_sizes {
        let reps: Vec<Vec<Outcome>> =
            (0..spec.replications).into_par_iter().map(|r| replicate(spec, n, r, &fit_cells)).collect();
        let mut idx = 0;
        for &(p, init) in &fit_cells {
            for &estimator in &spec.estimators {
                let psis: Vec<&SnMixture> = reps.iter().filter_map(|o| o[idx].psi.as_ref()).collect();
                idx += 1;
                let mut cell = CellReport {
                    estimator,
                    n,
                    p,
                    init,
                    reps: spec.replications,
                    failures: spec.replications - psis.len(),
                    sigma_degenerate: 0,
                    lambda_divergent: 0,
                    min_sigma2: f64::INFINITY,
                    max_abs_lambda: 0.0,
                    mean_dstar: f64::NAN,
                    dstar_clamped: 0,
                    params: Vec::new(),
                };
                let mut dstar_sum = 0.0;
                for psi in &psis {
                    let f = degeneracy_flags(psi);
                    cell.sigma_degenerate += f.sigma_degenerate as usize;
                    cell.lambda_divergent += f.lambda_divergent as usize;
                    cell.min_sigma2 = cell.min_sigma2.min(f.min_sigma2);
                    cell.max_abs_lambda = cell.max_abs_lambda.max(f.max_abs_lambda);
                    let d = distance_dstar(psi, &spec.truth, &spec.region)?;
                    dstar_sum += d.value;
                    cell.dstar_clamped += d.clamped as usize;
                }
                if !psis.is_empty() {
                    cell.mean_dstar = dstar_sum / psis.len() as f64;
                    if p == p0 {
                        let owned: Vec<SnMixture> = psis.iter().map(|m| (*m).clone()).collect();
                        cell.params = bias_rmse(&owned, &spec.truth, spec.log_sigma)?;
                    }
                }
                cells.push(cell);
            }
        }
    }
    Ok(StudyReport {
        name: spec.name.clone(),
        master_seed: spec.master_seed,
        replications: spec.replications,
        cells,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeError {
    pub bias: f64,
    pub rmse: f64,
    pub log_abs_bias: f64,
    pub log_rmse: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyComparisonRow {
    pub n: usize,
    pub lambda: f64,
    pub reps: usize,
    pub pmle: ShapeError,
    pub mple: ShapeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyComparisonReport {
    pub master_seed: u64,
    pub rows: Vec<PenaltyComparisonRow>,
    pub elapsed_seconds: f64,
}

pub const COMPARISON_CSV_HEADER: [&str; 13] = [
    "n",
    "lambda",
    "reps",
    "pmle_bias",
    "pmle_rmse",
    "pmle_log_abs_bias",
    "pmle_log_rmse",
    "pmle_failures",
    "mple_bias",
    "mple_rmse",
    "mple_log_abs_bias",
    "mple_log_rmse",
    "mple_failures",
];

impl PenaltyComparisonReport {
    pub fn row(&self, n: usize, lambda: f64) -> Option<&PenaltyComparisonRow> {
        self.rows.iter().find(|r| r.n == n && r.lambda == lambda)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COMPARISON_CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.n.to_string(), r.lambda.to_string(), r.reps.to_string()];
            for e in [&r.pmle, &r.mple] {
                rec.extend([
                    e.bias.to_string(),
                    e.rmse.to_string(),
                    e.log_abs_bias.to_string(),
                    e.log_rmse.to_string(),
                    e.failures.to_string(),
                ]);
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        into_string(w)
    }
}

fn shape_error(estimates: &[Option<f64>], truth: f64) -> ShapeError {
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    let m = ok.len() as f64;
    let bias = ok.iter().map(|l| l - truth).sum::<f64>() / m;
    let rmse = (ok.iter().map(|l| (l - truth).powi(2)).sum::<f64>() / m).sqrt();
    ShapeError {
        bias,
        rmse,
        log_abs_bias: bias.abs().ln(),
        log_rmse: rmse.ln(),
        failures: estimates.len() - ok.len(),
    }
}

/// Single-component comparison of the proposed shape penalty (scale penalty
/// off) with Azzalini's penalty, at `θ = (0, 1, λ)`.
pub fn run_penalty_comparison(
    n_list: &[usize],
    lambda_list: &[f64],
    reps: usize,
    seed: u64,
) -> Result<PenaltyComparisonReport> {
    if reps == 0 || n_list.iter().any(|&n| n < 10) || lambda_list.iter().any(|l| !l.is_finite()) {
        return Err(Error::domain("need reps ≥ 1, sample sizes ≥ 10 and finite shapes"));
    }
    let start = Instant::now();
    let mut rows = Vec::new();
    for (li, &lambda) in lambda_list.iter().enumerate() {
        let truth = SnMixture::single(SnComponent::new(0.0, 1.0, lambda)?);
        for &n in n_list {
            let pmle_pen = PenaltySpec::proposed_lambda_only(n, DEFAULT_C_B)?;
            let mple_pen = PenaltySpec::azzalini().with_sigma(SigmaPenalty::None);
            let pairs: Vec<(Option<f64>, Option<f64>)> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let s = derive_seed(derive_seed(derive_seed(seed, li as u64), n as u64), r as u64);
                    let Ok(data) = sample_mixture(&truth, n, &mut RngHandle::new(s)) else {
                        return (None, None);
                    };
                    let one = |pen: PenaltySpec| {
                        let cfg = FitConfig::new(pen, InitScheme::KMeansMoments { seed: derive_seed(s, 0) });
                        fit(&data, 1, &cfg).ok().map(|f| f.psi.components[0].lambda)
                    };
                    (one(pmle_pen), one(mple_pen))
                })
                .collect();
            let (p, m): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            rows.push(PenaltyComparisonRow { n, lambda, reps, pmle: shape_error(&p, lambda), mple: shape_error(&m, lambda) });
        }
    }
    Ok(PenaltyComparisonReport { master_seed: seed, rows, elapsed_seconds: start.elapsed().as_secs_f64() })
}
