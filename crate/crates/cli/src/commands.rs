use std::fs;
use std::path::Path;

use snmix::estimator::{fit_multistart, profile_lrt_me, Algorithm, FitConfig, FitResult, InitScheme};
use snmix::study::{model_one, model_two, run_penalty_comparison, run_study, EstimatorKind, StudySpec, DEFAULT_REPLICATIONS};
use snmix::{sample_mixture, RngHandle, SnMixture};

use crate::args::{AlgorithmArg, Cli, Command, EstimatorArg, FitArgs, FitOptions, MeArgs, ModelPreset, SampleArgs, StudyArgs, StudyPreset};
use crate::document::{FitMetadata, MeMetadata, ModelDocument};
use crate::input::read_column;
use crate::{exit, Failure};

/// Sample sizes and shapes of the single-component penalty comparison.
const COMPARISON_SIZES: [usize; 6] = [50, 100, 250, 350, 500, 1000];
const COMPARISON_SHAPES: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

pub fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Study(a) => cmd_study(a),
        Command::Me(a) => cmd_me(a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn estimator_kind(e: EstimatorArg) -> EstimatorKind {
    match e {
        EstimatorArg::Mle => EstimatorKind::Mle,
        EstimatorArg::Pmle => EstimatorKind::Pmle,
        EstimatorArg::Mple => EstimatorKind::Mple,
    }
}

fn algorithm(a: AlgorithmArg) -> Algorithm {
    match a {
        AlgorithmArg::Ecm => Algorithm::Ecm,
        AlgorithmArg::Ecme => Algorithm::Ecme,
    }
}

fn run_fit(data: &[f64], p: usize, kind: EstimatorKind, opts: &FitOptions) -> Result<FitResult, Failure> {
    if p == 0 {
        return Err(Failure::usage("--components must be at least 1"));
    }
    if opts.starts == 0 {
        return Err(Failure::usage("--starts must be at least 1"));
    }
    let cfg = FitConfig::new(kind.penalty(data, opts.c_a, opts.c_b)?, InitScheme::KMeansMoments { seed: opts.seed })
        .algorithm(algorithm(opts.algorithm))
        .rel_tol(opts.tol)
        .max_iter(opts.max_iter);
    Ok(fit_multistart(data, p, &cfg, opts.starts, opts.seed)?)
}

fn fit_document(r: &FitResult, kind: EstimatorKind, opts: &FitOptions) -> ModelDocument {
    let mut doc = ModelDocument::from_mixture(&r.psi);
    doc.fit = Some(FitMetadata {
        estimator: kind.label().to_lowercase(),
        algorithm: format!("{:?}", opts.algorithm).to_lowercase(),
        objective: r.objective(),
        loglik: r.loglik,
        iterations: r.iterations,
        converged: r.converged,
        degenerate_sigma: r.degenerate_sigma,
        divergent_lambda: r.divergent_lambda,
        penalty: r.penalty,
        seed: opts.seed,
        starts: opts.starts,
    });
    doc
}

fn cmd_fit(a: FitArgs) -> Result<u8, Failure> {
    let data = read_column(&a.data.input, a.data.column.as_deref())?;
    let kind = estimator_kind(a.estimator);
    let r = run_fit(&data, a.data.components, kind, &a.fit)?;
    write_output(a.output.as_deref(), &fit_document(&r, kind, &a.fit).to_json())?;
    if r.is_degenerate() {
        eprintln!(
            "snmix: warning: best fit is degenerate (scale collapse: {}, shape divergence: {})",
            r.degenerate_sigma, r.divergent_lambda
        );
        return Ok(exit::DEGENERATE);
    }
    Ok(exit::OK)
}

fn load_model(path: &Path) -> Result<SnMixture, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
    let doc: ModelDocument =
        serde_json::from_str(&text).map_err(|e| Failure::io(format!("{}: bad model document: {e}", path.display())))?;
    doc.to_mixture().map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn cmd_sample(a: SampleArgs) -> Result<u8, Failure> {
    if a.n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let psi = match (&a.model, a.preset) {
        (Some(path), _) => load_model(path)?,
        (None, Some(ModelPreset::Model1)) => model_one(),
        (None, Some(ModelPreset::Model2)) => model_two(),
        (None, None) => return Err(Failure::usage("one of --model or --preset is required")),
    };
    let draws = sample_mixture(&psi, a.n, &mut RngHandle::new(a.seed))?;
    let mut text = String::with_capacity(draws.len() * 20);
    for x in draws {
        text.push_str(&x.to_string());
        text.push('\n');
    }
    write_output(a.output.as_deref(), &text)?;
    Ok(exit::OK)
}

fn cmd_study(a: StudyArgs) -> Result<u8, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = a.threads {
        if t == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Failure::usage(e.to_string()))?;
    fs::create_dir_all(&a.out).map_err(|e| Failure::io(format!("cannot create {}: {e}", a.out.display())))?;

    let (csv, json) = if a.preset == Some(StudyPreset::PenaltyComparison) {
        let sizes = a.sizes.clone().unwrap_or_else(|| COMPARISON_SIZES.to_vec());
        let reps = a.reps.unwrap_or(DEFAULT_REPLICATIONS);
        let report = pool.install(|| run_penalty_comparison(&sizes, &COMPARISON_SHAPES, reps, a.seed))?;
        (report.to_csv()?, serde_json::to_string_pretty(&report).expect("report serializes"))
    } else {
        let mut spec = match (a.preset, &a.spec) {
            (Some(StudyPreset::Model1), _) => StudySpec::model_one(a.seed),
            (Some(StudyPreset::Model2), _) => StudySpec::model_two(a.seed),
            (Some(StudyPreset::OrderStudy), _) => StudySpec::order_study(a.seed),
            (_, Some(path)) => {
                let text =
                    fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Failure::io(format!("{}: bad study spec: {e}", path.display())))?
            }
            _ => return Err(Failure::usage("one of --preset or --spec is required")),
        };
        if let Some(r) = a.reps {
            spec.replications = r;
        }
        if let Some(s) = &a.sizes {
            spec.sample_sizes = s.clone();
        }
        let report = pool.install(|| run_study(&spec))?;
        (report.to_csv()?, serde_json::to_string_pretty(&report).expect("report serializes"))
    };
    for (name, text) in [("report.csv", csv), ("report.json", json + "\n")] {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(exit::OK)
}

fn cmd_me(a: MeArgs) -> Result<u8, Failure> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Failure::usage("--level must lie in (0, 1)"));
    }
    let data = read_column(&a.data.input, a.data.column.as_deref())?;
    let mle = run_fit(&data, a.data.components, EstimatorKind::Mle, &a.fit)?;
    let me = profile_lrt_me(&data, &mle, a.level).map_err(|e| match e {
        snmix::Error::Validity(msg) => Failure {
            code: exit::ME_VALIDITY,
            message: format!("{msg}; the MLE has a collapsed scale (σ² < 1e-10), so the test has no valid reference distribution"),
        },
        other => other.into(),
    })?;
    let doc = if me.nu == 0 {
        fit_document(&mle, EstimatorKind::Mle, &a.fit)
    } else {
        let mut doc = fit_document(&mle, EstimatorKind::Me, &a.fit);
        let fitted = ModelDocument::from_mixture(&me.psi);
        doc.weights = fitted.weights;
        doc.mu = fitted.mu;
        doc.sigma2 = fitted.sigma2;
        doc.lambda = fitted.lambda;
        doc.me = Some(MeMetadata {
            level: a.level,
            nu: me.nu,
            shrink: me.shrink,
            lr: me.lr,
            critical: me.critical,
            mle_lambda: mle.psi.lambdas(),
        });
        doc
    };
    write_output(a.output.as_deref(), &doc.to_json())?;
    Ok(exit::OK)
}
