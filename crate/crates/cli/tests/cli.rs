use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn snmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snmix")).args(args).output().expect("binary runs")
}

fn faithful_csv(dir: &Path) -> PathBuf {
    let path = dir.join("faithful.csv");
    let mut text = String::from("eruptions\n");
    for x in snmix::datasets::faithful_eruptions() {
        text.push_str(&format!("{x}\n"));
    }
    fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn numbers(v: &Value, key: &str) -> Vec<f64> {
    v[key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn fit_faithful_pmle_and_mle_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = faithful_csv(dir.path());
    let input = input.to_str().unwrap();
    let pmle = snmix(&["fit", "--input", input, "--components", "2", "--estimator", "pmle", "--starts", "20", "--seed", "7"]);
    assert_eq!(pmle.status.code(), Some(0), "{}", String::from_utf8_lossy(&pmle.stderr));
    let mle = snmix(&["fit", "--input", input, "--components", "2", "--estimator", "mle", "--starts", "20", "--seed", "7"]);
    assert_eq!(mle.status.code(), Some(0));
    let (p, m) = (json(&pmle), json(&mle));
    assert_eq!(p["schema_version"], 1);
    assert_eq!(p["p"], 2);
    let pl = p["fit"]["objective"].as_f64().unwrap();
    assert!((pl + 257.9).abs() < 0.5, "{pl}");
    for key in ["weights", "mu", "sigma2", "lambda"] {
        for (a, b) in numbers(&p, key).iter().zip(numbers(&m, key)) {
            assert!((a - b).abs() <= 0.3, "{key}: {a} vs {b}");
        }
    }
}

#[test]
fn fit_writes_to_file_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = faithful_csv(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = snmix(&[
            "fit", "--input", input.to_str().unwrap(), "-p", "2", "--starts", "3", "--seed", "11", "--algorithm", "ecme",
            "-o", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn input_errors_use_io_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = snmix(&["fit", "--input", empty.to_str().unwrap(), "-p", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("missing.csv");
    assert_eq!(snmix(&["fit", "--input", missing.to_str().unwrap(), "-p", "1"]).status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x\n1\n2\noops\n").unwrap();
    let o = snmix(&["fit", "--input", bad.to_str().unwrap(), "-p", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(snmix(&["fit"]).status.code(), Some(1));
    assert_eq!(snmix(&["sample", "--preset", "model1", "--n", "0"]).status.code(), Some(1));
    assert_eq!(snmix(&["fit", "--input", "x.csv", "-p", "2", "--estimator", "bogus"]).status.code(), Some(1));
    assert_eq!(snmix(&["--help"]).status.code(), Some(0));
}

#[test]
fn sample_is_deterministic() {
    let a = snmix(&["sample", "--preset", "model1", "--n", "1000", "--seed", "5"]);
    let b = snmix(&["sample", "--preset", "model1", "--n", "1000", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 1000);
    assert!(text.lines().all(|l| l.parse::<f64>().is_ok()));
    let c = snmix(&["sample", "--preset", "model1", "--n", "1000", "--seed", "6"]);
    assert_ne!(text.as_bytes(), &c.stdout[..]);
}

#[test]
fn sample_preset_mean_matches_analytic() {
    // Mixture mean: Σ π (μ + σ δ √(2/π)).
    let m = snmix::study::model_one();
    let mean: f64 = m.weights.iter().zip(&m.components).map(|(w, c)| w * c.mean()).sum();
    let var: f64 = m.weights.iter().zip(&m.components).map(|(w, c)| w * (c.variance() + c.mean().powi(2))).sum::<f64>() - mean * mean;
    let n = 1_000_000;
    let o = snmix(&["sample", "--preset", "model1", "--n", &n.to_string(), "--seed", "9"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let xs: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    let got = xs.iter().sum::<f64>() / n as f64;
    assert!((got - mean).abs() < 3.0 * (var / n as f64).sqrt(), "{got} vs {mean}");
}

#[test]
fn sample_from_model_document() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(&model, r#"{"schema_version":1,"p":1,"weights":[1.0],"mu":[3.0],"sigma2":[0.25],"lambda":[0.0]}"#).unwrap();
    let o = snmix(&["sample", "--model", model.to_str().unwrap(), "--n", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 5);
    fs::write(&model, "{not json").unwrap();
    assert_eq!(snmix(&["sample", "--model", model.to_str().unwrap(), "--n", "5"]).status.code(), Some(2));
}

#[test]
fn study_is_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = snmix(&[
            "study", "--preset", "model1", "--reps", "6", "--sizes", "60", "--seed", "3", "--threads", threads, "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read_to_string(out.join("report.csv")).unwrap());
        let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["replications"], 6);
    }
    assert_eq!(csvs[0], csvs[1]);
    assert!(csvs[0].starts_with("estimator,n,p,init,param,bias,rmse,"));
    for est in ["MLE,60,2,", "PMLE,60,2,"] {
        assert!(csvs[0].lines().any(|l| l.starts_with(est)), "{est}");
    }
}

#[test]
fn study_order_preset_reports_dstar_for_each_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("order");
    let o = snmix(&["study", "--preset", "order-study", "--reps", "1", "--sizes", "40", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let mut orders = std::collections::BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert!(rec[13].parse::<f64>().unwrap().is_finite());
        orders.insert(rec[2].to_string());
    }
    assert_eq!(orders.into_iter().collect::<Vec<_>>(), vec!["2", "3", "4", "5"]);
}

#[test]
fn study_rejects_unwritable_output() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = snmix(&["study", "--preset", "model1", "--reps", "1", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn me_without_divergence_equals_mle_document() {
    let dir = tempfile::tempdir().unwrap();
    let input = faithful_csv(dir.path());
    let input = input.to_str().unwrap();
    let common = ["--input", input, "-p", "2", "--starts", "5", "--seed", "2"];
    let me = snmix(&[&["me"][..], &common].concat());
    assert_eq!(me.status.code(), Some(0), "{}", String::from_utf8_lossy(&me.stderr));
    let mle = snmix(&[&["fit", "--estimator", "mle"][..], &common].concat());
    assert_eq!(me.stdout, mle.stdout);
}

#[test]
fn me_shrinks_a_divergent_shape() {
    // A near-half-normal sample drives the unpenalized shape far out.
    let dir = tempfile::tempdir().unwrap();
    let mut found = false;
    for seed in 0..40u64 {
        let truth = snmix::SnMixture::single(snmix::SnComponent::new(0.0, 1.0, 60.0).unwrap());
        let xs = snmix::sample_mixture(&truth, 40, &mut snmix::RngHandle::new(seed)).unwrap();
        let path = dir.path().join("hn.csv");
        fs::write(&path, xs.iter().map(|x| format!("{x}\n")).collect::<String>()).unwrap();
        let o = snmix(&["me", "--input", path.to_str().unwrap(), "-p", "1", "--starts", "1"]);
        if o.status.code() != Some(0) {
            continue;
        }
        let doc = json(&o);
        if doc["me"].is_null() {
            continue;
        }
        let before = doc["me"]["mle_lambda"][0].as_f64().unwrap();
        let after = numbers(&doc, "lambda")[0];
        assert!(after.abs() < before.abs(), "{after} vs {before}");
        assert_eq!(doc["me"]["nu"], 1);
        found = true;
        break;
    }
    assert!(found, "no sample produced a divergent MLE shape");
}

#[test]
fn me_refuses_collapsed_scale() {
    // A block of tied values lets an unpenalized component collapse onto it.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tied.csv");
    let mut text = String::new();
    for _ in 0..12 {
        text.push_str("0.5\n");
    }
    for k in 0..12 {
        text.push_str(&format!("{}\n", 5.0 + 0.4 * k as f64));
    }
    fs::write(&path, text).unwrap();
    let o = snmix(&["me", "--input", path.to_str().unwrap(), "-p", "2", "--starts", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("collapsed scale"));
}
