use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use shear_core::data::{Dataset, WasteSample};
use shear_core::model::{file_checksum_hex, ModelBundle};
use shear_service::{AppState, LoadedModel, ServiceConfig};
use tempfile::TempDir;

fn shear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shear"))
        .args(args)
        .env_remove("SHEAR_ORACLE_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = shear(args);
    assert!(
        out.status.success(),
        "shear {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    data: PathBuf,
}

impl Fixture {
    fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data.csv");
        ok(&["gen-data", "--n", &n.to_string(), "--seed", "2", "--out", s(&data)]);
        Fixture { dir, data }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, target: &str, out: &str, extra: &[&str]) -> PathBuf {
        let model = self.path(out);
        let mut args = vec![
            "train", "--data", s(&self.data), "--target", target, "--out", s(&model), "--epochs", "15", "--layers",
            "16,8",
        ];
        args.extend_from_slice(extra);
        ok(&args);
        model
    }
}

fn loss_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(shear(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(shear(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(shear(&[]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_1_with_one_line() {
    let f = Fixture::new(30);
    let out = shear(&[
        "train", "--data", s(&f.data), "--target", "friction", "--out", s(&f.path("m.bin")), "--gamma", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error: ") && err.contains("gamma"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let out = shear(&["train", "--data", "/nonexistent.csv", "--target", "friction", "--out", "m.bin"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent.csv"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_shear"))
        .args(["gen-data", "--n", "3", "--out", "/dev/null"])
        .env("SHEAR_ORACLE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("SHEAR_ORACLE_THREADS"));
}

#[test]
fn flags_override_config_file() {
    let f = Fixture::new(40);
    let config = f.path("shear.toml");
    std::fs::write(&config, "[train]\nepochs = 3\nlayers = [4]\n").unwrap();
    let a = f.path("a.bin");
    ok(&["--config", s(&config), "train", "--data", s(&f.data), "--target", "friction", "--out", s(&a)]);
    assert_eq!(loss_rows(&f.path("a.bin.loss.csv")), 3);
    assert_eq!(ModelBundle::load(&a).unwrap().mlp.config.hidden_sizes, vec![4]);

    let b = f.path("b.bin");
    ok(&[
        "--config", s(&config), "train", "--data", s(&f.data), "--target", "friction", "--out", s(&b), "--epochs", "5",
    ]);
    assert_eq!(loss_rows(&f.path("b.bin.loss.csv")), 5);

    std::fs::write(&config, "[train]\nepoch = 3\n").unwrap();
    let out = shear(&["--config", s(&config), "gen-data", "--n", "3", "--out", s(&f.path("x.csv"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trained_models_load_in_the_service() {
    let f = Fixture::new(60);
    let friction = f.train("friction", "f.bin", &[]);
    let cohesion = f.train("cohesion", "c.bin", &["--seed", "1"]);
    let models = vec![LoadedModel::load(&friction).unwrap(), LoadedModel::load(&cohesion).unwrap()];
    let state = AppState::new(models, ServiceConfig::default()).unwrap();
    assert_eq!(state.models.len(), 2);

    let eval = ok(&["evaluate", "--model", s(&friction), "--data", s(&f.data)]);
    assert!(eval.starts_with("friction: "), "{eval}");
}

#[test]
fn explaining_the_background_row_gives_zero_attributions() {
    let f = Fixture::new(40);
    let model_path = f.train("cohesion", "m.bin", &["--background", "1"]);
    let model = ModelBundle::load(&model_path).unwrap();
    let row = model.scaler.inverse_features(model.background.rows.row(0)).unwrap();
    let sample = WasteSample {
        features: row,
        friction_angle_deg: None,
        cohesion_kpa: None,
    };
    let input = Dataset::new(model.schema.clone(), vec![sample], model.target).unwrap();
    let input_path = f.path("one.csv");
    input.write_csv(std::fs::File::create(&input_path).unwrap()).unwrap();

    for method in ["exact", "kernel"] {
        let report = f.path(&format!("{method}.json"));
        let waterfall = f.path(&format!("{method}.csv"));
        ok(&[
            "explain", "--model", s(&model_path), "--input", s(&input_path), "--method", method, "--out", s(&report),
            "--waterfall", s(&waterfall),
        ]);
        let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        let inst = &r["instances"][0];
        for phi in inst["phi"].as_array().unwrap() {
            assert!(phi.as_f64().unwrap().abs() <= 1e-9, "{method}: {phi}");
        }
        assert_eq!(r["model_checksum"], file_checksum_hex(&std::fs::read(&model_path).unwrap()).unwrap());
        assert!(std::fs::read_to_string(&waterfall).unwrap().lines().count() >= 2);
    }
}

#[test]
fn explain_report_is_locally_accurate() {
    let f = Fixture::new(40);
    let model = f.train("friction", "m.bin", &["--background", "6"]);
    let report = f.path("e.json");
    ok(&[
        "explain", "--model", s(&model), "--input", s(&f.data), "--n-samples", "256", "--out", s(&report),
    ]);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["instances"].as_array().unwrap().len(), 40);
    assert_eq!(r["background"]["rows"], 6);
    for inst in r["instances"].as_array().unwrap() {
        let phi: f64 = inst["phi"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        let f = inst["prediction"].as_f64().unwrap();
        assert!((inst["base_value"].as_f64().unwrap() + phi - f).abs() <= 1e-6 * f.abs().max(1.0));
    }

    let out = shear(&["explain", "--model", s(&model), "--input", s(&f.data), "--n-samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("34"), "{}", stderr(&out));
}

#[test]
fn summary_report_is_accepted_by_the_service() {
    let f = Fixture::new(40);
    let friction = f.train("friction", "f.bin", &["--background", "4"]);
    let cohesion = f.train("cohesion", "c.bin", &["--background", "4"]);
    let report = f.path("summary.json");
    let scatter = f.path("scatter.csv");
    ok(&[
        "summary", "--model", s(&friction), "--data", s(&f.data), "--n-samples", "128", "--out", s(&report),
        "--scatter", s(&scatter),
    ]);
    assert_eq!(std::fs::read_to_string(&scatter).unwrap().lines().count(), 1 + 40 * 17);

    let models = vec![LoadedModel::load(&friction).unwrap(), LoadedModel::load(&cohesion).unwrap()];
    let mut state = AppState::new(models, ServiceConfig::default()).unwrap();
    state.load_summary(&report).unwrap();
}

#[test]
fn gen_data_is_seed_determined() {
    let f = Fixture::new(25);
    let again = f.path("again.csv");
    ok(&["gen-data", "--n", "25", "--seed", "2", "--out", s(&again)]);
    assert_eq!(std::fs::read(&f.data).unwrap(), std::fs::read(&again).unwrap());
    let other = f.path("other.csv");
    ok(&["gen-data", "--n", "25", "--seed", "3", "--out", s(&other)]);
    assert_ne!(std::fs::read(&f.data).unwrap(), std::fs::read(&other).unwrap());
}
