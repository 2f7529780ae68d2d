use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_ROSTER: &str = r#"
top_models = 2

[[roster]]
name = "linear_regression"
family = "linear"

[[roster]]
name = "knn"
family = "knn"
hyperparameters = { k = 3 }
"#;

fn coarcta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coarcta"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, out: &str, extra: &str) -> String {
    let path = dir.join(format!("{out}.toml"));
    fs::write(
        &path,
        format!("traces_dir = \"{out}/traces\"\noutput_dir = \"{out}\"\n{extra}"),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_config_key_is_named_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "out", "densty = 1000.0\n");
    let out = coarcta(&["synth", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("densty"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "out", "");
    assert_eq!(coarcta(&["fly", "--config", &config]).status.code(), Some(1));
    assert_eq!(coarcta(&["synth"]).status.code(), Some(1));
    assert_eq!(
        coarcta(&["synth", "--config", &config, "--bc-mode", "pulsed"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        coarcta(&["synth", "--config", "/nonexistent/pipeline.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(coarcta(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "out", "");
    let out = coarcta(&["ingest", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("manifest.toml"), "{}", stderr(&out));
}

fn full_run(config: &str, out: &Path, mode: &str) {
    for step in ["synth", "ingest", "train", "evaluate", "bcgen", "oracle", "report"] {
        let o = coarcta(&[
            "--config",
            config,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--bc-mode",
            mode,
            step,
        ]);
        assert!(o.status.success(), "{step}: {}", stderr(&o));
    }
}

fn tree_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn runs_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    full_run(&write_config(dir.path(), "a", SMALL_ROSTER), &a, "transient");
    full_run(&write_config(dir.path(), "b", SMALL_ROSTER), &b, "transient");
    let (fa, fb) = (tree_files(&a), tree_files(&b));
    assert!(fa.iter().any(|(name, _)| name.ends_with("knn_BC4.bc")));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between runs");
    }
    let bc = fs::read_to_string(a.join("bc/knn_BC2.bc")).unwrap();
    assert!(bc.starts_with("#coarcta-bc v1 BC2 knn\n"));
    assert!(bc.lines().any(|l| l.starts_with("point,")));
}

#[test]
fn models_flag_selects_bc_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "o", SMALL_ROSTER);
    for step in ["synth", "ingest", "train", "evaluate"] {
        assert!(coarcta(&[step, "--config", &config]).status.success());
    }
    let run = coarcta(&["bcgen", "--config", &config, "--models", "linear_regression"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let names: Vec<String> = fs::read_dir(dir.path().join("o/bc"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"linear_regression_BC1.bc".to_string()));
    assert!(!names.iter().any(|n| n.starts_with("knn_")), "{names:?}");
}

#[test]
fn out_flag_redirects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "configured", "");
    let elsewhere = dir.path().join("elsewhere");
    let run = coarcta(&["synth", "--config", &config, "--out", elsewhere.to_str().unwrap()]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(elsewhere.join("traces/manifest.toml").is_file());
    assert!(!dir.path().join("configured").exists());
}
