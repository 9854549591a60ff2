//! End-to-end behavior of the binary: edge cases of each subcommand and the
//! error contract.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    write!(f, "{body}").unwrap();
    path
}

fn dikin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dikin"))
        .args(args)
        .output()
        .expect("binary runs")
}

const BOX1: &str = r#"
seed = 5

[barrier]
type = "polytope"
dimension = 1
enclosing_radius = 1.0
rows = [[1.0], [-1.0]]
offsets = [1.0, 1.0]
"#;

#[test]
fn sample_zero_steps_writes_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", BOX1);
    let out = dir.path().join("s.csv");
    let result = dikin(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# seed=5"));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data, vec!["x_1"]);
}

#[test]
fn missing_seed_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "steps = 10\n\n[barrier]\ntype = \"polytope\"\ndimension = 1\nenclosing_radius = 1.0\nrows = [[1.0], [-1.0]]\noffsets = [1.0, 1.0]\n",
    );
    let out = dir.path().join("s.csv");
    let result = dikin(&["sample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!result.status.success());
    let err = String::from_utf8_lossy(&result.stderr);
    assert!(err.contains("seed"), "{err}");
    assert!(!out.exists(), "no partial output on failure");
}

#[test]
fn track_with_an_empty_stream_reports_only_the_burn_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("{BOX1}\n[model]\nkind = \"drift\"\ndrift_radius = 0.5\n"),
    );
    let stream = write_config(dir.path(), "empty.csv", "");
    let result = dikin(&[
        "track",
        "--config",
        cfg.to_str().unwrap(),
        "--stream",
        stream.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "{stdout}");
    assert!(lines[0].contains("\"t\":0"));
    assert!(lines[0].contains("burn_in_steps"));
}

#[test]
fn track_reports_constant_tau_for_a_constant_center_stream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("{BOX1}\n[model]\nkind = \"drift\"\ndrift_radius = 0.5\n"),
    );
    let stream = write_config(dir.path(), "centers.csv", &"0.1\n".repeat(8));
    let result = dikin(&[
        "track",
        "--config",
        cfg.to_str().unwrap(),
        "--stream",
        stream.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    let taus: Vec<u64> = stdout
        .lines()
        .skip(1)
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["tau"].as_u64().unwrap()
        })
        .collect();
    assert_eq!(taus.len(), 8);
    // β = 1 from round 2 onward: τ settles immediately after round 1.
    assert!(taus[1..].iter().all(|t| *t == taus[1]), "{taus:?}");
}

#[test]
fn malformed_stream_lines_name_the_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("{BOX1}\n[model]\nkind = \"drift\"\ndrift_radius = 0.5\n"),
    );
    let stream = write_config(dir.path(), "bad.csv", "0.1\nnot-a-number\n");
    let result = dikin(&[
        "track",
        "--config",
        cfg.to_str().unwrap(),
        "--stream",
        stream.to_str().unwrap(),
    ]);
    assert!(!result.status.success());
    let err = String::from_utf8_lossy(&result.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn anneal_with_a_coarse_target_degenerates_to_at_most_one_phase() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
seed = 2

[barrier]
type = "polytope"
dimension = 2
enclosing_radius = 1.4142135623730951
rows = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
offsets = [1.0, 1.0, 1.0, 1.0]

[anneal]
direction = [1.0, 0.0]
eps = 2.0
"#,
    );
    let result = dikin(&["anneal", "--config", cfg.to_str().unwrap()]);
    assert!(result.status.success());
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&result.stdout).trim()).unwrap();
    assert!(v["report"]["phases"].as_u64().unwrap() <= 1);
}

#[test]
fn predict_with_zero_losses_has_zero_regret() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{BOX1}\n[predict]\nhorizon = 20\n"));
    let stream = write_config(dir.path(), "l.csv", &"0.0\n".repeat(20));
    let result = dikin(&[
        "predict",
        "--config",
        cfg.to_str().unwrap(),
        "--stream",
        stream.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&result.stdout).trim()).unwrap();
    assert_eq!(v["realized_total"].as_f64().unwrap(), 0.0);
    assert_eq!(v["regret"].as_f64().unwrap(), 0.0);
}

#[test]
fn sample_summary_reports_small_tv_against_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("{BOX1}\n[potential]\nkind = \"uniform\"\n"),
    );
    let out = dir.path().join("s.csv");
    let result = dikin(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "100000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&result.stdout).trim()).unwrap();
    let tv = v["tv_vs_oracle"].as_f64().unwrap();
    assert!(tv <= 0.05, "tv {tv}");
    let rate = v["acceptance_rate"][0].as_f64().unwrap();
    assert!(rate > 0.1 && rate < 0.9);
}

#[test]
fn track_runs_the_posterior_driver() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
seed = 9

[barrier]
type = "quadratic"
dimension = 2
enclosing_radius = 1.0
[[barrier.constraints]]
q = [[1.0, 0.0], [0.0, 1.0]]
p = [0.0, 0.0]
c = -1.0

[tracker]
eps = 0.25

[model]
kind = "gaussian_posterior"
kappa2 = 1.0
sup_samples = 256
"#,
    );
    let stream = write_config(dir.path(), "obs.csv", "0.1,0.2
-0.05,0.1
0.0,0.0
");
    let samples = dir.path().join("post.csv");
    let result = dikin(&[
        "track",
        "--config",
        cfg.to_str().unwrap(),
        "--stream",
        stream.to_str().unwrap(),
        "--out",
        samples.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8_lossy(&result.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4); // burn-in + three rounds
    for line in &lines[1..] {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["heuristic"].as_bool().unwrap()); // data-dependent β is sampled
        assert!(v["tau"].as_u64().unwrap() >= 1);
    }
    let text = std::fs::read_to_string(&samples).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#') && !l.starts_with('x')).count(), 3);
}

#[test]
fn diagnose_passes_on_the_shipped_box() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", BOX1);
    let result = dikin(&["diagnose", "--config", cfg.to_str().unwrap(), "--trials", "300"]);
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    for line in stdout.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], serde_json::Value::Bool(true), "{line}");
    }
}

#[test]
fn unknown_config_fields_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{BOX1}\nsteppes = 3\n"));
    let result = dikin(&["sample", "--config", cfg.to_str().unwrap(), "--steps", "1"]);
    assert!(!result.status.success());
    let err = String::from_utf8_lossy(&result.stderr);
    assert!(err.contains("steppes"), "{err}");
}
