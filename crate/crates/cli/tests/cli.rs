use std::fs;
use std::path::Path;
use std::process::Command;

use stochwave::io::FieldContainer;
use stochwave_cli::{parse_cases, run};

const LIFT: &str = r#"
kind = "lift"
[grid]
dim = 2
points = 32
side = 8.0
[noise]
seed = 17
mollifier = 0.5
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stochwave(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stochwave"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn lift_container_is_byte_identical_across_runs_and_thread_counts() {
    let cases = parse_cases(LIFT).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(&cases, a.path(), false).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let second = pool.install(|| run(&cases, b.path(), false)).unwrap();
    assert!(first.passed && second.passed);
    assert_eq!(first.config_hash, second.config_hash);
    let bytes_a = fs::read(a.path().join("case0/lift.bin")).unwrap();
    let bytes_b = fs::read(b.path().join("case0/lift.bin")).unwrap();
    assert_eq!(bytes_a, bytes_b);
    let container = FieldContainer::from_bytes(&bytes_a).unwrap();
    assert_eq!(container.header.seed, 17);
    for name in ["xi", "x", "wick_grad_x_sq", "w", "w_high", "z"] {
        assert!(container.block(name).is_some(), "missing {name}");
    }
}

#[test]
fn seed_changes_the_hash_and_the_fields() {
    let mut cases = parse_cases(LIFT).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = run(&cases, &dir.path().join("a"), false).unwrap();
    cases[0].noise.seed = 18;
    let second = run(&cases, &dir.path().join("b"), false).unwrap();
    assert_ne!(first.config_hash, second.config_hash);
    assert_ne!(
        fs::read(dir.path().join("a/case0/lift.bin")).unwrap(),
        fs::read(dir.path().join("b/case0/lift.bin")).unwrap()
    );
}

#[test]
fn equal_radii_give_zero_cone_difference() {
    let text = r#"
kind = "cone"
[grid]
dim = 2
points = 32
side = 8.0
[noise]
seed = 3
[operator]
edge_width = 0.125
[evolve]
cfl = 0.1
data_width = 0.5
[cone]
small_radius = 2.0
large_radius = 2.0
random_apexes = 2
calibration_samples = 20
"#;
    let dir = tempfile::tempdir().unwrap();
    let record = run(&parse_cases(text).unwrap(), dir.path(), false).unwrap();
    assert!(record.passed);
    let check = record.checks().find(|(_, c)| c.name == "cone_agreement").unwrap().1;
    assert_eq!(check.value, 0.0);
}

#[test]
fn reports_and_summary_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "lift.toml", LIFT);
    let out = dir.path().join("out");
    let output = stochwave(&["lift", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let summary: toml::Table = fs::read_to_string(out.join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(summary["passed"].as_bool(), Some(true));
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    let report: toml::Table = fs::read_to_string(out.join("case0/report.toml")).unwrap().parse().unwrap();
    assert_eq!(report["kind"].as_str(), Some("lift"));
    let leftovers = fs::read_dir(out.join("case0"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp"))
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn exit_code_is_one_when_a_check_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "speed.toml",
        r#"
kind = "finite-speed"
[grid]
points = 32
side = 8.0
[noise]
enabled = false
[operator]
shift = 1.0
[evolve]
t_final = 1.0
cubic = false
[tolerances]
finite_speed = 1e-300
"#,
    );
    let out = dir.path().join("out");
    let output = stochwave(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stdout).contains("FAIL case0/mass_outside_support"));
}

#[test]
fn exit_code_is_two_for_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.toml", "kind = \"lift\"\n[grid]\npointz = 3\n");
    assert_eq!(stochwave(&["run", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));

    let unstable = write(
        dir.path(),
        "unstable.toml",
        "kind = \"evolve\"\n[grid]\npoints = 32\nside = 8.0\n[evolve]\ndt = 1.0\n",
    );
    let output = stochwave(&["validate", "--config", unstable.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("evolve.dt"));

    let wide = write(
        dir.path(),
        "wide.toml",
        "kind = \"local-energy\"\n[grid]\nside = 8.0\n[local]\nhorizon = 2.0\n",
    );
    let output = stochwave(&["validate", "--config", wide.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("local.horizon"));

    let mismatch = write(dir.path(), "lift.toml", LIFT);
    assert_eq!(stochwave(&["cone", "--config", mismatch.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn shipped_configurations_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let output = stochwave(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(output.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&output.stderr));
        count += 1;
    }
    assert_eq!(count, 10);
}

#[test]
fn runtime_failures_name_the_module() {
    let text = r#"
kind = "evolve"
[grid]
points = 16
side = 8.0
[noise]
enabled = false
[operator]
shift = 1.0
[evolve]
data_file = "/nonexistent/data.bin"
"#;
    let dir = tempfile::tempdir().unwrap();
    let record = run(&parse_cases(text).unwrap(), dir.path(), false).unwrap();
    assert!(!record.passed);
    let error = record.cases[0].error.as_deref().unwrap();
    assert!(error.starts_with("dynamics:"), "{error}");
}
