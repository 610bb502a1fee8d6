//! The ten acceptance criteria, one shipped configuration each. Every test
//! prints a single PASS/FAIL line followed by the individual checks.

use std::path::PathBuf;

use stochwave_cli::{load, run, RunRecord};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/acceptance")
        .join(name)
}

fn criterion(number: u32, title: &str, file: &str) -> RunRecord {
    let cases = load(&config(file)).expect("shipped configuration parses");
    let out = tempfile::tempdir().unwrap();
    let record = run(&cases, out.path(), false).expect("shipped configuration validates");
    let mut lines = vec![format!(
        "criterion {number:>2} {}: {title} ({:.1} s)",
        if record.passed { "PASS" } else { "FAIL" },
        record.wall_seconds
    )];
    for (case, check) in record.checks() {
        lines.push(format!(
            "    {} {}/{} = {:e} (limit {:e})",
            if check.passed { "ok  " } else { "FAIL" },
            case.name,
            check.name,
            check.value,
            check.limit
        ));
    }
    for case in &record.cases {
        if let Some(e) = &case.error {
            lines.push(format!("    FAIL {}: {e}", case.name));
        }
    }
    println!("{}", lines.join("\n"));
    record
}

#[test]
fn criterion_01_renormalization() {
    let r = criterion(1, "raw pairing tracks a_eps, Wick pairing is stable", "c01_renorm.toml");
    assert!(r.passed);
}

#[test]
fn criterion_02_coercivity() {
    let r = criterion(2, "calibrated shift is coercive, quiet shift is one", "c02_coercivity.toml");
    assert!(r.passed);
}

#[test]
fn criterion_03_form_bounds() {
    let r = criterion(3, "form inequalities for R = 2, 4, 8", "c03_form_bounds.toml");
    assert!(r.passed);
}

#[test]
fn criterion_04_energy_conservation() {
    let r = criterion(4, "energy drift and second order", "c04_energy.toml");
    assert!(r.passed);
}

#[test]
fn criterion_05_rough_energy_gronwall() {
    let r = criterion(5, "coercive energy positivity and growth rate", "c05_gronwall.toml");
    assert!(r.passed);
}

#[test]
fn criterion_06_mild_solution_oracle() {
    let r = criterion(6, "leapfrog against the Duhamel oracle", "c06_oracle.toml");
    assert!(r.passed);
}

#[test]
fn criterion_07_classical_finite_speed() {
    let r = criterion(7, "free waves stay in the unit-speed support", "c07_finite_speed.toml");
    assert!(r.passed);
}

#[test]
fn criterion_08_local_gronwall() {
    let r = criterion(8, "local energy over backward cones", "c08_local_energy.toml");
    assert!(r.passed);
}

#[test]
fn criterion_09_cone_agreement() {
    let r = criterion(9, "truncations agree inside the cones", "c09_cone.toml");
    assert!(r.passed);
}

#[test]
fn criterion_10_besov_diagnostics() {
    let r = criterion(10, "indicator, interpolation and lift regularity", "c10_besov.toml");
    assert!(r.passed);
}
