use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use stochwave::io::write_atomic;

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiments::{execute, Check};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

/// Result of one case, written as `report.toml` in the case directory.
#[derive(Clone, Debug, Serialize)]
pub struct CaseRecord {
    pub name: String,
    pub kind: String,
    pub config_hash: String,
    pub passed: bool,
    pub wall_seconds: f64,
    /// Runtime failure, prefixed by the module that raised it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
}

/// Result of a whole configuration file, written as `summary.toml`.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub version: String,
    pub config_hash: String,
    pub passed: bool,
    pub wall_seconds: f64,
    pub cases: Vec<CaseRecord>,
}

impl RunRecord {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn checks(&self) -> impl Iterator<Item = (&CaseRecord, &Check)> {
        self.cases.iter().flat_map(|c| c.checks.iter().map(move |k| (c, k)))
    }
}

/// Hash of the resolved configuration. The output directory does not
/// influence any result, so it is left out.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.output.dir = PathBuf::new();
    hex::encode(Sha256::digest(canonical.canonical().as_bytes()))
}

/// Validates every case, returning all diagnostics at once.
pub fn validate_all(cases: &[ExperimentConfig]) -> Result<(), ConfigError> {
    let mut diagnostics = Vec::new();
    for cfg in cases {
        if cfg.kind.is_none() {
            diagnostics.push(crate::config::Diagnostic {
                field: "kind".into(),
                message: format!("case {} has no experiment kind", cfg.case_name()),
            });
        }
        for mut d in cfg.validate() {
            if cases.len() > 1 {
                d.field = format!("{}.{}", cfg.case_name(), d.field);
            }
            diagnostics.push(d);
        }
    }
    if diagnostics.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(diagnostics))
    }
}

/// Runs every case and writes its outputs below `out`. Each case gets a
/// directory named after it; the summary goes to `out/summary.toml`.
pub fn run(cases: &[ExperimentConfig], out: &Path, verbose: bool) -> Result<RunRecord, ConfigError> {
    validate_all(cases)?;
    let start = Instant::now();
    let mut hasher = Sha256::new();
    let mut records = Vec::with_capacity(cases.len());
    for cfg in cases {
        let hash = config_hash(cfg);
        hasher.update(hash.as_bytes());
        let kind = cfg.kind.expect("validated").name().to_owned();
        if verbose {
            eprintln!("[{}] running {kind}", cfg.case_name());
        }
        let dir = out.join(cfg.case_name());
        let case_start = Instant::now();
        let mut record = CaseRecord {
            name: cfg.case_name().to_owned(),
            kind,
            config_hash: hash,
            passed: false,
            wall_seconds: 0.0,
            error: None,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
        };
        match execute(cfg) {
            Ok(outcome) => {
                record.passed = outcome.passed();
                if cfg.output.traces {
                    for (name, text) in &outcome.traces {
                        let path = dir.join(name);
                        write_or_note(&path, text.as_bytes(), &mut record);
                    }
                }
                if cfg.output.fields {
                    for (name, container) in &outcome.fields {
                        let path = dir.join(name);
                        write_or_note(&path, &container.to_bytes(), &mut record);
                    }
                }
                record.checks = outcome.checks;
                record.metrics = outcome.metrics;
            }
            Err(e) => record.error = Some(e.to_string()),
        }
        record.wall_seconds = case_start.elapsed().as_secs_f64();
        if verbose {
            for c in &record.checks {
                eprintln!(
                    "[{}] {} {}: {:e} (limit {:e})",
                    record.name,
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit
                );
            }
            if let Some(e) = &record.error {
                eprintln!("[{}] error: {e}", record.name);
            }
        }
        let report = toml::to_string(&record).expect("record serializes");
        write_or_note(&dir.join("report.toml"), report.as_bytes(), &mut record);
        records.push(record);
    }
    let run = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config_hash: hex::encode(hasher.finalize()),
        passed: records.iter().all(|r| r.passed),
        wall_seconds: start.elapsed().as_secs_f64(),
        cases: records,
    };
    let summary = toml::to_string(&run).expect("record serializes");
    if let Err(e) = write_atomic(&out.join("summary.toml"), summary.as_bytes()) {
        eprintln!("cannot write the summary: {e}");
    }
    Ok(run)
}

fn write_or_note(path: &Path, bytes: &[u8], record: &mut CaseRecord) {
    match write_atomic(path, bytes) {
        Ok(()) => record.artifacts.push(path.to_owned()),
        Err(e) => {
            record.passed = false;
            record.error.get_or_insert_with(|| format!("io: cannot write {}: {e}", path.display()));
        }
    }
}
