//! Experiment configuration files.
//!
//! A file is a TOML document with one section per concern. An optional
//! array of `[[case]]` tables lists variants of the base experiment; each
//! case is merged over the base (tables recursively, other values replaced)
//! and run on its own.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stochwave::dynamics::{cfl_step, MAX_CFL, MAX_ORACLE_POINTS_PER_SIDE, MAX_ORACLE_UNKNOWNS};
use stochwave::localization::ShellGeometry;
use stochwave::propagation::CONE_SPEED;
use stochwave::spectral::TorusGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Lift,
    RenormStudy,
    Evolve,
    Gronwall,
    Cone,
    BesovReport,
    OracleCompare,
    Coercivity,
    FormBounds,
    FiniteSpeed,
    LocalEnergy,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Lift => "lift",
            Kind::RenormStudy => "renorm-study",
            Kind::Evolve => "evolve",
            Kind::Gronwall => "gronwall",
            Kind::Cone => "cone",
            Kind::BesovReport => "besov-report",
            Kind::OracleCompare => "oracle-compare",
            Kind::Coercivity => "coercivity",
            Kind::FormBounds => "form-bounds",
            Kind::FiniteSpeed => "finite-speed",
            Kind::LocalEnergy => "local-energy",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub points: usize,
    pub side: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: 2,
            points: 64,
            side: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub seed: u64,
    /// `false` replaces the noise by zero.
    pub enabled: bool,
    /// Mollifier scale.
    pub mollifier: f64,
    /// Monte Carlo samples for the second constant (three dimensions only).
    pub b_samples: usize,
    pub b_seed_base: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            seed: 1,
            enabled: true,
            mollifier: 0.25,
            b_samples: 300,
            b_seed_base: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationSection {
    pub base_level: f64,
    pub inner_radius: Option<f64>,
    pub edge_width: Option<f64>,
}

impl Default for LocalizationSection {
    fn default() -> Self {
        Self {
            base_level: 1.0,
            inner_radius: None,
            edge_width: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorSection {
    /// Truncation radius; `side / 4` when absent.
    pub radius: Option<f64>,
    /// Width of the smooth ball cutoff; zero gives a sharp indicator.
    pub edge_width: f64,
    /// Fixed coercivity shift; calibrated when absent.
    pub shift: Option<f64>,
    pub eigen_tolerance: f64,
}

impl Default for OperatorSection {
    fn default() -> Self {
        Self {
            radius: None,
            edge_width: 0.25,
            shift: None,
            eigen_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub cfl: f64,
    /// Explicit step; overrides `cfl`.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub cubic: bool,
    pub record_every: usize,
    /// Width of the Gaussian initial position; `side / 16` when absent.
    pub data_width: Option<f64>,
    /// Field container with blocks `v0` and (optionally) `p0`.
    pub data_file: Option<PathBuf>,
    /// Also rerun with half the step and compare drifts.
    pub order_check: bool,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            cfl: 0.25,
            dt: None,
            t_final: 1.0,
            cubic: true,
            record_every: 10,
            data_width: None,
            data_file: None,
            order_check: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormSection {
    pub scales: Vec<f64>,
    pub seeds: usize,
    pub seed_base: u64,
    /// Width of the Gaussian test function.
    pub test_width: f64,
}

impl Default for RenormSection {
    fn default() -> Self {
        Self {
            scales: vec![0.125, 0.0625, 0.03125, 0.015625],
            seeds: 50,
            seed_base: 1,
            test_width: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormSection {
    pub samples: usize,
    pub sample_seed: u64,
    /// Truncation radii to sweep; the operator radius when empty.
    pub radii: Vec<f64>,
}

impl Default for FormSection {
    fn default() -> Self {
        Self {
            samples: 100,
            sample_seed: 7,
            radii: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeSection {
    /// `L`; `side / 4` when absent.
    pub small_radius: Option<f64>,
    /// `R`; `2 L` when absent.
    pub large_radius: Option<f64>,
    /// Random apexes added to the central one.
    pub random_apexes: usize,
    pub apex_seed: u64,
    pub calibration_samples: usize,
}

impl Default for ConeSection {
    fn default() -> Self {
        Self {
            small_radius: None,
            large_radius: None,
            random_apexes: 4,
            apex_seed: 7,
            calibration_samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalSection {
    pub apexes: usize,
    pub apex_seed: u64,
    /// Latest apex time; the run lasts this long.
    pub horizon: f64,
    /// Radius of the ball the random cones must stay in; `side / 4` when absent.
    pub region: Option<f64>,
    pub calibration_samples: usize,
    pub calibration_seed: u64,
    pub stride: usize,
    /// Width of the Gaussian placed outside the cone ball in the noise-free control.
    pub control_width: f64,
}

impl Default for LocalSection {
    fn default() -> Self {
        Self {
            apexes: 5,
            apex_seed: 3,
            horizon: 2.0,
            region: None,
            calibration_samples: 200,
            calibration_seed: 1,
            stride: 4,
            control_width: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteSpeedSection {
    /// Support radius of the data; `side / 16` when absent.
    pub data_radius: Option<f64>,
    pub bump_order: f64,
    /// Margin in grid spacings.
    pub margin_cells: f64,
}

impl Default for FiniteSpeedSection {
    fn default() -> Self {
        Self {
            data_radius: None,
            bump_order: 2.0,
            margin_cells: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub subinterval: f64,
    pub nodes: usize,
    pub data_width: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            subinterval: 0.025,
            nodes: 10,
            data_width: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesovSection {
    pub indicator: bool,
    pub indicator_points: Vec<usize>,
    pub interpolation: bool,
    pub interpolation_samples: usize,
    pub interpolation_s: [f64; 2],
    pub interpolation_theta: f64,
    pub interpolation_p: f64,
    pub lift: bool,
    pub lift_points: Vec<usize>,
    pub lift_seeds: usize,
    /// Mollifier scale in units of the grid spacing.
    pub lift_scale_factor: f64,
    pub lift_margin: f64,
    /// Subset of `xi`, `x`, `wick_grad_x_sq`, `x_second`, `x_third`.
    pub lift_objects: Vec<String>,
}

impl Default for BesovSection {
    fn default() -> Self {
        Self {
            indicator: true,
            indicator_points: vec![64, 128, 256],
            interpolation: true,
            interpolation_samples: 100,
            interpolation_s: [-0.5, 1.0],
            interpolation_theta: 0.5,
            interpolation_p: 2.0,
            lift: true,
            lift_points: vec![128, 256, 512],
            lift_seeds: 10,
            lift_scale_factor: 1.2 / std::f64::consts::PI,
            lift_margin: 0.1,
            lift_objects: vec!["xi".into(), "x".into(), "wick_grad_x_sq".into()],
        }
    }
}

/// Acceptance thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub drift: f64,
    pub order_ratio: f64,
    pub order_spread: f64,
    pub gronwall_factor: f64,
    pub energy_floor: f64,
    pub oracle: f64,
    pub oracle_free: f64,
    pub cone_relative: f64,
    pub cone_power: f64,
    pub finite_speed: f64,
    pub control_energy: f64,
    pub renorm_relative: f64,
    pub wick_standard_errors: f64,
    pub indicator_spread: f64,
    pub interpolation_constant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            drift: 1e-3,
            order_ratio: 4.0,
            order_spread: 0.3,
            gronwall_factor: 4.0,
            energy_floor: -1e-8,
            oracle: 1e-4,
            oracle_free: 1e-8,
            cone_relative: 1e-6,
            cone_power: 10.0,
            finite_speed: 1e-8,
            control_energy: 1e-10,
            renorm_relative: 0.1,
            wick_standard_errors: 3.0,
            indicator_spread: 2.0,
            interpolation_constant: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write the lift and operator fields as a container.
    pub fields: bool,
    /// Write the energy trace as CSV.
    pub traces: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            fields: true,
            traces: true,
        }
    }
}

/// One fully resolved experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub name: Option<String>,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub localization: LocalizationSection,
    pub operator: OperatorSection,
    pub evolve: EvolveSection,
    pub renorm: RenormSection,
    pub form: FormSection,
    pub cone: ConeSection,
    pub local: LocalSection,
    pub finite_speed: FiniteSpeedSection,
    pub oracle: OracleSection,
    pub besov: BesovSection,
    pub tolerances: Tolerances,
    pub output: OutputSection,
}

/// A configuration problem tied to the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

/// Parses a document into its cases (a single case when there is no
/// `[[case]]` array).
pub fn parse_cases(text: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let mut base: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let cases = match base.remove("case") {
        None => vec![toml::Table::new()],
        Some(toml::Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                toml::Value::Table(t) => Ok(t),
                _ => Err(ConfigError::Parse("every [[case]] entry must be a table".into())),
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(ConfigError::Parse("`case` must be an array of tables".into())),
    };
    cases
        .into_iter()
        .enumerate()
        .map(|(i, overrides)| {
            let mut merged = base.clone();
            merge(&mut merged, overrides);
            let mut cfg: ExperimentConfig = toml::Value::Table(merged)
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
            if cfg.name.is_none() {
                cfg.name = Some(format!("case{i}"));
            }
            Ok(cfg)
        })
        .collect()
}

pub fn load(path: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_owned(), e))?;
    parse_cases(&text)
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl ExperimentConfig {
    pub fn case_name(&self) -> &str {
        self.name.as_deref().unwrap_or("case0")
    }

    pub fn radius(&self) -> f64 {
        self.operator.radius.unwrap_or(self.grid.side / 4.0)
    }

    pub fn data_width(&self) -> f64 {
        self.evolve.data_width.unwrap_or(self.grid.side / 16.0)
    }

    pub fn small_radius(&self) -> f64 {
        self.cone.small_radius.unwrap_or(self.grid.side / 4.0)
    }

    pub fn large_radius(&self) -> f64 {
        self.cone.large_radius.unwrap_or(2.0 * self.small_radius())
    }

    pub fn geometry(&self) -> ShellGeometry {
        ShellGeometry {
            inner_radius: self.localization.inner_radius.unwrap_or(self.grid.side / 16.0),
            edge_width: self.localization.edge_width.unwrap_or(self.grid.side / 32.0),
        }
    }

    /// Canonical text of the resolved configuration, the input of the hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Static checks; an empty list means the configuration is usable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| {
            out.push(Diagnostic {
                field: field.to_owned(),
                message,
            })
        };
        let g = &self.grid;
        let grid = match TorusGrid::new(g.dim, g.points, g.side) {
            Ok(grid) => Some(grid),
            Err(e) => {
                bad("grid", e.to_string());
                None
            }
        };
        let half = g.side / 2.0;
        if !(self.noise.mollifier > 0.0) {
            bad("noise.mollifier", format!("must be positive, got {}", self.noise.mollifier));
        }
        if g.dim == 3 && self.noise.enabled && self.noise.b_samples < 2 {
            bad("noise.b_samples", "three-dimensional lifts need at least two samples".into());
        }
        let geo = self.geometry();
        if !(geo.inner_radius > 0.0 && geo.edge_width > 0.0) || geo.inner_radius + 6.0 * geo.edge_width > half {
            bad("localization", format!("shell geometry {geo:?} does not fit in half the side {half}"));
        }
        let radius = self.radius();
        if !(radius > 0.0 && radius <= half) {
            bad("operator.radius", format!("{radius} must lie in (0, side/2 = {half}]"));
        }
        if !(self.operator.edge_width >= 0.0) {
            bad("operator.edge_width", "must be nonnegative".into());
        }
        if !(self.operator.eigen_tolerance > 0.0) {
            bad("operator.eigen_tolerance", "must be positive".into());
        }
        let ev = &self.evolve;
        if !(ev.t_final > 0.0) {
            bad("evolve.t_final", format!("must be positive, got {}", ev.t_final));
        }
        if !(ev.cfl > 0.0 && ev.cfl <= MAX_CFL) {
            bad("evolve.cfl", format!("{} outside (0, {MAX_CFL}]", ev.cfl));
        }
        if let (Some(dt), Some(grid)) = (ev.dt, &grid) {
            let limit = cfl_step(grid, MAX_CFL);
            if !(dt > 0.0 && dt <= limit) {
                bad("evolve.dt", format!("{dt} exceeds the stability limit {limit}"));
            }
        }
        if ev.record_every == 0 {
            bad("evolve.record_every", "must be at least 1".into());
        }
        if let Some(w) = ev.data_width {
            if !(w > 0.0) {
                bad("evolve.data_width", "must be positive".into());
            }
        }
        match self.kind {
            Some(Kind::RenormStudy) => {
                if self.renorm.scales.is_empty() || self.renorm.scales.iter().any(|s| !(*s > 0.0)) {
                    bad("renorm.scales", "need positive scales".into());
                }
                if self.renorm.seeds < 2 {
                    bad("renorm.seeds", "need at least two seeds".into());
                }
            }
            Some(Kind::FormBounds) => {
                for r in &self.form.radii {
                    if !(*r > 0.0 && *r <= half) {
                        bad("form.radii", format!("{r} must lie in (0, side/2 = {half}]"));
                    }
                }
            }
            Some(Kind::Cone) => {
                let l = self.small_radius();
                let r = self.large_radius();
                if !(l > 0.0 && r >= l && r <= half) {
                    bad("cone", format!("need 0 < L = {l} <= R = {r} <= side/2 = {half}"));
                }
                let reach = CONE_SPEED * l / 2.0 + 1.0;
                if reach > half {
                    bad("cone.small_radius", format!("cone apex at time L/2 reaches {reach} > side/2"));
                }
            }
            Some(Kind::LocalEnergy) => {
                let reach = CONE_SPEED * self.local.horizon + 1.0;
                if reach > half {
                    bad("local.horizon", format!("cone apex at time {} reaches {reach} > side/2", self.local.horizon));
                }
                if self.local.apexes == 0 {
                    bad("local.apexes", "need at least one apex".into());
                }
            }
            Some(Kind::OracleCompare) => {
                if g.points > MAX_ORACLE_POINTS_PER_SIDE || g.points.pow(g.dim as u32) > MAX_ORACLE_UNKNOWNS {
                    bad(
                        "grid.points",
                        format!("the dense oracle allows at most {MAX_ORACLE_POINTS_PER_SIDE} points per side"),
                    );
                }
            }
            Some(Kind::FiniteSpeed) => {
                let r0 = self.finite_speed.data_radius.unwrap_or(g.side / 16.0);
                if !(r0 > 0.0) || r0 + ev.t_final > half {
                    bad("finite_speed", format!("support {r0} plus time {} exceeds side/2", ev.t_final));
                }
            }
            Some(Kind::BesovReport) => {
                let b = &self.besov;
                if b.lift && b.lift_seeds == 0 {
                    bad("besov.lift_seeds", "need at least one seed".into());
                }
                for name in &b.lift_objects {
                    if crate::experiments::lift_object(name).is_none() {
                        bad("besov.lift_objects", format!("unknown object {name:?}"));
                    }
                }
                if !(0.0..=1.0).contains(&b.interpolation_theta) {
                    bad("besov.interpolation_theta", "must lie in [0, 1]".into());
                }
            }
            _ => {}
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig {
            kind: Some(Kind::Evolve),
            ..Default::default()
        };
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_cases("kind = \"evolve\"\n[grid]\npoint = 3\n").is_err());
        assert!(parse_cases("colour = 1\n").is_err());
    }

    #[test]
    fn cases_merge_over_the_base() {
        let text = r#"
kind = "coercivity"
[grid]
points = 32
side = 8.0
[[case]]
name = "noisy"
[[case]]
name = "quiet"
noise = { enabled = false }
grid = { points = 16 }
"#;
        let cases = parse_cases(text).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].grid.points, 32);
        assert!(cases[0].noise.enabled);
        assert_eq!(cases[1].grid.points, 16);
        assert_eq!(cases[1].grid.side, 8.0);
        assert!(!cases[1].noise.enabled);
        assert_eq!(cases[1].case_name(), "quiet");
    }

    #[test]
    fn step_above_the_limit_is_named() {
        let mut cfg = ExperimentConfig {
            kind: Some(Kind::Evolve),
            ..Default::default()
        };
        cfg.evolve.dt = Some(1.0);
        let diags = cfg.validate();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "evolve.dt");
    }

    #[test]
    fn cone_past_half_the_torus_is_named() {
        let mut cfg = ExperimentConfig {
            kind: Some(Kind::LocalEnergy),
            ..Default::default()
        };
        cfg.local.horizon = 4.0;
        assert_eq!(cfg.validate()[0].field, "local.horizon");
        let mut cone = ExperimentConfig {
            kind: Some(Kind::Cone),
            ..Default::default()
        };
        cone.cone.small_radius = Some(8.0);
        assert!(cone.validate().iter().any(|d| d.field == "cone.small_radius"));
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = ExperimentConfig {
            kind: Some(Kind::Cone),
            ..Default::default()
        };
        let back: ExperimentConfig = toml::from_str(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
    }
}
