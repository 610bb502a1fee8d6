//! One pipeline per experiment kind. Each returns the checks it evaluated,
//! scalar metrics, and the artifacts to write.

use std::collections::BTreeMap;
use std::sync::Arc;

use stochwave::besov::{
    indicator_regularity_check, interpolation_check, lift_regularity_report, BesovParams, LiftObject,
};
use stochwave::dynamics::{
    compact_bump_of_order, drift_study, duhamel_oracle, evolve, free_wave, gaussian, gronwall_check, weighted_distance,
    DuhamelConfig, EnergyTrace, EvolveConfig, WaveState, WaveSystem,
};
use stochwave::hamiltonian::{
    calibrate_shift, form_bounds_check, test_vectors, TransformedOperator, TruncationConfig, Variant,
};
use stochwave::io::{energy_trace_csv, ContainerHeader, FieldContainer};
use stochwave::localization::LocalizationSchedule;
use stochwave::noise::{
    convergence_study, renorm_constant_b, sample_white_noise, Mollifier, MonteCarloEstimate, StochasticLift,
    B_RELATIVE_ERROR_LIMIT,
};
use stochwave::propagation::{
    calibrate_local_constant, cone_agreement, finite_speed_check, gronwall_local_check, random_cones,
    record_states, ConeExperiment, ConeSpec,
};
use stochwave::spectral::{RealField, TorusGrid};

use crate::config::{ExperimentConfig, Kind};

/// A runtime failure tagged with the module that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{module}: {source}")]
pub struct StageError {
    pub module: &'static str,
    #[source]
    pub source: stochwave::Error,
}

trait Within<T> {
    fn within(self, module: &'static str) -> Result<T, StageError>;
}

impl<T> Within<T> for stochwave::Result<T> {
    fn within(self, module: &'static str) -> Result<T, StageError> {
        self.map_err(|source| StageError { module, source })
    }
}

/// One evaluated acceptance check.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

/// Everything an experiment produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    /// `(file name, CSV text)`.
    pub traces: Vec<(String, String)>,
    /// `(file name, container)`.
    pub fields: Vec<(String, FieldContainer)>,
}

impl Outcome {
    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name, value <= limit, value, limit, "value <= limit");
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name, value >= limit, value, limit, "value >= limit");
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.push(name, ok, if ok { 1.0 } else { 0.0 }, 1.0, detail);
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, value: f64, limit: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            // NaN never passes.
            passed: passed && !value.is_nan(),
            value,
            limit,
            detail: detail.into(),
        });
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Maps a configuration name to the tracked lift object.
pub fn lift_object(name: &str) -> Option<LiftObject> {
    [
        LiftObject::Noise,
        LiftObject::Linear,
        LiftObject::WickLinear,
        LiftObject::Second,
        LiftObject::Third,
    ]
    .into_iter()
    .find(|o| o.name() == name)
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let kind = cfg.kind.ok_or_else(|| StageError {
        module: "cli",
        source: stochwave::Error::InvalidParameter("experiment kind is not set".into()),
    })?;
    match kind {
        Kind::Lift => lift(cfg),
        Kind::RenormStudy => renorm_study(cfg),
        Kind::Evolve => evolve_run(cfg),
        Kind::Gronwall => gronwall(cfg),
        Kind::Cone => cone(cfg),
        Kind::BesovReport => besov_report(cfg),
        Kind::OracleCompare => oracle_compare(cfg),
        Kind::Coercivity => coercivity(cfg),
        Kind::FormBounds => form_bounds(cfg),
        Kind::FiniteSpeed => finite_speed(cfg),
        Kind::LocalEnergy => local_energy(cfg),
    }
}

fn grid(cfg: &ExperimentConfig) -> Result<Arc<TorusGrid>, StageError> {
    TorusGrid::new(cfg.grid.dim, cfg.grid.points, cfg.grid.side).within("spectral")
}

/// The noise, its lift and the transformed operator. Without noise the
/// operator is the free one.
struct Medium {
    grid: Arc<TorusGrid>,
    lift: Option<StochasticLift>,
    op: TransformedOperator,
}

fn medium(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<Medium, StageError> {
    let grid = grid(cfg)?;
    if !cfg.noise.enabled {
        return Ok(Medium {
            op: TransformedOperator::free(&grid),
            lift: None,
            grid,
        });
    }
    let mollifier = Mollifier::new(cfg.noise.mollifier).within("noise_lift")?;
    let noise = sample_white_noise(&grid, cfg.noise.seed);
    let b = if grid.dim() == 3 {
        let seeds: Vec<u64> = (0..cfg.noise.b_samples as u64).map(|i| cfg.noise.b_seed_base + i).collect();
        let est: MonteCarloEstimate = renorm_constant_b(&grid, &mollifier, &seeds).within("noise_lift")?;
        out.metric("b_relative_error", est.relative_error());
        Some(est.mean)
    } else {
        None
    };
    let lift = StochasticLift::build(&noise, &mollifier, b).within("noise_lift")?;
    out.metric("a", lift.a);
    out.metric("b", lift.b);
    let schedule =
        LocalizationSchedule::new(&grid, cfg.localization.base_level, cfg.geometry()).within("localization")?;
    let op = TransformedOperator::build(&lift, &schedule).within("hamiltonian")?;
    out.metric("max_abs_w_high", op.w_high.max_abs());
    Ok(Medium {
        grid,
        lift: Some(lift),
        op,
    })
}

struct Calibration {
    shift: f64,
    lambda_top: Option<f64>,
}

/// The configured shift, or the calibrated one.
fn shift(cfg: &ExperimentConfig, op: &TransformedOperator, out: &mut Outcome, force: bool) -> Result<Calibration, StageError> {
    if let (Some(shift), false) = (cfg.operator.shift, force) {
        out.metric("shift", shift);
        return Ok(Calibration {
            shift,
            lambda_top: None,
        });
    }
    let report = calibrate_shift(op, cfg.operator.eigen_tolerance).within("hamiltonian")?;
    out.metric("lambda_top", report.lambda_top);
    out.metric("eigen_iterations", report.iterations as f64);
    let shift = cfg.operator.shift.unwrap_or(report.shift);
    out.metric("shift", shift);
    Ok(Calibration {
        shift,
        lambda_top: Some(report.lambda_top),
    })
}

fn truncation(cfg: &ExperimentConfig, grid: &Arc<TorusGrid>, radius: f64, shift: f64) -> Result<TruncationConfig, StageError> {
    TruncationConfig::new(grid, radius, cfg.operator.edge_width, shift).within("hamiltonian")
}

fn evolve_config(cfg: &ExperimentConfig, grid: &TorusGrid, t_final: f64, cubic: bool) -> Result<EvolveConfig, StageError> {
    let ev = match cfg.evolve.dt {
        Some(dt) => {
            let steps = (t_final / dt).ceil().max(1.0) as usize;
            EvolveConfig {
                dt: t_final / steps as f64,
                steps,
                cubic,
                record_every: 1,
            }
        }
        None => EvolveConfig::from_cfl(grid, cfg.evolve.cfl, t_final, cubic).within("dynamics")?,
    };
    Ok(ev.with_record_every(cfg.evolve.record_every))
}

/// Initial data: a file when given, else a Gaussian bump at rest at the center.
fn initial_state(cfg: &ExperimentConfig, grid: &Arc<TorusGrid>) -> Result<WaveState, StageError> {
    match &cfg.evolve.data_file {
        Some(path) => {
            let container = FieldContainer::read(path).within("dynamics")?;
            let v = container.field("v0").within("dynamics")?;
            if container.header.grid().within("dynamics")?.as_ref() != grid.as_ref() {
                return Err(StageError {
                    module: "dynamics",
                    source: stochwave::Error::GridMismatch,
                });
            }
            let p = match container.block("p0") {
                Some(_) => container.field("p0").within("dynamics")?,
                None => RealField::zeros(grid),
            };
            WaveState::new(v, p).within("dynamics")
        }
        None => WaveState::new(gaussian(grid, grid.center(), cfg.data_width()), RealField::zeros(grid))
            .within("dynamics"),
    }
}

fn lift(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let header = ContainerHeader::for_grid(&m.grid, cfg.noise.mollifier, cfg.noise.seed);
    let mut container = FieldContainer::new(header);
    if let Some(lift) = &m.lift {
        for (name, field) in lift.named_fields() {
            container.push(name, field);
        }
    }
    let op = &m.op;
    for (name, field) in [
        ("w_high", &op.w_high),
        ("w_low", &op.w_low),
        ("z", &op.z),
        ("z_high", &op.z_high),
        ("z_low", &op.z_low),
        ("weight", &op.weight),
    ] {
        container.push(name, field);
    }
    let finite = container.blocks.iter().all(|(_, v)| v.iter().all(|x| x.is_finite()));
    out.holds("fields_finite", finite, "every stored value is finite");
    if let Some(err) = out.metrics.get("b_relative_error").copied() {
        out.at_most("b_relative_error", err, B_RELATIVE_ERROR_LIMIT);
    }
    out.fields.push(("lift.bin".into(), container));
    Ok(out)
}

fn renorm_study(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let grid = grid(cfg)?;
    let r = &cfg.renorm;
    let seeds: Vec<u64> = (0..r.seeds as u64).map(|i| r.seed_base + i).collect();
    let test_fn = gaussian(&grid, grid.center(), r.test_width);
    let study = convergence_study(&grid, &r.scales, &seeds, &test_fn).within("noise_lift")?;
    let tol = &cfg.tolerances;
    let mut csv = String::from("eps,a,expected_raw,raw_mean,raw_se,wick_mean,wick_se\n");
    for s in &study.scales {
        let rel = (s.raw.mean - s.expected_raw).abs() / s.expected_raw.abs();
        out.at_most(format!("raw_tracks_constant[eps={}]", s.scale), rel, tol.renorm_relative);
        // The renormalized pairing has mean zero at every scale.
        let z = s.wick.mean.abs() / s.wick.standard_error;
        out.at_most(format!("wick_mean_stable[eps={}]", s.scale), z, tol.wick_standard_errors);
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            s.scale, s.a, s.expected_raw, s.raw.mean, s.raw.standard_error, s.wick.mean, s.wick.standard_error
        ));
    }
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    out.holds(
        "wick_cauchy_decreasing",
        decreasing(&study.wick_cauchy_rms),
        format!("{:?}", study.wick_cauchy_rms),
    );
    out.holds(
        "linear_cauchy_decreasing",
        decreasing(&study.linear_cauchy_rms),
        format!("{:?}", study.linear_cauchy_rms),
    );
    out.traces.push(("renorm.csv".into(), csv));
    Ok(out)
}

fn coercivity(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, true)?;
    let config = truncation(cfg, &m.grid, cfg.radius(), cal.shift)?;
    let tests = test_vectors(&m.grid, cfg.form.sample_seed, cfg.form.samples);
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for v in &tests {
        let mass = m.op.weighted_mass(v);
        let form = -m.op.quadratic_form(v, &config, Variant::Coercive);
        worst = worst.min(form / mass);
        if form < mass * (1.0 - 1e-10) {
            violations += 1;
        }
    }
    out.metric("worst_coercivity_ratio", worst);
    out.at_most("coercivity_violations", violations as f64, 0.0);
    if !cfg.noise.enabled {
        out.push("control_shift_is_one", cal.shift == 1.0, cal.shift, 1.0, "shift == 1 exactly");
    }
    Ok(out)
}

fn form_bounds(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, true)?;
    let lambda = cal.lambda_top.expect("calibration was forced");
    let tests = test_vectors(&m.grid, cfg.form.sample_seed, cfg.form.samples);
    let radii = if cfg.form.radii.is_empty() {
        vec![cfg.radius()]
    } else {
        cfg.form.radii.clone()
    };
    let mut certified = Vec::new();
    let mut csv = String::from("radius,certified,empirical,violations\n");
    for &radius in &radii {
        let config = truncation(cfg, &m.grid, radius, cal.shift)?;
        let report = form_bounds_check(&m.op, &config, lambda, &tests);
        let total: usize = report.violations.iter().sum();
        out.push(
            format!("form_bounds[R={radius}]"),
            total == 0,
            total as f64,
            0.0,
            format!("violations per inequality {:?}", report.violations),
        );
        out.metric(format!("certified_constant[R={radius}]"), report.certified_constant);
        out.metric(format!("empirical_constant[R={radius}]"), report.empirical_constant);
        csv.push_str(&format!(
            "{radius:e},{:e},{:e},{total}\n",
            report.certified_constant, report.empirical_constant
        ));
        certified.push(report.certified_constant);
    }
    out.holds(
        "constant_nondecreasing_in_radius",
        certified.windows(2).all(|w| w[1] >= w[0]),
        format!("{certified:?}"),
    );
    out.traces.push(("form_bounds.csv".into(), csv));
    Ok(out)
}

fn evolve_run(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, false)?;
    let config = truncation(cfg, &m.grid, cfg.radius(), cal.shift)?;
    let system = WaveSystem::new(&m.op, &config, cfg.evolve.cubic);
    let initial = initial_state(cfg, &m.grid)?;
    let ev = evolve_config(cfg, &m.grid, cfg.evolve.t_final, cfg.evolve.cubic)?;
    out.metric("dt", ev.dt);
    let tol = &cfg.tolerances;
    let trace = if cfg.evolve.order_check {
        let study = drift_study(&system, &initial, &ev).within("dynamics")?;
        out.at_most("energy_drift", study.drift, tol.drift);
        out.metric("drift_halved", study.drift_halved);
        let spread = (study.ratio / tol.order_ratio - 1.0).abs();
        out.push(
            "drift_order",
            spread <= tol.order_spread,
            study.ratio,
            tol.order_ratio,
            format!("ratio within {} relative of the limit", tol.order_spread),
        );
        out.traces.push(("energy_halved.csv".into(), energy_trace_csv(&study.trace_halved)));
        study.trace
    } else {
        let (state, trace) = evolve(&system, initial, &ev).within("dynamics")?;
        out.at_most("energy_drift", trace.relative_drift(), tol.drift);
        let mut container = FieldContainer::new(ContainerHeader::for_grid(&m.grid, cfg.noise.mollifier, cfg.noise.seed));
        container.push("v", &state.v);
        container.push("p", &state.p);
        container.push("u", &state.original(&m.op));
        out.fields.push(("state.bin".into(), container));
        trace
    };
    out.traces.push(("energy.csv".into(), energy_trace_csv(&trace)));
    Ok(out)
}

fn gronwall(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, false)?;
    let config = truncation(cfg, &m.grid, cfg.radius(), cal.shift)?;
    let system = WaveSystem::new(&m.op, &config, cfg.evolve.cubic);
    let initial = initial_state(cfg, &m.grid)?;
    let ev = evolve_config(cfg, &m.grid, cfg.evolve.t_final, cfg.evolve.cubic)?;
    let (_, trace): (WaveState, EnergyTrace) = evolve(&system, initial, &ev).within("dynamics")?;
    let report = gronwall_check(&trace, &m.op, &config);
    let tol = &cfg.tolerances;
    out.at_least("coercive_energy_floor", report.min_coercive_energy, tol.energy_floor);
    out.holds(
        "gronwall_bound",
        report.bound_holds,
        "E_gg(t) <= exp(K t) E_gg(0) at every sample",
    );
    out.at_most("fitted_rate", report.fitted_rate, tol.gronwall_factor * report.rate_scale);
    out.metric("rate_scale", report.rate_scale);
    out.traces.push(("energy.csv".into(), energy_trace_csv(&trace)));
    Ok(out)
}

fn oracle_compare(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, false)?;
    let config = truncation(cfg, &m.grid, cfg.radius(), cal.shift)?;
    let cubic = cfg.evolve.cubic;
    let system = WaveSystem::new(&m.op, &config, cubic);
    let v0 = gaussian(&m.grid, m.grid.center(), cfg.oracle.data_width);
    let initial = WaveState::new(v0, RealField::zeros(&m.grid)).within("dynamics")?;
    let ev = evolve_config(cfg, &m.grid, cfg.evolve.t_final, cubic)?;
    let (state, _) = evolve(&system, initial.clone(), &ev).within("dynamics")?;
    let dc = DuhamelConfig {
        subinterval: cfg.oracle.subinterval,
        nodes: cfg.oracle.nodes,
        ..DuhamelConfig::new(ev.t_final())
    };
    let oracle = duhamel_oracle(&m.op, &config, &initial, cubic, &dc).within("dynamics")?;
    let scale = weighted_distance(&oracle.state.v, &RealField::zeros(&m.grid), &m.op.weight);
    let diff = weighted_distance(&state.v, &oracle.state.v, &m.op.weight) / scale;
    out.at_most("leapfrog_vs_oracle", diff, cfg.tolerances.oracle);
    out.metric("oracle_picard_iterations", oracle.picard_iterations as f64);
    out.metric("oracle_subintervals", oracle.subintervals as f64);
    if !cfg.noise.enabled && !cubic {
        let exact = free_wave(&initial.v, &initial.p, ev.t_final());
        let free_diff = weighted_distance(&oracle.state.v, &exact.v, &m.op.weight) / scale;
        out.at_most("oracle_vs_free_propagator", free_diff, cfg.tolerances.oracle_free);
    }
    Ok(out)
}

fn finite_speed(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, false)?;
    let config = truncation(cfg, &m.grid, cfg.radius(), cal.shift)?;
    let system = WaveSystem::new(&m.op, &config, cfg.evolve.cubic);
    let fs = &cfg.finite_speed;
    let center = m.grid.center();
    let radius = fs.data_radius.unwrap_or(cfg.grid.side / 16.0);
    let v0 = compact_bump_of_order(&m.grid, center, radius, fs.bump_order);
    let initial = WaveState::new(v0, RealField::zeros(&m.grid)).within("dynamics")?;
    let ev = evolve_config(cfg, &m.grid, cfg.evolve.t_final, cfg.evolve.cubic)?;
    let margin = fs.margin_cells * m.grid.spacing();
    let report = finite_speed_check(&system, initial, &ev, center, radius, margin).within("propagation")?;
    out.at_most("mass_outside_support", report.worst(), cfg.tolerances.finite_speed);
    let mut csv = String::from("t,outside_fraction\n");
    for (t, f) in report.times.iter().zip(&report.outside_fraction) {
        csv.push_str(&format!("{t:e},{f:e}\n"));
    }
    out.traces.push(("finite_speed.csv".into(), csv));
    Ok(out)
}

fn local_energy(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, false)?;
    let config = truncation(cfg, &m.grid, cfg.radius(), cal.shift)?;
    let system = WaveSystem::new(&m.op, &config, cfg.evolve.cubic);
    let lo = &cfg.local;
    let grid = &m.grid;
    let (cones, initial) = if cfg.noise.enabled {
        let region = lo.region.unwrap_or(cfg.grid.side / 4.0);
        let cones = random_cones(grid, region, lo.horizon, lo.apexes, lo.apex_seed).within("propagation")?;
        (cones, initial_state(cfg, grid)?)
    } else {
        // Data supported beyond the initial section of a central cone.
        let c = grid.center();
        let cone = ConeSpec::new(grid, lo.horizon, c).within("propagation")?;
        let reach = cone.radius_at(0.0) + 1.0;
        let mut at = c;
        at[0] += reach + 3.0;
        let far = gaussian(grid, at, lo.control_width);
        let v0 = far.zip_map(&grid.distance_field(c), |v, r| if r <= reach { 0.0 } else { v });
        (vec![cone], WaveState::new(v0, RealField::zeros(grid)).within("dynamics")?)
    };
    let k = calibrate_local_constant(&m.op, &cones, lo.calibration_samples, lo.calibration_seed)
        .within("propagation")?;
    out.metric("local_constant", k.constant);
    let ev = evolve_config(cfg, grid, lo.horizon, cfg.evolve.cubic)?;
    let states = record_states(&system, initial, &ev, lo.stride).within("dynamics")?;
    let mut csv = String::from("cone,apex_time,s,e\n");
    for (i, cone) in cones.iter().enumerate() {
        let trace = gronwall_local_check(&states, &m.op, &config, cone, k.constant).within("propagation")?;
        for (s, e) in trace.times.iter().zip(&trace.energy) {
            csv.push_str(&format!("{i},{:e},{s:e},{e:e}\n", cone.apex_time));
        }
        if cfg.noise.enabled {
            let min = trace.energy.iter().copied().fold(f64::INFINITY, f64::min);
            out.at_least(format!("local_energy_nonnegative[{i}]"), min, 0.0);
            out.holds(
                format!("local_gronwall[{i}]"),
                trace.gronwall_holds && trace.fitted_rate.is_finite(),
                format!("fitted rate {:e}, scale {:e}", trace.fitted_rate, trace.rate_scale),
            );
        } else {
            out.at_most("control_local_energy", trace.max_energy(), cfg.tolerances.control_energy);
        }
    }
    out.traces.push(("local_energy.csv".into(), csv));
    Ok(out)
}

fn cone(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let m = medium(cfg, &mut out)?;
    let cal = shift(cfg, &m.op, &mut out, false)?;
    let (l, r) = (cfg.small_radius(), cfg.large_radius());
    let small = truncation(cfg, &m.grid, l, cal.shift)?;
    let large = truncation(cfg, &m.grid, r, cal.shift)?;
    let data = initial_state(cfg, &m.grid)?;
    let center = m.grid.center();
    let mut cones = vec![ConeSpec::new(&m.grid, 0.5 * l, center).within("propagation")?];
    cones.extend(
        random_cones(&m.grid, l, 0.5 * l, cfg.cone.random_apexes, cfg.cone.apex_seed).within("propagation")?,
    );
    let k = calibrate_local_constant(&m.op, &cones, cfg.cone.calibration_samples, cfg.cone.apex_seed)
        .within("propagation")?;
    out.metric("local_constant", k.constant);
    let ev = evolve_config(cfg, &m.grid, 0.5 * l, cfg.evolve.cubic)?;
    let report = cone_agreement(ConeExperiment {
        op: &m.op,
        large: &large,
        small: &small,
        data_large: data.clone(),
        data_small: data,
        cones,
        evolve: ev,
        relative_tolerance: cfg.tolerances.cone_relative,
        local_constant: k.constant,
    })
    .within("propagation")?;
    out.metric("reference_scale", report.reference_scale);
    out.at_most("cone_agreement", report.sup_difference, report.tolerance);
    if r > l {
        out.at_least(
            "outside_difference",
            report.outside_difference,
            cfg.tolerances.cone_power * report.tolerance,
        );
    }
    Ok(out)
}

fn besov_report(cfg: &ExperimentConfig) -> Result<Outcome, StageError> {
    let mut out = Outcome::default();
    let b = &cfg.besov;
    let g = &cfg.grid;
    if b.indicator {
        for p in [1.0, 2.0] {
            let params = BesovParams::new(1.0 / p, p, f64::INFINITY);
            let report = indicator_regularity_check(g.dim, g.side, &b.indicator_points, &params).within("besov")?;
            out.at_most(format!("indicator_spread[p={p}]"), report.spread, cfg.tolerances.indicator_spread);
        }
    }
    if b.interpolation {
        let grid = grid(cfg)?;
        let fields = test_vectors(&grid, cfg.noise.seed, b.interpolation_samples);
        let [s1, s2] = b.interpolation_s;
        let p = b.interpolation_p;
        let report = interpolation_check(
            &fields,
            s1,
            s2,
            b.interpolation_theta,
            p,
            p,
            cfg.tolerances.interpolation_constant,
        )
        .within("besov")?;
        out.at_most("interpolation_ratio", report.worst_ratio, report.constant);
    }
    if b.lift {
        let objects: Vec<LiftObject> = b.lift_objects.iter().filter_map(|n| lift_object(n)).collect();
        let seeds: Vec<u64> = (0..b.lift_seeds as u64).map(|i| cfg.noise.seed + i).collect();
        let report = lift_regularity_report(
            g.dim,
            g.side,
            &b.lift_points,
            &seeds,
            b.lift_scale_factor,
            b.lift_margin,
            &objects,
        )
        .within("besov")?;
        for trend in &report.trends {
            out.holds(
                format!("lift_trend[{}]", trend.object.name()),
                trend.pass(),
                format!(
                    "{} of {} seeds stable below the target, {} growing above it",
                    trend.stable_votes, trend.seeds, trend.growth_votes
                ),
            );
        }
    }
    Ok(out)
}
