//! Time stepping for `v_tt = A_R v - e^{2W_>} v^3` and its energies.
//!
//! The integrator is Störmer-Verlet (kick-drift-kick), which is symplectic for
//! the weighted Hamiltonian
//!
//! ```text
//! E_R = 1/2 <p, p>_W - 1/2 f_R(v) + 1/4 sum e^{4W} v^4 h^d
//! ```
//!
//! because `A_R` is self-adjoint in the weighted inner product on the grid.

mod duhamel;

pub use duhamel::{duhamel_oracle, DuhamelConfig, DuhamelReport, MAX_ORACLE_POINTS_PER_SIDE, MAX_ORACLE_UNKNOWNS};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hamiltonian::{TransformedOperator, TruncationConfig, Variant};
use crate::spectral::{self, RealField, SpectralCoeffs, TorusGrid};

/// Largest accepted Courant number `dt pi sqrt(d) / h`.
pub const MAX_CFL: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct WaveState {
    pub v: RealField,
    pub p: RealField,
    pub t: f64,
}

impl WaveState {
    pub fn new(v: RealField, p: RealField) -> Result<Self> {
        if !v.same_grid(&p) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { v, p, t: 0.0 })
    }

    /// Original coordinates `u = e^{W_>} v`.
    pub fn original(&self, op: &TransformedOperator) -> RealField {
        &self.v * &op.w_high.map(f64::exp)
    }
}

/// Step size and horizon of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub steps: usize,
    pub cubic: bool,
    /// Energies are recorded every `record_every` steps (and at the end).
    pub record_every: usize,
}

/// Step size limit `h / (pi sqrt d)` scaled by the Courant number.
pub fn cfl_step(grid: &TorusGrid, cfl: f64) -> f64 {
    cfl * grid.spacing() / (std::f64::consts::PI * (grid.dim() as f64).sqrt())
}

impl EvolveConfig {
    /// Chooses the largest step not exceeding the CFL step that divides
    /// `t_final` evenly.
    pub fn from_cfl(grid: &TorusGrid, cfl: f64, t_final: f64, cubic: bool) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= MAX_CFL) {
            return Err(Error::InvalidParameter(format!(
                "Courant number {cfl} outside (0, {MAX_CFL}]"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("final time {t_final} must be positive")));
        }
        let steps = (t_final / cfl_step(grid, cfl)).ceil() as usize;
        Ok(Self {
            dt: t_final / steps as f64,
            steps,
            cubic,
            record_every: 1,
        })
    }

    pub fn with_record_every(self, record_every: usize) -> Self {
        Self {
            record_every: record_every.max(1),
            ..self
        }
    }

    /// Same horizon with the step halved.
    pub fn halved(self) -> Self {
        Self {
            dt: self.dt / 2.0,
            steps: self.steps * 2,
            record_every: self.record_every * 2,
            ..self
        }
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.steps as f64
    }

    fn validate(&self, grid: &TorusGrid) -> Result<()> {
        let limit = cfl_step(grid, MAX_CFL);
        if !(self.dt > 0.0 && self.dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "time step {} violates the stability limit {limit}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// The right-hand side of the second-order system.
#[derive(Clone, Debug)]
pub struct WaveSystem<'a> {
    op: &'a TransformedOperator,
    potential: RealField,
    /// `C + chi_R Z_<=`, the part of the potential moved into `E_>>`.
    low_part: RealField,
    cubic: bool,
    weight_sq: RealField,
}

impl<'a> WaveSystem<'a> {
    pub fn new(op: &'a TransformedOperator, config: &TruncationConfig, cubic: bool) -> Self {
        let low_part = (&config.cutoff * &op.z_low).map(|v| v + config.shift);
        Self {
            op,
            potential: op.potential(config, Variant::Truncated),
            low_part,
            cubic,
            weight_sq: &op.weight * &op.weight,
        }
    }

    pub fn operator(&self) -> &TransformedOperator {
        self.op
    }

    pub fn cubic(&self) -> bool {
        self.cubic
    }

    pub fn acceleration(&self, v: &RealField) -> RealField {
        let mut a = self.op.apply_with(v, &self.potential);
        if self.cubic {
            let w = &self.op.weight;
            for ((out, &x), &e) in a.values_mut().iter_mut().zip(v.values()).zip(w.values()) {
                *out -= e * x * x * x;
            }
        }
        a
    }

    /// `E_R`.
    pub fn energy(&self, state: &WaveState) -> f64 {
        let kinetic = 0.5 * self.op.weighted_mass(&state.p);
        let potential = -0.5 * self.op.form_with(&state.v, &self.potential);
        let quartic = if self.cubic {
            let v2 = &state.v * &state.v;
            0.25 * (&v2 * &v2).inner(&self.weight_sq)
        } else {
            0.0
        };
        kinetic + potential + quartic
    }

    /// `E_>> = E_R + 1/2 sum e^{2W} (C + chi_R Z_<=) v^2 h^d`.
    pub fn coercive_energy(&self, state: &WaveState) -> f64 {
        let v2 = &state.v * &state.v;
        self.energy(state) + 0.5 * (&v2 * &self.low_part).inner(&self.op.weight)
    }

    /// One kick-drift-kick step.
    pub fn step(&self, state: &mut WaveState, dt: f64) {
        let a = self.acceleration(&state.v);
        state.p.axpy(0.5 * dt, &a);
        state.v.axpy(dt, &state.p);
        let a = self.acceleration(&state.v);
        state.p.axpy(0.5 * dt, &a);
        state.t += dt;
    }
}

/// Recorded energies of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub coercive_energy: Vec<f64>,
    /// `(ln E_>>(t) - ln E_>>(0)) / t`, zero at `t = 0`.
    pub log_slope: Vec<f64>,
}

impl EnergyTrace {
    fn record(&mut self, t: f64, e: f64, egg: f64) {
        let slope = match self.coercive_energy.first() {
            Some(&e0) if t > 0.0 => (egg.ln() - e0.ln()) / t,
            _ => 0.0,
        };
        self.times.push(t);
        self.energy.push(e);
        self.coercive_energy.push(egg);
        self.log_slope.push(slope);
    }

    /// `max |E(t) - E(0)| / |E(0)|`.
    pub fn relative_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().fold(0.0, |m: f64, e| m.max((e - e0).abs())) / e0.abs()
    }

    /// Largest exponential growth rate of `E_>>` seen from time zero.
    pub fn fitted_rate(&self) -> f64 {
        self.log_slope.iter().skip(1).copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_coercive_energy(&self) -> f64 {
        self.coercive_energy.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs the integrator, calling `observer` after every step (and once at
/// the start) with the current state.
pub fn evolve_with(
    system: &WaveSystem<'_>,
    initial: WaveState,
    config: &EvolveConfig,
    mut observer: impl FnMut(&WaveState) -> Result<()>,
) -> Result<(WaveState, EnergyTrace)> {
    config.validate(initial.v.grid())?;
    let mut state = initial;
    let mut trace = EnergyTrace::default();
    trace.record(state.t, system.energy(&state), system.coercive_energy(&state));
    observer(&state)?;
    for step in 1..=config.steps {
        system.step(&mut state, config.dt);
        if step % config.record_every == 0 || step == config.steps {
            let e = system.energy(&state);
            if !e.is_finite() || !state.v.is_finite() {
                return Err(Error::Numerical(format!("non-finite state at t = {}", state.t)));
            }
            trace.record(state.t, e, system.coercive_energy(&state));
        }
        observer(&state)?;
    }
    Ok((state, trace))
}

pub fn evolve(
    system: &WaveSystem<'_>,
    initial: WaveState,
    config: &EvolveConfig,
) -> Result<(WaveState, EnergyTrace)> {
    evolve_with(system, initial, config, |_| Ok(()))
}

/// Exponential-growth check of `E_>>` along a run.
#[derive(Clone, Debug)]
pub struct GronwallReport {
    /// Largest observed `(ln E_>>(t) - ln E_>>(0)) / t`.
    pub fitted_rate: f64,
    /// `sup |chi_R Z_<=| + C`.
    pub rate_scale: f64,
    pub min_coercive_energy: f64,
    /// `E_>>(t) <= e^{K t} E_>>(0) (1 + 1e-6)` at every sample.
    pub bound_holds: bool,
}

/// Constant allowed between the fitted rate and its scale.
pub const GRONWALL_RATE_FACTOR: f64 = 4.0;

/// Negative `E_>>` beyond this is a broken calibration.
pub const COERCIVE_ENERGY_FLOOR: f64 = -1e-8;

impl GronwallReport {
    pub fn pass(&self) -> bool {
        self.bound_holds
            && self.min_coercive_energy >= COERCIVE_ENERGY_FLOOR
            && self.fitted_rate <= GRONWALL_RATE_FACTOR * self.rate_scale
    }
}

pub fn gronwall_check(trace: &EnergyTrace, op: &TransformedOperator, config: &TruncationConfig) -> GronwallReport {
    let rate_scale = (&config.cutoff * &op.z_low).max_abs() + config.shift;
    let e0 = trace.coercive_energy.first().copied().unwrap_or(0.0);
    let fitted_rate = if trace.times.len() > 1 && e0 > 0.0 {
        trace.fitted_rate().max(0.0)
    } else {
        0.0
    };
    let bound_holds = trace
        .times
        .iter()
        .zip(&trace.coercive_energy)
        .all(|(&t, &e)| e <= (fitted_rate * t).exp() * e0 * (1.0 + 1e-6) || e <= 0.0 && e0 <= 0.0);
    GronwallReport {
        fitted_rate,
        rate_scale,
        min_coercive_energy: if trace.times.is_empty() { 0.0 } else { trace.min_coercive_energy() },
        bound_holds,
    }
}

/// Drift at two step sizes and the ratio between them.
#[derive(Clone, Debug)]
pub struct DriftStudy {
    pub drift: f64,
    pub drift_halved: f64,
    /// `drift / drift_halved`; 4 for a second-order method.
    pub ratio: f64,
    pub trace: EnergyTrace,
    pub trace_halved: EnergyTrace,
}

/// Runs the same problem at `dt` and `dt/2`, comparing energies at the same
/// physical times.
pub fn drift_study(system: &WaveSystem<'_>, initial: &WaveState, config: &EvolveConfig) -> Result<DriftStudy> {
    let (_, trace) = evolve(system, initial.clone(), config)?;
    let (_, trace_halved) = evolve(system, initial.clone(), &config.halved())?;
    let drift = trace.relative_drift();
    let drift_halved = trace_halved.relative_drift();
    Ok(DriftStudy {
        drift,
        drift_halved,
        ratio: drift / drift_halved,
        trace,
        trace_halved,
    })
}

/// Exact solution of `v_tt = div grad v` on the grid, mode by mode. This is
/// the semi-discrete system the integrator solves without noise, so
/// Nyquist components do not move.
pub fn free_wave(v0: &RealField, p0: &RealField, t: f64) -> WaveState {
    let grid = v0.grid();
    let cv = v0.forward();
    let cp = p0.forward();
    let mut v = cv.coeffs().to_vec();
    let mut p = cp.coeffs().to_vec();
    for lin in 0..grid.len() {
        let w = grid.gradient_sq(lin).sqrt();
        let (a, b) = (cv.coeffs()[lin], cp.coeffs()[lin]);
        let (s, c) = (w * t).sin_cos();
        let sinc = if w == 0.0 { t } else { s / w };
        v[lin] = a * c + b * sinc;
        p[lin] = -a * w * s + b * c;
    }
    WaveState {
        v: SpectralCoeffs::from_coeffs(grid, v).expect("grid sized").inverse(),
        p: SpectralCoeffs::from_coeffs(grid, p).expect("grid sized").inverse(),
        t,
    }
}

/// Weighted `L^2` distance between two fields.
pub fn weighted_distance(a: &RealField, b: &RealField, weight: &RealField) -> f64 {
    let d = a - b;
    d.weighted_inner(&d, weight).sqrt()
}

/// Compactly supported smooth bump `exp(1 - 1/(1 - (r/radius)^2))` around `center`.
pub fn compact_bump(grid: &Arc<TorusGrid>, center: [f64; 3], radius: f64) -> RealField {
    RealField::from_fn(grid, |x| crate::noise::smooth_bump(grid.distance(center, x) / radius))
}

/// `exp(1 - (1 - (r/radius)^2)^{-order})`: larger orders flatten the edge and
/// push the Fourier tail down, at the price of a narrower core.
pub fn compact_bump_of_order(grid: &Arc<TorusGrid>, center: [f64; 3], radius: f64, order: f64) -> RealField {
    RealField::from_fn(grid, |x| {
        let rho = grid.distance(center, x) / radius;
        if rho < 1.0 {
            (1.0 - (1.0 - rho * rho).powf(-order)).exp()
        } else {
            0.0
        }
    })
}

/// Gaussian `exp(-r^2 / (2 width^2))` around `center`.
pub fn gaussian(grid: &Arc<TorusGrid>, center: [f64; 3], width: f64) -> RealField {
    RealField::from_fn(grid, |x| (-(grid.distance(center, x) / width).powi(2) / 2.0).exp())
}

/// Fraction of `sum v^2` lying farther than `radius` from `center`.
pub fn mass_outside(v: &RealField, center: [f64; 3], radius: f64) -> f64 {
    let grid = v.grid();
    let total: f64 = v.values().iter().map(|x| x * x).sum();
    let outside: f64 = v
        .values()
        .iter()
        .enumerate()
        .filter(|(lin, _)| grid.distance(center, grid.position(*lin)) > radius)
        .map(|(_, x)| x * x)
        .sum();
    outside / total
}

/// Convenience: `L^2` norm of the spectral gradient.
pub fn gradient_norm(v: &RealField) -> f64 {
    spectral::norm_sq(&spectral::gradient(v)).integrate().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{calibrate_shift, TransformedOperator};
    use crate::localization::LocalizationSchedule;
    use crate::noise::{sample_white_noise, Mollifier, StochasticLift};

    fn setup(n: usize, side: f64) -> (TransformedOperator, TruncationConfig) {
        let grid = TorusGrid::new(2, n, side).unwrap();
        let noise = sample_white_noise(&grid, 21);
        let lift = StochasticLift::build(&noise, &Mollifier::new(0.25).unwrap(), None).unwrap();
        let schedule = LocalizationSchedule::with_default_geometry(&grid, 1.0).unwrap();
        let op = TransformedOperator::build(&lift, &schedule).unwrap();
        let cal = calibrate_shift(&op, 1e-8).unwrap();
        let config = TruncationConfig::new(&grid, side / 4.0, 2.0 * grid.spacing(), cal.shift).unwrap();
        (op, config)
    }

    #[test]
    fn free_wave_matches_standing_wave() {
        let grid = TorusGrid::new(2, 16, 2.0 * std::f64::consts::PI).unwrap();
        let v0 = RealField::from_fn(&grid, |x| (3.0 * x[0]).cos() * (4.0 * x[1]).sin());
        let p0 = RealField::zeros(&grid);
        let s = free_wave(&v0, &p0, 0.7);
        let exact = v0.scale((5.0 * 0.7f64).cos());
        assert!((&s.v - &exact).max_abs() < 1e-13);
    }

    #[test]
    fn free_wave_holds_nyquist_checkerboard_still() {
        let grid = TorusGrid::new(2, 8, 4.0).unwrap();
        let board = RealField::from_values(
            &grid,
            (0..grid.len()).map(|lin| if grid.indices(lin)[0].is_multiple_of(2) { 1.0 } else { -1.0 }).collect(),
        )
        .unwrap();
        let s = free_wave(&board, &RealField::zeros(&grid), 1.3);
        assert!((&s.v - &board).max_abs() < 1e-13);
        assert!(s.p.max_abs() < 1e-13);
    }

    #[test]
    fn rejects_unstable_steps() {
        let grid = TorusGrid::new(2, 16, 4.0).unwrap();
        assert!(EvolveConfig::from_cfl(&grid, 0.6, 1.0, false).is_err());
        let mut cfg = EvolveConfig::from_cfl(&grid, 0.5, 1.0, false).unwrap();
        assert!(cfg.dt <= cfl_step(&grid, 0.5));
        cfg.dt *= 2.0;
        let (op, config) = setup(16, 4.0);
        let system = WaveSystem::new(&op, &config, false);
        let v = gaussian(op.grid(), op.grid().center(), 0.5);
        let state = WaveState::new(v, RealField::zeros(op.grid())).unwrap();
        assert!(evolve(&system, state, &cfg).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let (op, config) = setup(32, 8.0);
        let system = WaveSystem::new(&op, &config, true);
        let z = RealField::zeros(op.grid());
        let state = WaveState::new(z.clone(), z).unwrap();
        let cfg = EvolveConfig::from_cfl(op.grid(), 0.25, 0.5, true).unwrap();
        let (end, _) = evolve(&system, state, &cfg).unwrap();
        assert_eq!(end.v.max_abs(), 0.0);
    }

    #[test]
    fn energy_drift_is_second_order() {
        let (op, config) = setup(64, 8.0);
        let grid = op.grid().clone();
        let system = WaveSystem::new(&op, &config, true);
        let v = gaussian(&grid, grid.center(), 0.5);
        let state = WaveState::new(v, RealField::zeros(&grid)).unwrap();
        let cfg = EvolveConfig::from_cfl(&grid, 0.25, 1.0, true).unwrap();
        let study = drift_study(&system, &state, &cfg).unwrap();
        assert!(study.drift < 1e-3, "{}", study.drift);
        assert!((study.ratio - 4.0).abs() < 1.2, "ratio {}", study.ratio);
    }

    #[test]
    fn coercive_energy_stays_positive() {
        let (op, config) = setup(32, 8.0);
        let grid = op.grid().clone();
        let system = WaveSystem::new(&op, &config, false);
        let v = gaussian(&grid, grid.center(), 0.7);
        let state = WaveState::new(v, RealField::zeros(&grid)).unwrap();
        let cfg = EvolveConfig::from_cfl(&grid, 0.25, 2.0, false).unwrap();
        let (_, trace) = evolve(&system, state, &cfg).unwrap();
        assert!(trace.min_coercive_energy() > 0.0);
        let report = gronwall_check(&trace, &op, &config);
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn zero_state_passes_gronwall_trivially() {
        let (op, config) = setup(16, 4.0);
        let system = WaveSystem::new(&op, &config, true);
        let z = RealField::zeros(op.grid());
        let state = WaveState::new(z.clone(), z).unwrap();
        assert_eq!(system.energy(&state), 0.0);
        assert_eq!(system.coercive_energy(&state), 0.0);
        let cfg = EvolveConfig::from_cfl(op.grid(), 0.25, 0.2, true).unwrap();
        let (_, trace) = evolve(&system, state, &cfg).unwrap();
        assert!(gronwall_check(&trace, &op, &config).pass());
    }

    #[test]
    fn free_energy_of_uniform_velocity() {
        let grid = TorusGrid::new(2, 16, 4.0).unwrap();
        let op = TransformedOperator::free(&grid);
        let config = TruncationConfig::new(&grid, 2.0, 0.0, 1.0).unwrap();
        let system = WaveSystem::new(&op, &config, true);
        let state = WaveState::new(RealField::zeros(&grid), RealField::constant(&grid, 3.0)).unwrap();
        assert!((system.energy(&state) - 0.5 * 9.0 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn coercive_energy_identity() {
        let (op, config) = setup(32, 8.0);
        let grid = op.grid().clone();
        let system = WaveSystem::new(&op, &config, true);
        let low = (&config.cutoff * &op.z_low).map(|v| v + config.shift);
        for (i, v) in crate::hamiltonian::test_vectors(&grid, 3, 6).into_iter().enumerate() {
            let p = crate::noise::colored_field(&grid, 50 + i as u64, 2.0);
            let state = WaveState::new(v.clone(), p).unwrap();
            let gap = system.coercive_energy(&state) - system.energy(&state);
            let expected = 0.5 * (&(&v * &v) * &low).inner(&op.weight);
            assert!((gap - expected).abs() <= 1e-8 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn coercive_energy_is_positive_on_random_states() {
        let (op, config) = setup(32, 8.0);
        let grid = op.grid().clone();
        let system = WaveSystem::new(&op, &config, true);
        for (i, v) in crate::hamiltonian::test_vectors(&grid, 17, 100).into_iter().enumerate() {
            let p = crate::noise::colored_field(&grid, 300 + i as u64, 1.5).scale(0.3);
            let state = WaveState::new(v.scale(1.0 + i as f64 / 10.0), p).unwrap();
            assert!(system.coercive_energy(&state) > 0.0);
        }
    }
}
