//! Finite speed of propagation: the piecewise linear bump over a backward
//! light cone, the weighted local energy inside it, and the experiments
//! that compare runs with different truncation radii.
//!
//! For a cone with apex `(t, x)` and speed `c = 2` the bump at time `s` is
//! `phi(y) = psi(|y - x| - c (t - s))` with `psi(r) = clamp(1 - r, 0, 1)`.
//! The local energy is
//!
//! ```text
//! e(s) = sum phi 1/2 e^{2W_>} (p^2 + |grad v|^2 + K v^2 - Z_> v^2) h^d
//! ```
//!
//! where `K` is a calibrated constant large enough to keep `e` nonnegative.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{evolve_with, EvolveConfig, WaveState, WaveSystem};
use crate::error::{Error, Result};
use crate::hamiltonian::{test_vectors, TransformedOperator, TruncationConfig};
use crate::spectral::{self, RealField, TorusGrid};

/// Propagation speed of the cones.
pub const CONE_SPEED: f64 = 2.0;

/// Smallest value the local-energy constant may take.
pub const LOCAL_CONSTANT_FLOOR: f64 = 1.0;

/// The profile `psi`: one for `r <= 0`, `1 - r` on `[0, 1]`, zero beyond.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BumpProfile;

impl BumpProfile {
    pub fn value(&self, r: f64) -> f64 {
        (1.0 - r).clamp(0.0, 1.0)
    }

    pub fn speed(&self) -> f64 {
        CONE_SPEED
    }
}

/// Apex of a backward light cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    pub apex_time: f64,
    pub apex: [f64; 3],
}

impl ConeSpec {
    /// Rejects apexes whose cone (including the unit transition layer of the
    /// bump) would wrap around the torus.
    pub fn new(grid: &TorusGrid, apex_time: f64, apex: [f64; 3]) -> Result<Self> {
        if !(apex_time >= 0.0 && apex_time.is_finite()) {
            return Err(Error::InvalidParameter(format!("cone apex time {apex_time} must be nonnegative")));
        }
        let reach = CONE_SPEED * apex_time + 1.0;
        if reach > grid.side() / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "cone of apex time {apex_time} reaches {reach}, beyond half the torus side {}",
                grid.side() / 2.0
            )));
        }
        Ok(Self { apex_time, apex })
    }

    /// Radius of the cone section at time `s`.
    pub fn radius_at(&self, s: f64) -> f64 {
        CONE_SPEED * (self.apex_time - s)
    }

    /// Whether the whole cone lies in `[0, horizon] x B(center, radius)`.
    pub fn fits_in(&self, grid: &TorusGrid, center: [f64; 3], radius: f64, horizon: f64) -> bool {
        self.apex_time <= horizon && grid.distance(self.apex, center) + self.radius_at(0.0) <= radius
    }

    fn check_time(&self, s: f64) -> Result<()> {
        if !(0.0..=self.apex_time).contains(&s) {
            return Err(Error::InvalidParameter(format!(
                "time {s} outside the cone interval [0, {}]",
                self.apex_time
            )));
        }
        Ok(())
    }
}

/// `phi(y) = psi(|y - x| - 2 (t - s))` sampled on the grid.
pub fn bump_field(cone: &ConeSpec, s: f64, grid: &Arc<TorusGrid>) -> Result<RealField> {
    cone.check_time(s)?;
    let shift = cone.radius_at(s);
    Ok(RealField::from_fn(grid, |y| BumpProfile.value(grid.distance(cone.apex, y) - shift)))
}

/// Finite-difference check of `|grad phi| = |d phi / ds| / 2 = 1_{annulus}`.
#[derive(Clone, Debug)]
pub struct BumpIdentityReport {
    /// Largest `| |grad phi| - |d phi/ds| / 2 |` at points at least two grid
    /// spacings away from the kinks of `phi`.
    pub speed_mismatch: f64,
    /// Largest `| |grad phi| - 1 |` on the same points inside the annulus.
    pub annulus_gradient_error: f64,
    /// Volume of the points where `|grad phi|` differs from the annulus
    /// indicator by more than `0.05`.
    pub mismatch_measure: f64,
    pub spacing: f64,
}

/// Central differences in space (one grid step) and time (step `h / 4`).
pub fn bump_derivative_identity_check(cone: &ConeSpec, s: f64, grid: &Arc<TorusGrid>) -> Result<BumpIdentityReport> {
    cone.check_time(s)?;
    let h = grid.spacing();
    let ds = (h / 4.0).min(s).min(cone.apex_time - s);
    let phi = bump_field(cone, s, grid)?;
    let time_derivative = if ds > 0.0 {
        let later = bump_field(cone, s + ds, grid)?;
        let earlier = bump_field(cone, s - ds, grid)?;
        (&later - &earlier).scale(0.5 / ds)
    } else {
        // At the ends of the interval use the exact slope of the profile.
        let shift = cone.radius_at(s);
        RealField::from_fn(grid, |y| {
            let r = grid.distance(cone.apex, y) - shift;
            if (0.0..1.0).contains(&r) {
                -CONE_SPEED
            } else {
                0.0
            }
        })
    };
    let n = grid.points();
    let shift = cone.radius_at(s);
    let mut speed_mismatch: f64 = 0.0;
    let mut annulus_gradient_error: f64 = 0.0;
    let mut mismatched = 0usize;
    for lin in 0..grid.len() {
        let idx = grid.indices(lin);
        let mut grad_sq = 0.0;
        for axis in 0..grid.dim() {
            let mut fwd = idx;
            let mut bwd = idx;
            fwd[axis] = (idx[axis] + 1) % n;
            bwd[axis] = (idx[axis] + n - 1) % n;
            let d = (phi.values()[grid.linear(fwd)] - phi.values()[grid.linear(bwd)]) / (2.0 * h);
            grad_sq += d * d;
        }
        let grad = grad_sq.sqrt();
        let r = grid.distance(cone.apex, grid.position(lin)) - shift;
        let indicator = if (0.0..1.0).contains(&r) { 1.0 } else { 0.0 };
        if (grad - indicator).abs() > 0.05 {
            mismatched += 1;
        }
        let clear = 2.0 * h;
        if r.abs() > clear && (r - 1.0).abs() > clear {
            speed_mismatch = speed_mismatch.max((grad - 0.5 * time_derivative.values()[lin].abs()).abs());
            if indicator == 1.0 {
                annulus_gradient_error = annulus_gradient_error.max((grad - 1.0).abs());
            }
        }
    }
    Ok(BumpIdentityReport {
        speed_mismatch,
        annulus_gradient_error,
        mismatch_measure: mismatched as f64 * grid.cell_volume(),
        spacing: h,
    })
}

/// Weighted pieces of the local energy for a given bump.
struct LocalPieces {
    kinetic: f64,
    gradient: f64,
    mass: f64,
    pairing: f64,
}

fn local_pieces(op: &TransformedOperator, phi: &RealField, v: &RealField, p: &RealField) -> LocalPieces {
    let density = phi * &op.weight;
    let grad_sq = spectral::norm_sq(&spectral::gradient(v));
    let v2 = v * v;
    LocalPieces {
        kinetic: (p * p).inner(&density),
        gradient: grad_sq.inner(&density),
        mass: v2.inner(&density),
        // The potential enters only through the pairing with v^2.
        pairing: (&density * &op.z_high).inner(&v2),
    }
}

/// The local energy `e(s)` of `state` for the cone, with constant `local_constant`.
pub fn local_energy(
    state: &WaveState,
    op: &TransformedOperator,
    cone: &ConeSpec,
    local_constant: f64,
) -> Result<f64> {
    let phi = bump_field(cone, state.t, state.v.grid())?;
    let pieces = local_pieces(op, &phi, &state.v, &state.p);
    Ok(0.5 * (pieces.kinetic + pieces.gradient + local_constant * pieces.mass - pieces.pairing))
}

/// Outcome of the local-constant calibration.
#[derive(Clone, Debug)]
pub struct LocalConstantReport {
    /// The constant after the safety doubling and the floor.
    pub constant: f64,
    /// Smallest constant that works on the calibration set.
    pub minimal: f64,
    pub samples: usize,
}

/// Finds the smallest `K` with
/// `sum phi e^{2W} (|grad v|^2 / 4 + K v^2) >= |sum phi e^{2W} Z_> v^2|`
/// over bumps of the given cones (at their start, middle and apex times)
/// and `samples` random localized fields, then doubles it.
///
/// The inequality is affine in `K`, so the smallest admissible value is a
/// maximum of ratios and needs no search.
pub fn calibrate_local_constant(
    op: &TransformedOperator,
    cones: &[ConeSpec],
    samples: usize,
    seed: u64,
) -> Result<LocalConstantReport> {
    let grid = op.grid();
    let fields = test_vectors(grid, seed, samples);
    let zero = RealField::zeros(grid);
    let mut minimal: f64 = 0.0;
    for cone in cones {
        for s in [0.0, 0.5 * cone.apex_time, cone.apex_time] {
            let phi = bump_field(cone, s, grid)?;
            for v in &fields {
                let pieces = local_pieces(op, &phi, v, &zero);
                if pieces.mass > 0.0 {
                    minimal = minimal.max((pieces.pairing.abs() - 0.25 * pieces.gradient) / pieces.mass);
                }
            }
        }
    }
    if !minimal.is_finite() {
        return Err(Error::Numerical("local constant calibration produced a non-finite value".into()));
    }
    Ok(LocalConstantReport {
        constant: (2.0 * minimal).max(LOCAL_CONSTANT_FLOOR),
        minimal,
        samples,
    })
}

/// The local energy along a run and its Gronwall bound.
#[derive(Clone, Debug)]
pub struct LocalEnergyTrace {
    pub cone: ConeSpec,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// Largest `(ln e(s) - ln e(0)) / s`; zero when `e` vanishes identically.
    pub fitted_rate: f64,
    /// `sup |chi_R Z_<=| + K`, the scale of the growth rate.
    pub rate_scale: f64,
    pub nonnegative: bool,
    pub gronwall_holds: bool,
}

impl LocalEnergyTrace {
    pub fn max_energy(&self) -> f64 {
        self.energy.iter().copied().fold(0.0, f64::max)
    }

    pub fn pass(&self) -> bool {
        self.nonnegative && self.gronwall_holds && self.fitted_rate.is_finite()
    }
}

/// Evaluates `e(s)` on the recorded states with `s` in the cone interval
/// and checks `e(s) <= e^{K s} e(0) (1 + 1e-6)` with the fitted `K`.
pub fn gronwall_local_check(
    states: &[WaveState],
    op: &TransformedOperator,
    config: &TruncationConfig,
    cone: &ConeSpec,
    local_constant: f64,
) -> Result<LocalEnergyTrace> {
    let mut times = Vec::new();
    let mut energy = Vec::new();
    for state in states.iter().filter(|st| st.t <= cone.apex_time * (1.0 + 1e-12)) {
        let mut st = state.clone();
        st.t = st.t.min(cone.apex_time);
        energy.push(local_energy(&st, op, cone, local_constant)?);
        times.push(st.t);
    }
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::InvalidParameter("the recorded run must start at time zero".into()));
    }
    let e0 = energy[0];
    let fitted_rate = if e0 > 0.0 {
        times
            .iter()
            .zip(&energy)
            .skip(1)
            .filter(|(&s, _)| s > 0.0)
            .map(|(&s, &e)| (e.max(f64::MIN_POSITIVE).ln() - e0.ln()) / s)
            .fold(0.0, f64::max)
    } else if energy.iter().all(|&e| e == 0.0) {
        0.0
    } else {
        f64::INFINITY
    };
    let gronwall_holds = times
        .iter()
        .zip(&energy)
        .all(|(&s, &e)| e <= (fitted_rate * s).exp() * e0 * (1.0 + 1e-6) || (e0 == 0.0 && e == 0.0));
    let rate_scale = (&config.cutoff * &op.z_low).max_abs() + local_constant;
    Ok(LocalEnergyTrace {
        cone: *cone,
        times,
        nonnegative: energy.iter().all(|&e| e >= 0.0),
        energy,
        fitted_rate,
        rate_scale,
        gronwall_holds,
    })
}

/// Runs the integrator and keeps the states every `stride` steps (and the
/// initial and final ones).
pub fn record_states(
    system: &WaveSystem<'_>,
    initial: WaveState,
    config: &EvolveConfig,
    stride: usize,
) -> Result<Vec<WaveState>> {
    let stride = stride.max(1);
    let mut states = Vec::new();
    let mut step = 0usize;
    evolve_with(system, initial, config, |st| {
        if step.is_multiple_of(stride) || step == config.steps {
            states.push(st.clone());
        }
        step += 1;
        Ok(())
    })?;
    Ok(states)
}

/// `count` random apexes whose cones fit in `[0, horizon] x B(center, radius)`,
/// snapped to grid points.
pub fn random_cones(
    grid: &Arc<TorusGrid>,
    radius: f64,
    horizon: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<ConeSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = grid.center();
    let mut cones = Vec::with_capacity(count);
    let mut attempts = 0;
    while cones.len() < count {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(Error::InvalidParameter(format!(
                "no admissible cones in B({radius}) up to time {horizon}"
            )));
        }
        let t = rng.gen_range(0.0..=horizon);
        let mut apex = center;
        for c in apex.iter_mut().take(grid.dim()) {
            let offset = rng.gen_range(-radius..radius);
            *c = ((*c + offset) / grid.spacing()).round() * grid.spacing();
        }
        let cone = ConeSpec::new(grid, t, apex)?;
        if t > 0.0 && cone.fits_in(grid, center, radius, horizon) {
            cones.push(cone);
        }
    }
    Ok(cones)
}

/// Result of comparing two truncation radii on the same lift.
#[derive(Clone, Debug)]
pub struct ConeAgreementReport {
    pub small_radius: f64,
    pub large_radius: f64,
    pub cones: Vec<ConeSpec>,
    /// `sup |u^(R) - u^(L)|` over grid points inside the cones.
    pub sup_difference: f64,
    /// `max |u^(L)|` over the run.
    pub reference_scale: f64,
    pub tolerance: f64,
    /// `sup |u^(R) - u^(L)|` outside `B(L)` at the final time.
    pub outside_difference: f64,
    /// Local energy of the difference `v^(R) - v^(L)` over the first cone.
    pub difference_energy: Option<LocalEnergyTrace>,
    pub t_final: f64,
}

impl ConeAgreementReport {
    pub fn agrees(&self) -> bool {
        self.sup_difference <= self.tolerance
    }

    /// The difference outside the ball is large enough that agreement
    /// inside it is not an accident.
    pub fn has_power(&self) -> bool {
        self.outside_difference > 10.0 * self.tolerance
    }
}

/// Inputs of a cone-agreement run.
#[derive(Clone, Debug)]
pub struct ConeExperiment<'a> {
    pub op: &'a TransformedOperator,
    pub large: &'a TruncationConfig,
    pub small: &'a TruncationConfig,
    pub data_large: WaveState,
    pub data_small: WaveState,
    pub cones: Vec<ConeSpec>,
    pub evolve: EvolveConfig,
    /// Relative tolerance on the agreement, scaled by `max |u^(L)|`.
    pub relative_tolerance: f64,
    pub local_constant: f64,
}

/// Evolves the truncations with radii `R >= L` side by side and compares
/// them inside the cones.
///
/// The data must agree on `B(2L + 1)` and every cone must lie in
/// `[0, L/2] x B(L)`; the run lasts until `L/2`.
pub fn cone_agreement(exp: ConeExperiment<'_>) -> Result<ConeAgreementReport> {
    let op = exp.op;
    let grid = Arc::clone(op.grid());
    let l = exp.small.radius;
    let r = exp.large.radius;
    if r < l {
        return Err(Error::InvalidParameter(format!("large radius {r} below small radius {l}")));
    }
    let center = grid.center();
    let horizon = 0.5 * l;
    for cone in &exp.cones {
        if !cone.fits_in(&grid, center, l, horizon) {
            return Err(Error::InvalidParameter(format!(
                "cone {cone:?} leaves [0, {horizon}] x B({l})"
            )));
        }
    }
    if (exp.evolve.t_final() - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidParameter(format!(
            "the run must last until L/2 = {horizon}, not {}",
            exp.evolve.t_final()
        )));
    }
    let agreement_radius = 2.0 * l + 1.0;
    let scale = exp.data_small.v.max_abs().max(exp.data_small.p.max_abs());
    for lin in 0..grid.len() {
        if grid.distance(center, grid.position(lin)) <= agreement_radius {
            let dv = (exp.data_large.v.values()[lin] - exp.data_small.v.values()[lin]).abs();
            let dp = (exp.data_large.p.values()[lin] - exp.data_small.p.values()[lin]).abs();
            if dv.max(dp) > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!(
                    "data differ inside B({agreement_radius}) at {:?}",
                    grid.position(lin)
                )));
            }
        }
    }

    let cubic = exp.evolve.cubic;
    let large_sys = WaveSystem::new(op, exp.large, cubic);
    let small_sys = WaveSystem::new(op, exp.small, cubic);
    let exp_w = op.w_high.map(f64::exp);
    let distances: Vec<Vec<f64>> = exp
        .cones
        .iter()
        .map(|c| (0..grid.len()).map(|lin| grid.distance(c.apex, grid.position(lin))).collect())
        .collect();
    let from_center = grid.distance_field(center);

    let mut large = exp.data_large;
    let mut small = exp.data_small;
    let mut sup_difference: f64 = 0.0;
    let mut reference_scale: f64 = 0.0;
    let mut differences = Vec::new();
    let mut compare = |large: &WaveState, small: &WaveState| {
        let u_small = &small.v * &exp_w;
        let diff = &(&large.v * &exp_w) - &u_small;
        reference_scale = reference_scale.max(u_small.max_abs());
        for (cone, dist) in exp.cones.iter().zip(&distances) {
            if small.t > cone.apex_time + 1e-12 {
                continue;
            }
            let radius = cone.radius_at(small.t);
            for (d, &rho) in diff.values().iter().zip(dist) {
                if rho <= radius {
                    sup_difference = sup_difference.max(d.abs());
                }
            }
        }
        diff
    };
    compare(&large, &small);
    differences.push(WaveState {
        v: &large.v - &small.v,
        p: &large.p - &small.p,
        t: 0.0,
    });
    let mut last_diff = RealField::zeros(&grid);
    for step in 1..=exp.evolve.steps {
        large_sys.step(&mut large, exp.evolve.dt);
        small_sys.step(&mut small, exp.evolve.dt);
        if !large.v.is_finite() || !small.v.is_finite() {
            return Err(Error::Numerical(format!("non-finite state at t = {}", small.t)));
        }
        last_diff = compare(&large, &small);
        if step % exp.evolve.record_every == 0 || step == exp.evolve.steps {
            differences.push(WaveState {
                v: &large.v - &small.v,
                p: &large.p - &small.p,
                t: small.t,
            });
        }
    }
    let outside_difference = last_diff
        .values()
        .iter()
        .zip(from_center.values())
        .filter(|(_, &rho)| rho > l)
        .fold(0.0, |m: f64, (d, _)| m.max(d.abs()));
    let difference_energy = match exp.cones.first() {
        Some(cone) => Some(gronwall_local_check(&differences, op, exp.small, cone, exp.local_constant)?),
        None => None,
    };
    Ok(ConeAgreementReport {
        small_radius: l,
        large_radius: r,
        cones: exp.cones,
        sup_difference,
        reference_scale,
        tolerance: exp.relative_tolerance * reference_scale,
        outside_difference,
        difference_energy,
        t_final: small.t,
    })
}

/// Support growth of a free wave.
#[derive(Clone, Debug)]
pub struct FiniteSpeedReport {
    pub data_radius: f64,
    pub margin: f64,
    pub times: Vec<f64>,
    /// Fraction of `sum u^2` beyond `data_radius + t + margin`.
    pub outside_fraction: Vec<f64>,
}

impl FiniteSpeedReport {
    pub fn worst(&self) -> f64 {
        self.outside_fraction.iter().copied().fold(0.0, f64::max)
    }
}

/// Evolves `system` from `initial` (data supported in `B(center, data_radius)`)
/// and measures the mass that escaped the speed-one support plus `margin`.
pub fn finite_speed_check(
    system: &WaveSystem<'_>,
    initial: WaveState,
    config: &EvolveConfig,
    center: [f64; 3],
    data_radius: f64,
    margin: f64,
) -> Result<FiniteSpeedReport> {
    let grid = Arc::clone(initial.v.grid());
    let distance = grid.distance_field(center);
    let exp_w = system.operator().w_high.map(f64::exp);
    let mut times = Vec::new();
    let mut outside_fraction = Vec::new();
    let mut step = 0usize;
    evolve_with(system, initial, config, |st| {
        if step.is_multiple_of(config.record_every) || step == config.steps {
            let u = &st.v * &exp_w;
            let limit = data_radius + st.t + margin;
            let mut total = 0.0;
            let mut outside = 0.0;
            for (x, &rho) in u.values().iter().zip(distance.values()) {
                total += x * x;
                if rho > limit {
                    outside += x * x;
                }
            }
            times.push(st.t);
            outside_fraction.push(if total > 0.0 { outside / total } else { 0.0 });
        }
        step += 1;
        Ok(())
    })?;
    Ok(FiniteSpeedReport {
        data_radius,
        margin,
        times,
        outside_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::calibrate_shift;
    use crate::localization::LocalizationSchedule;
    use crate::noise::{colored_field, sample_white_noise, Mollifier, StochasticLift};

    fn noisy(n: usize, side: f64, seed: u64) -> TransformedOperator {
        let grid = TorusGrid::new(2, n, side).unwrap();
        let noise = sample_white_noise(&grid, seed);
        let lift = StochasticLift::build(&noise, &Mollifier::new(0.25).unwrap(), None).unwrap();
        let schedule = LocalizationSchedule::with_default_geometry(&grid, 1.0).unwrap();
        TransformedOperator::build(&lift, &schedule).unwrap()
    }

    #[test]
    fn profile_values() {
        let psi = BumpProfile;
        assert_eq!(psi.value(-3.0), 1.0);
        assert_eq!(psi.value(0.0), 1.0);
        assert_eq!(psi.value(0.5), 0.5);
        assert_eq!(psi.value(1.0), 0.0);
        assert_eq!(psi.value(7.0), 0.0);
        assert_eq!(psi.speed(), 2.0);
    }

    #[test]
    fn bump_is_one_on_the_shrinking_ball_and_half_mid_annulus() {
        let grid = TorusGrid::new(2, 64, 16.0).unwrap();
        let c = grid.center();
        let cone = ConeSpec::new(&grid, 2.0, c).unwrap();
        let phi = bump_field(&cone, 0.5, &grid).unwrap();
        // Cone radius at s = 0.5 is 3; the annulus is [3, 4].
        for lin in 0..grid.len() {
            let r = grid.distance(c, grid.position(lin));
            let v = phi.values()[lin];
            assert!((0.0..=1.0).contains(&v));
            if r <= 3.0 {
                assert_eq!(v, 1.0);
            }
            if r >= 4.0 {
                assert_eq!(v, 0.0);
            }
        }
        let mid = [c[0] + 3.5, c[1], 0.0];
        let lin = (0..grid.len())
            .find(|&l| grid.distance(grid.position(l), mid) < 1e-12)
            .unwrap();
        assert!((phi.values()[lin] - 0.5).abs() < 1e-12);
        assert!(bump_field(&cone, 2.5, &grid).is_err());
    }

    #[test]
    fn cones_must_not_wrap() {
        let grid = TorusGrid::new(2, 32, 8.0).unwrap();
        assert!(ConeSpec::new(&grid, 1.5, grid.center()).is_ok());
        assert!(ConeSpec::new(&grid, 1.6, grid.center()).is_err());
        assert!(ConeSpec::new(&grid, -0.1, grid.center()).is_err());
    }

    #[test]
    fn bump_derivatives_match_the_annulus_indicator() {
        let coarse = TorusGrid::new(2, 256, 16.0).unwrap();
        let fine = TorusGrid::new(2, 512, 16.0).unwrap();
        let cone = ConeSpec::new(&coarse, 2.0, coarse.center()).unwrap();
        let a = bump_derivative_identity_check(&cone, 0.7, &coarse).unwrap();
        let b = bump_derivative_identity_check(&cone, 0.7, &fine).unwrap();
        assert!(a.annulus_gradient_error < 0.05, "{a:?}");
        assert!(a.speed_mismatch < 0.05, "{a:?}");
        // Mismatch lives in an O(h) band around the two kink circles.
        let ratio = a.mismatch_measure / b.mismatch_measure;
        assert!((1.5..2.7).contains(&ratio), "{a:?} {b:?}");
    }

    #[test]
    fn local_energy_of_constant_state_is_bump_quadrature() {
        let grid = TorusGrid::new(2, 64, 16.0).unwrap();
        let op = TransformedOperator::free(&grid);
        let cone = ConeSpec::new(&grid, 1.0, grid.center()).unwrap();
        let state = WaveState::new(RealField::constant(&grid, 3.0), RealField::zeros(&grid)).unwrap();
        let k = 1.7;
        let e = local_energy(&state, &op, &cone, k).unwrap();
        let phi_integral = bump_field(&cone, 0.0, &grid).unwrap().integrate();
        assert!((e - 0.5 * k * 9.0 * phi_integral).abs() < 1e-10 * e);
        let zero = WaveState::new(RealField::zeros(&grid), RealField::zeros(&grid)).unwrap();
        assert_eq!(local_energy(&zero, &op, &cone, k).unwrap(), 0.0);
    }

    #[test]
    fn zero_noise_local_constant_is_the_floor() {
        let grid = TorusGrid::new(2, 64, 16.0).unwrap();
        let op = TransformedOperator::free(&grid);
        let cones = random_cones(&grid, 4.0, 2.0, 3, 1).unwrap();
        let report = calibrate_local_constant(&op, &cones, 50, 3).unwrap();
        assert_eq!(report.constant, 1.0);
    }

    #[test]
    fn calibrated_constant_keeps_local_energy_nonnegative() {
        let op = noisy(64, 16.0, 9);
        let grid = op.grid().clone();
        let cones = random_cones(&grid, 4.0, 2.0, 5, 2).unwrap();
        let report = calibrate_local_constant(&op, &cones, 200, 11).unwrap();
        let other = calibrate_local_constant(&op, &cones, 200, 12).unwrap();
        assert!(report.constant <= 2.0 * other.constant && other.constant <= 2.0 * report.constant);
        let fresh = test_vectors(&grid, 99, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (i, v) in fresh.iter().enumerate() {
            let p = colored_field(&grid, 1000 + i as u64, 2.0).scale(rng.gen_range(0.0..1.0));
            let cone = cones[i % cones.len()];
            let mut state = WaveState::new(v.clone(), p).unwrap();
            state.t = rng.gen_range(0.0..=cone.apex_time);
            assert!(local_energy(&state, &op, &cone, report.constant).unwrap() >= 0.0);
        }
    }

    #[test]
    fn local_energy_obeys_gronwall_on_a_noisy_cubic_run() {
        let op = noisy(64, 16.0, 4);
        let grid = op.grid().clone();
        let cal = calibrate_shift(&op, 1e-8).unwrap();
        let config = TruncationConfig::new(&grid, 4.0, 0.25, cal.shift).unwrap();
        let cones = random_cones(&grid, 4.0, 2.0, 3, 8).unwrap();
        let k = calibrate_local_constant(&op, &cones, 100, 1).unwrap().constant;
        let system = WaveSystem::new(&op, &config, true);
        let v0 = crate::dynamics::gaussian(&grid, grid.center(), 1.0);
        let initial = WaveState::new(v0, RealField::zeros(&grid)).unwrap();
        let evolve = EvolveConfig::from_cfl(&grid, 0.25, 2.0, true).unwrap();
        let states = record_states(&system, initial, &evolve, 4).unwrap();
        for cone in &cones {
            let trace = gronwall_local_check(&states, &op, &config, cone, k).unwrap();
            assert!(trace.pass(), "{trace:?}");
        }
    }

    #[test]
    fn quiet_medium_keeps_distant_data_out_of_the_cone() {
        let grid = TorusGrid::new(2, 128, 16.0).unwrap();
        let op = TransformedOperator::free(&grid);
        let config = TruncationConfig::new(&grid, 4.0, 0.25, 1.0).unwrap();
        let system = WaveSystem::new(&op, &config, false);
        let c = grid.center();
        let cone = ConeSpec::new(&grid, 1.0, c).unwrap();
        // The bump is supported in B(c, 3) at s = 0. The data are a resolved
        // Gaussian six units away, cut to zero on B(c, 3).
        let far = crate::dynamics::gaussian(&grid, [c[0] + 6.0, c[1], 0.0], 0.4);
        let v0 = far.zip_map(&grid.distance_field(c), |v, r| if r <= 3.0 { 0.0 } else { v });
        let initial = WaveState::new(v0, RealField::zeros(&grid)).unwrap();
        let evolve = EvolveConfig::from_cfl(&grid, 0.25, 1.0, false).unwrap();
        let states = record_states(&system, initial, &evolve, 2).unwrap();
        let trace = gronwall_local_check(&states, &op, &config, &cone, 1.0).unwrap();
        assert!(trace.max_energy() <= 1e-10, "{trace:?}");
    }

    #[test]
    fn equal_radii_agree_exactly() {
        let op = noisy(32, 8.0, 3);
        let grid = op.grid().clone();
        let config = TruncationConfig::new(&grid, 2.0, 0.125, 2.0).unwrap();
        let v0 = crate::dynamics::gaussian(&grid, grid.center(), 0.5);
        let data = WaveState::new(v0, RealField::zeros(&grid)).unwrap();
        let report = cone_agreement(ConeExperiment {
            op: &op,
            large: &config,
            small: &config,
            data_large: data.clone(),
            data_small: data,
            cones: vec![ConeSpec::new(&grid, 1.0, grid.center()).unwrap()],
            evolve: EvolveConfig::from_cfl(&grid, 0.1, 1.0, true).unwrap(),
            relative_tolerance: 1e-6,
            local_constant: 1.0,
        })
        .unwrap();
        assert_eq!(report.sup_difference, 0.0);
        assert_eq!(report.outside_difference, 0.0);
        assert!(report.agrees());
    }

    #[test]
    fn cone_agreement_rejects_bad_inputs() {
        let op = noisy(32, 8.0, 3);
        let grid = op.grid().clone();
        let small = TruncationConfig::new(&grid, 2.0, 0.125, 2.0).unwrap();
        let large = TruncationConfig::new(&grid, 4.0, 0.125, 2.0).unwrap();
        let v0 = crate::dynamics::gaussian(&grid, grid.center(), 0.5);
        let data = WaveState::new(v0.clone(), RealField::zeros(&grid)).unwrap();
        let base = ConeExperiment {
            op: &op,
            large: &large,
            small: &small,
            data_large: data.clone(),
            data_small: data.clone(),
            cones: vec![ConeSpec::new(&grid, 1.0, grid.center()).unwrap()],
            evolve: EvolveConfig::from_cfl(&grid, 0.1, 1.0, true).unwrap(),
            relative_tolerance: 1e-6,
            local_constant: 1.0,
        };
        // A cone reaching outside B(L).
        let mut wide = base.clone();
        wide.cones = vec![ConeSpec::new(&grid, 0.8, grid.center()).unwrap()];
        wide.cones[0].apex[0] += 1.0;
        assert!(cone_agreement(wide).is_err());
        // Data that disagree near the center.
        let mut off = base.clone();
        off.data_large = WaveState::new(v0.scale(1.01), RealField::zeros(&grid)).unwrap();
        assert!(cone_agreement(off).is_err());
        // Swapped radii.
        let mut swapped = base;
        swapped.large = &small;
        swapped.small = &large;
        assert!(cone_agreement(swapped).is_err());
    }
}
