//! The transformed Anderson-type operator in `v = e^{-W_>} u` coordinates.
//!
//! With `u = e^{W_>} v` the operator `Laplacian + xi_eps - a - b` becomes
//!
//! ```text
//! A v = e^{-2 W_>} div(e^{2 W_>} grad v) + Z v,      Z = Z_> + Z_<=,
//! ```
//!
//! and the three variants used throughout replace `Z_<=` by `chi_R Z_<=`
//! (truncated), by zero (high) or by `-C` (coercive). The divergence form is
//! self-adjoint in the weighted inner product `sum e^{2W_>} f g h^d` on the
//! grid itself, not just in the continuum limit.

mod lobpcg;

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::localization::LocalizationSchedule;
use crate::noise::{colored_field, StochasticLift};
use crate::spectral::{self, RealField, TorusGrid};

/// Largest admissible `max |W_>|`.
pub const MAX_LOCALIZED_LIFT: f64 = 300.0;

/// Which low-frequency potential the operator carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// `Z_> + chi_R Z_<=`.
    Truncated,
    /// `Z_>`.
    High,
    /// `Z_> - C`.
    Coercive,
}

/// Smooth (or sharp, when `width == 0`) indicator of the ball of radius
/// `radius` around the torus center.
///
/// The smooth version `erfc((r - R - 6 w) / (sqrt 2 w)) / 2` equals one on
/// the ball up to `1e-9` and decays over a few widths outside it.
pub fn ball_cutoff(grid: &Arc<TorusGrid>, radius: f64, width: f64) -> Result<RealField> {
    if !(radius > 0.0 && radius <= grid.side() / 2.0) || !(width >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ball radius {radius} must lie in (0, M/2] and width {width} must be nonnegative"
        )));
    }
    let r = grid.distance_field(grid.center());
    Ok(if width == 0.0 {
        r.map(|x| if x <= radius { 1.0 } else { 0.0 })
    } else {
        let shift = radius + 6.0 * width;
        r.map(|x| 0.5 * libm::erfc((x - shift) / (std::f64::consts::SQRT_2 * width)))
    })
}

/// Parameters of the truncated operator.
#[derive(Clone, Debug)]
pub struct TruncationConfig {
    pub radius: f64,
    pub edge_width: f64,
    /// The sampled cutoff `chi_R`.
    pub cutoff: RealField,
    /// Coercivity shift `C` used by the coercive variant.
    pub shift: f64,
}

impl TruncationConfig {
    pub fn new(grid: &Arc<TorusGrid>, radius: f64, edge_width: f64, shift: f64) -> Result<Self> {
        Ok(Self {
            radius,
            edge_width,
            cutoff: ball_cutoff(grid, radius, edge_width)?,
            shift,
        })
    }

    pub fn with_shift(&self, shift: f64) -> Self {
        Self {
            shift,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransformedOperator {
    pub z: RealField,
    pub z_high: RealField,
    pub z_low: RealField,
    pub w_high: RealField,
    pub w_low: RealField,
    pub grad_w_high: Vec<RealField>,
    /// `e^{2 W_>}`.
    pub weight: RealField,
    /// `e^{-2 W_>}`.
    pub inverse_weight: RealField,
    /// `xi_eps - a - b`, the potential in the original coordinates.
    pub raw_potential: RealField,
}

impl TransformedOperator {
    pub fn build(lift: &StochasticLift, schedule: &LocalizationSchedule) -> Result<Self> {
        let split = schedule.split_conjugated(&lift.w.field);
        let w_high = split.high;
        let w_low = split.low;
        let extent = w_high.max_abs();
        if !(extent <= MAX_LOCALIZED_LIFT) {
            return Err(Error::LocalizationOverflow(extent));
        }
        let grad_w = &lift.w.grad;
        let grad_low = spectral::gradient(&w_low);
        let cross = spectral::dot(grad_w, &grad_low);
        let low_sq = spectral::norm_sq(&grad_low);
        let mut z = &lift.w.field - &spectral::laplacian(&w_low);
        z.axpy(-2.0, &cross);
        z.axpy(1.0, &low_sq);
        if lift.dim() == 2 {
            z.axpy(1.0, &lift.wick_linear);
        } else {
            let x = &lift.linear;
            let second = lift.second.as_ref().expect("three-dimensional lift");
            let third = lift.third.as_ref().expect("three-dimensional lift");
            z.axpy(1.0, lift.wick_second.as_ref().expect("three-dimensional lift"));
            z.axpy(1.0, &spectral::norm_sq(&third.grad));
            z.axpy(2.0, &spectral::dot(&x.grad, &third.grad));
            z.axpy(2.0, &spectral::dot(&second.grad, &third.grad));
        }
        let zs = schedule.split(&z);
        let weight = spectral::pointwise_exp(&w_high, 2.0)?;
        let inverse_weight = spectral::pointwise_exp(&w_high, -2.0)?;
        let raw_potential = lift.xi_eps.map(|v| v - lift.a - lift.b);
        Ok(Self {
            grad_w_high: spectral::gradient(&w_high),
            z,
            z_high: zs.high,
            z_low: zs.low,
            w_high,
            w_low,
            weight,
            inverse_weight,
            raw_potential,
        })
    }

    /// The operator for vanishing noise: the plain Laplacian with unit weight.
    pub fn free(grid: &Arc<TorusGrid>) -> Self {
        let zero = RealField::zeros(grid);
        let one = RealField::constant(grid, 1.0);
        Self {
            z: zero.clone(),
            z_high: zero.clone(),
            z_low: zero.clone(),
            w_high: zero.clone(),
            w_low: zero.clone(),
            grad_w_high: vec![zero.clone(); grid.dim()],
            weight: one.clone(),
            inverse_weight: one,
            raw_potential: zero,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.z.grid()
    }

    /// The zeroth-order coefficient of a variant.
    pub fn potential(&self, config: &TruncationConfig, variant: Variant) -> RealField {
        match variant {
            Variant::Truncated => &self.z_high + &(&config.cutoff * &self.z_low),
            Variant::High => self.z_high.clone(),
            Variant::Coercive => self.z_high.map(|v| v - config.shift),
        }
    }

    /// `e^{-2W} div(e^{2W} grad v)`.
    pub fn principal(&self, v: &RealField) -> RealField {
        let flux: Vec<RealField> = spectral::gradient(v)
            .iter()
            .map(|g| g * &self.weight)
            .collect();
        &spectral::divergence(&flux) * &self.inverse_weight
    }

    /// Applies the operator with an explicit potential.
    pub fn apply_with(&self, v: &RealField, potential: &RealField) -> RealField {
        let mut out = self.principal(v);
        out.axpy(1.0, &(potential * v));
        out
    }

    pub fn apply(&self, v: &RealField, config: &TruncationConfig, variant: Variant) -> RealField {
        self.apply_with(v, &self.potential(config, variant))
    }

    /// `-sum e^{2W} |grad v|^2 h^d + sum e^{2W} V v^2 h^d`.
    pub fn form_with(&self, v: &RealField, potential: &RealField) -> f64 {
        let grad_sq = spectral::norm_sq(&spectral::gradient(v));
        let pot = potential * &(v * v);
        -grad_sq.inner(&self.weight) + pot.inner(&self.weight)
    }

    pub fn quadratic_form(&self, v: &RealField, config: &TruncationConfig, variant: Variant) -> f64 {
        self.form_with(v, &self.potential(config, variant))
    }

    /// `sum e^{2W} v^2 h^d`.
    pub fn weighted_mass(&self, v: &RealField) -> f64 {
        v.weighted_inner(v, &self.weight)
    }

    /// `sum e^{2W} |grad v|^2 h^d`.
    pub fn weighted_gradient(&self, v: &RealField) -> f64 {
        spectral::norm_sq(&spectral::gradient(v)).inner(&self.weight)
    }

    /// The same operator assembled in `u = e^{W_>} v` coordinates:
    /// `e^{-W}(Laplacian u - (Laplacian W_> + |grad W_>|^2) u + V u)`.
    pub fn apply_via_original_coordinates(&self, v: &RealField, potential: &RealField) -> Result<RealField> {
        let ew = spectral::pointwise_exp(&self.w_high, 1.0)?;
        let emw = spectral::pointwise_exp(&self.w_high, -1.0)?;
        let u = &ew * v;
        let mut conj = spectral::laplacian(&self.w_high);
        conj.axpy(1.0, &spectral::norm_sq(&self.grad_w_high));
        let mut out = spectral::laplacian(&u);
        out.axpy(-1.0, &(&conj * &u));
        out.axpy(1.0, &(potential * &u));
        Ok(&emw * &out)
    }

    /// Dense matrix of the operator with the given potential (column `j`
    /// is the image of the `j`-th unit vector).
    pub fn dense_matrix(&self, potential: &RealField) -> DMatrix<f64> {
        let grid = self.grid();
        let n = grid.len();
        let mut m = DMatrix::zeros(n, n);
        let mut e = RealField::zeros(grid);
        for j in 0..n {
            e.values_mut()[j] = 1.0;
            let col = self.apply_with(&e, potential);
            m.column_mut(j).copy_from_slice(col.values());
            e.values_mut()[j] = 0.0;
        }
        m
    }

    /// Eigenvalues (descending) of the operator with the given potential,
    /// from a dense symmetric solve. Only for small grids.
    pub fn dense_spectrum(&self, potential: &RealField) -> Vec<f64> {
        let a = self.dense_matrix(potential);
        let sqrt_w: Vec<f64> = self.weight.values().iter().map(|w| w.sqrt()).collect();
        let n = sqrt_w.len();
        let s = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * a[(i, j)] / sqrt_w[j]);
        let s = 0.5 * (&s + s.transpose());
        let mut values: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }
}

/// Result of calibrating the coercivity shift.
#[derive(Clone, Debug)]
pub struct CalibrationReport {
    /// Largest eigenvalue of the high operator.
    pub lambda_top: f64,
    /// `max(lambda, 0) + max(lambda, 1)`.
    pub shift: f64,
    pub iterations: usize,
    pub residual: f64,
    /// The eigenvector of `lambda_top`, normalized in the weighted mass.
    pub top_mode: RealField,
}

/// The shift that makes the coercive form dominate both `|f_>|` and the
/// weighted mass: `max(lambda, 0) + max(lambda, 1)`.
pub fn coercive_shift(lambda_top: f64) -> f64 {
    lambda_top.max(0.0) + lambda_top.max(1.0)
}

/// Estimates the top of the spectrum of the high operator and derives the
/// coercivity shift.
pub fn calibrate_shift(op: &TransformedOperator, tol: f64) -> Result<CalibrationReport> {
    let grid = Arc::clone(op.grid());
    let mass: Vec<f64> = op
        .weight
        .values()
        .iter()
        .map(|w| w * grid.cell_volume())
        .collect();
    let potential = op.z_high.clone();
    let g1 = Arc::clone(&grid);
    let apply = move |v: &[f64]| {
        let f = RealField::from_values(&g1, v.to_vec()).expect("grid sized vector");
        op.apply_with(&f, &potential).into_values()
    };
    let g2 = Arc::clone(&grid);
    let precondition = move |v: &[f64]| {
        let f = RealField::from_values(&g2, v.to_vec()).expect("grid sized vector");
        spectral::resolvent(&f).into_values()
    };
    // The spectral gradient vanishes on the 2^d checkerboards whose wave
    // numbers are zero or Nyquist in every direction, so these modes form a
    // tight cluster at the top of the spectrum. Starting the block on all of
    // them keeps the cluster inside the search space.
    let mut initial = Vec::new();
    for corner in 0..1usize << grid.dim() {
        initial.push(
            (0..grid.len())
                .map(|lin| {
                    let idx = grid.indices(lin);
                    let parity: usize = (0..grid.dim()).map(|a| (corner >> a & 1) * idx[a]).sum();
                    if parity.is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect(),
        );
    }
    for seed in 0..2 {
        initial.push(colored_field(&grid, 0x5eed + seed, 2.0).into_values());
    }
    let problem = lobpcg::Problem {
        apply: &apply,
        precondition: &precondition,
        mass: &mass,
    };
    let pair = lobpcg::largest_eigenpair(&problem, initial, tol, 10_000)?;
    Ok(CalibrationReport {
        lambda_top: pair.value,
        shift: coercive_shift(pair.value),
        iterations: pair.iterations,
        residual: pair.residual,
        top_mode: RealField::from_values(&grid, pair.vector)?,
    })
}

/// Deterministic test functions: half smooth random fields, half random
/// fields under a Gaussian envelope at a random center.
pub fn test_vectors(grid: &Arc<TorusGrid>, seed: u64, count: usize) -> Vec<RealField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let smoothness = rng.gen_range(1.5..3.0);
            let f = colored_field(grid, rng.gen(), smoothness);
            let f = if i % 2 == 0 {
                f
            } else {
                let mut center = [0.0; 3];
                for c in center.iter_mut().take(grid.dim()) {
                    *c = rng.gen_range(0.0..grid.side());
                }
                let width = grid.side() / rng.gen_range(6.0..16.0);
                let envelope = RealField::from_fn(grid, |x| {
                    (-(grid.distance(center, x) / width).powi(2) / 2.0).exp()
                });
                &f * &envelope
            };
            let norm = f.l2_norm();
            f.scale(1.0 / norm)
        })
        .collect()
}

/// Quadratic-form inequalities on a set of test functions.
#[derive(Clone, Debug)]
pub struct QuadraticFormReport {
    pub radius: f64,
    pub shift: f64,
    pub lambda_top: f64,
    /// `sup |chi_R Z_<=|`.
    pub truncated_sup: f64,
    /// `lambda^+ + C + 2 sup|chi_R Z_<=|`, valid for every test function.
    pub certified_constant: f64,
    /// Smallest constant that works on the test set.
    pub empirical_constant: f64,
    /// Violations of each of the four inequalities (indexed 0..4).
    pub violations: [usize; 4],
    /// Smallest `-f_>> / m` over the test set (coercivity margin).
    pub coercivity_ratio: f64,
    /// Range of `-f_>> / weighted H^1 norm` over the test set.
    pub energy_equivalence: (f64, f64),
    pub tests: usize,
}

impl QuadraticFormReport {
    pub fn pass(&self) -> bool {
        self.violations.iter().all(|&v| v == 0)
    }
}

/// Checks, for every `v`,
/// 1. `|f_>| <= -f_>>`,
/// 2. `-f_>> <= -f_> + C m`,
/// 3. `|f_R| <= -2 f_>> + K m`,
/// 4. `-f_>> <= -2 f_R + K m`,
///
/// with `m` the weighted mass and `K` the certified constant.
pub fn form_bounds_check(
    op: &TransformedOperator,
    config: &TruncationConfig,
    lambda_top: f64,
    tests: &[RealField],
) -> QuadraticFormReport {
    let truncated_sup = (&config.cutoff * &op.z_low).max_abs();
    let certified = lambda_top.max(0.0) + config.shift + 2.0 * truncated_sup;
    let mut violations = [0usize; 4];
    let mut empirical: f64 = 0.0;
    let mut coercivity = f64::INFINITY;
    let mut eq_lo = f64::INFINITY;
    let mut eq_hi: f64 = 0.0;
    for v in tests {
        let m = op.weighted_mass(v);
        let f_high = op.quadratic_form(v, config, Variant::High);
        let f_coer = op.quadratic_form(v, config, Variant::Coercive);
        let f_trunc = op.quadratic_form(v, config, Variant::Truncated);
        let slack = 1e-10 * (f_high.abs() + config.shift * m + m);
        if f_high.abs() > -f_coer + slack {
            violations[0] += 1;
        }
        if -f_coer > -f_high + config.shift * m + slack {
            violations[1] += 1;
        }
        if f_trunc.abs() > -2.0 * f_coer + certified * m + slack {
            violations[2] += 1;
        }
        if -f_coer > -2.0 * f_trunc + certified * m + slack {
            violations[3] += 1;
        }
        empirical = empirical
            .max((f_trunc.abs() + 2.0 * f_coer) / m)
            .max((-f_coer + 2.0 * f_trunc) / m);
        coercivity = coercivity.min(-f_coer / m);
        let energy = op.weighted_gradient(v) + m;
        eq_lo = eq_lo.min(-f_coer / energy);
        eq_hi = eq_hi.max(-f_coer / energy);
    }
    QuadraticFormReport {
        radius: config.radius,
        shift: config.shift,
        lambda_top,
        truncated_sup,
        certified_constant: certified,
        empirical_constant: empirical,
        violations,
        coercivity_ratio: coercivity,
        energy_equivalence: (eq_lo, eq_hi),
        tests: tests.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localization::LocalizationSchedule;
    use crate::noise::{sample_white_noise, Mollifier};

    fn operator(n: usize, side: f64, scale: f64, seed: u64, level: f64) -> TransformedOperator {
        let grid = TorusGrid::new(2, n, side).unwrap();
        let noise = sample_white_noise(&grid, seed);
        let lift = StochasticLift::build(&noise, &Mollifier::new(scale).unwrap(), None).unwrap();
        let schedule = LocalizationSchedule::with_default_geometry(&grid, level).unwrap();
        TransformedOperator::build(&lift, &schedule).unwrap()
    }

    fn zero_noise_operator(grid: &Arc<TorusGrid>) -> TransformedOperator {
        let noise = sample_white_noise(grid, 0);
        let mut lift = StochasticLift::build(&noise, &Mollifier::new(0.5).unwrap(), None).unwrap();
        let zero = RealField::zeros(grid);
        lift.noise = zero.clone();
        lift.xi_eps = zero.clone();
        lift.a = 0.0;
        lift.linear.field = zero.clone();
        lift.linear.grad = vec![zero.clone(); grid.dim()];
        lift.wick_linear = zero.clone();
        lift.w = lift.linear.clone();
        let schedule = LocalizationSchedule::with_default_geometry(grid, 1.0).unwrap();
        TransformedOperator::build(&lift, &schedule).unwrap()
    }

    #[test]
    fn free_operator_matches_pipeline_without_noise() {
        let grid = TorusGrid::new(2, 32, 8.0).unwrap();
        let built = zero_noise_operator(&grid);
        let free = TransformedOperator::free(&grid);
        for (a, b) in [(&built.z, &free.z), (&built.z_high, &free.z_high), (&built.weight, &free.weight)] {
            assert!((a - b).max_abs() < 1e-14);
        }
    }

    #[test]
    fn z_matches_independent_assembly() {
        // Z = Laplacian W_> + |grad W_>|^2 + xi_eps - a.
        let op = operator(64, 16.0, 0.125, 3, 1.0);
        let mut oracle = spectral::laplacian(&op.w_high);
        oracle.axpy(1.0, &spectral::norm_sq(&op.grad_w_high));
        oracle.axpy(1.0, &op.raw_potential);
        let scale = op.z.max_abs();
        assert!((&oracle - &op.z).max_abs() < 1e-10 * scale.max(1.0));
        let sum = &op.z_high + &op.z_low;
        assert!((&sum - &op.z).max_abs() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn z_matches_independent_assembly_in_three_dimensions() {
        let grid = TorusGrid::new(3, 16, 8.0).unwrap();
        let noise = sample_white_noise(&grid, 9);
        let lift = StochasticLift::build(&noise, &Mollifier::new(0.4).unwrap(), Some(0.002)).unwrap();
        let schedule = LocalizationSchedule::with_default_geometry(&grid, 0.0).unwrap();
        let op = TransformedOperator::build(&lift, &schedule).unwrap();
        let mut oracle = spectral::laplacian(&op.w_high);
        oracle.axpy(1.0, &spectral::norm_sq(&op.grad_w_high));
        oracle.axpy(1.0, &op.raw_potential);
        assert!((&oracle - &op.z).max_abs() < 1e-10 * op.z.max_abs().max(1.0));
    }

    #[test]
    fn operator_is_weighted_symmetric_and_form_is_consistent() {
        let op = operator(32, 8.0, 0.25, 1, 0.0);
        let grid = op.grid().clone();
        let config = TruncationConfig::new(&grid, 2.0, 0.25, 1.5).unwrap();
        let vs = test_vectors(&grid, 4, 4);
        for variant in [Variant::Truncated, Variant::High, Variant::Coercive] {
            let a0 = op.apply(&vs[0], &config, variant);
            let a1 = op.apply(&vs[1], &config, variant);
            let lhs = vs[1].weighted_inner(&a0, &op.weight);
            let rhs = vs[0].weighted_inner(&a1, &op.weight);
            assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
            let by_parts = vs[2].weighted_inner(&op.apply(&vs[2], &config, variant), &op.weight);
            let form = op.quadratic_form(&vs[2], &config, variant);
            assert!((by_parts - form).abs() < 1e-11 * form.abs().max(1.0));
        }
    }

    #[test]
    fn divergence_form_agrees_with_original_coordinates_when_resolved() {
        let op = operator(128, 16.0, 0.5, 2, 0.0);
        let grid = op.grid().clone();
        let config = TruncationConfig::new(&grid, 4.0, 0.5, 1.0).unwrap();
        let center = grid.center();
        // Narrow enough that the kink of the torus distance at the cell
        // boundary sits below roundoff.
        let v = RealField::from_fn(&grid, |x| (-grid.distance(center, x).powi(2) / 2.0).exp());
        let pot = op.potential(&config, Variant::Truncated);
        let direct = op.apply_with(&v, &pot);
        let dual = op.apply_via_original_coordinates(&v, &pot).unwrap();
        assert!((&direct - &dual).max_abs() < 1e-8 * direct.max_abs());
    }

    #[test]
    fn zero_noise_gives_unit_shift_and_free_operator() {
        let grid = TorusGrid::new(2, 32, 8.0).unwrap();
        let op = zero_noise_operator(&grid);
        let cal = calibrate_shift(&op, 1e-9).unwrap();
        assert_eq!(cal.shift, 1.0);
        let config = TruncationConfig::new(&grid, 4.0, 0.0, cal.shift).unwrap();
        let v = test_vectors(&grid, 1, 1).pop().unwrap();
        let lap = spectral::laplacian(&v);
        assert!((&op.apply(&v, &config, Variant::Truncated) - &lap).max_abs() < 1e-12 * lap.max_abs());
    }

    #[test]
    fn eigen_iteration_matches_dense_solve() {
        let op = operator(16, 8.0, 0.4, 5, 0.0);
        let dense = op.dense_spectrum(&op.z_high);
        let cal = calibrate_shift(&op, 1e-10).unwrap();
        assert!((cal.lambda_top - dense[0]).abs() < 1e-8 * dense[0].abs().max(1.0), "{} vs {}", cal.lambda_top, dense[0]);
        // The returned mode is an eigenvector with that eigenvalue.
        let image = op.apply_with(&cal.top_mode, &op.z_high);
        let defect = &image - &cal.top_mode.scale(cal.lambda_top);
        assert!(op.weighted_mass(&defect).sqrt() < 1e-8);
        assert!((op.weighted_mass(&cal.top_mode) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shift_formula_covers_large_spectra() {
        assert_eq!(coercive_shift(-3.0), 1.0);
        assert_eq!(coercive_shift(0.5), 1.5);
        assert_eq!(coercive_shift(4.0), 8.0);
    }

    #[test]
    fn calibrated_operator_is_coercive_and_satisfies_form_bounds() {
        let op = operator(64, 16.0, 0.125, 8, 1.0);
        let grid = op.grid().clone();
        let cal = calibrate_shift(&op, 1e-8).unwrap();
        let tests = test_vectors(&grid, 99, 40);
        let mut previous = 0.0;
        for radius in [2.0, 4.0, 8.0] {
            let config = TruncationConfig::new(&grid, radius, 0.0, cal.shift).unwrap();
            let report = form_bounds_check(&op, &config, cal.lambda_top, &tests);
            assert!(report.pass(), "{report:?}");
            assert!(report.coercivity_ratio >= 1.0 - 1e-10);
            assert!(report.certified_constant >= previous);
            previous = report.certified_constant;
        }
    }

    #[test]
    fn refuses_oversized_localized_lift() {
        let grid = TorusGrid::new(2, 16, 8.0).unwrap();
        let noise = sample_white_noise(&grid, 1);
        let mut lift = StochasticLift::build(&noise, &Mollifier::new(0.5).unwrap(), None).unwrap();
        let huge = RealField::from_fn(&grid, |x| 1e4 * (20.0 * x[0]).sin());
        lift.w.field = huge;
        let schedule = LocalizationSchedule::with_default_geometry(&grid, -3.0).unwrap();
        assert!(matches!(
            TransformedOperator::build(&lift, &schedule),
            Err(Error::LocalizationOverflow(_))
        ));
    }

    #[test]
    fn ball_cutoff_validates_and_is_one_inside() {
        let grid = TorusGrid::new(2, 64, 16.0).unwrap();
        assert!(ball_cutoff(&grid, 9.0, 0.2).is_err());
        assert!(ball_cutoff(&grid, 0.0, 0.2).is_err());
        let chi = ball_cutoff(&grid, 4.0, 0.25).unwrap();
        let r = grid.distance_field(grid.center());
        for (c, d) in chi.values().iter().zip(r.values()) {
            if *d <= 4.0 {
                assert!((c - 1.0).abs() < 1e-8);
            }
        }
    }
}
