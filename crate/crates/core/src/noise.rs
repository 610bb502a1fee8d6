//! Spatial white noise, mollification, renormalization constants and the
//! stochastic lift `W` built from the resolvent of the noise.
//!
//! Noise samples are keyed per Fourier mode: the coefficient of integer mode
//! `k` depends only on `(seed, k)`. Two grids with the same side length
//! therefore share every mode they both resolve, and mollifiers at different
//! scales act on one common realization.

use std::sync::Arc;

use num_complex::Complex64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{self, RealField, SpectralCoeffs, TorusGrid};

/// The default mollifier profile `exp(1 - 1/(1 - r^2))` on `r < 1`.
pub fn smooth_bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Radial spectral mollifier `eta(scale * |kappa|)`.
#[derive(Clone, Copy, Debug)]
pub struct Mollifier {
    scale: f64,
    profile: fn(f64) -> f64,
}

impl Mollifier {
    pub fn new(scale: f64) -> Result<Self> {
        Self::with_profile(scale, smooth_bump)
    }

    pub fn with_profile(scale: f64, profile: fn(f64) -> f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mollifier scale {scale} must be positive"
            )));
        }
        Ok(Self { scale, profile })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn symbol(&self, kappa_norm: f64) -> f64 {
        (self.profile)(self.scale * kappa_norm)
    }

    pub fn apply(&self, f: &RealField) -> RealField {
        let grid = f.grid();
        let mut c = f.forward();
        for (lin, v) in c.coeffs_mut().iter_mut().enumerate() {
            *v *= self.symbol(grid.kappa_norm(lin));
        }
        c.inverse()
    }
}

/// One white-noise sample on a grid.
#[derive(Clone, Debug)]
pub struct NoiseRealization {
    seed: u64,
    xi: RealField,
}

impl NoiseRealization {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn field(&self) -> &RealField {
        &self.xi
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.xi.grid()
    }
}

fn zigzag(k: i64) -> u128 {
    if k >= 0 {
        2 * k as u128
    } else {
        (-2 * k - 1) as u128
    }
}

fn uniform_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normals attached to the mode `k`.
fn mode_normals(rng: &mut ChaCha8Rng, k: [i64; 3]) -> (f64, f64) {
    let id = zigzag(k[0]) | zigzag(k[1]) << 21 | zigzag(k[2]) << 42;
    rng.set_word_pos(4 * id);
    let u1 = uniform_open(rng.next_u64());
    let u2 = uniform_open(rng.next_u64());
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (r * angle.cos(), r * angle.sin())
}

fn is_canonical(k: [i64; 3]) -> bool {
    k.iter().find(|&&c| c != 0).is_none_or(|&c| c > 0)
}

/// Samples white noise with `E<xi, phi>^2 = |phi|_{L^2}^2`.
///
/// Modes on the Nyquist frequency are left empty so that the sample is
/// exactly the restriction of the sample on any finer grid.
pub fn sample_white_noise(grid: &Arc<TorusGrid>, seed: u64) -> NoiseRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude = grid.volume().powf(-0.5);
    let coeffs = (0..grid.len())
        .map(|lin| {
            if grid.is_nyquist(lin) {
                return Complex64::default();
            }
            let k = grid.mode(lin);
            if k == [0, 0, 0] {
                let (g, _) = mode_normals(&mut rng, k);
                return Complex64::new(amplitude * g, 0.0);
            }
            let flip = !is_canonical(k);
            let key = if flip { [-k[0], -k[1], -k[2]] } else { k };
            let (g1, g2) = mode_normals(&mut rng, key);
            let c = Complex64::new(g1, g2) * (amplitude / std::f64::consts::SQRT_2);
            if flip {
                c.conj()
            } else {
                c
            }
        })
        .collect();
    let coeffs = SpectralCoeffs::from_coeffs(grid, coeffs).expect("length matches grid");
    NoiseRealization {
        seed,
        xi: coeffs.inverse(),
    }
}

/// A Gaussian random field with spectrum `(1 + |kappa|^2)^{-smoothness/2}`
/// times white noise; a convenient source of test functions.
pub fn colored_field(grid: &Arc<TorusGrid>, seed: u64, smoothness: f64) -> RealField {
    let noise = sample_white_noise(grid, seed);
    let mut c = noise.field().forward();
    for (lin, v) in c.coeffs_mut().iter_mut().enumerate() {
        *v *= (1.0 + grid.kappa_sq(lin)).powf(-smoothness / 2.0);
    }
    c.inverse()
}

/// `a = E|grad X(x)|^2`, evaluated as an exact sum over the grid modes.
pub fn renorm_constant_a(grid: &TorusGrid, mollifier: &Mollifier) -> f64 {
    let sum: f64 = (0..grid.len())
        .filter(|&lin| !grid.is_nyquist(lin))
        .map(|lin| {
            let k2 = grid.kappa_sq(lin);
            let eta = mollifier.symbol(k2.sqrt());
            k2 * eta * eta / ((1.0 + k2) * (1.0 + k2))
        })
        .sum();
    sum / grid.volume()
}

/// Sample mean with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            f64::NAN
        };
        Self {
            mean,
            standard_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    pub fn relative_error(&self) -> f64 {
        self.standard_error / self.mean.abs()
    }
}

/// Mollified noise and the first lift component `X = (1 - Laplacian)^{-1} xi_eps`.
fn linear_part(noise: &NoiseRealization, mollifier: &Mollifier) -> (RealField, RealField) {
    let xi_eps = mollifier.apply(noise.field());
    let x = spectral::resolvent(&xi_eps);
    (xi_eps, x)
}

/// Per-seed spatial average of `|grad X2|^2`, where `X2` is the second-order
/// lift component. The ensemble mean is the constant `b`.
pub fn second_order_energy(noise: &NoiseRealization, mollifier: &Mollifier, a: f64) -> f64 {
    let (_, x) = linear_part(noise, mollifier);
    let wick = spectral::norm_sq(&spectral::gradient(&x)).map(|v| v - a);
    let x2 = spectral::resolvent(&wick);
    spectral::norm_sq(&spectral::gradient(&x2)).mean()
}

/// Monte Carlo estimate of `b` over the given seeds, without a quality gate.
pub fn monte_carlo_b(grid: &Arc<TorusGrid>, mollifier: &Mollifier, seeds: &[u64]) -> MonteCarloEstimate {
    let a = renorm_constant_a(grid, mollifier);
    let samples: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| second_order_energy(&sample_white_noise(grid, seed), mollifier, a))
        .collect();
    MonteCarloEstimate::from_samples(&samples)
}

/// Largest relative standard error accepted for `b`.
pub const B_RELATIVE_ERROR_LIMIT: f64 = 0.05;

/// Monte Carlo estimate of `b`, rejected when its relative error exceeds 5%.
pub fn renorm_constant_b(
    grid: &Arc<TorusGrid>,
    mollifier: &Mollifier,
    seeds: &[u64],
) -> Result<MonteCarloEstimate> {
    if seeds.len() < 2 {
        return Err(Error::InvalidParameter("need at least two seeds".into()));
    }
    let est = monte_carlo_b(grid, mollifier, seeds);
    if !(est.relative_error() <= B_RELATIVE_ERROR_LIMIT) {
        return Err(Error::MonteCarlo(est.relative_error()));
    }
    Ok(est)
}

/// Pointwise Monte Carlo estimate of `E|grad X(x)|^2` at one grid point.
pub fn pointwise_grad_sq(
    grid: &Arc<TorusGrid>,
    mollifier: &Mollifier,
    seeds: &[u64],
    point: usize,
) -> MonteCarloEstimate {
    let samples: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| {
            let (_, x) = linear_part(&sample_white_noise(grid, seed), mollifier);
            spectral::gradient(&x).iter().map(|g| g.values()[point].powi(2)).sum()
        })
        .collect();
    MonteCarloEstimate::from_samples(&samples)
}

/// A lift component together with its gradient.
#[derive(Clone, Debug)]
pub struct LiftTerm {
    pub field: RealField,
    pub grad: Vec<RealField>,
}

impl LiftTerm {
    fn new(field: RealField) -> Self {
        let grad = spectral::gradient(&field);
        Self { field, grad }
    }
}

/// The stochastic objects built from one noise realization at one scale.
///
/// In two dimensions `W = X`. In three dimensions
/// `W = X + X2 + X3` with `X2 = R(:|grad X|^2:)` and
/// `X3 = 2 R(grad X . grad X2)`, where `R = (1 - Laplacian)^{-1}`.
#[derive(Clone, Debug)]
pub struct StochasticLift {
    seed: u64,
    mollifier: Mollifier,
    /// `E|grad X|^2`.
    pub a: f64,
    /// `E|grad X2|^2`; zero in two dimensions.
    pub b: f64,
    pub noise: RealField,
    pub xi_eps: RealField,
    pub linear: LiftTerm,
    /// `|grad X|^2 - a`.
    pub wick_linear: RealField,
    pub second: Option<LiftTerm>,
    pub third: Option<LiftTerm>,
    /// `|grad X2|^2 - b`.
    pub wick_second: Option<RealField>,
    pub w: LiftTerm,
}

impl StochasticLift {
    /// Builds the lift. In three dimensions `b` must be supplied, typically
    /// from [`renorm_constant_b`].
    pub fn build(noise: &NoiseRealization, mollifier: &Mollifier, b: Option<f64>) -> Result<Self> {
        let grid = noise.grid();
        let a = renorm_constant_a(grid, mollifier);
        let (xi_eps, x) = linear_part(noise, mollifier);
        let linear = LiftTerm::new(x);
        let wick_linear = spectral::norm_sq(&linear.grad).map(|v| v - a);
        if grid.dim() == 2 {
            return Ok(Self {
                seed: noise.seed(),
                mollifier: *mollifier,
                a,
                b: 0.0,
                noise: noise.field().clone(),
                xi_eps,
                w: linear.clone(),
                linear,
                wick_linear,
                second: None,
                third: None,
                wick_second: None,
            });
        }
        let b = b.ok_or_else(|| {
            Error::InvalidParameter("three-dimensional lift needs the constant b".into())
        })?;
        let second = LiftTerm::new(spectral::resolvent(&wick_linear));
        let third = LiftTerm::new(spectral::resolvent(
            &spectral::dot(&linear.grad, &second.grad).scale(2.0),
        ));
        let wick_second = spectral::norm_sq(&second.grad).map(|v| v - b);
        let w = LiftTerm::new(&(&linear.field + &second.field) + &third.field);
        Ok(Self {
            seed: noise.seed(),
            mollifier: *mollifier,
            a,
            b,
            noise: noise.field().clone(),
            xi_eps,
            linear,
            wick_linear,
            second: Some(second),
            third: Some(third),
            wick_second: Some(wick_second),
            w,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.noise.grid()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    /// Named fields for serialization, in a fixed order.
    pub fn named_fields(&self) -> Vec<(&'static str, &RealField)> {
        let mut out = vec![
            ("xi", &self.noise),
            ("xi_eps", &self.xi_eps),
            ("x", &self.linear.field),
            ("wick_grad_x_sq", &self.wick_linear),
        ];
        if let (Some(s), Some(t), Some(ws)) = (&self.second, &self.third, &self.wick_second) {
            out.push(("x_second", &s.field));
            out.push(("x_third", &t.field));
            out.push(("wick_grad_x_second_sq", ws));
        }
        out.push(("w", &self.w.field));
        out
    }
}

/// Per-scale statistics from [`convergence_study`].
#[derive(Clone, Debug)]
pub struct ScaleSummary {
    pub scale: f64,
    pub a: f64,
    /// `a * integral(phi)`, the expected unrenormalized pairing.
    pub expected_raw: f64,
    pub raw: MonteCarloEstimate,
    pub wick: MonteCarloEstimate,
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub scales: Vec<ScaleSummary>,
    /// RMS over seeds of the change in the Wick pairing between consecutive scales.
    pub wick_cauchy_rms: Vec<f64>,
    /// RMS over seeds of `|X_eps - X_eps'|_{L^2}` between consecutive scales.
    pub linear_cauchy_rms: Vec<f64>,
}

/// Pairs `|grad X_eps|^2` and its Wick renormalization with a test function
/// for every seed and scale, on coupled noise.
pub fn convergence_study(
    grid: &Arc<TorusGrid>,
    scales: &[f64],
    seeds: &[u64],
    test_fn: &RealField,
) -> Result<ConvergenceStudy> {
    if scales.is_empty() || seeds.len() < 2 {
        return Err(Error::InvalidParameter("need scales and at least two seeds".into()));
    }
    let mollifiers = scales
        .iter()
        .map(|&s| Mollifier::new(s))
        .collect::<Result<Vec<_>>>()?;
    let constants: Vec<f64> = mollifiers.iter().map(|m| renorm_constant_a(grid, m)).collect();

    struct SeedRow {
        raw: Vec<f64>,
        wick: Vec<f64>,
        linear_diff: Vec<f64>,
    }
    let rows: Vec<SeedRow> = seeds
        .par_iter()
        .map(|&seed| {
            let noise = sample_white_noise(grid, seed);
            let mut raw = Vec::new();
            let mut wick = Vec::new();
            let mut linear_diff = Vec::new();
            let mut previous: Option<RealField> = None;
            for (m, &a) in mollifiers.iter().zip(&constants) {
                let (_, x) = linear_part(&noise, m);
                let r = spectral::norm_sq(&spectral::gradient(&x)).inner(test_fn);
                raw.push(r);
                wick.push(r - a * test_fn.integrate());
                if let Some(p) = &previous {
                    linear_diff.push((&x - p).l2_norm());
                }
                previous = Some(x);
            }
            SeedRow {
                raw,
                wick,
                linear_diff,
            }
        })
        .collect();

    let integral = test_fn.integrate();
    let summaries = scales
        .iter()
        .enumerate()
        .map(|(i, &scale)| {
            let raw: Vec<f64> = rows.iter().map(|r| r.raw[i]).collect();
            let wick: Vec<f64> = rows.iter().map(|r| r.wick[i]).collect();
            ScaleSummary {
                scale,
                a: constants[i],
                expected_raw: constants[i] * integral,
                raw: MonteCarloEstimate::from_samples(&raw),
                wick: MonteCarloEstimate::from_samples(&wick),
            }
        })
        .collect();
    let rms = |f: &dyn Fn(&SeedRow) -> f64| {
        (rows.iter().map(|r| f(r).powi(2)).sum::<f64>() / rows.len() as f64).sqrt()
    };
    let wick_cauchy_rms = (1..scales.len())
        .map(|i| rms(&|r: &SeedRow| r.wick[i] - r.wick[i - 1]))
        .collect();
    let linear_cauchy_rms = (1..scales.len())
        .map(|i| rms(&|r: &SeedRow| r.linear_diff[i - 1]))
        .collect();
    Ok(ConvergenceStudy {
        scales: summaries,
        wick_cauchy_rms,
        linear_cauchy_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Composite Simpson rule on `[lo, hi]`.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        let h = (hi - lo) / panels as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..panels {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    /// Continuum value of `a`: `(2 pi)^{-d} int |k|^2 eta^2 / (1+|k|^2)^2 dk`.
    fn continuum_a(dim: usize, scale: f64) -> f64 {
        let radial = |k: f64| {
            let eta = smooth_bump(scale * k);
            k * k * eta * eta / (1.0 + k * k).powi(2)
        };
        let cutoff = 1.0 / scale;
        match dim {
            2 => simpson(|k| radial(k) * 2.0 * PI * k, 0.0, cutoff, 20_000) / (2.0 * PI).powi(2),
            _ => simpson(|k| radial(k) * 4.0 * PI * k * k, 0.0, cutoff, 20_000) / (2.0 * PI).powi(3),
        }
    }

    #[test]
    fn white_noise_has_unit_covariance_on_test_functions() {
        // E<xi, phi>^2 = |phi|^2 for phi a fixed smooth function.
        let grid = TorusGrid::new(2, 32, 4.0).unwrap();
        let c = grid.center();
        let phi = RealField::from_fn(&grid, |x| {
            let d = grid.distance(c, x);
            (-d * d).exp()
        });
        let seeds: Vec<u64> = (0..4000).collect();
        let samples: Vec<f64> = seeds
            .par_iter()
            .map(|&s| sample_white_noise(&grid, s).field().inner(&phi).powi(2))
            .collect();
        let est = MonteCarloEstimate::from_samples(&samples);
        let target = phi.inner(&phi);
        assert!((est.mean - target).abs() < 4.0 * est.standard_error, "{est:?} vs {target}");
    }

    #[test]
    fn noise_is_real_hermitian_and_deterministic() {
        let grid = TorusGrid::new(3, 8, 2.0).unwrap();
        let a = sample_white_noise(&grid, 7);
        let b = sample_white_noise(&grid, 7);
        assert_eq!(a.field().values(), b.field().values());
        assert!(a.field().forward().hermitian_defect() < 1e-14);
        let c = sample_white_noise(&grid, 8);
        assert_ne!(a.field().values(), c.field().values());
    }

    #[test]
    fn noise_is_coupled_across_resolutions() {
        let coarse = TorusGrid::new(2, 16, 5.0).unwrap();
        let fine = TorusGrid::new(2, 32, 5.0).unwrap();
        let cc = sample_white_noise(&coarse, 3).field().forward();
        let cf = sample_white_noise(&fine, 3).field().forward();
        for lin in 0..coarse.len() {
            if coarse.is_nyquist(lin) {
                continue;
            }
            let k = coarse.mode(lin);
            let idx = [
                k[0].rem_euclid(32) as usize,
                k[1].rem_euclid(32) as usize,
                0,
            ];
            let diff = cc.coeffs()[lin] - cf.coeffs()[fine.linear(idx)];
            assert!(diff.norm() < 1e-13);
        }
    }

    #[test]
    fn constant_a_matches_continuum_integral() {
        let grid = TorusGrid::new(2, 512, 32.0).unwrap();
        for scale in [0.5, 0.125, 1.0 / 32.0] {
            let a = renorm_constant_a(&grid, &Mollifier::new(scale).unwrap());
            let exact = continuum_a(2, scale);
            assert!((a - exact).abs() < 1e-4 * exact, "{scale}: {a} vs {exact}");
        }
        let grid3 = TorusGrid::new(3, 64, 16.0).unwrap();
        let a = renorm_constant_a(&grid3, &Mollifier::new(0.25).unwrap());
        let exact = continuum_a(3, 0.25);
        assert!((a - exact).abs() < 1e-5 * exact, "{a} vs {exact}");
    }

    #[test]
    fn constant_a_grows_logarithmically_in_two_dimensions() {
        let grid = TorusGrid::new(2, 512, 8.0).unwrap();
        let a = |s: f64| renorm_constant_a(&grid, &Mollifier::new(s).unwrap());
        let step = a(2f64.powi(-7)) - a(2f64.powi(-6));
        let expected = 2f64.ln() / (2.0 * PI);
        assert!((step - expected).abs() < 0.05 * expected, "{step} vs {expected}");
    }

    #[test]
    fn constant_a_diverges_like_inverse_scale_in_three_dimensions() {
        // a = A / eps + O(1), with A = (2 pi^2)^{-1} int_0^1 eta(r)^2 dr.
        let grid = TorusGrid::new(3, 128, 8.0).unwrap();
        let a = |s: f64| renorm_constant_a(&grid, &Mollifier::new(s).unwrap());
        let slope = (a(1.0 / 32.0) - a(1.0 / 16.0)) / 16.0;
        let leading = simpson(|r| smooth_bump(r).powi(2), 0.0, 1.0, 20_000) / (2.0 * PI * PI);
        assert!((slope - leading).abs() < 0.05 * leading, "{slope} vs {leading}");
    }

    #[test]
    fn vanishing_mollifier_gives_zero_constant() {
        let grid = TorusGrid::new(2, 16, 4.0).unwrap();
        let m = Mollifier::with_profile(0.5, |_| 0.0).unwrap();
        assert_eq!(renorm_constant_a(&grid, &m), 0.0);
    }

    #[test]
    fn pointwise_monte_carlo_agrees_with_mode_sum() {
        let grid = TorusGrid::new(2, 64, 8.0).unwrap();
        let m = Mollifier::new(0.25).unwrap();
        let seeds: Vec<u64> = (100..600).collect();
        let est = pointwise_grad_sq(&grid, &m, &seeds, 17);
        let a = renorm_constant_a(&grid, &m);
        assert!((est.mean - a).abs() < 3.0 * est.standard_error, "{est:?} vs {a}");
    }

    #[test]
    fn lift_identities_hold() {
        let grid = TorusGrid::new(3, 16, 4.0).unwrap();
        let m = Mollifier::new(0.5).unwrap();
        let noise = sample_white_noise(&grid, 11);
        let lift = StochasticLift::build(&noise, &m, Some(0.01)).unwrap();
        let lhs = spectral::helmholtz(&lift.linear.field);
        assert!((&lhs - &lift.xi_eps).max_abs() < 1e-12);
        let second = lift.second.as_ref().unwrap();
        let lhs = spectral::helmholtz(&second.field);
        assert!((&lhs - &lift.wick_linear).max_abs() < 1e-12);
        let third = lift.third.as_ref().unwrap();
        let rhs = spectral::dot(&lift.linear.grad, &second.grad).scale(2.0);
        assert!((&spectral::helmholtz(&third.field) - &rhs).max_abs() < 1e-12);
        assert!(StochasticLift::build(&noise, &m, None).is_err());
    }

    #[test]
    fn b_estimate_error_shrinks_like_inverse_root() {
        let grid = TorusGrid::new(3, 32, 8.0).unwrap();
        let m = Mollifier::new(0.25).unwrap();
        let small: Vec<u64> = (0..200).collect();
        let large: Vec<u64> = (0..800).collect();
        let e1 = renorm_constant_b(&grid, &m, &small).unwrap();
        let e2 = renorm_constant_b(&grid, &m, &large).unwrap();
        // Quadrupling the sample halves the standard error.
        let ratio = e1.standard_error / e2.standard_error;
        assert!((ratio - 2.0).abs() < 0.3 * 2.0, "ratio {ratio}");
        assert!((e1.mean - e2.mean).abs() < 3.0 * e1.standard_error);
    }

    #[test]
    fn too_few_seeds_rejected_for_b() {
        let grid = TorusGrid::new(3, 8, 4.0).unwrap();
        let m = Mollifier::new(0.5).unwrap();
        assert!(renorm_constant_b(&grid, &m, &[1]).is_err());
    }
}
