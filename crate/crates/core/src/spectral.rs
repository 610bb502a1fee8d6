//! Periodic grids, real fields and Fourier multipliers.
//!
//! The torus `[0, M)^d` is sampled at `n` points per side. Fourier
//! coefficients use the convention `c(k) = n^{-d} sum_x f(x) e^{-i kappa.x}`
//! with `kappa = 2 pi k / M`, so that `f(x) = sum_k c(k) e^{i kappa.x}` and
//! `sum_x |f|^2 h^d = M^d sum_k |c(k)|^2`.
//!
//! First derivatives drop the Nyquist mode so the discrete gradient maps real
//! fields to real fields and is skew-adjoint. The Laplacian keeps the Nyquist
//! mode (`-|kappa|^2` is even), which makes identities such as
//! `(1 - Laplacian) resolvent(f) = f` exact on the grid.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Largest argument accepted by [`pointwise_exp`].
pub const EXP_LIMIT: f64 = 700.0;

pub struct TorusGrid {
    dim: usize,
    points: usize,
    side: f64,
    wavenumber: Vec<f64>,
    derivative: Vec<f64>,
    kappa_sq: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("points", &self.points)
            .field("side", &self.side)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.side == other.side
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

impl TorusGrid {
    /// Creates a grid with `points` samples per side on a torus of side `side`.
    pub fn new(dim: usize, points: usize, side: f64) -> Result<Arc<Self>> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension {dim} is not 2 or 3")));
        }
        if points < 8 || !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "{points} points per side; need an even number >= 8"
            )));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {side} must be positive")));
        }
        let base = 2.0 * std::f64::consts::PI / side;
        let wavenumber: Vec<f64> = (0..points)
            .map(|i| base * signed_mode(i, points) as f64)
            .collect();
        let derivative: Vec<f64> = (0..points)
            .map(|i| if i == points / 2 { 0.0 } else { wavenumber[i] })
            .collect();
        let total = points.pow(dim as u32);
        let mut kappa_sq = vec![0.0; total];
        for (lin, value) in kappa_sq.iter_mut().enumerate() {
            let idx = unravel(lin, dim, points);
            *value = (0..dim).map(|a| wavenumber[idx[a]].powi(2)).sum();
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        Ok(Arc::new(Self {
            dim,
            points,
            side,
            wavenumber,
            derivative,
            kappa_sq,
            forward,
            inverse,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per side.
    pub fn points(&self) -> usize {
        self.points
    }

    /// Side length of the torus.
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.points as f64
    }

    /// Number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.kappa_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa_sq.is_empty()
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Largest wavenumber along one axis, `pi n / M`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.points as f64 / self.side
    }

    /// Largest `|kappa|` present on the grid.
    pub fn max_wavenumber(&self) -> f64 {
        self.nyquist() * (self.dim as f64).sqrt()
    }

    /// The geometric center of the fundamental cell.
    pub fn center(&self) -> [f64; 3] {
        let c = self.side / 2.0;
        let mut out = [0.0; 3];
        out[..self.dim].fill(c);
        out
    }

    /// Per-axis grid indices of a linear index (unused axes are zero).
    pub fn indices(&self, lin: usize) -> [usize; 3] {
        unravel(lin, self.dim, self.points)
    }

    pub fn linear(&self, idx: [usize; 3]) -> usize {
        idx[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.points + i)
    }

    /// Integer wavevector of a linear spectral index, in `[-n/2, n/2)`.
    pub fn mode(&self, lin: usize) -> [i64; 3] {
        let idx = self.indices(lin);
        let mut k = [0i64; 3];
        for a in 0..self.dim {
            k[a] = signed_mode(idx[a], self.points);
        }
        k
    }

    pub fn wavevector(&self, lin: usize) -> [f64; 3] {
        let idx = self.indices(lin);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = self.wavenumber[idx[a]];
        }
        out
    }

    pub fn kappa_sq(&self, lin: usize) -> f64 {
        self.kappa_sq[lin]
    }

    pub fn kappa_norm(&self, lin: usize) -> f64 {
        self.kappa_sq[lin].sqrt()
    }

    /// Symbol of `-div grad`: like `kappa_sq` but without the Nyquist
    /// component of each axis, which the first derivative drops.
    pub fn gradient_sq(&self, lin: usize) -> f64 {
        let idx = self.indices(lin);
        idx[..self.dim].iter().map(|&i| self.derivative[i].powi(2)).sum()
    }

    /// True when some component of the mode sits on the Nyquist frequency.
    pub fn is_nyquist(&self, lin: usize) -> bool {
        let idx = self.indices(lin);
        idx[..self.dim].contains(&(self.points / 2))
    }

    pub fn position(&self, lin: usize) -> [f64; 3] {
        let idx = self.indices(lin);
        let h = self.spacing();
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = idx[a] as f64 * h;
        }
        out
    }

    /// Shortest displacement from `from` to `to` on the torus.
    pub fn displacement(&self, from: [f64; 3], to: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            let mut d = (to[a] - from[a]).rem_euclid(self.side);
            if d > self.side / 2.0 {
                d -= self.side;
            }
            out[a] = d;
        }
        out
    }

    pub fn distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        self.displacement(a, b).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Torus distance of every grid point from `center`.
    pub fn distance_field(self: &Arc<Self>, center: [f64; 3]) -> RealField {
        RealField::from_fn(self, |x| self.distance(center, x))
    }

    fn transform(&self, data: &mut [Complex64], direction: Direction) {
        let plan = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let n = self.points;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut lines = vec![Complex64::default(); block];
            for chunk in data.chunks_mut(block) {
                for k in 0..n {
                    for inner in 0..stride {
                        lines[inner * n + k] = chunk[k * stride + inner];
                    }
                }
                plan.process_with_scratch(&mut lines, &mut scratch);
                for k in 0..n {
                    for inner in 0..stride {
                        chunk[k * stride + inner] = lines[inner * n + k];
                    }
                }
            }
        }
    }
}

fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn unravel(mut lin: usize, dim: usize, n: usize) -> [usize; 3] {
    let mut idx = [0usize; 3];
    for a in (0..dim).rev() {
        idx[a] = lin % n;
        lin /= n;
    }
    idx
}

/// A real scalar field sampled on a [`TorusGrid`].
#[derive(Clone)]
pub struct RealField {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for RealField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealField")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl RealField {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<TorusGrid>, value: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|lin| f(grid.position(lin))).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &RealField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.same_grid(other), "fields live on different grids");
        Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| factor * v)
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &RealField) {
        assert!(self.same_grid(other), "fields live on different grids");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// The `L^2` pairing `sum f g h^d`.
    pub fn inner(&self, other: &RealField) -> f64 {
        assert!(self.same_grid(other), "fields live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Weighted pairing `sum w f g h^d`.
    pub fn weighted_inner(&self, other: &RealField, weight: &RealField) -> f64 {
        assert!(self.same_grid(other) && self.same_grid(weight));
        self.values
            .iter()
            .zip(&other.values)
            .zip(&weight.values)
            .map(|((a, b), w)| a * b * w)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.grid.cell_volume())
            .powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn forward(&self) -> SpectralCoeffs {
        let mut data: Vec<Complex64> =
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.transform(&mut data, Direction::Forward);
        let norm = 1.0 / self.grid.len() as f64;
        for c in &mut data {
            *c *= norm;
        }
        SpectralCoeffs {
            grid: Arc::clone(&self.grid),
            coeffs: data,
        }
    }
}

impl Add for &RealField {
    type Output = RealField;
    fn add(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &RealField {
    type Output = RealField;
    fn sub(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &RealField {
    type Output = RealField;
    fn mul(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

/// Fourier coefficients of a real field, in FFT index order.
#[derive(Clone)]
pub struct SpectralCoeffs {
    grid: Arc<TorusGrid>,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for SpectralCoeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralCoeffs").field("grid", &self.grid).finish()
    }
}

impl SpectralCoeffs {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_coeffs(grid: &Arc<TorusGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Synthesizes the field; the imaginary residue is discarded.
    pub fn inverse(&self) -> RealField {
        let mut data = self.coeffs.clone();
        self.grid.transform(&mut data, Direction::Inverse);
        RealField {
            grid: Arc::clone(&self.grid),
            values: data.into_iter().map(|c| c.re).collect(),
        }
    }

    pub fn scaled_by(&self, symbol: &[Complex64]) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            coeffs: self
                .coeffs
                .iter()
                .zip(symbol)
                .map(|(c, s)| c * s)
                .collect(),
        }
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.points;
        let dim = self.grid.dim;
        let mut worst: f64 = 0.0;
        for (lin, c) in self.coeffs.iter().enumerate() {
            let idx = self.grid.indices(lin);
            let mut mirror = [0usize; 3];
            for a in 0..dim {
                mirror[a] = (n - idx[a]) % n;
            }
            let partner = self.grid.linear(mirror);
            worst = worst.max((c - self.coeffs[partner].conj()).norm());
        }
        worst
    }

    /// `M^d sum |c|^2`, equal to the squared `L^2` norm of the field.
    pub fn parseval_norm_sq(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// A Fourier multiplier evaluated on a grid.
#[derive(Clone)]
pub struct FourierMultiplier {
    name: String,
    grid: Arc<TorusGrid>,
    symbol: Vec<Complex64>,
}

impl fmt::Debug for FourierMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierMultiplier")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .finish()
    }
}

impl FourierMultiplier {
    /// A real radial symbol `m(|kappa|)`.
    pub fn radial(grid: &Arc<TorusGrid>, name: &str, m: impl Fn(f64) -> f64) -> Self {
        let symbol = (0..grid.len())
            .map(|lin| Complex64::new(m(grid.kappa_norm(lin)), 0.0))
            .collect();
        Self {
            name: name.to_string(),
            grid: Arc::clone(grid),
            symbol,
        }
    }

    /// Any symbol, evaluated from the linear spectral index.
    pub fn from_index(
        grid: &Arc<TorusGrid>,
        name: &str,
        m: impl Fn(usize) -> Complex64,
    ) -> Self {
        Self {
            name: name.to_string(),
            grid: Arc::clone(grid),
            symbol: (0..grid.len()).map(m).collect(),
        }
    }

    /// `(1 - Laplacian)^{-1}`.
    pub fn resolvent(grid: &Arc<TorusGrid>) -> Self {
        Self::radial(grid, "resolvent", |k| 1.0 / (1.0 + k * k))
    }

    /// `1 - Laplacian`.
    pub fn helmholtz(grid: &Arc<TorusGrid>) -> Self {
        Self::radial(grid, "helmholtz", |k| 1.0 + k * k)
    }

    pub fn laplacian(grid: &Arc<TorusGrid>) -> Self {
        Self::radial(grid, "laplacian", |k| -k * k)
    }

    /// `d/dx_axis`, with the Nyquist mode removed.
    pub fn derivative(grid: &Arc<TorusGrid>, axis: usize) -> Self {
        let g = Arc::clone(grid);
        Self::from_index(grid, "derivative", move |lin| {
            Complex64::new(0.0, g.derivative[g.indices(lin)[axis]])
        })
    }

    /// Sharp projection onto `|kappa| <= cutoff`.
    pub fn low_pass(grid: &Arc<TorusGrid>, cutoff: f64) -> Self {
        Self::radial(grid, "low_pass", |k| if k <= cutoff { 1.0 } else { 0.0 })
    }

    /// Sharp projection onto `|kappa| > cutoff`.
    pub fn high_pass(grid: &Arc<TorusGrid>, cutoff: f64) -> Self {
        Self::radial(grid, "high_pass", |k| if k > cutoff { 1.0 } else { 0.0 })
    }

    /// Littlewood-Paley block `j >= -1`.
    pub fn lp_block(grid: &Arc<TorusGrid>, j: i32) -> Self {
        Self::radial(grid, "lp_block", |k| lp_block_symbol(j, k))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn apply_spectral(&self, c: &SpectralCoeffs) -> SpectralCoeffs {
        c.scaled_by(&self.symbol)
    }

    pub fn apply(&self, f: &RealField) -> RealField {
        self.apply_spectral(&f.forward()).inverse()
    }

    pub fn compose(&self, other: &FourierMultiplier) -> Self {
        Self {
            name: format!("{}*{}", self.name, other.name),
            grid: Arc::clone(&self.grid),
            symbol: self
                .symbol
                .iter()
                .zip(&other.symbol)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }
}

/// Smooth radial profile: 1 on `[0, 1]`, 0 on `[2, inf)`, quintic in between.
pub fn lp_profile(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Symbol of the Littlewood-Paley block `j` at `|kappa| = k`.
pub fn lp_block_symbol(j: i32, k: f64) -> f64 {
    if j < 0 {
        lp_profile(k)
    } else {
        let s = 2f64.powi(j);
        lp_profile(k / (2.0 * s)) - lp_profile(k / s)
    }
}

/// The LP block indices that can be nonzero on `grid`.
pub fn lp_block_range(grid: &TorusGrid) -> std::ops::RangeInclusive<i32> {
    // Block j lives on 2^j < |kappa| < 2^{j+2}.
    let top = grid.max_wavenumber().log2().floor() as i32;
    -1..=top.max(-1)
}

/// Spatial gradient, one field per axis.
pub fn gradient(f: &RealField) -> Vec<RealField> {
    let grid = f.grid();
    let c = f.forward();
    (0..grid.dim())
        .map(|axis| {
            let mut out = c.clone();
            for (lin, v) in out.coeffs.iter_mut().enumerate() {
                *v *= Complex64::new(0.0, grid.derivative[grid.indices(lin)[axis]]);
            }
            out.inverse()
        })
        .collect()
}

/// Divergence of a vector field given by its components.
pub fn divergence(components: &[RealField]) -> RealField {
    let grid = Arc::clone(components[0].grid());
    let mut acc = SpectralCoeffs::zeros(&grid);
    for (axis, comp) in components.iter().enumerate() {
        let c = comp.forward();
        for (lin, (a, v)) in acc.coeffs.iter_mut().zip(&c.coeffs).enumerate() {
            *a += v * Complex64::new(0.0, grid.derivative[grid.indices(lin)[axis]]);
        }
    }
    acc.inverse()
}

pub fn laplacian(f: &RealField) -> RealField {
    let grid = f.grid();
    let mut c = f.forward();
    for (lin, v) in c.coeffs.iter_mut().enumerate() {
        *v *= -grid.kappa_sq(lin);
    }
    c.inverse()
}

/// `(1 - Laplacian)^{-1} f`.
pub fn resolvent(f: &RealField) -> RealField {
    let grid = f.grid();
    let mut c = f.forward();
    for (lin, v) in c.coeffs.iter_mut().enumerate() {
        *v /= 1.0 + grid.kappa_sq(lin);
    }
    c.inverse()
}

/// `(1 - Laplacian) f`.
pub fn helmholtz(f: &RealField) -> RealField {
    let grid = f.grid();
    let mut c = f.forward();
    for (lin, v) in c.coeffs.iter_mut().enumerate() {
        *v *= 1.0 + grid.kappa_sq(lin);
    }
    c.inverse()
}

/// `sum_j a_j b_j` over vector components.
pub fn dot(a: &[RealField], b: &[RealField]) -> RealField {
    let mut out = &a[0] * &b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        out = out.zip_map(&(x * y), |s, t| s + t);
    }
    out
}

/// `|a|^2` over vector components.
pub fn norm_sq(a: &[RealField]) -> RealField {
    dot(a, a)
}

/// Removes every mode with some `|k_axis| > n/3` (the two-thirds rule).
pub fn dealias(f: &RealField) -> RealField {
    let grid = f.grid();
    let limit = grid.points() as i64 / 3;
    let mut c = f.forward();
    for (lin, v) in c.coeffs.iter_mut().enumerate() {
        let k = grid.mode(lin);
        if k[..grid.dim()].iter().any(|&m| m.abs() > limit) {
            *v = Complex64::default();
        }
    }
    c.inverse()
}

/// Pointwise product; with `dealiased` both factors are truncated first.
pub fn pointwise_product(a: &RealField, b: &RealField, dealiased: bool) -> Result<RealField> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    if dealiased {
        Ok(&dealias(a) * &dealias(b))
    } else {
        Ok(a * b)
    }
}

/// `exp(factor * f)`, refusing arguments beyond [`EXP_LIMIT`].
pub fn pointwise_exp(f: &RealField, factor: f64) -> Result<RealField> {
    let worst = f.max_abs() * factor.abs();
    if !(worst <= EXP_LIMIT) {
        return Err(Error::ExpOverflow(worst));
    }
    Ok(f.map(|v| (factor * v).exp()))
}
