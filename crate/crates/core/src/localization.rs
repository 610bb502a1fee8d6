//! Spatially varying frequency splitting.
//!
//! A smooth radial partition of unity `sum_k w_k = 1` around the torus
//! center assigns to shell `k` the spectral threshold `2^{L + k}`. The high
//! part of a field is `U_> f = sum_k w_k P_{>2^{L+k}} f` and the low part is
//! the same sum with `P_{<=}`. Outer shells thus keep more of the field in
//! the (bounded) low part, which keeps the exponential weights built from
//! the high part under control far from the center.

use std::sync::Arc;

use crate::besov::{besov_norm, BesovParams};
use crate::error::{Error, Result};
use crate::spectral::{self, RealField, TorusGrid};

/// Geometry of the shells: the first transition radius and the common
/// transition width. Radii double from shell to shell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellGeometry {
    pub inner_radius: f64,
    pub edge_width: f64,
}

impl ShellGeometry {
    /// `inner_radius = M/16`, `edge_width = M/32`.
    pub fn default_for(grid: &TorusGrid) -> Self {
        Self {
            inner_radius: grid.side() / 16.0,
            edge_width: grid.side() / 32.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalizationSchedule {
    base_level: f64,
    geometry: ShellGeometry,
    weights: Vec<RealField>,
}

/// The two halves of a split field.
#[derive(Clone, Debug)]
pub struct SplitField {
    pub high: RealField,
    pub low: RealField,
}

/// Smooth step that is one inside radius `m` and zero outside, with width
/// `s`. It is a function of `r^2`, hence smooth at the center.
fn inner_step(r: f64, m: f64, s: f64) -> f64 {
    0.5 * libm::erfc((r * r - m * m) / (2.0 * m * s * std::f64::consts::SQRT_2))
}

impl LocalizationSchedule {
    pub fn new(grid: &Arc<TorusGrid>, base_level: f64, geometry: ShellGeometry) -> Result<Self> {
        let ShellGeometry {
            inner_radius,
            edge_width,
        } = geometry;
        if !(inner_radius > 0.0 && edge_width > 0.0) || !base_level.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bad localization parameters: level {base_level}, {geometry:?}"
            )));
        }
        // Transitions must finish before the cell boundary, where the torus
        // distance has a kink.
        let limit = grid.side() / 2.0;
        if inner_radius + 6.0 * edge_width > limit {
            return Err(Error::InvalidParameter(format!(
                "first shell transition at {inner_radius} does not fit in the cell"
            )));
        }
        let r = grid.distance_field(grid.center());
        let mut steps = Vec::new();
        let mut m = inner_radius;
        while m + 6.0 * edge_width <= limit {
            steps.push(r.map(|x| inner_step(x, m, edge_width)));
            m *= 2.0;
        }
        let mut weights = Vec::with_capacity(steps.len() + 1);
        weights.push(steps[0].clone());
        for pair in steps.windows(2) {
            weights.push(&pair[1] - &pair[0]);
        }
        weights.push(steps.last().expect("at least one shell").map(|x| 1.0 - x));
        Ok(Self {
            base_level,
            geometry,
            weights,
        })
    }

    pub fn with_default_geometry(grid: &Arc<TorusGrid>, base_level: f64) -> Result<Self> {
        Self::new(grid, base_level, ShellGeometry::default_for(grid))
    }

    pub fn base_level(&self) -> f64 {
        self.base_level
    }

    pub fn geometry(&self) -> ShellGeometry {
        self.geometry
    }

    pub fn weights(&self) -> &[RealField] {
        &self.weights
    }

    /// Level `L + k` of every shell.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.weights.len())
            .map(|k| self.base_level + k as f64)
            .collect()
    }

    /// Spectral threshold `2^{L+k}` of every shell.
    pub fn cutoffs(&self) -> Vec<f64> {
        self.levels().into_iter().map(f64::exp2).collect()
    }

    pub fn split(&self, f: &RealField) -> SplitField {
        let grid = f.grid();
        let c = f.forward();
        let mut high = RealField::zeros(grid);
        let mut low = RealField::zeros(grid);
        for (w, cutoff) in self.weights.iter().zip(self.cutoffs()) {
            let mut hc = c.clone();
            let mut lc = c.clone();
            for (lin, (h, l)) in hc
                .coeffs_mut()
                .iter_mut()
                .zip(lc.coeffs_mut().iter_mut())
                .enumerate()
            {
                if grid.kappa_norm(lin) > cutoff {
                    *l = Default::default();
                } else {
                    *h = Default::default();
                }
            }
            high.axpy(1.0, &(w * &hc.inverse()));
            low.axpy(1.0, &(w * &lc.inverse()));
        }
        SplitField { high, low }
    }

    /// Splits `(1 - Laplacian) f` and maps both halves back through the
    /// resolvent, so that the halves keep the regularity of `f`.
    pub fn split_conjugated(&self, f: &RealField) -> SplitField {
        let s = self.split(&spectral::helmholtz(f));
        SplitField {
            high: spectral::resolvent(&s.high),
            low: spectral::resolvent(&s.low),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub levels: Vec<f64>,
    /// `|U_> f|_{C^{-alpha-delta}}` at each level.
    pub norms: Vec<f64>,
    /// Least-squares slope of `-log2(norm)` against the level.
    pub fitted_rate: f64,
    pub delta: f64,
    pub pass: bool,
}

/// Measures how fast the high part of `f` shrinks in `C^{-alpha-delta}`
/// as the base level grows. The expected rate is at least `delta`; the
/// check passes when the fitted rate reaches half of it.
pub fn decay_check(
    f: &RealField,
    geometry: ShellGeometry,
    alpha: f64,
    delta: f64,
    levels: &[f64],
) -> Result<DecayReport> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter("need at least two levels".into()));
    }
    let params = BesovParams::holder(-alpha - delta);
    let mut norms = Vec::with_capacity(levels.len());
    for &level in levels {
        let schedule = LocalizationSchedule::new(f.grid(), level, geometry)?;
        norms.push(besov_norm(&schedule.split(f).high, &params)?.norm);
    }
    let n = levels.len() as f64;
    let ys: Vec<f64> = norms.iter().map(|v| -v.log2()).collect();
    let mx = levels.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = levels.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = levels.iter().map(|x| (x - mx).powi(2)).sum();
    let fitted_rate = sxy / sxx;
    Ok(DecayReport {
        levels: levels.to_vec(),
        norms,
        fitted_rate,
        delta,
        pass: fitted_rate >= 0.5 * delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{colored_field, sample_white_noise};
    use proptest::prelude::*;

    fn grid() -> Arc<TorusGrid> {
        TorusGrid::new(2, 64, 16.0).unwrap()
    }

    #[test]
    fn weights_form_a_nonnegative_partition_of_unity() {
        let g = grid();
        let s = LocalizationSchedule::with_default_geometry(&g, 1.0).unwrap();
        assert_eq!(s.weights().len(), 4);
        let mut total = RealField::zeros(&g);
        for w in s.weights() {
            assert!(w.min() >= -1e-15);
            total.axpy(1.0, w);
        }
        assert!(total.map(|v| v - 1.0).max_abs() < 1e-14);
        // The outermost shell covers the cell boundary.
        let corner = s.weights().last().unwrap().values()[0];
        assert!((corner - 1.0).abs() < 1e-9);
    }

    #[test]
    fn low_pass_split_of_band_limited_field_is_trivial() {
        // A field with |kappa| below every threshold has no high part.
        let g = grid();
        let f = RealField::from_fn(&g, |x| (2.0 * std::f64::consts::PI * x[0] / 16.0).cos());
        let s = LocalizationSchedule::with_default_geometry(&g, 0.0).unwrap();
        let split = s.split(&f);
        assert!(split.high.max_abs() < 1e-13);
        assert!((&split.low - &f).max_abs() < 1e-13);
    }

    #[test]
    fn huge_level_puts_everything_low() {
        let g = grid();
        let f = colored_field(&g, 1, 0.0);
        let s = LocalizationSchedule::with_default_geometry(&g, 20.0).unwrap();
        let split = s.split(&f);
        assert!(split.high.max_abs() < 1e-13);
    }

    #[test]
    fn rejects_geometry_that_does_not_fit() {
        let g = grid();
        let bad = ShellGeometry {
            inner_radius: 6.0,
            edge_width: 1.0,
        };
        assert!(LocalizationSchedule::new(&g, 0.0, bad).is_err());
    }

    #[test]
    fn white_noise_high_part_decays_with_level() {
        let g = TorusGrid::new(2, 128, 16.0).unwrap();
        let xi = sample_white_noise(&g, 5).field().clone();
        let report = decay_check(&xi, ShellGeometry::default_for(&g), 1.1, 0.3, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(report.pass, "{report:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn split_reconstructs(seed in 0u64..1000, level in -1.0f64..4.0) {
            let g = grid();
            let f = colored_field(&g, seed, 0.5);
            let s = LocalizationSchedule::with_default_geometry(&g, level).unwrap();
            let split = s.split(&f);
            prop_assert!((&(&split.high + &split.low) - &f).max_abs() < 1e-12);
            let conj = s.split_conjugated(&f);
            prop_assert!((&(&conj.high + &conj.low) - &f).max_abs() < 1e-12);
        }
    }
}
