//! Besov norms from Littlewood-Paley blocks, plus the regularity
//! diagnostics built on them.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{renorm_constant_a, sample_white_noise, Mollifier, StochasticLift};
use crate::spectral::{self, lp_block_range, lp_block_symbol, RealField, TorusGrid};

/// Parameters of the norm `B^s_{p,q}` with polynomial spatial weight
/// `(1 + |x - c|^2)^{-weight/2}` around the torus center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub weight: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, q: f64) -> Self {
        Self { s, p, q, weight: 0.0 }
    }

    /// The Hölder-Besov scale `C^s = B^s_{inf,inf}`.
    pub fn holder(s: f64) -> Self {
        Self::new(s, f64::INFINITY, f64::INFINITY)
    }

    fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.q >= 1.0) || !self.s.is_finite() || self.weight < 0.0 {
            return Err(Error::InvalidParameter(format!("bad Besov parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NormReport {
    pub norm: f64,
    /// `(j, 2^{js} |Delta_j f|_{L^p})` for every block on the grid.
    pub blocks: Vec<(i32, f64)>,
    /// The block with the largest weighted contribution.
    pub dominant_block: i32,
}

/// Unweighted block norms `|Delta_j f|_{L^p}` for all blocks.
fn block_lp_norms(f: &RealField, p: f64, weight: f64) -> Vec<(i32, f64)> {
    let grid = f.grid();
    let c = f.forward();
    let spatial = (weight > 0.0).then(|| {
        let center = grid.center();
        RealField::from_fn(grid, |x| {
            let r2 = grid.distance(center, x).powi(2);
            (1.0 + r2).powf(-weight / 2.0)
        })
    });
    lp_block_range(grid)
        .map(|j| {
            let mut block = c.clone();
            for (lin, v) in block.coeffs_mut().iter_mut().enumerate() {
                *v *= lp_block_symbol(j, grid.kappa_norm(lin));
            }
            let mut field = block.inverse();
            if let Some(w) = &spatial {
                field = &field * w;
            }
            (j, field.lp_norm(p))
        })
        .collect()
}

pub fn besov_norm(f: &RealField, params: &BesovParams) -> Result<NormReport> {
    params.validate()?;
    let blocks: Vec<(i32, f64)> = block_lp_norms(f, params.p, params.weight)
        .into_iter()
        .map(|(j, n)| (j, 2f64.powf(j as f64 * params.s) * n))
        .collect();
    let (dominant_block, _) = blocks
        .iter()
        .copied()
        .fold((-1, f64::NEG_INFINITY), |best, b| if b.1 > best.1 { b } else { best });
    let norm = if params.q.is_infinite() {
        blocks.iter().fold(0.0_f64, |m, b| m.max(b.1))
    } else {
        blocks.iter().map(|b| b.1.powf(params.q)).sum::<f64>().powf(1.0 / params.q)
    };
    Ok(NormReport {
        norm,
        blocks,
        dominant_block,
    })
}

/// Norms of the indicator of a ball across resolutions.
#[derive(Clone, Debug)]
pub struct IndicatorReport {
    pub points: Vec<usize>,
    pub norms: Vec<f64>,
    /// `max / min` over resolutions.
    pub spread: f64,
    /// Ratios of consecutive norms.
    pub growth: Vec<f64>,
}

/// Evaluates `|1_B|_{B^s_{p,q}}` for a ball of radius `side / 4` on grids
/// with the given numbers of points per side.
pub fn indicator_regularity_check(
    dim: usize,
    side: f64,
    points: &[usize],
    params: &BesovParams,
) -> Result<IndicatorReport> {
    let mut norms = Vec::with_capacity(points.len());
    for &n in points {
        let grid = TorusGrid::new(dim, n, side)?;
        let center = grid.center();
        let radius = side / 4.0;
        let f = RealField::from_fn(&grid, |x| {
            if grid.distance(center, x) <= radius {
                1.0
            } else {
                0.0
            }
        });
        norms.push(besov_norm(&f, params)?.norm);
    }
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let growth = norms.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(IndicatorReport {
        points: points.to_vec(),
        norms,
        spread: max / min,
        growth,
    })
}

/// Interpolation between two smoothness indices with a common `p` and `q`.
#[derive(Clone, Debug)]
pub struct InterpolationReport {
    /// Largest `|f|_{s_theta} / (|f|_{s1}^theta |f|_{s2}^{1-theta})` seen.
    pub worst_ratio: f64,
    pub constant: f64,
    pub pass: bool,
}

pub fn interpolation_check(
    fields: &[RealField],
    s1: f64,
    s2: f64,
    theta: f64,
    p: f64,
    q: f64,
    constant: f64,
) -> Result<InterpolationReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, 1]")));
    }
    let s_theta = theta * s1 + (1.0 - theta) * s2;
    let mut worst: f64 = 0.0;
    for f in fields {
        let mid = besov_norm(f, &BesovParams::new(s_theta, p, q))?.norm;
        let a = besov_norm(f, &BesovParams::new(s1, p, q))?.norm;
        let b = besov_norm(f, &BesovParams::new(s2, p, q))?.norm;
        let bound = a.powf(theta) * b.powf(1.0 - theta);
        if bound > 0.0 {
            worst = worst.max(mid / bound);
        }
    }
    Ok(InterpolationReport {
        worst_ratio: worst,
        constant,
        pass: worst <= constant,
    })
}

/// Product estimate `|fg|_{B^s_{2,2}} <= C (|f|_{B^s_{4,2}} |g|_{L^4} + |f|_{L^4} |g|_{B^s_{4,2}})`.
#[derive(Clone, Debug)]
pub struct LeibnizReport {
    pub worst_ratio: f64,
    pub constant: f64,
    pub pass: bool,
}

pub fn leibniz_check(pairs: &[(RealField, RealField)], s: f64, constant: f64) -> Result<LeibnizReport> {
    let mut worst: f64 = 0.0;
    for (f, g) in pairs {
        let lhs = besov_norm(&(f * g), &BesovParams::new(s, 2.0, 2.0))?.norm;
        let fs = besov_norm(f, &BesovParams::new(s, 4.0, 2.0))?.norm;
        let gs = besov_norm(g, &BesovParams::new(s, 4.0, 2.0))?.norm;
        let rhs = fs * g.lp_norm(4.0) + f.lp_norm(4.0) * gs;
        worst = worst.max(lhs / rhs);
    }
    Ok(LeibnizReport {
        worst_ratio: worst,
        constant,
        pass: worst <= constant,
    })
}

/// The stochastic objects whose regularity is tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftObject {
    Noise,
    Linear,
    WickLinear,
    Second,
    Third,
}

impl LiftObject {
    pub fn name(self) -> &'static str {
        match self {
            Self::Noise => "xi",
            Self::Linear => "x",
            Self::WickLinear => "wick_grad_x_sq",
            Self::Second => "x_second",
            Self::Third => "x_third",
        }
    }

    /// Expected Hölder regularity (the critical exponent).
    pub fn target(self, dim: usize) -> f64 {
        let d = dim as f64;
        match self {
            Self::Noise => -d / 2.0,
            Self::Linear => 2.0 - d / 2.0,
            Self::WickLinear => 2.0 - d,
            Self::Second => 1.0,
            Self::Third => 1.5,
        }
    }

    pub fn available(self, dim: usize) -> bool {
        dim == 3 || matches!(self, Self::Noise | Self::Linear | Self::WickLinear)
    }

    fn extract(self, lift: &LiftFields) -> &RealField {
        match (self, lift) {
            (Self::Noise, LiftFields::Linear { noise, .. }) => noise,
            (Self::Linear, LiftFields::Linear { linear, .. }) => linear,
            (Self::WickLinear, LiftFields::Linear { wick, .. }) => wick,
            (Self::Noise, LiftFields::Full(l)) => &l.noise,
            (Self::Linear, LiftFields::Full(l)) => &l.linear.field,
            (Self::WickLinear, LiftFields::Full(l)) => &l.wick_linear,
            (Self::Second, LiftFields::Full(l)) => &l.second.as_ref().expect("three-dimensional lift").field,
            (Self::Third, LiftFields::Full(l)) => &l.third.as_ref().expect("three-dimensional lift").field,
            _ => unreachable!("higher-order objects need the full lift"),
        }
    }

    fn is_linear(self) -> bool {
        matches!(self, Self::Noise | Self::Linear | Self::WickLinear)
    }
}

/// Either the full lift or just its first-order pieces, which are much
/// cheaper in three dimensions.
enum LiftFields {
    Linear {
        noise: RealField,
        linear: RealField,
        wick: RealField,
    },
    Full(Box<StochasticLift>),
}

impl LiftFields {
    fn build(grid: &Arc<TorusGrid>, seed: u64, mollifier: &Mollifier, linear_only: bool) -> Result<Self> {
        let noise = sample_white_noise(grid, seed);
        if linear_only {
            let a = renorm_constant_a(grid, mollifier);
            let linear = spectral::resolvent(&mollifier.apply(noise.field()));
            let wick = spectral::norm_sq(&spectral::gradient(&linear)).map(|v| v - a);
            Ok(Self::Linear {
                noise: noise.field().clone(),
                linear,
                wick,
            })
        } else {
            Ok(Self::Full(Box::new(StochasticLift::build(&noise, mollifier, Some(0.0))?)))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObjectTrend {
    pub object: LiftObject,
    pub target: f64,
    /// `[seed][resolution]` norms at `target - margin`.
    pub below: Vec<Vec<f64>>,
    /// `[seed][resolution]` norms at `target + margin`.
    pub above: Vec<Vec<f64>>,
    /// Seeds whose sub-target norms stay within a factor 2.
    pub stable_votes: usize,
    /// Seeds whose super-target norms increase strictly with resolution.
    pub growth_votes: usize,
    pub seeds: usize,
}

impl ObjectTrend {
    pub fn pass(&self) -> bool {
        2 * self.stable_votes > self.seeds && 2 * self.growth_votes > self.seeds
    }
}

#[derive(Clone, Debug)]
pub struct LiftRegularityReport {
    pub dim: usize,
    pub points: Vec<usize>,
    pub margin: f64,
    pub trends: Vec<ObjectTrend>,
}

impl LiftRegularityReport {
    pub fn pass(&self) -> bool {
        self.trends.iter().all(ObjectTrend::pass)
    }
}

/// Tracks Hölder norms of lift components across resolutions.
///
/// The mollifier is tied to the grid (`scale = scale_factor * h`) and the
/// noise is coupled across resolutions, so refining the grid reveals more
/// of one underlying sample. Only `b`-independent objects are tracked.
pub fn lift_regularity_report(
    dim: usize,
    side: f64,
    points: &[usize],
    seeds: &[u64],
    scale_factor: f64,
    margin: f64,
    objects: &[LiftObject],
) -> Result<LiftRegularityReport> {
    let grids = points
        .iter()
        .map(|&n| TorusGrid::new(dim, n, side))
        .collect::<Result<Vec<Arc<TorusGrid>>>>()?;
    let objects: Vec<LiftObject> = objects.iter().copied().filter(|o| o.available(dim)).collect();
    let linear_only = objects.iter().all(|o| o.is_linear());
    // norms[seed][object][resolution] = (below, above)
    let norms: Vec<Vec<Vec<(f64, f64)>>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<Vec<(f64, f64)>>> {
            let mut per_object = vec![Vec::new(); objects.len()];
            for grid in &grids {
                let mollifier = Mollifier::new(scale_factor * grid.spacing())?;
                let lift = LiftFields::build(grid, seed, &mollifier, linear_only)?;
                for (slot, object) in per_object.iter_mut().zip(&objects) {
                    let f = object.extract(&lift);
                    let t = object.target(dim);
                    let lo = besov_norm(f, &BesovParams::holder(t - margin))?.norm;
                    let hi = besov_norm(f, &BesovParams::holder(t + margin))?.norm;
                    slot.push((lo, hi));
                }
            }
            Ok(per_object)
        })
        .collect::<Result<_>>()?;
    let trends = objects
        .iter()
        .enumerate()
        .map(|(i, &object)| {
            let below: Vec<Vec<f64>> = norms
                .iter()
                .map(|s| s[i].iter().map(|p| p.0).collect())
                .collect();
            let above: Vec<Vec<f64>> = norms
                .iter()
                .map(|s| s[i].iter().map(|p| p.1).collect())
                .collect();
            let stable_votes = below
                .iter()
                .filter(|row| {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
                    max <= 2.0 * min
                })
                .count();
            let growth_votes = above
                .iter()
                .filter(|row| row.windows(2).all(|w| w[1] > w[0]))
                .count();
            ObjectTrend {
                object,
                target: object.target(dim),
                below,
                above,
                stable_votes,
                growth_votes,
                seeds: seeds.len(),
            }
        })
        .collect();
    Ok(LiftRegularityReport {
        dim,
        points: points.to_vec(),
        margin,
        trends,
    })
}
