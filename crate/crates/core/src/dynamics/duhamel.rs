//! Reference solution by the variation-of-constants formula.
//!
//! The coercive operator `A_>>` is diagonalized densely in the weighted inner
//! product, so `v_tt = A_>> v + F(v)` with `F(v) = (C + chi_R Z_<=) v - e^{2W} v^3`
//! becomes `c_k'' = -omega_k^2 c_k + g_k` mode by mode. On each subinterval the
//! forcing is interpolated at Gauss-Legendre nodes and the Duhamel integrals
//! are iterated to a fixed point.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::WaveState;
use crate::error::{Error, Result};
use crate::hamiltonian::{TransformedOperator, TruncationConfig, Variant};
use crate::spectral::RealField;

pub const MAX_ORACLE_POINTS_PER_SIDE: usize = 24;
pub const MAX_ORACLE_UNKNOWNS: usize = 4096;
const MAX_HALVINGS: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DuhamelConfig {
    pub t_final: f64,
    /// Requested subinterval length; shortened so it divides `t_final`.
    pub subinterval: f64,
    pub nodes: usize,
    /// Picard iterations stop when successive iterates differ by less than
    /// this, relative to the state, in the weighted `L^2` norm.
    pub tolerance: f64,
    pub max_picard: usize,
}

impl DuhamelConfig {
    pub fn new(t_final: f64) -> Self {
        Self {
            t_final,
            subinterval: 0.025,
            nodes: 10,
            tolerance: 1e-10,
            max_picard: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DuhamelReport {
    pub state: WaveState,
    pub subintervals: usize,
    pub picard_iterations: usize,
    pub halvings: usize,
    pub frequency_range: (f64, f64),
}

/// Gauss-Legendre nodes and weights on `[0, 1]` (Golub-Welsch).
fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(p, p, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..p)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)].powi(2);
            ((x + 1.0) / 2.0, w / 2.0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn lagrange(nodes: &[f64], j: usize, r: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != j)
        .map(|(_, &s)| (r - s) / (nodes[j] - s))
        .product()
}

/// Precomputed convolution weights for one subinterval length.
struct Kernels {
    tau: f64,
    nodes: Vec<f64>,
    /// `position[i][j]` for nodes `i < p` and the end point `i = p`, one entry per mode.
    position: Vec<Vec<DVector<f64>>>,
    /// `velocity[j]` at the end point.
    velocity: Vec<DVector<f64>>,
}

impl Kernels {
    fn new(tau: f64, p: usize, omega: &[f64]) -> Self {
        let (x, _) = gauss_legendre(p);
        let nodes: Vec<f64> = x.iter().map(|v| v * tau).collect();
        let (qx, qw) = gauss_legendre(2 * p + 8);
        let targets: Vec<f64> = nodes.iter().copied().chain(std::iter::once(tau)).collect();
        let position = targets
            .iter()
            .map(|&sigma| {
                (0..p)
                    .map(|j| {
                        let basis: Vec<(f64, f64)> = qx
                            .iter()
                            .zip(&qw)
                            .map(|(&q, &w)| (q * sigma, w * sigma * lagrange(&nodes, j, q * sigma)))
                            .collect();
                        DVector::from_iterator(
                            omega.len(),
                            omega.iter().map(|&om| {
                                basis
                                    .iter()
                                    .map(|&(r, wl)| wl * (om * (sigma - r)).sin() / om)
                                    .sum()
                            }),
                        )
                    })
                    .collect()
            })
            .collect();
        let velocity = (0..p)
            .map(|j| {
                let basis: Vec<(f64, f64)> = qx
                    .iter()
                    .zip(&qw)
                    .map(|(&q, &w)| (q * tau, w * tau * lagrange(&nodes, j, q * tau)))
                    .collect();
                DVector::from_iterator(
                    omega.len(),
                    omega
                        .iter()
                        .map(|&om| basis.iter().map(|&(r, wl)| wl * (om * (tau - r)).cos()).sum()),
                )
            })
            .collect();
        Self {
            tau,
            nodes,
            position,
            velocity,
        }
    }
}

struct Modal<'a> {
    basis: DMatrix<f64>,
    omega: Vec<f64>,
    sqrt_mass: Vec<f64>,
    low_part: Vec<f64>,
    weight: &'a [f64],
    cubic: bool,
}

impl Modal<'_> {
    fn project(&self, f: &[f64]) -> DVector<f64> {
        let scaled = DVector::from_iterator(f.len(), f.iter().zip(&self.sqrt_mass).map(|(a, s)| a * s));
        self.basis.tr_mul(&scaled)
    }

    fn synthesize(&self, c: &DVector<f64>) -> Vec<f64> {
        let v = &self.basis * c;
        v.iter().zip(&self.sqrt_mass).map(|(a, s)| a / s).collect()
    }

    fn forcing(&self, c: &DVector<f64>) -> DVector<f64> {
        let v = self.synthesize(c);
        let f: Vec<f64> = v
            .iter()
            .zip(&self.low_part)
            .zip(self.weight)
            .map(|((&x, &xi), &w)| {
                let mut out = xi * x;
                if self.cubic {
                    out -= w * x * x * x;
                }
                out
            })
            .collect();
        self.project(&f)
    }

    fn free(&self, c0: &DVector<f64>, d0: &DVector<f64>, t: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.omega.len();
        let mut c = DVector::zeros(n);
        let mut d = DVector::zeros(n);
        for k in 0..n {
            let (s, co) = (self.omega[k] * t).sin_cos();
            c[k] = c0[k] * co + d0[k] * s / self.omega[k];
            d[k] = -c0[k] * self.omega[k] * s + d0[k] * co;
        }
        (c, d)
    }

    /// Advances by one kernel length; `None` when the fixed point iteration
    /// fails to contract.
    fn advance(
        &self,
        kernels: &Kernels,
        c0: &DVector<f64>,
        d0: &DVector<f64>,
        cfg: &DuhamelConfig,
        iterations: &mut usize,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let p = kernels.nodes.len();
        let free: Vec<DVector<f64>> = kernels.nodes.iter().map(|&s| self.free(c0, d0, s).0).collect();
        let mut current = free.clone();
        let mut forcing: Vec<DVector<f64>> = current.iter().map(|c| self.forcing(c)).collect();
        let mut previous_change = f64::INFINITY;
        let mut growth = 0;
        for _ in 0..cfg.max_picard {
            *iterations += 1;
            let mut change: f64 = 0.0;
            let mut size: f64 = 0.0;
            let next: Vec<DVector<f64>> = (0..p)
                .map(|i| {
                    let mut c = free[i].clone();
                    for (kernel, g) in kernels.position[i].iter().zip(&forcing) {
                        c += kernel.component_mul(g);
                    }
                    change = change.max((&c - &current[i]).norm());
                    size = size.max(c.norm());
                    c
                })
                .collect();
            current = next;
            forcing = current.iter().map(|c| self.forcing(c)).collect();
            if !change.is_finite() {
                return None;
            }
            if change <= cfg.tolerance * size.max(f64::MIN_POSITIVE) {
                let (mut c, mut d) = self.free(c0, d0, kernels.tau);
                for ((kp, kv), g) in kernels.position[p].iter().zip(&kernels.velocity).zip(&forcing) {
                    c += kp.component_mul(g);
                    d += kv.component_mul(g);
                }
                return Some((c, d));
            }
            if change > previous_change {
                growth += 1;
                if growth >= 3 {
                    return None;
                }
            }
            previous_change = change;
        }
        None
    }
}

/// Solves the truncated equation from `initial` to `cfg.t_final` with the
/// modal Duhamel iteration. Refuses grids beyond 24 points per side or
/// 4096 unknowns.
pub fn duhamel_oracle(
    op: &TransformedOperator,
    config: &TruncationConfig,
    initial: &WaveState,
    cubic: bool,
    cfg: &DuhamelConfig,
) -> Result<DuhamelReport> {
    let grid = op.grid().clone();
    let unknowns = grid.len();
    if grid.points() > MAX_ORACLE_POINTS_PER_SIDE || unknowns > MAX_ORACLE_UNKNOWNS {
        return Err(Error::OracleTooLarge(unknowns, MAX_ORACLE_UNKNOWNS));
    }
    if !(cfg.t_final > 0.0 && cfg.subinterval > 0.0 && cfg.nodes >= 2) {
        return Err(Error::InvalidParameter(format!("bad oracle configuration {cfg:?}")));
    }
    let a = op.dense_matrix(&op.potential(config, Variant::Coercive));
    let mass: Vec<f64> = op
        .weight
        .values()
        .iter()
        .map(|w| w * grid.cell_volume())
        .collect();
    let sqrt_mass: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let s = DMatrix::from_fn(unknowns, unknowns, |i, j| {
        0.5 * (sqrt_mass[i] * a[(i, j)] / sqrt_mass[j] + sqrt_mass[j] * a[(j, i)] / sqrt_mass[i])
    });
    let eig = SymmetricEigen::new(s);
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top < 0.0) {
        return Err(Error::Numerical(format!(
            "coercive operator has nonnegative eigenvalue {top}"
        )));
    }
    let omega: Vec<f64> = eig.eigenvalues.iter().map(|l| (-l).sqrt()).collect();
    let frequency_range = (
        omega.iter().copied().fold(f64::INFINITY, f64::min),
        omega.iter().copied().fold(0.0, f64::max),
    );
    let low_part: Vec<f64> = (&config.cutoff * &op.z_low)
        .values()
        .iter()
        .map(|v| v + config.shift)
        .collect();
    let modal = Modal {
        basis: eig.eigenvectors,
        omega,
        sqrt_mass,
        low_part,
        weight: op.weight.values(),
        cubic,
    };

    let steps = (cfg.t_final / cfg.subinterval).ceil() as usize;
    let tau = cfg.t_final / steps as f64;
    let mut kernels: HashMap<u32, Kernels> = HashMap::new();
    let mut c = modal.project(initial.v.values());
    let mut d = modal.project(initial.p.values());
    let mut iterations = 0;
    let mut halvings = 0;
    let mut subintervals = 0;
    for _ in 0..steps {
        // Work list of refinement depths covering one coarse subinterval.
        let mut pending = vec![0u32];
        while let Some(depth) = pending.pop() {
            if depth > MAX_HALVINGS {
                return Err(Error::NoConvergence(
                    "Duhamel iteration does not contract even on short subintervals".into(),
                ));
            }
            let k = kernels
                .entry(depth)
                .or_insert_with(|| Kernels::new(tau / 2f64.powi(depth as i32), cfg.nodes, &modal.omega));
            match modal.advance(k, &c, &d, cfg, &mut iterations) {
                Some((nc, nd)) => {
                    c = nc;
                    d = nd;
                    subintervals += 1;
                }
                None => {
                    halvings += 1;
                    pending.push(depth + 1);
                    pending.push(depth + 1);
                }
            }
        }
    }
    let v = RealField::from_values(&grid, modal.synthesize(&c))?;
    let p = RealField::from_values(&grid, modal.synthesize(&d))?;
    Ok(DuhamelReport {
        state: WaveState {
            v,
            p,
            t: initial.t + cfg.t_final,
        },
        subintervals,
        picard_iterations: iterations,
        halvings,
        frequency_range,
    })
}
