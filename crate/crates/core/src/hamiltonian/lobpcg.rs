//! Block preconditioned conjugate gradient for the largest eigenvalue of an
//! operator that is self-adjoint in a diagonal mass inner product.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) struct Problem<'a> {
    pub apply: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub precondition: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    /// Diagonal of the mass matrix.
    pub mass: &'a [f64],
}

#[derive(Clone, Debug)]
pub(crate) struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn mass_dot(mass: &[f64], a: &[f64], b: &[f64]) -> f64 {
    mass.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y).sum()
}

fn combine(columns: &[Vec<f64>], coeffs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0; columns[0].len()];
    for (col, c) in columns.iter().zip(coeffs) {
        if c != 0.0 {
            for (o, x) in out.iter_mut().zip(col) {
                *o += c * x;
            }
        }
    }
    out
}

/// Largest eigenpair of `apply` in the `mass` inner product.
///
/// Stops when the mass-norm residual of the leading Ritz vector falls below
/// `tol * max(1, |lambda|)`.
pub(crate) fn largest_eigenpair(
    problem: &Problem<'_>,
    initial: Vec<Vec<f64>>,
    tol: f64,
    max_iterations: usize,
) -> Result<Eigenpair> {
    let k = initial.len();
    let mass = problem.mass;
    let mut x = initial;
    let mut ax: Vec<Vec<f64>> = x.iter().map(|v| (problem.apply)(v)).collect();
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut ap: Vec<Vec<f64>> = Vec::new();
    let mut residual_w: Vec<Vec<f64>> = Vec::new();
    let mut values = vec![0.0; k];

    for iteration in 0..=max_iterations {
        // Rayleigh-Ritz over span(X, W, P).
        let mut basis: Vec<Vec<f64>> = x.clone();
        basis.extend(residual_w.iter().cloned());
        basis.extend(p.iter().cloned());
        let mut abasis: Vec<Vec<f64>> = ax.clone();
        let aw: Vec<Vec<f64>> = residual_w.iter().map(|v| (problem.apply)(v)).collect();
        abasis.extend(aw);
        abasis.extend(ap.iter().cloned());

        // Mass-orthonormalize [X, W, P] by two passes of Gram-Schmidt,
        // dropping directions that are numerically dependent.
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
        let mut aortho: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
        for (mut b, mut ab) in basis.into_iter().zip(abasis) {
            let original = mass_dot(mass, &b, &b).sqrt();
            for _ in 0..2 {
                for (q, aq) in ortho.iter().zip(&aortho) {
                    let c = mass_dot(mass, q, &b);
                    b.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                    ab.iter_mut().zip(aq).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = mass_dot(mass, &b, &b).sqrt();
            if norm > 1e-10 * original && norm > 0.0 {
                b.iter_mut().for_each(|v| *v /= norm);
                ab.iter_mut().for_each(|v| *v /= norm);
                ortho.push(b);
                aortho.push(ab);
            }
        }
        let (basis, abasis) = (ortho, aortho);
        let m = basis.len();
        if m < k {
            return Err(Error::Numerical("search space collapsed".into()));
        }
        let reduced = DMatrix::from_fn(m, m, |i, j| {
            0.5 * (mass_dot(mass, &basis[i], &abasis[j]) + mass_dot(mass, &abasis[i], &basis[j]))
        });
        let er = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| er.eigenvalues[b].total_cmp(&er.eigenvalues[a]));
        let coeffs: Vec<Vec<f64>> = order[..k]
            .iter()
            .map(|&c| er.eigenvectors.column(c).iter().copied().collect())
            .collect();
        for (v, &c) in values.iter_mut().zip(&order[..k]) {
            *v = er.eigenvalues[c];
        }

        let new_x: Vec<Vec<f64>> = coeffs.iter().map(|c| combine(&basis, c.iter().copied())).collect();
        let new_ax: Vec<Vec<f64>> = coeffs.iter().map(|c| combine(&abasis, c.iter().copied())).collect();
        if m > k {
            p = coeffs
                .iter()
                .map(|c| combine(&basis[k..], c[k..].iter().copied()))
                .collect();
            ap = coeffs
                .iter()
                .map(|c| combine(&abasis[k..], c[k..].iter().copied()))
                .collect();
        }
        x = new_x;
        ax = new_ax;

        let residuals: Vec<Vec<f64>> = x
            .iter()
            .zip(&ax)
            .zip(&values)
            .map(|((xv, axv), &lam)| axv.iter().zip(xv).map(|(a, b)| a - lam * b).collect())
            .collect();
        let lead = mass_dot(mass, &residuals[0], &residuals[0]).sqrt();
        if lead <= tol * values[0].abs().max(1.0) {
            return Ok(Eigenpair {
                value: values[0],
                vector: x.swap_remove(0),
                iterations: iteration,
                residual: lead,
            });
        }
        residual_w = residuals.iter().map(|r| (problem.precondition)(r)).collect();
    }
    Err(Error::NoConvergence(format!(
        "eigenvalue iteration did not converge in {max_iterations} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_top_eigenvalue_of_weighted_diagonal_problem() {
        // apply = diag(d), mass = diag(w): eigenvalues are d itself.
        let n = 200;
        let d: Vec<f64> = (0..n).map(|i| -(i as f64) * 0.37 + 3.0).collect();
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64).sin()).collect();
        let apply = |v: &[f64]| v.iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<_>>();
        let pre = |v: &[f64]| v.to_vec();
        let problem = Problem {
            apply: &apply,
            precondition: &pre,
            mass: &w,
        };
        let init: Vec<Vec<f64>> = (0..3)
            .map(|s| (0..n).map(|i| ((i * (s + 3)) as f64).cos()).collect())
            .collect();
        let pair = largest_eigenpair(&problem, init, 1e-10, 1000).unwrap();
        assert!((pair.value - 3.0).abs() < 1e-12, "{}", pair.value);
    }
}
