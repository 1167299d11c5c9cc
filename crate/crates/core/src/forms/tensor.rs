//! One-dimensional building blocks; every space-time slab matrix is a Kronecker
//! product of a temporal and a spatial factor.

use nalgebra::DMatrix;

use crate::quadrature::GaussRule;
use crate::spaces::{SpatialSpace, TemporalBasis};

/// `sum_K int_K d^dtest phi_i  d^dtrial phi_j dx` over cells accepted by `include`.
pub fn spatial_matrix(
    test: &SpatialSpace,
    trial: &SpatialSpace,
    dtest: usize,
    dtrial: usize,
    include: impl Fn(usize) -> bool,
) -> DMatrix<f64> {
    let rule = GaussRule::new(test.k.max(trial.k) + 2);
    let mut m = DMatrix::zeros(test.n_dofs(), trial.n_dofs());
    for c in (0..test.n_cells()).filter(|&c| include(c)) {
        let (a, b) = test.cell_bounds(c);
        for (x, w) in rule.mapped(a, b) {
            for i in 0..=test.k {
                let vi = test.local_eval(c, i, x, dtest);
                if vi == 0.0 {
                    continue;
                }
                for j in 0..=trial.k {
                    let vj = trial.local_eval(c, j, x, dtrial);
                    m[(test.dof(c, i), trial.dof(c, j))] += w * vi * vj;
                }
            }
        }
    }
    m
}

/// Point evaluations at `x = -R` and `x = 0`:
/// `sum_xb weight(xb) phi_i(xb) d^dtrial phi_j(xb)`, with `weight` the outward normal
/// when `normal` is set and 1 otherwise.
pub fn boundary_matrix(test: &SpatialSpace, trial: &SpatialSpace, dtrial: usize, normal: bool) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(test.n_dofs(), trial.n_dofs());
    let last = test.n_cells() - 1;
    for (cell, n) in [(0usize, -1.0), (last, 1.0)] {
        let (a, b) = test.cell_bounds(cell);
        let x = if n < 0.0 { a } else { b };
        let weight = if normal { n } else { 1.0 };
        for i in 0..=test.k {
            let vi = test.local_eval(cell, i, x, 0);
            for j in 0..=trial.k {
                let vj = trial.local_eval(cell, j, x, dtrial);
                m[(test.dof(cell, i), trial.dof(cell, j))] += weight * vi * vj;
            }
        }
    }
    m
}

/// Gradient jumps over interior nodes: `sum_F [phi_i'] [phi_j']`.
pub fn gradient_jump_matrix(space: &SpatialSpace) -> DMatrix<f64> {
    let n = space.n_dofs();
    let mut m = DMatrix::zeros(n, n);
    for f in 1..space.n_cells() {
        let x = space.cell_bounds(f).0;
        // [v'] = v'(x+) - v'(x-): right cell f, left cell f - 1
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * space.k + 2);
        for l in 0..=space.k {
            entries.push((space.dof(f, l), space.local_eval(f, l, x, 1)));
            entries.push((space.dof(f - 1, l), -space.local_eval(f - 1, l, x, 1)));
        }
        for &(i, vi) in &entries {
            for &(j, vj) in &entries {
                m[(i, j)] += vi * vj;
            }
        }
    }
    m
}

/// `int_0^tau d^dtest psi_a  d^dtrial psi_b dt` on a slab of length `tau`.
pub fn time_matrix(test: &TemporalBasis, trial: &TemporalBasis, dtest: usize, dtrial: usize, tau: f64) -> DMatrix<f64> {
    let rule = GaussRule::new(test.q.max(trial.q) + 2);
    let scale = tau.powi(1 - dtest as i32 - dtrial as i32);
    DMatrix::from_fn(test.len(), trial.len(), |a, b| {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&s, &w)| w * test.basis.eval(a, s, dtest) * trial.basis.eval(b, s, dtrial))
            .sum::<f64>()
            * scale
    })
}

pub fn outer(u: &[f64], v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}
