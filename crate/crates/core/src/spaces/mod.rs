//! Tensor-product finite element spaces: discontinuous polynomials of degree `q` in
//! time on each slab times continuous piecewise polynomials of degree `k` in space.

mod trace;

pub use trace::{build_trace_space, check_a1, gamma_intervals, phi, phi_second_derivatives, A1Check, TraceFamily, TraceSpace};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mesh::SpaceTimeMesh;
use crate::quadrature::LagrangeBasis;

/// Continuous Lagrange space of degree `k` on the uniform spatial mesh.
#[derive(Debug, Clone)]
pub struct SpatialSpace {
    pub k: usize,
    pub basis: LagrangeBasis,
    nodes: Vec<f64>,
    h: f64,
}

impl SpatialSpace {
    pub fn new(mesh: &SpaceTimeMesh, k: usize) -> Result<Self> {
        if !(1..=7).contains(&k) {
            return Err(Error::Config(format!("spatial degree k must be in 1..=7, got {k}")));
        }
        Ok(Self {
            k,
            basis: LagrangeBasis::of_degree(k),
            nodes: mesh.spatial_nodes.clone(),
            h: mesh.h_x,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_dofs(&self) -> usize {
        self.k * self.n_cells() + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn dof(&self, cell: usize, local: usize) -> usize {
        cell * self.k + local
    }

    pub fn cell_bounds(&self, cell: usize) -> (f64, f64) {
        (self.nodes[cell], self.nodes[cell + 1])
    }

    pub fn dof_coordinate(&self, j: usize) -> f64 {
        let cell = (j / self.k).min(self.n_cells() - 1);
        let local = j - cell * self.k;
        let (a, _) = self.cell_bounds(cell);
        a + self.h * self.basis.nodes[local]
    }

    /// Local basis derivative of order `der` at physical `x` in `cell`.
    #[inline]
    pub fn local_eval(&self, cell: usize, local: usize, x: f64, der: usize) -> f64 {
        let (a, _) = self.cell_bounds(cell);
        let s = (x - a) / self.h;
        self.basis.eval(local, s, der) / self.h.powi(der as i32)
    }
}

/// Nodal dG(q) basis in time on a slab of length `h_t`.
#[derive(Debug, Clone)]
pub struct TemporalBasis {
    pub q: usize,
    pub basis: LagrangeBasis,
}

impl TemporalBasis {
    pub fn new(q: usize) -> Self {
        Self {
            q,
            basis: LagrangeBasis::of_degree(q),
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Basis values at the left end of a slab.
    pub fn left_values(&self) -> Vec<f64> {
        self.basis.eval_all(0.0, 0)
    }

    pub fn right_values(&self) -> Vec<f64> {
        self.basis.eval_all(1.0, 0)
    }
}

/// `W_h^{k,q}` on a space-time mesh.
#[derive(Debug, Clone)]
pub struct SlabSpace {
    pub mesh: SpaceTimeMesh,
    pub spatial: SpatialSpace,
    pub temporal: TemporalBasis,
}

impl SlabSpace {
    pub fn new(mesh: &SpaceTimeMesh, k: usize, q: usize) -> Result<Self> {
        Ok(Self {
            mesh: mesh.clone(),
            spatial: SpatialSpace::new(mesh, k)?,
            temporal: TemporalBasis::new(q),
        })
    }

    pub fn k(&self) -> usize {
        self.spatial.k
    }

    pub fn q(&self) -> usize {
        self.temporal.q
    }

    pub fn n_time(&self) -> usize {
        self.temporal.len()
    }

    pub fn n_space(&self) -> usize {
        self.spatial.n_dofs()
    }

    pub fn dofs_per_slab(&self) -> usize {
        self.n_time() * self.n_space()
    }

    pub fn global_dof_count(&self) -> usize {
        self.mesh.n_slabs() * self.dofs_per_slab()
    }

    #[inline]
    pub fn index(&self, slab: usize, a: usize, j: usize) -> usize {
        (slab * self.n_time() + a) * self.n_space() + j
    }

    pub fn time_node(&self, slab: usize, a: usize) -> f64 {
        let (t0, t1) = self.mesh.slab(slab);
        t0 + (t1 - t0) * self.temporal.basis.nodes[a]
    }

    /// Value (or derivative `d_t^dt d_x^dx`) of the field on slab `slab`, cell `cell`.
    pub fn eval_in(&self, w: &DVector<f64>, slab: usize, cell: usize, t: f64, x: f64, dt: usize, dx: usize) -> f64 {
        let (t0, t1) = self.mesh.slab(slab);
        let ht = t1 - t0;
        let st = (t - t0) / ht;
        let scale_t = ht.powi(dt as i32);
        let k = self.k();
        let mut spatial_vals = [0.0; 8];
        for (l, v) in spatial_vals.iter_mut().enumerate().take(k + 1) {
            *v = self.spatial.local_eval(cell, l, x, dx);
        }
        let mut acc = 0.0;
        for a in 0..self.n_time() {
            let ta = self.temporal.basis.eval(a, st, dt) / scale_t;
            if ta == 0.0 {
                continue;
            }
            let base = self.index(slab, a, 0);
            let mut s = 0.0;
            for (l, v) in spatial_vals.iter().enumerate().take(k + 1) {
                s += w[base + self.spatial.dof(cell, l)] * v;
            }
            acc += ta * s;
        }
        acc
    }

    /// Pointwise value; at a slab interface `right` selects the one-sided limit from above.
    pub fn eval(&self, w: &DVector<f64>, t: f64, x: f64, right: bool) -> f64 {
        let n = self.mesh.locate_slab(t, right);
        let c = self.mesh.locate_cell(x);
        self.eval_in(w, n, c, t, x, 0, 0)
    }

    /// Tensor nodal interpolant.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
        let mut w = DVector::zeros(self.global_dof_count());
        let xs: Vec<f64> = (0..self.n_space()).map(|j| self.spatial.dof_coordinate(j)).collect();
        for n in 0..self.mesh.n_slabs() {
            for a in 0..self.n_time() {
                let t = self.time_node(n, a);
                for (j, &x) in xs.iter().enumerate() {
                    w[self.index(n, a, j)] = f(t, x);
                }
            }
        }
        w
    }

    /// Jump `w(t_n^+) - w(t_n^-)` at interface `n >= 1` as spatial coefficients.
    pub fn jump_at(&self, w: &DVector<f64>, n: usize) -> DVector<f64> {
        let left = self.temporal.left_values();
        let right = self.temporal.right_values();
        let ns = self.n_space();
        DVector::from_fn(ns, |j, _| {
            let plus: f64 = (0..self.n_time()).map(|a| left[a] * w[self.index(n, a, j)]).sum();
            let minus: f64 = (0..self.n_time()).map(|a| right[a] * w[self.index(n - 1, a, j)]).sum();
            plus - minus
        })
    }

    pub fn zero(&self) -> DVector<f64> {
        DVector::zeros(self.global_dof_count())
    }
}

/// A scalar field evaluable cell-wise on the space-time mesh.
pub trait SpaceTimeField: Sync {
    fn value_in(&self, slab: usize, cell: usize, t: f64, x: f64) -> f64;
}

pub struct DiscreteField<'a> {
    pub space: &'a SlabSpace,
    pub coeffs: &'a DVector<f64>,
}

impl SpaceTimeField for DiscreteField<'_> {
    fn value_in(&self, slab: usize, cell: usize, t: f64, x: f64) -> f64 {
        self.space.eval_in(self.coeffs, slab, cell, t, x, 0, 0)
    }
}

/// Time-continuous lifting `L_h w = w - [w^n] theta_n` on slab `n >= 1`, with
/// `theta_n(t) = (t_{n+1} - t) / (t_{n+1} - t_n)`.
pub struct LiftedField<'a> {
    pub space: &'a SlabSpace,
    pub coeffs: &'a DVector<f64>,
    jumps: Vec<DVector<f64>>,
}

pub fn lift<'a>(space: &'a SlabSpace, w: &'a DVector<f64>) -> LiftedField<'a> {
    let jumps = (0..space.mesh.n_slabs())
        .map(|n| {
            if n == 0 {
                DVector::zeros(space.n_space())
            } else {
                space.jump_at(w, n)
            }
        })
        .collect();
    LiftedField {
        space,
        coeffs: w,
        jumps,
    }
}

pub fn theta(t_n: f64, t_n1: f64, t: f64) -> f64 {
    (t_n1 - t) / (t_n1 - t_n)
}

impl LiftedField<'_> {
    /// Pointwise value with one-sided selection at interfaces (the result is continuous).
    pub fn eval(&self, t: f64, x: f64, right: bool) -> f64 {
        let n = self.space.mesh.locate_slab(t, right);
        let c = self.space.mesh.locate_cell(x);
        self.value_in(n, c, t, x)
    }
}

impl SpaceTimeField for LiftedField<'_> {
    fn value_in(&self, slab: usize, cell: usize, t: f64, x: f64) -> f64 {
        let raw = self.space.eval_in(self.coeffs, slab, cell, t, x, 0, 0);
        if slab == 0 {
            return raw;
        }
        let (t0, t1) = self.space.mesh.slab(slab);
        let sp = &self.space.spatial;
        let jump: f64 = (0..=sp.k)
            .map(|l| self.jumps[slab][sp.dof(cell, l)] * sp.local_eval(cell, l, x, 0))
            .sum();
        raw - jump * theta(t0, t1, t)
    }
}

/// Coefficients of the mixed variable `(u1, u2)` on a common space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
}

impl FieldPair {
    pub fn zeros(space: &SlabSpace) -> Self {
        Self {
            u1: space.zero(),
            u2: space.zero(),
        }
    }

    pub fn conforms_to(&self, space: &SlabSpace) -> bool {
        self.u1.len() == space.global_dof_count() && self.u2.len() == space.global_dof_count()
    }
}
