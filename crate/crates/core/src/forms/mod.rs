//! Bilinear forms of the stabilized primal-dual method and the saddle-point operator.
//!
//! All forms are assembled slab by slab as Kronecker products of temporal and spatial
//! one-dimensional matrices. Per-slab unknowns are ordered `[u1 | u2]` for the primal
//! pair, `[z1 | z2]` for the dual pair, and each scalar field is ordered time node major.

mod saddle;
pub mod tensor;

pub use saddle::{assemble_saddle, triple_norm, SaddleLayout, SaddleSystem};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::spaces::{SlabSpace, TraceSpace};
use tensor::{boundary_matrix, gradient_jump_matrix, outer, spatial_matrix, time_matrix};

/// Time quadrature points per slab for integrands involving trace-space functions.
const TRACE_TIME_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilizationWeights {
    pub gamma: f64,
    /// `s = min(q, k)`; filled in from the primal space when negative.
    pub s: i32,
    pub c_j: f64,
    pub c_g: f64,
    pub c_i0: f64,
    pub c_jump1: f64,
    pub c_jump2: f64,
    pub c_dual_sigma: f64,
    /// Weight of the time-jump penalty on the trace multiplier.
    pub c_mu_jump: f64,
}

impl Default for StabilizationWeights {
    fn default() -> Self {
        Self {
            gamma: 1e-2,
            s: -1,
            c_j: 1.0,
            c_g: 1.0,
            c_i0: 1.0,
            c_jump1: 1.0,
            c_jump2: 1.0,
            c_dual_sigma: 1.0,
            c_mu_jump: 1.0,
        }
    }
}

impl StabilizationWeights {
    pub fn for_space(mut self, primal: &SlabSpace) -> Self {
        if self.s < 0 {
            self.s = primal.k().min(primal.q()) as i32;
        }
        self
    }

    pub fn validate(&self, trace: Option<&TraceSpace>) -> Result<()> {
        let consts = [
            self.c_j,
            self.c_g,
            self.c_i0,
            self.c_jump1,
            self.c_jump2,
            self.c_dual_sigma,
            self.c_mu_jump,
        ];
        if consts.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Config("penalty constants must be positive".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.gamma == 0.0 && trace.is_none() {
            return Err(Error::Config(
                "gamma = 0 requires a finite-dimensional trace space; otherwise the \
                 stabilization does not define a norm"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Off-diagonal slab block kept as the dense submatrix on a superset of its nonzero
/// rows and columns. Index lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: DMatrix<f64>,
}

impl CouplingBlock {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::new(),
            cols: Vec::new(),
            values: DMatrix::zeros(0, 0),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows: Vec<usize> = (0..m.nrows()).filter(|&i| m.row(i).iter().any(|&v| v != 0.0)).collect();
        let cols: Vec<usize> = (0..m.ncols()).filter(|&j| m.column(j).iter().any(|&v| v != 0.0)).collect();
        let values = DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
        Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            rows,
            cols,
            values,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (jj, &c) in self.cols.iter().enumerate() {
            for (ii, &r) in self.rows.iter().enumerate() {
                m[(r, c)] = self.values[(ii, jj)];
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Entries of `x` at the stored columns.
    pub fn gather(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.cols.len(), |j, _| x[self.cols[j]])
    }

    /// `y += self * x`
    fn mul_add(&self, x: nalgebra::DVectorView<f64>, y: &mut DVector<f64>) {
        if self.rows.is_empty() {
            return;
        }
        let xs = DVector::from_fn(self.cols.len(), |j, _| x[self.cols[j]]);
        let prod = &self.values * xs;
        for (ii, &r) in self.rows.iter().enumerate() {
            y[r] += prod[ii];
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            values: self.values.transpose(),
        }
    }

    fn scaled(&self, a: f64) -> Self {
        Self {
            values: &self.values * a,
            ..self.clone()
        }
    }

    /// `self + factor * other`, with `other` placed at offset `(row, col)`.
    fn plus_at(&self, other: &CouplingBlock, row: usize, col: usize, factor: f64) -> Self {
        let merge = |a: &[usize], b: &[usize], off: usize| -> Vec<usize> {
            let mut v: Vec<usize> = a.iter().copied().chain(b.iter().map(|&i| i + off)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let rows = merge(&self.rows, &other.rows, row);
        let cols = merge(&self.cols, &other.cols, col);
        let pos = |list: &[usize], i: usize| list.binary_search(&i).expect("index in merged list");
        let mut values = DMatrix::zeros(rows.len(), cols.len());
        for (jj, &c) in self.cols.iter().enumerate() {
            let j = pos(&cols, c);
            for (ii, &r) in self.rows.iter().enumerate() {
                values[(pos(&rows, r), j)] = self.values[(ii, jj)];
            }
        }
        for (jj, &c) in other.cols.iter().enumerate() {
            let j = pos(&cols, c + col);
            for (ii, &r) in other.rows.iter().enumerate() {
                values[(pos(&rows, r + row), j)] += factor * other.values[(ii, jj)];
            }
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            rows,
            cols,
            values,
        }
    }
}

/// Maps every block through `f`, computing each shared block once.
fn map_shared<T, U>(blocks: &[Arc<T>], f: &mut impl FnMut(&T) -> U) -> Vec<Arc<U>> {
    let mut cache: Vec<(Arc<T>, Arc<U>)> = Vec::new();
    blocks
        .iter()
        .map(|b| {
            if let Some((_, v)) = cache.iter().find(|(k, _)| Arc::ptr_eq(k, b)) {
                return v.clone();
            }
            let v = Arc::new(f(b));
            cache.push((b.clone(), v.clone()));
            v
        })
        .collect()
}

/// Adds `src` blocks into `dst` blocks. Unshared destinations are updated in place;
/// pairs of shared blocks produce shared results.
fn add_shared<T: Clone>(dst: &mut [Arc<T>], src: &[Arc<T>], is_zero: impl Fn(&T) -> bool, add: impl Fn(&mut T, &T)) {
    let mut cache: Vec<(Arc<T>, Arc<T>, Arc<T>)> = Vec::new();
    let mut zero: Vec<(Arc<T>, bool)> = Vec::new();
    for (d, s) in dst.iter_mut().zip(src) {
        let z = match zero.iter().find(|(b, _)| Arc::ptr_eq(b, s)) {
            Some(&(_, z)) => z,
            None => {
                let z = is_zero(s);
                zero.push((s.clone(), z));
                z
            }
        };
        if z {
            continue;
        }
        if let Some(m) = Arc::get_mut(d) {
            add(m, s);
            continue;
        }
        if let Some((_, _, hit)) = cache.iter().find(|(a, b, _)| Arc::ptr_eq(a, d) && Arc::ptr_eq(b, s)) {
            *d = hit.clone();
            continue;
        }
        let mut m = d.as_ref().clone();
        add(&mut m, s);
        let new = Arc::new(m);
        // the cache holds both arcs so their addresses stay unique
        cache.push((d.clone(), s.clone(), new.clone()));
        *d = new;
    }
}

/// Block-tridiagonal matrix over time slabs. Blocks are reference counted so that
/// slab-invariant forms store a single copy; mutation copies on write.
#[derive(Debug, Clone)]
pub struct BlockTridiag {
    pub diag: Vec<Arc<DMatrix<f64>>>,
    /// `upper[n]`: rows of slab `n`, columns of slab `n + 1`.
    pub upper: Vec<Arc<CouplingBlock>>,
    /// `lower[n]`: rows of slab `n + 1`, columns of slab `n`.
    pub lower: Vec<Arc<CouplingBlock>>,
}

impl BlockTridiag {
    pub fn zeros(n_slabs: usize, rows: usize, cols: usize) -> Self {
        let z = Arc::new(DMatrix::zeros(rows, cols));
        let off = Arc::new(CouplingBlock::zeros(rows, cols));
        Self {
            diag: vec![z; n_slabs],
            upper: vec![off.clone(); n_slabs.saturating_sub(1)],
            lower: vec![off; n_slabs.saturating_sub(1)],
        }
    }

    pub fn from_blocks(diag: Vec<DMatrix<f64>>, upper: Vec<DMatrix<f64>>, lower: Vec<DMatrix<f64>>) -> Self {
        let off = |v: Vec<DMatrix<f64>>| v.iter().map(|m| Arc::new(CouplingBlock::from_dense(m))).collect();
        Self {
            diag: diag.into_iter().map(Arc::new).collect(),
            upper: off(upper),
            lower: off(lower),
        }
    }

    pub fn n_slabs(&self) -> usize {
        self.diag.len()
    }

    pub fn block_rows(&self) -> usize {
        self.diag[0].nrows()
    }

    pub fn block_cols(&self) -> usize {
        self.diag[0].ncols()
    }

    pub fn nrows(&self) -> usize {
        self.n_slabs() * self.block_rows()
    }

    pub fn ncols(&self) -> usize {
        self.n_slabs() * self.block_cols()
    }

    pub fn diag_mut(&mut self, n: usize) -> &mut DMatrix<f64> {
        Arc::make_mut(&mut self.diag[n])
    }

    pub fn set_upper(&mut self, n: usize, m: &DMatrix<f64>) {
        self.upper[n] = Arc::new(CouplingBlock::from_dense(m));
    }

    pub fn set_lower(&mut self, n: usize, m: &DMatrix<f64>) {
        self.lower[n] = Arc::new(CouplingBlock::from_dense(m));
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let (r, c) = (self.block_rows(), self.block_cols());
        let mut y = DVector::zeros(self.nrows());
        for n in 0..self.n_slabs() {
            let mut yn = self.diag[n].as_ref() * x.rows(n * c, c);
            if n + 1 < self.n_slabs() {
                self.upper[n].mul_add(x.rows((n + 1) * c, c), &mut yn);
            }
            if n > 0 {
                self.lower[n - 1].mul_add(x.rows((n - 1) * c, c), &mut yn);
            }
            y.rows_mut(n * r, r).copy_from(&yn);
        }
        y
    }

    /// `y^T M x`
    pub fn form(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        y.dot(&self.mul_vec(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (r, c) = (self.block_rows(), self.block_cols());
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for n in 0..self.n_slabs() {
            m.view_mut((n * r, n * c), (r, c)).copy_from(self.diag[n].as_ref());
            if n + 1 < self.n_slabs() {
                m.view_mut((n * r, (n + 1) * c), (r, c)).copy_from(&self.upper[n].to_dense());
                m.view_mut(((n + 1) * r, n * c), (r, c)).copy_from(&self.lower[n].to_dense());
            }
        }
        m
    }

    /// Applies `f` to every block, preserving sharing between identical blocks.
    pub fn map_blocks(&self, mut f: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>) -> BlockTridiag {
        let mut off = |b: &CouplingBlock| CouplingBlock::from_dense(&f(&b.to_dense()));
        let upper = map_shared(&self.upper, &mut off);
        let lower = map_shared(&self.lower, &mut off);
        BlockTridiag {
            diag: map_shared(&self.diag, &mut f),
            upper,
            lower,
        }
    }

    pub fn scale(&mut self, a: f64) {
        *self = BlockTridiag {
            diag: map_shared(&self.diag, &mut |m: &DMatrix<f64>| m * a),
            upper: map_shared(&self.upper, &mut |b: &CouplingBlock| b.scaled(a)),
            lower: map_shared(&self.lower, &mut |b: &CouplingBlock| b.scaled(a)),
        };
    }

    /// Adds `other * factor` at block offset `(row, col)` inside every slab block.
    pub fn add_at(&mut self, other: &BlockTridiag, row: usize, col: usize, factor: f64) {
        let (r, c) = (other.block_rows(), other.block_cols());
        add_shared(
            &mut self.diag,
            &other.diag,
            |m| m.iter().all(|&v| v == 0.0),
            |d, s| {
                let mut v = d.view_mut((row, col), (r, c));
                v += s * factor;
            },
        );
        let add = |d: &mut CouplingBlock, s: &CouplingBlock| *d = d.plus_at(s, row, col, factor);
        add_shared(&mut self.upper, &other.upper, CouplingBlock::is_zero, add);
        add_shared(&mut self.lower, &other.lower, CouplingBlock::is_zero, add);
    }

    /// Transposed block matrix (`upper` and `lower` swap roles).
    pub fn transpose(&self) -> BlockTridiag {
        BlockTridiag {
            diag: map_shared(&self.diag, &mut |m: &DMatrix<f64>| m.transpose()),
            upper: map_shared(&self.lower, &mut CouplingBlock::transpose),
            lower: map_shared(&self.upper, &mut CouplingBlock::transpose),
        }
    }
}

fn add_block(dst: &mut DMatrix<f64>, row: usize, col: usize, src: &DMatrix<f64>) {
    let mut v = dst.view_mut((row, col), (src.nrows(), src.ncols()));
    v += src;
}

fn slab_diagonal(n_slabs: usize, block: DMatrix<f64>) -> BlockTridiag {
    let (r, c) = block.shape();
    let mut bt = BlockTridiag::zeros(n_slabs, r, c);
    let block = Arc::new(block);
    for d in &mut bt.diag {
        *d = block.clone();
    }
    bt
}

fn check_compatible(primal: &SlabSpace, dual: &SlabSpace) -> Result<()> {
    let same = primal.mesh.spatial_nodes == dual.mesh.spatial_nodes && primal.mesh.time_nodes == dual.mesh.time_nodes;
    if !same {
        return Err(Error::Assembly("primal and dual spaces live on different meshes".into()));
    }
    Ok(())
}

/// `A[U, Y]`: rows are the dual test pair `(y1, y2)`, columns the primal pair `(u1, u2)`.
pub fn assemble_a(primal: &SlabSpace, dual: &SlabSpace) -> Result<BlockTridiag> {
    check_compatible(primal, dual)?;
    let (ps, ds) = (&primal.spatial, &dual.spatial);
    let (pt, dt) = (&primal.temporal, &dual.temporal);
    let tau = primal.mesh.h_t;
    let mt = time_matrix(dt, pt, 0, 0, tau);
    let d_t = time_matrix(dt, pt, 0, 1, tau);
    let mx = spatial_matrix(ds, ps, 0, 0, |_| true);
    let kx = spatial_matrix(ds, ps, 1, 1, |_| true);
    let flux = boundary_matrix(ds, ps, 1, true);

    let (np, nd) = (primal.dofs_per_slab(), dual.dofs_per_slab());
    let mut block = DMatrix::zeros(2 * nd, 2 * np);
    add_block(&mut block, 0, 0, &mt.kronecker(&(kx - flux)));
    add_block(&mut block, 0, np, &d_t.kronecker(&mx));
    add_block(&mut block, nd, 0, &d_t.kronecker(&mx));
    add_block(&mut block, nd, np, &(-mt.kronecker(&mx)));
    Ok(slab_diagonal(primal.mesh.n_slabs(), block))
}

/// Slab-local primal stabilization `J + G + I_0 + Tikhonov`. With a trace space the
/// trace term is realized through the multiplier and not assembled here.
pub fn assemble_primal_stab(
    primal: &SlabSpace,
    weights: &StabilizationWeights,
    trace: Option<&TraceSpace>,
) -> Result<BlockTridiag> {
    weights.validate(trace)?;
    let w = weights.for_space(primal);
    let (sp, tb) = (&primal.spatial, &primal.temporal);
    let h = primal.mesh.h();
    let tau = primal.mesh.h_t;
    let mt = time_matrix(tb, tb, 0, 0, tau);
    let kt = time_matrix(tb, tb, 1, 1, tau);
    // (test value, trial derivative) and its transpose
    let d_t = time_matrix(tb, tb, 0, 1, tau);
    let d_t_tr = time_matrix(tb, tb, 1, 0, tau);
    let mx = spatial_matrix(sp, sp, 0, 0, |_| true);
    let hx = spatial_matrix(sp, sp, 2, 2, |_| true);
    // (test second derivative, trial value), elementwise
    let lx = spatial_matrix(sp, sp, 2, 0, |_| true);
    let jx = gradient_jump_matrix(sp);

    let n = primal.dofs_per_slab();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    let u1u1 = mt.kronecker(&(&jx * (w.c_j * h) + &hx * (w.c_g * h * h))) + kt.kronecker(&mx) * w.c_i0;
    let u2u2 = kt.kronecker(&mx) * (w.c_g * h * h) + mt.kronecker(&mx) * w.c_i0;
    // G: -(d_t u2, d_xx w1); I_0: -(u2, d_t w1)
    let w1u2 = -d_t.kronecker(&lx) * (w.c_g * h * h) - d_t_tr.kronecker(&mx) * w.c_i0;
    add_block(&mut block, 0, 0, &u1u1);
    add_block(&mut block, n, n, &u2u2);
    add_block(&mut block, 0, n, &w1u2);
    add_block(&mut block, n, 0, &w1u2.transpose());
    let mut st = slab_diagonal(primal.mesh.n_slabs(), block);
    st.add_at(&assemble_tikhonov(primal, &w), 0, 0, 1.0);
    Ok(st)
}

/// `gamma h^{2s} (u1, w1)_Q` on the primal pair.
pub fn assemble_tikhonov(primal: &SlabSpace, weights: &StabilizationWeights) -> BlockTridiag {
    let w = weights.for_space(primal);
    let (sp, tb) = (&primal.spatial, &primal.temporal);
    let m = time_matrix(tb, tb, 0, 0, primal.mesh.h_t).kronecker(&spatial_matrix(sp, sp, 0, 0, |_| true));
    let n = primal.dofs_per_slab();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    add_block(&mut block, 0, 0, &(m * (w.gamma * primal.mesh.h().powi(2 * w.s))));
    slab_diagonal(primal.mesh.n_slabs(), block)
}

/// Slab-interface penalty `I_1 + I_2` on jumps of `u1`, `grad u1` and `u2`.
pub fn assemble_jump_stab(primal: &SlabSpace, weights: &StabilizationWeights) -> BlockTridiag {
    let n_slabs = primal.mesh.n_slabs();
    let n = primal.dofs_per_slab();
    let mut bt = BlockTridiag::zeros(n_slabs, 2 * n, 2 * n);
    if n_slabs < 2 {
        return bt;
    }
    let sp = &primal.spatial;
    let h = primal.mesh.h();
    let mx = spatial_matrix(sp, sp, 0, 0, |_| true);
    let kx = spatial_matrix(sp, sp, 1, 1, |_| true);
    let x1 = (&mx / h + &kx * h) * weights.c_jump1;
    let x2 = &mx / h * weights.c_jump2;
    let el = primal.temporal.left_values();
    let er = primal.temporal.right_values();
    let (ll, rr, lr) = (outer(&el, &el), outer(&er, &er), outer(&el, &er));
    // `after`: slab following an interface, `before`: slab preceding it
    let mut after = DMatrix::zeros(2 * n, 2 * n);
    let mut before = DMatrix::zeros(2 * n, 2 * n);
    let mut cross = DMatrix::zeros(2 * n, 2 * n);
    for (off, x) in [(0, &x1), (n, &x2)] {
        add_block(&mut after, off, off, &ll.kronecker(x));
        add_block(&mut before, off, off, &rr.kronecker(x));
        add_block(&mut cross, off, off, &(-lr.kronecker(x)));
    }
    let middle = Arc::new(&after + &before);
    let (after, before) = (Arc::new(after), Arc::new(before));
    let lower = Arc::new(CouplingBlock::from_dense(&cross));
    let upper = Arc::new(lower.transpose());
    for s in 0..n_slabs {
        bt.diag[s] = match (s > 0, s + 1 < n_slabs) {
            (true, true) => middle.clone(),
            (true, false) => after.clone(),
            _ => before.clone(),
        };
    }
    bt.lower = vec![lower; n_slabs - 1];
    bt.upper = vec![upper; n_slabs - 1];
    bt
}

/// Dual stabilization `S*`: full `H^1` mass + stiffness on `z1`, `L^2` on `z2`, and the
/// `h^{-1}` boundary penalty on `z1`.
pub fn assemble_dual_stab(dual: &SlabSpace, weights: &StabilizationWeights) -> BlockTridiag {
    let (sp, tb) = (&dual.spatial, &dual.temporal);
    let h = dual.mesh.h();
    let mt = time_matrix(tb, tb, 0, 0, dual.mesh.h_t);
    let mx = spatial_matrix(sp, sp, 0, 0, |_| true);
    let kx = spatial_matrix(sp, sp, 1, 1, |_| true);
    let bx = boundary_matrix(sp, sp, 0, false);
    let n = dual.dofs_per_slab();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    add_block(&mut block, 0, 0, &mt.kronecker(&(&mx + &kx + &bx * (weights.c_dual_sigma / h))));
    add_block(&mut block, n, n, &mt.kronecker(&mx));
    slab_diagonal(dual.mesh.n_slabs(), block)
}

/// Data-fit mass `(u1, w1)_{omega_T}` on the `u1` block of the primal pair.
pub fn assemble_data_mass(primal: &SlabSpace) -> BlockTridiag {
    let (sp, tb) = (&primal.spatial, &primal.temporal);
    let mt = time_matrix(tb, tb, 0, 0, primal.mesh.h_t);
    let mx = spatial_matrix(sp, sp, 0, 0, |c| primal.mesh.is_omega_cell(c));
    let n = primal.dofs_per_slab();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    add_block(&mut block, 0, 0, &mt.kronecker(&mx));
    slab_diagonal(primal.mesh.n_slabs(), block)
}

/// `L^2(Q)` mass on a pair `(v1, v2)`.
pub fn assemble_pair_mass(space: &SlabSpace) -> BlockTridiag {
    let (sp, tb) = (&space.spatial, &space.temporal);
    let m = time_matrix(tb, tb, 0, 0, space.mesh.h_t).kronecker(&spatial_matrix(sp, sp, 0, 0, |_| true));
    let n = space.dofs_per_slab();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    add_block(&mut block, 0, 0, &m);
    add_block(&mut block, n, n, &m);
    slab_diagonal(space.mesh.n_slabs(), block)
}

/// Pieces of the augmented trace formulation with a multiplier broken in time.
#[derive(Debug, Clone)]
pub struct TraceForms {
    /// `(u1, w1)_Sigma` on the primal pair.
    pub sigma_mass: BlockTridiag,
    /// `(u1, eta)_Sigma`: rows multiplier, columns primal pair.
    pub coupling: BlockTridiag,
    /// `(mu, eta)_Sigma + h^{-1} ([mu], [eta])_{dOmega}`.
    pub multiplier: BlockTridiag,
    /// `(mu, eta)_Sigma` without the jump penalty.
    pub multiplier_mass: BlockTridiag,
}

pub fn assemble_trace_forms(primal: &SlabSpace, trace: &TraceSpace, weights: &StabilizationWeights) -> TraceForms {
    let mesh = &primal.mesh;
    let n_slabs = mesh.n_slabs();
    let (sp, tb) = (&primal.spatial, &primal.temporal);
    let n = primal.dofs_per_slab();
    let m = trace.dim();
    let ns = primal.n_space();
    let h = mesh.h();
    let boundary = [(-mesh.params.big_r, 0usize), (0.0, ns - 1)];

    let mt = time_matrix(tb, tb, 0, 0, mesh.h_t);
    let bx = boundary_matrix(sp, sp, 0, false);
    let mut sigma_block = DMatrix::zeros(2 * n, 2 * n);
    add_block(&mut sigma_block, 0, 0, &mt.kronecker(&bx));
    let sigma_mass = slab_diagonal(n_slabs, sigma_block);

    // raw Gram matrices and couplings of the restricted basis on each slab
    let rule = GaussRule::new(TRACE_TIME_POINTS);
    let mut raw_coupling = Vec::with_capacity(n_slabs);
    let mut raw_mass = Vec::with_capacity(n_slabs);
    for s in 0..n_slabs {
        let (t0, t1) = mesh.slab(s);
        let mut cpl = DMatrix::zeros(m, 2 * n);
        let mut gram = DMatrix::zeros(m, m);
        for (t, w) in rule.mapped(t0, t1) {
            let st = (t - t0) / (t1 - t0);
            let psi_t = tb.basis.eval_all(st, 0);
            for &(xb, dof) in &boundary {
                let phis: Vec<f64> = (0..m).map(|i| trace.basis(i, t, xb)).collect();
                for i in 0..m {
                    for (a, &pa) in psi_t.iter().enumerate() {
                        cpl[(i, primal.index(0, a, dof))] += w * phis[i] * pa;
                    }
                    for l in 0..m {
                        gram[(i, l)] += w * phis[i] * phis[l];
                    }
                }
            }
        }
        raw_coupling.push(cpl);
        raw_mass.push(gram);
    }

    // On short slabs the restricted modes become numerically dependent. Each slab uses an
    // L2(Sigma^n)-orthonormal basis of their span; directions below the cutoff are
    // replaced by decoupled unknowns with unit diagonal.
    let transforms: Vec<(DMatrix<f64>, Vec<bool>)> = raw_mass.iter().map(slab_trace_basis).collect();
    let mut coupling = BlockTridiag::zeros(n_slabs, m, 2 * n);
    let mut multiplier_mass = BlockTridiag::zeros(n_slabs, m, m);
    let mut multiplier = BlockTridiag::zeros(n_slabs, m, m);
    for s in 0..n_slabs {
        let (tr, kept) = &transforms[s];
        *coupling.diag_mut(s) = tr.transpose() * &raw_coupling[s];
        let mut mm = tr.transpose() * &raw_mass[s] * tr;
        for (i, &k) in kept.iter().enumerate() {
            if !k {
                mm[(i, i)] = 1.0;
            }
        }
        *multiplier_mass.diag_mut(s) = mm.clone();
        *multiplier.diag_mut(s) = mm;
    }
    let c = weights.c_mu_jump / h;
    for iface in 1..n_slabs {
        let mut lower = DMatrix::zeros(m, m);
        let tn = mesh.time_nodes[iface];
        let (lo, hi) = (&transforms[iface - 1].0, &transforms[iface].0);
        for &(xb, _) in &boundary {
            let v = DVector::from_iterator(m, (0..m).map(|i| trace.basis(i, tn, xb)));
            let (vl, vh) = (lo.transpose() * &v, hi.transpose() * &v);
            add_block(multiplier.diag_mut(iface), 0, 0, &(&vh * vh.transpose() * c));
            add_block(multiplier.diag_mut(iface - 1), 0, 0, &(&vl * vl.transpose() * c));
            lower -= &vh * vl.transpose() * c;
        }
        multiplier.set_upper(iface - 1, &lower.transpose());
        multiplier.set_lower(iface - 1, &lower);
    }
    TraceForms {
        sigma_mass,
        coupling,
        multiplier,
        multiplier_mass,
    }
}

/// Relative eigenvalue cutoff of the per-slab trace Gram matrix.
const TRACE_GRAM_CUTOFF: f64 = 1e-10;

/// Columns map new multiplier coordinates to coefficients of the restricted modes.
fn slab_trace_basis(gram: &DMatrix<f64>) -> (DMatrix<f64>, Vec<bool>) {
    let m = gram.nrows();
    let eig = SymmetricEigen::new(gram.clone());
    let top = eig.eigenvalues.amax();
    let mut tr = DMatrix::zeros(m, m);
    let mut kept = vec![false; m];
    for i in 0..m {
        let lam = eig.eigenvalues[i];
        if top > 0.0 && lam > TRACE_GRAM_CUTOFF * top {
            tr.set_column(i, &(eig.eigenvectors.column(i) / lam.sqrt()));
            kept[i] = true;
        }
    }
    (tr, kept)
}

/// Every assembled form of the method on a given pair of spaces.
#[derive(Debug, Clone)]
pub struct Forms {
    pub primal: SlabSpace,
    pub dual: SlabSpace,
    pub weights: StabilizationWeights,
    pub trace: Option<TraceSpace>,
    pub a: BlockTridiag,
    pub primal_stab: BlockTridiag,
    pub jump_stab: BlockTridiag,
    pub dual_stab: BlockTridiag,
    pub data_mass: BlockTridiag,
    pub trace_forms: Option<TraceForms>,
}

impl Forms {
    pub fn assemble(
        primal: &SlabSpace,
        dual: &SlabSpace,
        weights: &StabilizationWeights,
        trace: Option<&TraceSpace>,
    ) -> Result<Self> {
        let weights = weights.for_space(primal);
        let primal_stab = assemble_primal_stab(primal, &weights, trace)?;
        Ok(Self {
            primal: primal.clone(),
            dual: dual.clone(),
            weights,
            trace: trace.cloned(),
            a: assemble_a(primal, dual)?,
            primal_stab,
            jump_stab: assemble_jump_stab(primal, &weights),
            dual_stab: assemble_dual_stab(dual, &weights),
            data_mass: assemble_data_mass(primal),
            trace_forms: trace.map(|ts| assemble_trace_forms(primal, ts, &weights)),
        })
    }

    /// Right-hand side `(u_data, w1)_{omega_T}` for the primal pair, with the data
    /// given pointwise and an optional discrete perturbation in the primal space.
    pub fn data_rhs(&self, data: &dyn Fn(f64, f64) -> f64, noise: Option<&DVector<f64>>) -> DVector<f64> {
        let sp = &self.primal;
        let n = sp.dofs_per_slab();
        let n_slabs = sp.mesh.n_slabs();
        let nq = sp.k().max(sp.q()) + 4;
        let rule = GaussRule::new(nq);
        let mut rhs = DVector::zeros(2 * n * n_slabs);
        for s in 0..n_slabs {
            let (t0, t1) = sp.mesh.slab(s);
            for &c in &sp.mesh.omega_cells {
                let (x0, x1) = sp.mesh.cell(c);
                for (t, wt) in rule.mapped(t0, t1) {
                    let psi_t = sp.temporal.basis.eval_all((t - t0) / (t1 - t0), 0);
                    for (x, wx) in rule.mapped(x0, x1) {
                        let f = data(t, x) * wt * wx;
                        for l in 0..=sp.k() {
                            let phi = sp.spatial.local_eval(c, l, x, 0);
                            for (a, &pa) in psi_t.iter().enumerate() {
                                rhs[2 * n * s + sp.index(0, a, sp.spatial.dof(c, l))] += f * pa * phi;
                            }
                        }
                    }
                }
            }
        }
        if let Some(delta) = noise {
            let mut full = DVector::zeros(2 * n * n_slabs);
            for s in 0..n_slabs {
                full.rows_mut(2 * n * s, n).copy_from(&delta.rows(n * s, n));
            }
            rhs += self.data_mass.mul_vec(&full);
        }
        rhs
    }
}
