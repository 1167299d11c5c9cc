//! Direct block-Thomas factorization of block-tridiagonal systems and a shift-invert
//! Lanczos iteration for the smallest-magnitude eigenpair of a symmetric pencil.

use faer::linalg::solvers::{Lblt, Solve};
use faer::{MatRef, Side};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use std::sync::Arc;

use crate::forms::{BlockTridiag, CouplingBlock, SaddleSystem};

/// Target relative residual after the solve; one refinement step is taken above it.
pub const REFINE_THRESHOLD: f64 = 1e-9;
/// Hard limit on the relative residual after refinement.
pub const RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub refine_steps: usize,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    /// Krylov subspace dimension per Lanczos restart.
    pub eig_krylov_dim: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            refine_steps: 2,
            eig_tol: 1e-8,
            eig_max_iter: 200,
            eig_krylov_dim: 40,
        }
    }
}

type Coupling = Arc<CouplingBlock>;

#[derive(Debug, Clone)]
pub struct BlockTriFactorization {
    lus: Vec<BlockFactor>,
    /// `S_n^{-1} U_n` restricted to the nonzero columns of `U_n`.
    schur_solves: Vec<DMatrix<f64>>,
    upper: Vec<Coupling>,
    lower: Vec<Coupling>,
    /// 1-norm condition estimates of the Schur blocks.
    pub conditions: Vec<f64>,
    matrix: BlockTridiag,
    refine_steps: usize,
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

/// Bunch-Kaufman factorization `P A P^T = L B L^T` of a symmetric block, read from its
/// lower triangle.
#[derive(Debug, Clone)]
struct BlockFactor(Lblt<f64>);

impl BlockFactor {
    fn new(a: &DMatrix<f64>) -> Self {
        let view = MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols());
        Self(Lblt::new(view, Side::Lower))
    }

    /// A zero `1 x 1` pivot or a `2 x 2` pivot block with vanishing determinant.
    fn has_singular_pivot(&self) -> bool {
        let d = self.0.B_diag().column_vector();
        let e = self.0.B_subdiag().column_vector();
        let n = d.nrows();
        let mut i = 0;
        while i < n {
            if i + 1 < n && e[i] != 0.0 {
                let det = d[i] * d[i + 1] - e[i] * e[i];
                if det == 0.0 || !det.is_finite() {
                    return true;
                }
                i += 2;
            } else {
                if d[i] == 0.0 || !d[i].is_finite() {
                    return true;
                }
                i += 1;
            }
        }
        false
    }

    fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = MatRef::from_column_major_slice(b.as_slice(), b.nrows(), b.ncols());
        let x = self.0.solve(rhs);
        DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| x[(i, j)])
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let rhs = MatRef::from_column_major_slice(b.as_slice(), b.nrows(), 1);
        let x = self.0.solve(rhs);
        DVector::from_fn(b.nrows(), |i, _| x[(i, 0)])
    }
}

/// Hager's estimate of `||A^{-1}||_1` for symmetric `A`.
fn inverse_one_norm(f: &BlockFactor, n: usize) -> Option<f64> {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = f.solve(&x);
        let new_est = y.lp_norm(1);
        if !new_est.is_finite() {
            return None;
        }
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = f.solve(&xi);
        let j = z.iamax();
        let zmax = z[j].abs();
        if new_est <= est || zmax <= z.dot(&x) {
            est = est.max(new_est);
            break;
        }
        est = new_est;
        x.fill(0.0);
        x[j] = 1.0;
    }
    Some(est)
}

fn factor_block(s: DMatrix<f64>, slab: usize) -> Result<(BlockFactor, f64)> {
    let norm = one_norm(&s);
    let singular = Error::Singular {
        slab,
        cond: f64::INFINITY,
    };
    if norm == 0.0 || !norm.is_finite() {
        return Err(singular);
    }
    let f = BlockFactor::new(&s);
    if f.has_singular_pivot() {
        return Err(singular);
    }
    let inv = inverse_one_norm(&f, s.nrows()).ok_or(singular)?;
    let cond = norm * inv;
    if !cond.is_finite() || cond > 1.0 / f64::EPSILON {
        return Err(Error::Singular { slab, cond });
    }
    Ok((f, cond))
}

/// Output of one forward elimination sweep.
struct Sweep {
    lus: Vec<BlockFactor>,
    schur_solves: Vec<DMatrix<f64>>,
    conditions: Vec<f64>,
    /// Forward-substituted right-hand side, when one was carried along.
    y: Vec<DVector<f64>>,
}

/// Block forward elimination. Keeps the diagonal factors only when `keep_lus` is set;
/// a right-hand side given as `rhs` is eliminated on the fly.
fn eliminate(
    matrix: &BlockTridiag,
    upper: &[Coupling],
    lower: &[Coupling],
    rhs: Option<&DVector<f64>>,
    keep_lus: bool,
) -> Result<Sweep> {
    let n_slabs = matrix.n_slabs();
    let b = matrix.block_rows();
    let mut out = Sweep {
        lus: Vec::new(),
        schur_solves: Vec::with_capacity(n_slabs.saturating_sub(1)),
        conditions: Vec::with_capacity(n_slabs),
        y: Vec::new(),
    };
    let mut s = matrix.diag[0].as_ref().clone();
    for n in 0..n_slabs {
        let (lu, cond) = factor_block(s, n)?;
        out.conditions.push(cond);
        if let Some(rhs) = rhs {
            let mut g = rhs.rows(n * b, b).into_owned();
            if n > 0 {
                let lo = &lower[n - 1];
                let prod = &lo.values * lo.gather(&out.y[n - 1]);
                for (ii, &r) in lo.rows.iter().enumerate() {
                    g[r] -= prod[ii];
                }
            }
            out.y.push(lu.solve(&g));
        }
        if n + 1 < n_slabs {
            let up = &upper[n];
            let mut rhs = DMatrix::zeros(b, up.cols.len());
            for (jj, _) in up.cols.iter().enumerate() {
                for (ii, &r) in up.rows.iter().enumerate() {
                    rhs[(r, jj)] = up.values[(ii, jj)];
                }
            }
            let x = lu.solve_mat(&rhs);
            let lo = &lower[n];
            let x_sub = DMatrix::from_fn(lo.cols.len(), up.cols.len(), |i, j| x[(lo.cols[i], j)]);
            let update = &lo.values * x_sub;
            s = matrix.diag[n + 1].as_ref().clone();
            for (ii, &r) in lo.rows.iter().enumerate() {
                for (jj, &c) in up.cols.iter().enumerate() {
                    s[(r, c)] -= update[(ii, jj)];
                }
            }
            out.schur_solves.push(x);
        } else {
            s = DMatrix::zeros(0, 0);
        }
        if keep_lus {
            out.lus.push(lu);
        }
    }
    Ok(out)
}

fn back_substitute(y: Vec<DVector<f64>>, schur_solves: &[DMatrix<f64>], upper: &[Coupling], b: usize) -> DVector<f64> {
    let n_slabs = y.len();
    let mut x = DVector::zeros(n_slabs * b);
    for (n, mut xn) in y.into_iter().enumerate().rev() {
        if n + 1 < n_slabs {
            let next = x.rows((n + 1) * b, b).into_owned();
            xn -= &schur_solves[n] * upper[n].gather(&next);
        }
        x.rows_mut(n * b, b).copy_from(&xn);
    }
    x
}

fn couplings(matrix: &BlockTridiag) -> Result<(Vec<Coupling>, Vec<Coupling>)> {
    if matrix.block_rows() != matrix.block_cols() {
        return Err(Error::Numerical("diagonal blocks must be square".into()));
    }
    check_symmetric(matrix)?;
    Ok((matrix.upper.clone(), matrix.lower.clone()))
}

const SYMMETRY_TOL: f64 = 1e-10;

fn check_symmetric(matrix: &BlockTridiag) -> Result<()> {
    let asym = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b.transpose()).amax() > SYMMETRY_TOL * a.amax().max(b.amax());
    let mut seen: Vec<&Arc<DMatrix<f64>>> = Vec::new();
    for d in &matrix.diag {
        if seen.iter().any(|s| Arc::ptr_eq(s, d)) {
            continue;
        }
        seen.push(d);
        if asym(d, d) {
            return Err(Error::Numerical("block-tridiagonal matrix is not symmetric".into()));
        }
    }
    for (u, l) in matrix.upper.iter().zip(&matrix.lower) {
        let bad = if u.rows == l.cols && u.cols == l.rows {
            asym(&u.values, &l.values)
        } else {
            asym(&u.to_dense(), &l.to_dense())
        };
        if bad {
            return Err(Error::Numerical("block-tridiagonal matrix is not symmetric".into()));
        }
    }
    Ok(())
}

pub fn factorize_matrix(matrix: &BlockTridiag) -> Result<BlockTriFactorization> {
    let (upper, lower) = couplings(matrix)?;
    let sweep = eliminate(matrix, &upper, &lower, None, true)?;
    Ok(BlockTriFactorization {
        lus: sweep.lus,
        schur_solves: sweep.schur_solves,
        upper,
        lower,
        conditions: sweep.conditions,
        matrix: matrix.clone(),
        refine_steps: 1,
    })
}

/// Single solve that discards each diagonal factor after use, so only the coupling
/// solves are held in memory. Refinement repeats the elimination.
#[derive(Debug, Clone)]
pub struct StreamingSolve {
    pub x: DVector<f64>,
    pub conditions: Vec<f64>,
    pub relative_residual: f64,
}

impl StreamingSolve {
    pub fn max_condition(&self) -> f64 {
        self.conditions.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn solve_streaming(matrix: &BlockTridiag, rhs: &DVector<f64>, refine_steps: usize) -> Result<StreamingSolve> {
    if rhs.len() != matrix.nrows() {
        return Err(Error::Numerical(format!(
            "rhs length {} does not match system size {}",
            rhs.len(),
            matrix.nrows()
        )));
    }
    let (upper, lower) = couplings(matrix)?;
    let b = matrix.block_rows();
    let sweep = |r: &DVector<f64>| -> Result<(DVector<f64>, Vec<f64>)> {
        let sw = eliminate(matrix, &upper, &lower, Some(r), false)?;
        Ok((back_substitute(sw.y, &sw.schur_solves, &upper, b), sw.conditions))
    };
    let bnorm = rhs.norm();
    let (mut x, conditions) = sweep(rhs)?;
    if bnorm == 0.0 {
        return Ok(StreamingSolve {
            x,
            conditions,
            relative_residual: 0.0,
        });
    }
    let mut r = rhs - matrix.mul_vec(&x);
    let mut rel = r.norm() / bnorm;
    let mut steps = 0;
    while rel > REFINE_THRESHOLD && steps < refine_steps {
        x += sweep(&r)?.0;
        r = rhs - matrix.mul_vec(&x);
        rel = r.norm() / bnorm;
        steps += 1;
    }
    if !(rel <= RESIDUAL_LIMIT) {
        return Err(Error::SolverQuality {
            residual: rel,
            limit: RESIDUAL_LIMIT,
        });
    }
    Ok(StreamingSolve {
        x,
        conditions,
        relative_residual: rel,
    })
}

pub fn factorize(sys: &SaddleSystem) -> Result<BlockTriFactorization> {
    factorize_matrix(&sys.matrix)
}

impl BlockTriFactorization {
    pub fn with_refine_steps(mut self, steps: usize) -> Self {
        self.refine_steps = steps;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Block forward elimination and back substitution without residual control.
    pub fn apply(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let b = self.matrix.block_rows();
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(self.lus.len());
        for n in 0..self.lus.len() {
            let mut g = rhs.rows(n * b, b).into_owned();
            if n > 0 {
                let lo = &self.lower[n - 1];
                let prod = &lo.values * lo.gather(&y[n - 1]);
                for (ii, &r) in lo.rows.iter().enumerate() {
                    g[r] -= prod[ii];
                }
            }
            y.push(self.lus[n].solve(&g));
        }
        back_substitute(y, &self.schur_solves, &self.upper, b)
    }

    /// Solve with a residual check and iterative refinement.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.dim() {
            return Err(Error::Numerical(format!(
                "rhs length {} does not match system size {}",
                rhs.len(),
                self.dim()
            )));
        }
        let bnorm = rhs.norm();
        if bnorm == 0.0 {
            return Ok(DVector::zeros(rhs.len()));
        }
        let mut x = self.apply(rhs);
        let mut r = rhs - self.matrix.mul_vec(&x);
        let mut rel = r.norm() / bnorm;
        let mut steps = 0;
        while rel > REFINE_THRESHOLD && steps < self.refine_steps {
            x += self.apply(&r);
            r = rhs - self.matrix.mul_vec(&x);
            rel = r.norm() / bnorm;
            steps += 1;
        }
        if !(rel <= RESIDUAL_LIMIT) {
            return Err(Error::SolverQuality {
                residual: rel,
                limit: RESIDUAL_LIMIT,
            });
        }
        Ok(x)
    }

    pub fn max_condition(&self) -> f64 {
        self.conditions.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub lambda: f64,
    #[serde(skip)]
    pub mode: DVector<f64>,
    /// `||B x - lambda M x|| / ||x||_M`
    pub residual: f64,
    pub iterations: usize,
    pub shift: f64,
}

/// Smallest-`|lambda|` eigenpair of `B x = lambda M x` with `B` symmetric and `M`
/// symmetric positive definite, by restarted shift-invert Lanczos in the `M` inner product.
pub fn smallest_eigenpair(b: &BlockTridiag, m: &BlockTridiag, tol: f64, max_iter: usize) -> Result<EigenResult> {
    smallest_eigenpair_with(b, m, tol, max_iter, SolverConfig::default().eig_krylov_dim, 0x5eed)
}

pub fn smallest_eigenpair_with(
    b: &BlockTridiag,
    m: &BlockTridiag,
    tol: f64,
    max_iter: usize,
    krylov_dim: usize,
    seed: u64,
) -> Result<EigenResult> {
    let (fact, shift) = match factorize_matrix(b) {
        Ok(f) => (f, 0.0),
        Err(Error::Singular { .. }) => {
            let sigma = 1e-12 * band_one_norm(b);
            let mut shifted = b.clone();
            shifted.add_at(m, 0, 0, -sigma);
            (factorize_matrix(&shifted)?, sigma)
        }
        Err(e) => return Err(e),
    };
    let n = b.nrows();
    let kdim = krylov_dim.clamp(2, n.max(2)).min(n);
    let m_norm = |v: &DVector<f64>| m.form(v, v).max(0.0).sqrt();

    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut start = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

    let (mut rayleigh, mut residual) = (f64::NAN, f64::INFINITY);
    for iter in 1..=max_iter {
        let nrm = m_norm(&start);
        if nrm == 0.0 {
            return Err(Error::Numerical("Lanczos start vector has zero M-norm".into()));
        }
        let mut basis: Vec<DVector<f64>> = vec![&start / nrm];
        let mut mbasis: Vec<DVector<f64>> = vec![m.mul_vec(&basis[0])];
        let mut t = DMatrix::<f64>::zeros(kdim, kdim);
        let mut dim = kdim;
        for j in 0..kdim {
            let mut w = fact.apply(&mbasis[j]);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for (i, (v, mv)) in basis.iter().zip(&mbasis).enumerate() {
                    let c = mv.dot(&w);
                    t[(i, j)] += c;
                    w.axpy(-c, v, 1.0);
                }
            }
            if j + 1 == kdim {
                break;
            }
            let beta = m_norm(&w);
            if beta <= 1e-14 * t[(j, j)].abs().max(1e-300) {
                dim = j + 1;
                break;
            }
            let v = w / beta;
            mbasis.push(m.mul_vec(&v));
            basis.push(v);
        }
        // projected operator from its upper triangle
        let tt = DMatrix::from_fn(dim, dim, |i, j| t[(i.min(j), i.max(j))]);
        let eig = SymmetricEigen::new(tt);
        let (k, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let theta = eig.eigenvalues[k];
        let coeffs = eig.eigenvectors.column(k);
        let mut x = DVector::zeros(n);
        for (i, v) in basis.iter().take(dim).enumerate() {
            x.axpy(coeffs[i], v, 1.0);
        }
        x /= m_norm(&x);
        let bx = b.mul_vec(&x);
        let mx = m.mul_vec(&x);
        let lambda = x.dot(&bx);
        let res = (&bx - &mx * lambda).norm();
        rayleigh = lambda;
        residual = res;
        if theta.abs() > 0.0 && res <= tol {
            return Ok(EigenResult {
                lambda,
                mode: x,
                residual: res,
                iterations: iter,
                shift,
            });
        }
        start = x;
    }
    Err(Error::EigenNoConvergence {
        iterations: max_iter,
        rayleigh,
        residual,
    })
}

/// Upper bound of the 1-norm of a block-tridiagonal matrix.
fn band_one_norm(m: &BlockTridiag) -> f64 {
    let off = m.upper.iter().chain(&m.lower).map(|b| one_norm(&b.values));
    m.diag.iter().map(|b| one_norm(b)).chain(off).fold(0.0, f64::max) * 3.0
}

pub fn smallest_eigenpair_of(sys: &SaddleSystem, cfg: &SolverConfig) -> Result<EigenResult> {
    smallest_eigenpair_with(&sys.matrix, &sys.mass(), cfg.eig_tol, cfg.eig_max_iter, cfg.eig_krylov_dim, 0x5eed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym_tridiag(n_slabs: usize, b: usize, seed: u64) -> BlockTridiag {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bt = BlockTridiag::zeros(n_slabs, b, b);
        for n in 0..n_slabs {
            let a = DMatrix::from_fn(b, b, |_, _| rng.gen_range(-1.0..1.0));
            *bt.diag_mut(n) = &a + a.transpose() + DMatrix::identity(b, b) * 4.0 * (b as f64).sqrt();
        }
        for n in 0..n_slabs.saturating_sub(1) {
            let u = DMatrix::from_fn(b, b, |i, j| if i + j > b { rng.gen_range(-1.0..1.0) } else { 0.0 });
            bt.set_lower(n, &u.transpose());
            bt.set_upper(n, &u);
        }
        bt
    }

    #[test]
    fn identity_solve() {
        let mut bt = BlockTridiag::zeros(3, 4, 4);
        for n in 0..3 {
            *bt.diag_mut(n) = DMatrix::identity(4, 4);
        }
        let f = factorize_matrix(&bt).unwrap();
        let rhs = DVector::from_fn(12, |i, _| i as f64);
        assert_eq!(f.solve(&rhs).unwrap(), rhs);
    }

    #[test]
    fn matches_dense_lu() {
        let bt = random_sym_tridiag(3, 7, 1);
        let f = factorize_matrix(&bt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rhs = DVector::from_fn(21, |_, _| rng.gen_range(-1.0..1.0));
        let x = f.solve(&rhs).unwrap();
        let dense = bt.to_dense().lu().solve(&rhs).unwrap();
        assert!((&x - &dense).norm() <= 1e-10 * dense.norm());
    }

    #[test]
    fn streaming_matches_stored_factors() {
        let bt = random_sym_tridiag(4, 6, 5);
        let rhs = DVector::from_fn(bt.nrows(), |i, _| ((i * 7) % 5) as f64 - 2.0);
        let stored = factorize_matrix(&bt).unwrap().solve(&rhs).unwrap();
        let streamed = solve_streaming(&bt, &rhs, 1).unwrap();
        assert!((&stored - &streamed.x).norm() <= 1e-12 * stored.norm());
        assert!(streamed.relative_residual < 1e-12);
        assert_eq!(streamed.conditions.len(), 4);
        assert!(solve_streaming(&bt, &DVector::zeros(3), 1).is_err());
    }

    #[test]
    fn rejects_unsymmetric_input() {
        let mut bt = random_sym_tridiag(2, 3, 9);
        bt.diag_mut(1)[(0, 2)] += 1.0;
        assert!(matches!(factorize_matrix(&bt), Err(Error::Numerical(_))));
        let mut bt = random_sym_tridiag(2, 3, 9);
        bt.set_upper(0, &DMatrix::identity(3, 3));
        assert!(matches!(solve_streaming(&bt, &DVector::zeros(6), 1), Err(Error::Numerical(_))));
    }

    #[test]
    fn zero_block_is_singular() {
        let mut bt = random_sym_tridiag(3, 4, 3);
        bt.diag_mut(1).fill(0.0);
        bt.set_upper(0, &DMatrix::zeros(4, 4));
        bt.set_lower(0, &DMatrix::zeros(4, 4));
        match factorize_matrix(&bt) {
            Err(Error::Singular { slab, .. }) => assert_eq!(slab, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn condition_estimate_is_reasonable() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0, 1e-3]));
        let bt = BlockTridiag::from_blocks(vec![d], vec![], vec![]);
        let f = factorize_matrix(&bt).unwrap();
        assert!((f.conditions[0] - 1e4).abs() < 1e-8);
    }

    #[test]
    fn diagonal_pencil() {
        let bt = BlockTridiag::from_blocks(vec![DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))], vec![], vec![]);
        let m = BlockTridiag::from_blocks(vec![DMatrix::identity(2, 2)], vec![], vec![]);
        let r = smallest_eigenpair(&bt, &m, 1e-12, 50).unwrap();
        assert!((r.lambda - 2.0).abs() < 1e-12);
        assert!((r.mode[0].abs() - 1.0).abs() < 1e-10 && r.mode[1].abs() < 1e-10);
    }

    #[test]
    fn random_pencil_matches_dense() {
        let mut b = random_sym_tridiag(3, 6, 7);
        // make it indefinite
        for n in 0..3 {
            *b.diag_mut(n) -= DMatrix::identity(6, 6) * (4.0 * 6f64.sqrt() + 0.3 * n as f64 - 0.1);
        }
        let mut m = BlockTridiag::zeros(3, 6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 0..3 {
            let a = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-0.2..0.2));
            *m.diag_mut(n) = &a * a.transpose() + DMatrix::identity(6, 6);
        }
        let r = smallest_eigenpair(&b, &m, 1e-10, 200).unwrap();
        // dense oracle: L^{-1} B L^{-T}
        let l = m.to_dense().cholesky().unwrap().l();
        let li = l.try_inverse().unwrap();
        let c = &li * b.to_dense() * li.transpose();
        let ev = SymmetricEigen::new(0.5 * (&c + c.transpose())).eigenvalues;
        let min = ev.iter().cloned().fold(f64::INFINITY, |a, v| if v.abs() < a.abs() { v } else { a });
        assert!((r.lambda - min).abs() < 1e-8, "{} vs {min}", r.lambda);
        assert!(r.residual <= 1e-10);
    }
}
