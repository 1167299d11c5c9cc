//! Brute-force quadrature oracle for the assembled forms, written independently of the
//! tensor-product assembly in the library.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ucwave::forms::{
    assemble_a, assemble_data_mass, assemble_dual_stab, assemble_jump_stab, assemble_primal_stab,
    StabilizationWeights,
};
use ucwave::geometry::{derive_params, GeometryConfig};
use ucwave::mesh::{build_mesh, SpaceTimeMesh};
use ucwave::spaces::SlabSpace;

// 6-point Gauss-Legendre on [0, 1], exact to degree 11
const GL: [(f64, f64); 6] = [
    (0.033765242898423975, 0.08566224618958517),
    (0.16939530676686776, 0.18038078652406930),
    (0.38069040695840156, 0.23395696728634552),
    (0.61930959304159844, 0.23395696728634552),
    (0.83060469323313224, 0.18038078652406930),
    (0.96623475710157603, 0.08566224618958517),
];

/// Gauss-Lobatto nodes on [0, 1] for degrees 1 and 2.
fn nodes(p: usize) -> Vec<f64> {
    match p {
        1 => vec![0.0, 1.0],
        2 => vec![0.0, 0.5, 1.0],
        _ => panic!("oracle supports degrees 1 and 2"),
    }
}

/// Value and first two derivatives of the `i`-th Lagrange polynomial at `s`.
fn lagrange(p: usize, i: usize, s: f64) -> [f64; 3] {
    let nd = nodes(p);
    // expand prod_{m != i} (s - x_m) / (x_i - x_m) and differentiate numerically exact via
    // product rule over at most two factors
    let others: Vec<f64> = nd.iter().enumerate().filter(|&(m, _)| m != i).map(|(_, &x)| x).collect();
    let denom: f64 = others.iter().map(|&x| nd[i] - x).product();
    match others.len() {
        1 => [(s - others[0]) / denom, 1.0 / denom, 0.0],
        2 => {
            let (a, b) = (others[0], others[1]);
            [(s - a) * (s - b) / denom, (2.0 * s - a - b) / denom, 2.0 / denom]
        }
        _ => unreachable!(),
    }
}

/// Local function: component (0 = u1/y1, 1 = u2/y2), time node `a`, spatial local node `l`.
#[derive(Clone, Copy)]
struct Local {
    comp: usize,
    a: usize,
    l: usize,
}

/// Derivatives of a local function at a point: `[v, dt, dx, dxx]`.
fn eval(k: usize, q: usize, f: Local, tau: f64, hx: f64, st: f64, sx: f64) -> [f64; 4] {
    let lt = lagrange(q, f.a, st);
    let lx = lagrange(k, f.l, sx);
    [lt[0] * lx[0], lt[1] / tau * lx[0], lt[0] * lx[1] / hx, lt[0] * lx[2] / (hx * hx)]
}

struct Oracle {
    mesh: SpaceTimeMesh,
    k: usize,
    q: usize,
}

impl Oracle {
    fn ns(&self) -> usize {
        self.k * self.mesh.n_cells() + 1
    }

    fn per_slab(&self) -> usize {
        (self.q + 1) * self.ns()
    }

    fn len(&self) -> usize {
        2 * self.per_slab() * self.mesh.n_slabs()
    }

    fn global(&self, slab: usize, cell: usize, f: Local) -> usize {
        let n = self.per_slab();
        2 * n * slab + f.comp * n + f.a * self.ns() + cell * self.k + f.l
    }

    fn locals(&self) -> Vec<Local> {
        let mut v = Vec::new();
        for comp in 0..2 {
            for a in 0..=self.q {
                for l in 0..=self.k {
                    v.push(Local { comp, a, l });
                }
            }
        }
        v
    }

    /// Volume integral over every slab and cell of `f(test, trial, x)`.
    fn volume(&self, cells: &[usize], f: impl Fn(&[f64; 4], &[f64; 4], usize, usize) -> f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.len());
        let tau = self.mesh.h_t;
        let hx = self.mesh.h_x;
        let locs = self.locals();
        for s in 0..self.mesh.n_slabs() {
            for &c in cells {
                for &(st, wt) in &GL {
                    for &(sx, wx) in &GL {
                        let w = wt * wx * tau * hx;
                        let vals: Vec<[f64; 4]> =
                            locs.iter().map(|&lf| eval(self.k, self.q, lf, tau, hx, st, sx)).collect();
                        for (i, ti) in locs.iter().enumerate() {
                            for (j, tj) in locs.iter().enumerate() {
                                let v = f(&vals[i], &vals[j], ti.comp, tj.comp);
                                if v != 0.0 {
                                    m[(self.global(s, c, *ti), self.global(s, c, *tj))] += w * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        m
    }

    /// Time integral along the line `x = node` of `f(test, trial)` where the per-side
    /// evaluations come from the adjacent cells (`None` outside the domain).
    fn spatial_line(
        &self,
        node: usize,
        f: impl Fn(Option<&[f64; 4]>, Option<&[f64; 4]>, Option<&[f64; 4]>, Option<&[f64; 4]>, usize, usize) -> f64,
    ) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.len());
        let tau = self.mesh.h_t;
        let hx = self.mesh.h_x;
        let nc = self.mesh.n_cells();
        // (cell, local coordinate) on the left and right of the node
        let sides: Vec<(usize, f64, bool)> = [(node.checked_sub(1), 1.0, true), (Some(node).filter(|&c| c < nc), 0.0, false)]
            .into_iter()
            .filter_map(|(c, sx, left)| c.map(|c| (c, sx, left)))
            .collect();
        let locs = self.locals();
        for s in 0..self.mesh.n_slabs() {
            for &(st, wt) in &GL {
                for &(ci, sxi, li) in &sides {
                    for &(cj, sxj, lj) in &sides {
                        for ti in &locs {
                            for tj in &locs {
                                let vi = eval(self.k, self.q, *ti, tau, hx, st, sxi);
                                let vj = eval(self.k, self.q, *tj, tau, hx, st, sxj);
                                let (il, ir) = if li { (Some(&vi), None) } else { (None, Some(&vi)) };
                                let (jl, jr) = if lj { (Some(&vj), None) } else { (None, Some(&vj)) };
                                let v = f(il, ir, jl, jr, ti.comp, tj.comp);
                                if v != 0.0 {
                                    m[(self.global(s, ci, *ti), self.global(s, cj, *tj))] += wt * tau * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        m
    }

    /// Space integral at the interface `t = t_n` between slabs `n - 1` and `n` of
    /// `f(test jump, trial jump, ...)` with `[v] = v+ - v-`; `grad` selects jumps of `dx v`.
    fn interface(&self, n: usize, f: impl Fn(f64, f64, usize, usize, bool) -> f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.len());
        let tau = self.mesh.h_t;
        let hx = self.mesh.h_x;
        let locs = self.locals();
        for c in 0..self.mesh.n_cells() {
            for &(sx, wx) in &GL {
                for (si, sti, sgi) in [(n - 1, 1.0, -1.0), (n, 0.0, 1.0)] {
                    for (sj, stj, sgj) in [(n - 1, 1.0, -1.0), (n, 0.0, 1.0)] {
                        for ti in &locs {
                            for tj in &locs {
                                let vi = eval(self.k, self.q, *ti, tau, hx, sti, sx);
                                let vj = eval(self.k, self.q, *tj, tau, hx, stj, sx);
                                let val = f(sgi * vi[0], sgj * vj[0], ti.comp, tj.comp, false)
                                    + f(sgi * vi[2], sgj * vj[2], ti.comp, tj.comp, true);
                                if val != 0.0 {
                                    m[(self.global(si, c, *ti), self.global(sj, c, *tj))] += wx * hx * val;
                                }
                            }
                        }
                    }
                }
            }
        }
        m
    }
}

pub fn forward_mesh(n_x: usize, n_t: usize) -> SpaceTimeMesh {
    forward_mesh_with(0.75, n_x, n_t)
}

pub fn forward_mesh_with(r: f64, n_x: usize, n_t: usize) -> SpaceTimeMesh {
    let cfg = GeometryConfig {
        r,
        ..GeometryConfig::trace_default()
    };
    let p = derive_params(&cfg).unwrap();
    build_mesh(&cfg, &p, n_x, n_t).unwrap()
}

/// Largest entry error relative to `max(1, max |want|)`.
fn mismatch(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    if got.shape() != want.shape() {
        return f64::INFINITY;
    }
    (got - want).amax() / want.amax().max(1.0)
}

pub fn weights() -> StabilizationWeights {
    StabilizationWeights {
        gamma: 0.3,
        ..Default::default()
    }
}

fn oracle_primal_stab(o: &Oracle, w: &StabilizationWeights) -> DMatrix<f64> {
    let h = o.mesh.h_x;
    let s = o.k.min(o.q) as i32;
    let all: Vec<usize> = (0..o.mesh.n_cells()).collect();
    // G and I0 and Tikhonov as volume terms on the pair (u1, u2)
    let vol = o.volume(&all, |ti, tj, ci, cj| {
        // residual pieces: G = dt u2 - dxx u1, I0 = u2 - dt u1
        let g = |v: &[f64; 4], c: usize| if c == 1 { v[1] } else { -v[3] };
        let i0 = |v: &[f64; 4], c: usize| if c == 1 { v[0] } else { -v[1] };
        let tik = if ci == 0 && cj == 0 { w.gamma * h.powi(2 * s) * ti[0] * tj[0] } else { 0.0 };
        h * h * g(ti, ci) * g(tj, cj) + i0(ti, ci) * i0(tj, cj) + tik
    });
    let mut m = vol;
    for node in 1..o.mesh.n_cells() {
        m += o.spatial_line(node, |il, ir, jl, jr, ci, cj| {
            if ci != 0 || cj != 0 {
                return 0.0;
            }
            // [dx v] = dx v(right cell) - dx v(left cell)
            let ji = ir.map_or(0.0, |v| v[2]) - il.map_or(0.0, |v| v[2]);
            let jj = jr.map_or(0.0, |v| v[2]) - jl.map_or(0.0, |v| v[2]);
            h * ji * jj
        });
    }
    m
}

fn oracle_jump_stab(o: &Oracle) -> DMatrix<f64> {
    let h = o.mesh.h_x;
    let mut m = DMatrix::zeros(o.len(), o.len());
    for n in 1..o.mesh.n_slabs() {
        m += o.interface(n, |ji, jj, ci, cj, grad| {
            if ci != cj {
                return 0.0;
            }
            match (ci, grad) {
                (0, false) => ji * jj / h,
                (0, true) => h * ji * jj,
                (1, false) => ji * jj / h,
                _ => 0.0,
            }
        });
    }
    m
}

fn oracle_a(o: &Oracle) -> DMatrix<f64> {
    let all: Vec<usize> = (0..o.mesh.n_cells()).collect();
    // rows: dual test (y1, y2); columns: primal trial (u1, u2)
    let mut m = o.volume(&all, |y, u, cy, cu| match (cy, cu) {
        (0, 0) => u[2] * y[2],
        (0, 1) => u[1] * y[0],
        (1, 0) => u[1] * y[0],
        (1, 1) => -u[0] * y[0],
        _ => 0.0,
    });
    let nc = o.mesh.n_cells();
    for (node, normal) in [(0usize, -1.0), (nc, 1.0)] {
        m += o.spatial_line(node, |il, ir, jl, jr, cy, cu| {
            if cy != 0 || cu != 0 {
                return 0.0;
            }
            let y = il.or(ir).unwrap();
            let u = jl.or(jr).unwrap();
            -normal * u[2] * y[0]
        });
    }
    m
}

fn oracle_dual_stab(o: &Oracle) -> DMatrix<f64> {
    let h = o.mesh.h_x;
    let all: Vec<usize> = (0..o.mesh.n_cells()).collect();
    let mut m = o.volume(&all, |y, z, cy, cz| match (cy, cz) {
        (0, 0) => y[0] * z[0] + y[2] * z[2],
        (1, 1) => y[0] * z[0],
        _ => 0.0,
    });
    let nc = o.mesh.n_cells();
    for node in [0usize, nc] {
        m += o.spatial_line(node, |il, ir, jl, jr, cy, cz| {
            if cy != 0 || cz != 0 {
                return 0.0;
            }
            il.or(ir).unwrap()[0] * jl.or(jr).unwrap()[0] / h
        });
    }
    m
}

fn oracle_data_mass(o: &Oracle) -> DMatrix<f64> {
    o.volume(&o.mesh.omega_cells.clone(), |v, u, cv, cu| if cv == 0 && cu == 0 { v[0] * u[0] } else { 0.0 })
}

/// Relative mismatch of every assembled form against the oracle on `mesh`.
pub fn block_mismatches(mesh: &SpaceTimeMesh, k: usize, q: usize) -> Vec<(&'static str, f64)> {
    let space = SlabSpace::new(mesh, k, q).unwrap();
    let o = Oracle { mesh: mesh.clone(), k, q };
    assert_eq!(2 * space.global_dof_count(), o.len());
    let w = weights().for_space(&space);
    vec![
        (
            "primal stabilization",
            mismatch(&assemble_primal_stab(&space, &w, None).unwrap().to_dense(), &oracle_primal_stab(&o, &w)),
        ),
        ("slab jumps", mismatch(&assemble_jump_stab(&space, &w).to_dense(), &oracle_jump_stab(&o))),
        ("A", mismatch(&assemble_a(&space, &space).unwrap().to_dense(), &oracle_a(&o))),
        ("dual stabilization", mismatch(&assemble_dual_stab(&space, &w).to_dense(), &oracle_dual_stab(&o))),
        ("data mass", mismatch(&assemble_data_mass(&space).to_dense(), &oracle_data_mass(&o))),
    ]
}
