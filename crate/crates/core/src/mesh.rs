//! Uniform tensor-product space-time mesh: spatial cells on `Omega` times time slabs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{GeometryConfig, WeightParams};

#[derive(Debug, Clone, Serialize)]
pub struct SpaceTimeMesh {
    pub spatial_nodes: Vec<f64>,
    /// Slab endpoints `t_0 < t_1 < ... < t_N`.
    pub time_nodes: Vec<f64>,
    pub h_x: f64,
    pub h_t: f64,
    /// Node indices strictly inside `Omega`.
    pub interior_facets: Vec<usize>,
    /// Cells contained in `omega = (-R, -r)`.
    pub omega_cells: Vec<usize>,
    #[serde(skip)]
    pub params: WeightParams,
}

const RATIO_MIN: f64 = 0.25;
const RATIO_MAX: f64 = 4.0;

/// Smallest `n_x` for which `-r` is a node, if any below 10_000.
fn compatible_nx(r: f64, big_r: f64) -> Option<usize> {
    (1..10_000).find(|&m| {
        let j = m as f64 * (big_r - r) / big_r;
        (j - j.round()).abs() < 1e-9
    })
}

pub fn build_mesh(cfg: &GeometryConfig, p: &WeightParams, n_x: usize, n_slabs: usize) -> Result<SpaceTimeMesh> {
    cfg.validate()?;
    if n_x < 2 {
        return Err(Error::Config(format!("need n_x >= 2, got {n_x}")));
    }
    if n_slabs < 1 {
        return Err(Error::Config("need at least one time slab".into()));
    }
    let h_x = p.big_r / n_x as f64;
    let j_r = (p.big_r - p.r) / h_x;
    if (j_r - j_r.round()).abs() > 1e-9 {
        let hint = compatible_nx(p.r, p.big_r)
            .map(|m| format!("use n_x a multiple of {m}"))
            .unwrap_or_else(|| "choose r with R/(R - r) rational".into());
        return Err(Error::Config(format!(
            "x = -r = {} is not a mesh node for n_x = {n_x}; {hint}",
            -p.r
        )));
    }
    let j_r = j_r.round() as usize;
    let h_t = p.time_length() / n_slabs as f64;
    let ratio = h_t / h_x;
    if !(RATIO_MIN..=RATIO_MAX).contains(&ratio) {
        return Err(Error::Config(format!(
            "time step / mesh width = {ratio:.3} outside [{RATIO_MIN}, {RATIO_MAX}]"
        )));
    }

    let mut spatial_nodes: Vec<f64> = (0..=n_x).map(|j| -p.big_r + j as f64 * h_x).collect();
    spatial_nodes[n_x] = 0.0;
    spatial_nodes[j_r] = -p.r;
    let t0 = p.t_start();
    let mut time_nodes: Vec<f64> = (0..=n_slabs).map(|n| t0 + n as f64 * h_t).collect();
    time_nodes[n_slabs] = p.t_end();

    Ok(SpaceTimeMesh {
        spatial_nodes,
        time_nodes,
        h_x,
        h_t,
        interior_facets: (1..n_x).collect(),
        omega_cells: (0..j_r).collect(),
        params: *p,
    })
}

impl SpaceTimeMesh {
    pub fn n_cells(&self) -> usize {
        self.spatial_nodes.len() - 1
    }

    pub fn n_slabs(&self) -> usize {
        self.time_nodes.len() - 1
    }

    pub fn slab(&self, n: usize) -> (f64, f64) {
        (self.time_nodes[n], self.time_nodes[n + 1])
    }

    pub fn cell(&self, c: usize) -> (f64, f64) {
        (self.spatial_nodes[c], self.spatial_nodes[c + 1])
    }

    pub fn is_omega_cell(&self, c: usize) -> bool {
        c < self.omega_cells.len()
    }

    /// Mesh size used in the stabilization weights.
    pub fn h(&self) -> f64 {
        self.h_x
    }

    /// Uniform refinement: both `n_x` and `N` doubled.
    pub fn refine(&self) -> SpaceTimeMesh {
        let n_x = 2 * self.n_cells();
        let n_slabs = 2 * self.n_slabs();
        let p = &self.params;
        let h_x = p.big_r / n_x as f64;
        let h_t = p.time_length() / n_slabs as f64;
        let mut spatial_nodes: Vec<f64> = (0..=n_x).map(|j| -p.big_r + j as f64 * h_x).collect();
        spatial_nodes[n_x] = 0.0;
        let j_r = 2 * self.omega_cells.len();
        spatial_nodes[j_r] = -p.r;
        let mut time_nodes: Vec<f64> = (0..=n_slabs).map(|n| p.t_start() + n as f64 * h_t).collect();
        time_nodes[n_slabs] = p.t_end();
        SpaceTimeMesh {
            spatial_nodes,
            time_nodes,
            h_x,
            h_t,
            interior_facets: (1..n_x).collect(),
            omega_cells: (0..j_r).collect(),
            params: *p,
        }
    }

    /// Cell containing `x` (the left cell on a node, except at `-R`).
    pub fn locate_cell(&self, x: f64) -> usize {
        let c = ((x + self.params.big_r) / self.h_x).floor() as isize;
        c.clamp(0, self.n_cells() as isize - 1) as usize
    }

    /// Slab containing `t`; at an interface `right = true` selects the later slab.
    pub fn locate_slab(&self, t: f64, right: bool) -> usize {
        let n_slabs = self.n_slabs();
        let s = (t - self.time_nodes[0]) / self.h_t;
        let mut n = s.floor() as isize;
        let on_node = (s - s.round()).abs() < 1e-10;
        if on_node {
            n = s.round() as isize;
            if !right {
                n -= 1;
            }
        }
        n.clamp(0, n_slabs as isize - 1) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::derive_params;

    fn setup() -> (GeometryConfig, WeightParams) {
        let cfg = GeometryConfig::default();
        let p = derive_params(&cfg).unwrap();
        (cfg, p)
    }

    #[test]
    fn reference_mesh() {
        let (cfg, p) = setup();
        let m = build_mesh(&cfg, &p, 8, 8).unwrap();
        assert_eq!(m.n_cells(), 8);
        assert!((m.h_x - 0.125).abs() < 1e-15);
        assert_eq!(m.omega_cells, vec![0, 1]);
        assert_eq!(m.cell(1), (-0.875, -0.75));
        assert_eq!(m.interior_facets.len(), 7);
        assert_eq!(m.slab(0).0, -p.t_final);
        assert_eq!(m.slab(7).1, p.t_final);
    }

    #[test]
    fn data_boundary_alignment() {
        let (cfg, p) = setup();
        for n_x in 2..=24 {
            let ok = build_mesh(&cfg, &p, n_x, n_x.max(2)).is_ok();
            assert_eq!(ok, n_x % 4 == 0, "n_x = {n_x}");
        }
        let err = build_mesh(&cfg, &p, 6, 6).unwrap_err();
        assert!(err.to_string().contains("multiple of 4"), "{err}");
    }

    #[test]
    fn single_slab_and_ratio() {
        let (cfg, p) = setup();
        assert!(build_mesh(&cfg, &p, 4, 1).is_err());
        let fwd = GeometryConfig {
            time_interval: crate::geometry::TimeInterval::Forward,
            ..cfg
        };
        let pf = derive_params(&fwd).unwrap();
        let m = build_mesh(&fwd, &pf, 4, 1).unwrap();
        assert_eq!(m.n_slabs(), 1);
        assert!(build_mesh(&cfg, &p, 64, 2).is_err());
    }

    #[test]
    fn partition_sums() {
        let (cfg, p) = setup();
        let m = build_mesh(&cfg, &p, 16, 12).unwrap();
        let cells: f64 = (0..m.n_cells()).map(|c| m.cell(c).1 - m.cell(c).0).sum();
        let slabs: f64 = (0..m.n_slabs()).map(|n| m.slab(n).1 - m.slab(n).0).sum();
        assert!((cells - p.big_r).abs() < 1e-13 * p.big_r);
        assert!((slabs - p.time_length()).abs() < 1e-13 * p.time_length());
        let omega: f64 = m.omega_cells.iter().map(|&c| m.cell(c).1 - m.cell(c).0).sum();
        assert!((omega - (p.big_r - p.r)).abs() < 1e-15);
    }

    #[test]
    fn refinement_is_nested() {
        let (cfg, p) = setup();
        let m = build_mesh(&cfg, &p, 8, 8).unwrap();
        let f = m.refine();
        assert_eq!((f.n_cells(), f.n_slabs()), (16, 16));
        for x in &m.spatial_nodes {
            assert!(f.spatial_nodes.iter().any(|y| (x - y).abs() < 1e-14));
        }
        for t in &m.time_nodes {
            assert!(f.time_nodes.iter().any(|s| (t - s).abs() < 1e-14));
        }
        assert!((f.h_t / f.h_x - m.h_t / m.h_x).abs() < 1e-13);
        assert_eq!(f.omega_cells.len(), 4);
    }

    #[test]
    fn locate() {
        let (cfg, p) = setup();
        let m = build_mesh(&cfg, &p, 8, 4).unwrap();
        let t1 = m.time_nodes[1];
        assert_eq!(m.locate_slab(t1, false), 0);
        assert_eq!(m.locate_slab(t1, true), 1);
        assert_eq!(m.locate_slab(m.time_nodes[4], true), 3);
        assert_eq!(m.locate_cell(-1.0), 0);
        assert_eq!(m.locate_cell(0.0), 7);
    }
}
