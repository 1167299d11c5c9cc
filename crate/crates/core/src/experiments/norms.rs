//! Region-restricted `L^2` norms by indicator quadrature on subdivided space-time cells.

use rayon::prelude::*;

use crate::geometry::{region_contains, Region};
use crate::mesh::SpaceTimeMesh;
use crate::quadrature::GaussRule;
use crate::spaces::SpaceTimeField;

/// Points per direction on each subcell.
const SUBCELL_POINTS: usize = 3;

/// `||u - field||_{L^2(region)}` for every region in `regions`, in order.
pub fn region_norms(
    mesh: &SpaceTimeMesh,
    exact: &(dyn Fn(f64, f64) -> f64 + Sync),
    field: &dyn SpaceTimeField,
    regions: &[Region],
    n_sub: usize,
) -> Vec<f64> {
    let n_sub = n_sub.max(1);
    let rule = GaussRule::new(SUBCELL_POINTS);
    let p = &mesh.params;
    let per_slab: Vec<Vec<f64>> = (0..mesh.n_slabs())
        .into_par_iter()
        .map(|s| {
            let mut acc = vec![0.0; regions.len()];
            let (t0, t1) = mesh.slab(s);
            let dt = (t1 - t0) / n_sub as f64;
            for c in 0..mesh.n_cells() {
                let (x0, x1) = mesh.cell(c);
                let dx = (x1 - x0) / n_sub as f64;
                for it in 0..n_sub {
                    let ta = t0 + it as f64 * dt;
                    for ix in 0..n_sub {
                        let xa = x0 + ix as f64 * dx;
                        for (t, wt) in rule.mapped(ta, ta + dt) {
                            for (x, wx) in rule.mapped(xa, xa + dx) {
                                let e = exact(t, x) - field.value_in(s, c, t, x);
                                let v = wt * wx * e * e;
                                for (a, &reg) in acc.iter_mut().zip(regions) {
                                    if region_contains(p, reg, t, x) {
                                        *a += v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; regions.len()];
    for slab in &per_slab {
        for (t, v) in total.iter_mut().zip(slab) {
            *t += v;
        }
    }
    total.into_iter().map(f64::sqrt).collect()
}

pub fn error_norm(
    mesh: &SpaceTimeMesh,
    exact: &(dyn Fn(f64, f64) -> f64 + Sync),
    field: &dyn SpaceTimeField,
    region: Region,
    n_sub: usize,
) -> f64 {
    region_norms(mesh, exact, field, &[region], n_sub)[0]
}
