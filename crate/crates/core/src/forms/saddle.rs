use nalgebra::DVector;

use super::{BlockTridiag, Forms, StabilizationWeights};
use crate::error::{Error, Result};
use crate::spaces::{FieldPair, SlabSpace, TraceSpace};

/// Unknowns per slab, in order `[u1 u2 | mu | z1 z2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaddleLayout {
    pub n_slabs: usize,
    /// Scalar primal dofs per slab.
    pub primal: usize,
    pub trace: usize,
    /// Scalar dual dofs per slab.
    pub dual: usize,
}

impl SaddleLayout {
    pub fn block_size(&self) -> usize {
        2 * self.primal + self.trace + 2 * self.dual
    }

    pub fn len(&self) -> usize {
        self.n_slabs * self.block_size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mu_offset(&self) -> usize {
        2 * self.primal
    }

    pub fn dual_offset(&self) -> usize {
        2 * self.primal + self.trace
    }

    /// Splits a saddle vector into `(U, mu, Z)`; `mu` is ordered slab-major.
    pub fn split(&self, x: &DVector<f64>) -> (FieldPair, DVector<f64>, FieldPair) {
        let (np, nd, m, b) = (self.primal, self.dual, self.trace, self.block_size());
        let mut u = FieldPair {
            u1: DVector::zeros(np * self.n_slabs),
            u2: DVector::zeros(np * self.n_slabs),
        };
        let mut z = FieldPair {
            u1: DVector::zeros(nd * self.n_slabs),
            u2: DVector::zeros(nd * self.n_slabs),
        };
        let mut mu = DVector::zeros(m * self.n_slabs);
        for s in 0..self.n_slabs {
            let o = s * b;
            u.u1.rows_mut(s * np, np).copy_from(&x.rows(o, np));
            u.u2.rows_mut(s * np, np).copy_from(&x.rows(o + np, np));
            mu.rows_mut(s * m, m).copy_from(&x.rows(o + self.mu_offset(), m));
            z.u1.rows_mut(s * nd, nd).copy_from(&x.rows(o + self.dual_offset(), nd));
            z.u2.rows_mut(s * nd, nd).copy_from(&x.rows(o + self.dual_offset() + nd, nd));
        }
        (u, mu, z)
    }

    pub fn join(&self, u: &FieldPair, mu: &DVector<f64>, z: &FieldPair) -> DVector<f64> {
        let (np, nd, m, b) = (self.primal, self.dual, self.trace, self.block_size());
        let mut x = DVector::zeros(self.len());
        for s in 0..self.n_slabs {
            let o = s * b;
            x.rows_mut(o, np).copy_from(&u.u1.rows(s * np, np));
            x.rows_mut(o + np, np).copy_from(&u.u2.rows(s * np, np));
            if m > 0 {
                x.rows_mut(o + self.mu_offset(), m).copy_from(&mu.rows(s * m, m));
            }
            let d = o + self.dual_offset();
            x.rows_mut(d, nd).copy_from(&z.u1.rows(s * nd, nd));
            x.rows_mut(d + nd, nd).copy_from(&z.u2.rows(s * nd, nd));
        }
        x
    }

    /// Slab-interleaved pair vector `[v1 v2]` per slab, as used by the form matrices.
    pub fn interleave(per_slab: usize, v: &FieldPair) -> DVector<f64> {
        let n_slabs = v.u1.len() / per_slab;
        let mut out = DVector::zeros(2 * v.u1.len());
        for s in 0..n_slabs {
            out.rows_mut(2 * per_slab * s, per_slab).copy_from(&v.u1.rows(per_slab * s, per_slab));
            out.rows_mut(2 * per_slab * s + per_slab, per_slab)
                .copy_from(&v.u2.rows(per_slab * s, per_slab));
        }
        out
    }
}

/// Assembled symmetric indefinite system for `(U_h, mu_h, Z_h)`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: BlockTridiag,
    pub rhs: DVector<f64>,
    pub layout: SaddleLayout,
    pub forms: Forms,
}

pub fn assemble_saddle(
    primal: &SlabSpace,
    dual: &SlabSpace,
    weights: &StabilizationWeights,
    trace: Option<&TraceSpace>,
    data: &dyn Fn(f64, f64) -> f64,
) -> Result<SaddleSystem> {
    let forms = Forms::assemble(primal, dual, weights, trace)?;
    SaddleSystem::from_forms(forms, data, None)
}

impl SaddleSystem {
    pub fn from_forms(forms: Forms, data: &dyn Fn(f64, f64) -> f64, noise: Option<&DVector<f64>>) -> Result<Self> {
        let layout = SaddleLayout {
            n_slabs: forms.primal.mesh.n_slabs(),
            primal: forms.primal.dofs_per_slab(),
            trace: forms.trace.as_ref().map_or(0, |t| t.dim()),
            dual: forms.dual.dofs_per_slab(),
        };
        if let Some(d) = noise {
            if d.len() != forms.primal.global_dof_count() {
                return Err(Error::Assembly(format!(
                    "noise vector has length {}, expected {}",
                    d.len(),
                    forms.primal.global_dof_count()
                )));
            }
        }
        let b = layout.block_size();
        let mut matrix = BlockTridiag::zeros(layout.n_slabs, b, b);
        matrix.add_at(&forms.primal_stab, 0, 0, 1.0);
        matrix.add_at(&forms.jump_stab, 0, 0, 1.0);
        matrix.add_at(&forms.data_mass, 0, 0, 1.0);
        let (mo, zo) = (layout.mu_offset(), layout.dual_offset());
        if let Some(tf) = &forms.trace_forms {
            matrix.add_at(&tf.sigma_mass, 0, 0, 1.0);
            matrix.add_at(&tf.coupling, mo, 0, -1.0);
            matrix.add_at(&tf.coupling.transpose(), 0, mo, -1.0);
            matrix.add_at(&tf.multiplier, mo, mo, 1.0);
        }
        matrix.add_at(&forms.a, zo, 0, 1.0);
        matrix.add_at(&forms.a.transpose(), 0, zo, 1.0);
        matrix.add_at(&forms.dual_stab, zo, zo, -1.0);

        let mut sys = Self {
            matrix,
            rhs: DVector::zeros(layout.len()),
            layout,
            forms,
        };
        sys.set_data(data, noise);
        Ok(sys)
    }

    /// Replaces the right-hand side by `(u_data + delta, w1)_{omega_T}`.
    pub fn set_data(&mut self, data: &dyn Fn(f64, f64) -> f64, noise: Option<&DVector<f64>>) {
        let pair_rhs = self.forms.data_rhs(data, noise);
        let np2 = 2 * self.layout.primal;
        let b = self.layout.block_size();
        self.rhs.fill(0.0);
        for s in 0..self.layout.n_slabs {
            self.rhs.rows_mut(s * b, np2).copy_from(&pair_rhs.rows(s * np2, np2));
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.mul_vec(x)
    }

    /// `B[x, y]` with `x` the trial and `y` the test vector.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.matrix.form(y, x)
    }

    /// Block-diagonal mass matrix: `L^2(Q)` on both pairs and `L^2(Sigma)` on the multiplier.
    pub fn mass(&self) -> BlockTridiag {
        let l = &self.layout;
        let b = l.block_size();
        let mut m = BlockTridiag::zeros(l.n_slabs, b, b);
        m.add_at(&super::assemble_pair_mass(&self.forms.primal), 0, 0, 1.0);
        m.add_at(&super::assemble_pair_mass(&self.forms.dual), l.dual_offset(), l.dual_offset(), 1.0);
        if let Some(tf) = &self.forms.trace_forms {
            m.add_at(&tf.multiplier_mass, l.mu_offset(), l.mu_offset(), 1.0);
        }
        m
    }

    /// Triple norm of a full saddle vector.
    pub fn triple_norm(&self, x: &DVector<f64>) -> f64 {
        let (u, mu, z) = self.layout.split(x);
        triple_norm(&self.forms, &u, Some(&mu), &z)
    }
}

/// `|||(U, Z)|||`, including `||u1 - mu||_Sigma` and the multiplier jumps when a trace
/// space is present.
pub fn triple_norm(forms: &Forms, u: &FieldPair, mu: Option<&DVector<f64>>, z: &FieldPair) -> f64 {
    let uv = SaddleLayout::interleave(forms.primal.dofs_per_slab(), u);
    let zv = SaddleLayout::interleave(forms.dual.dofs_per_slab(), z);
    let mut sq = forms.primal_stab.form(&uv, &uv)
        + forms.jump_stab.form(&uv, &uv)
        + forms.data_mass.form(&uv, &uv)
        + forms.dual_stab.form(&zv, &zv);
    if let (Some(tf), Some(mu)) = (&forms.trace_forms, mu) {
        let cu = tf.coupling.mul_vec(&uv);
        sq += tf.sigma_mass.form(&uv, &uv) - 2.0 * mu.dot(&cu) + tf.multiplier.form(mu, mu);
    }
    sq.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{derive_params, GeometryConfig};
    use crate::mesh::build_mesh;
    use crate::spaces::{build_trace_space, TraceFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(trace: bool) -> SaddleSystem {
        let cfg = if trace {
            GeometryConfig::trace_default()
        } else {
            GeometryConfig::default()
        };
        let p = derive_params(&cfg).unwrap();
        let n_t = if trace { 8 } else { 4 };
        let mesh = build_mesh(&cfg, &p, 8, n_t).unwrap();
        let s = SlabSpace::new(&mesh, 1, 1).unwrap();
        let ts = trace.then(|| build_trace_space(&cfg, &p, 2, TraceFamily::FourierModes).unwrap());
        assemble_saddle(&s, &s, &StabilizationWeights::default(), ts.as_ref(), &|t, x| t * x).unwrap()
    }

    #[test]
    fn split_join_roundtrip() {
        let sys = system(true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DVector::from_fn(sys.layout.len(), |_, _| rng.gen_range(-1.0..1.0));
        let (u, mu, z) = sys.layout.split(&x);
        assert_eq!(sys.layout.join(&u, &mu, &z), x);
    }

    #[test]
    fn symmetric_and_norm_identity() {
        for trace in [false, true] {
            let sys = system(trace);
            let d = sys.matrix.to_dense();
            assert!((&d - d.transpose()).norm() <= 1e-12 * d.norm());
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            for _ in 0..20 {
                let x = DVector::from_fn(sys.layout.len(), |_, _| rng.gen_range(-1.0..1.0));
                let (u, mu, z) = sys.layout.split(&x);
                let neg = FieldPair {
                    u1: -&z.u1,
                    u2: -&z.u2,
                };
                let y = sys.layout.join(&u, &mu, &neg);
                let lhs = sys.bilinear(&x, &y);
                let n = sys.triple_norm(&x);
                assert!((lhs - n * n).abs() <= 1e-10 * n * n, "{lhs} vs {}", n * n);
            }
        }
    }

    #[test]
    fn rhs_lives_on_u1_only() {
        let sys = system(false);
        let (u, _, z) = sys.layout.split(&sys.rhs);
        assert!(u.u1.norm() > 0.0);
        assert_eq!(u.u2.norm(), 0.0);
        assert_eq!(z.u1.norm() + z.u2.norm(), 0.0);
    }
}
