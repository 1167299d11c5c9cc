//! Closed-form wave solutions and data perturbations.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::Forms;
use crate::spaces::{phi, SlabSpace, TraceFamily};

/// `u = sum_i c_i phi_{m_i}` with `phi_m = cos(m pi t / 4) cos(m pi x / 4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedSolution {
    pub id: String,
    /// `(coefficient, mode)` pairs.
    pub terms: Vec<(f64, usize)>,
}

impl ManufacturedSolution {
    /// `5 cos(pi t / 2) cos(pi x / 2)`, i.e. `5 phi_2`.
    pub fn reference() -> Self {
        Self {
            id: "u = 5 cos(pi t/2) cos(pi x/2)".into(),
            terms: vec![(5.0, 2)],
        }
    }

    /// `5 phi_2 + eta phi_3`
    pub fn perturbed(eta: f64) -> Self {
        let mut terms = vec![(5.0, 2)];
        if eta != 0.0 {
            terms.push((eta, 3));
        }
        Self {
            id: format!("u = 5 phi_2 + {eta:e} phi_3"),
            terms,
        }
    }

    pub fn single_mode(m: usize) -> Self {
        Self {
            id: format!("u = phi_{m}"),
            terms: vec![(1.0, m)],
        }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, m)| c * phi(TraceFamily::FourierModes, m, 0.0, t, x))
            .sum()
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, m)| {
                let w = m as f64 * PI / 4.0;
                -c * w * (w * t).sin() * (w * x).cos()
            })
            .sum()
    }

    /// `d_tt u - d_xx u` evaluated from the closed-form second derivatives.
    pub fn wave_residual(&self, t: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, m)| {
                let w = m as f64 * PI / 4.0;
                let tt = -w * w * (w * t).cos() * (w * x).cos();
                let xx = -w * w * (w * t).cos() * (w * x).cos();
                c * (tt - xx)
            })
            .sum()
    }

    /// Exact `H^3` norm over `(t0, t1) x (-R, 0)`, all mixed derivatives of order <= 3.
    pub fn h3_norm(&self, t0: f64, t1: f64, big_r: f64) -> Result<f64> {
        if self.terms.len() != 1 {
            return Err(Error::Usage("closed-form H3 norm is implemented for single modes".into()));
        }
        let (c, m) = self.terms[0];
        let w = m as f64 * PI / 4.0;
        // int cos^2(w s) and sin^2(w s) over an interval
        let cos2 = |a: f64, b: f64| (b - a) / 2.0 + ((2.0 * w * b).sin() - (2.0 * w * a).sin()) / (4.0 * w);
        let sin2 = |a: f64, b: f64| (b - a) - cos2(a, b);
        let mut sq = 0.0;
        for i in 0..=3 {
            for j in 0..=(3 - i) {
                let ft = if i % 2 == 0 { cos2(t0, t1) } else { sin2(t0, t1) };
                let fx = if j % 2 == 0 { cos2(-big_r, 0.0) } else { sin2(-big_r, 0.0) };
                sq += w.powi(2 * (i + j)) * ft * fx;
            }
        }
        Ok(c.abs() * sq.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    /// Interpolant of `u cos(2 pi x)`.
    Smooth,
    /// The `u1` component of the smallest eigenmode of the stabilized pencil.
    WorstMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub theta: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::None,
            theta: 1.0,
            seed: 0,
        }
    }
}

/// `||v||_{L^2(omega_T)}` for a scalar field in the primal space.
pub fn data_norm(forms: &Forms, v: &DVector<f64>) -> f64 {
    let n = forms.primal.dofs_per_slab();
    let mut sq = 0.0;
    for s in 0..forms.primal.mesh.n_slabs() {
        let vs = v.rows(s * n, n);
        sq += vs.dot(&(forms.data_mass.diag[s].view((0, 0), (n, n)) * vs));
    }
    sq.max(0.0).sqrt()
}

/// Noise vector in the primal space with `||delta u||_{L^2(omega_T)} = h^theta`.
///
/// `mode` supplies the worst-mode shape (its `u1` coefficients) when requested.
pub fn make_noise(
    spec: &NoiseSpec,
    forms: &Forms,
    u_exact: &ManufacturedSolution,
    mode: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let space: &SlabSpace = &forms.primal;
    let shape = match spec.kind {
        NoiseKind::None => return Ok(space.zero()),
        NoiseKind::Smooth => space.interpolate(|t, x| u_exact.value(t, x) * (2.0 * PI * x).cos()),
        NoiseKind::WorstMode => mode
            .cloned()
            .ok_or_else(|| Error::Usage("worst-mode noise needs an eigenmode".into()))?,
    };
    if shape.len() != space.global_dof_count() {
        return Err(Error::Usage("noise shape does not match the primal space".into()));
    }
    let norm = data_norm(forms, &shape);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numerical("noise shape vanishes on the data set".into()));
    }
    Ok(shape * (space.mesh.h().powf(spec.theta) / norm))
}
