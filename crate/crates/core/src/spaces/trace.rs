//! Finite-dimensional trace spaces on the lateral boundary `Sigma = I_T x {-R, 0}`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GeometryConfig, TimeInterval, WeightParams};
use crate::quadrature::GaussRule;

/// Subintervals and points per subinterval for the Gram quadratures on `Sigma`.
const GRAM_PIECES: usize = 32;
const GRAM_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TraceFamily {
    /// `cos(m pi t / 4) cos(m pi x / 4)`
    #[default]
    FourierModes,
    /// `cos(m pi t / 4) sin(m pi (x + R) / 4)`, vanishing at `x = -R`.
    AdversarialSine,
}

/// Span of wave solutions `phi_m`, `m` in `modes`, restricted to `Sigma`.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    pub family: TraceFamily,
    pub modes: Vec<usize>,
    pub big_r: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub gram_sigma: DMatrix<f64>,
    /// `None` on the symmetric interval, where `Gamma` is undefined.
    pub gram_gamma: Option<DMatrix<f64>>,
}

impl TraceSpace {
    pub fn with_modes(cfg: &GeometryConfig, p: &WeightParams, modes: Vec<usize>, family: TraceFamily) -> Self {
        let mut ts = Self {
            family,
            modes,
            big_r: p.big_r,
            t_start: p.t_start(),
            t_end: p.t_end(),
            gram_sigma: DMatrix::zeros(0, 0),
            gram_gamma: None,
        };
        let full = [(-p.big_r, p.t_start(), p.t_end()), (0.0, p.t_start(), p.t_end())];
        ts.gram_sigma = ts.gram(&full);
        if cfg.time_interval == TimeInterval::Forward {
            let pieces: Vec<(f64, f64, f64)> = gamma_intervals(cfg.r, p.big_r, p.t_final)
                .into_iter()
                .filter(|(_, a, b)| b > a)
                .collect();
            ts.gram_gamma = Some(ts.gram(&pieces));
        }
        ts
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Basis function `i` (not the mode number) at `(t, x)`.
    pub fn basis(&self, i: usize, t: f64, x: f64) -> f64 {
        phi(self.family, self.modes[i], self.big_r, t, x)
    }

    fn gram(&self, pieces: &[(f64, f64, f64)]) -> DMatrix<f64> {
        let m = self.dim();
        let rule = GaussRule::new(GRAM_POINTS);
        let mut g = DMatrix::zeros(m, m);
        for &(x, a, b) in pieces {
            let len = (b - a) / GRAM_PIECES as f64;
            for piece in 0..GRAM_PIECES {
                let lo = a + piece as f64 * len;
                for (t, w) in rule.mapped(lo, lo + len) {
                    let vals: Vec<f64> = (0..m).map(|i| self.basis(i, t, x)).collect();
                    for i in 0..m {
                        for j in 0..m {
                            g[(i, j)] += w * vals[i] * vals[j];
                        }
                    }
                }
            }
        }
        g
    }
}

/// Pieces `(x_b, t_lo, t_hi)` of `Gamma`: `dist(x_b, omega) <= T/2 - |t - T/2|`
/// holds exactly for `t` in `[dist, T - dist]`.
pub fn gamma_intervals(r: f64, big_r: f64, t_final: f64) -> Vec<(f64, f64, f64)> {
    [(-big_r, 0.0), (0.0, r)]
        .into_iter()
        .filter(|&(_, d)| t_final - d >= d)
        .map(|(x, d)| (x, d, t_final - d))
        .collect()
}

pub fn phi(family: TraceFamily, m: usize, big_r: f64, t: f64, x: f64) -> f64 {
    let w = m as f64 * PI / 4.0;
    match family {
        TraceFamily::FourierModes => (w * t).cos() * (w * x).cos(),
        TraceFamily::AdversarialSine => (w * t).cos() * (w * (x + big_r)).sin(),
    }
}

/// `(d_tt phi, d_xx phi)` in closed form.
pub fn phi_second_derivatives(family: TraceFamily, m: usize, big_r: f64, t: f64, x: f64) -> (f64, f64) {
    let w = m as f64 * PI / 4.0;
    let v = phi(family, m, big_r, t, x);
    (-w * w * v, -w * w * v)
}

pub fn build_trace_space(cfg: &GeometryConfig, p: &WeightParams, m: usize, family: TraceFamily) -> Result<TraceSpace> {
    if m < 1 {
        return Err(Error::Config("trace space dimension M must be at least 1".into()));
    }
    Ok(TraceSpace::with_modes(cfg, p, (1..=m).collect(), family))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A1Check {
    pub holds: bool,
    /// Smallest generalized eigenvalue of `(G_Gamma, G_Sigma)`, i.e. the minimum over the
    /// space of `||phi||^2_Gamma / ||phi||^2_Sigma`; lies in `[0, 1]`.
    pub margin: f64,
}

/// Injectivity of the restriction to `Gamma`, decided by positive definiteness of
/// the `Gamma` Gram matrix relative to the `Sigma` one.
pub fn check_a1(ts: &TraceSpace, tol: f64) -> Result<A1Check> {
    let gamma = ts
        .gram_gamma
        .as_ref()
        .ok_or_else(|| Error::Usage("injectivity on Gamma requires the forward time interval".into()))?;
    if ts.dim() == 0 {
        return Ok(A1Check {
            holds: true,
            margin: f64::INFINITY,
        });
    }
    let chol = Cholesky::new(ts.gram_sigma.clone())
        .ok_or_else(|| Error::Numerical("Sigma Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor of the Sigma Gram matrix".into()))?;
    let pencil = &l_inv * gamma * l_inv.transpose();
    let pencil = 0.5 * (&pencil + pencil.transpose());
    let margin = SymmetricEigen::new(pencil).eigenvalues.min();
    Ok(A1Check {
        holds: margin > tol,
        margin,
    })
}
