//! Convergence drivers, noise studies, trace-space experiments and their reports.

mod norms;
mod report;
mod runs;
mod solution;

pub use norms::{error_norm, region_norms};
pub use report::{eoc, fit_slope, CmRow, EigenSummary, ExperimentReport, LevelResult, ModeMass, Series};
pub use runs::{
    check_geometry, run_cm_study, run_convergence, run_noise_study, run_region_sweep, run_trace_experiment,
    run_worst_mode_study, solve_level, LevelSolution,
};
pub use solution::{data_norm, make_noise, ManufacturedSolution, NoiseKind, NoiseSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::StabilizationWeights;
use crate::geometry::GeometryConfig;
use crate::solver::SolverConfig;
use crate::spaces::TraceFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Spatial cells on the coarsest level.
    pub n_x: usize,
    /// Time slabs on the coarsest level; `n_x` when absent.
    #[serde(rename = "N")]
    pub n_t: Option<usize>,
    pub levels: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            n_x: 8,
            n_t: None,
            levels: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub use_trace_space: bool,
    /// Dimension `M` of the trace space.
    pub m: usize,
    pub family: TraceFamily,
    /// Amplitude of the `phi_3` perturbation of the exact solution.
    pub eta: f64,
    pub a1_tol: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            use_trace_space: false,
            m: 2,
            family: TraceFamily::FourierModes,
            eta: 0.0,
            a1_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub mesh: MeshConfig,
    pub k: usize,
    pub q: usize,
    pub weights: StabilizationWeights,
    pub solver: SolverConfig,
    pub noise: NoiseSpec,
    /// Noise exponents for the noise study.
    pub thetas: Vec<f64>,
    pub kappas: Vec<f64>,
    /// Subcells per direction in the region quadrature.
    pub n_sub: usize,
    pub trace: TraceConfig,
    /// Mode numbers for the trace-constant study.
    pub cm_modes: Vec<usize>,
    /// Samples for the pseudoconvexity check.
    pub samples: usize,
    pub seed: u64,
    /// Solve refinement levels concurrently.
    pub parallel_levels: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            mesh: MeshConfig::default(),
            k: 1,
            q: 1,
            weights: StabilizationWeights::default(),
            solver: SolverConfig::default(),
            noise: NoiseSpec::default(),
            thetas: vec![1.0, 1.5, 2.0],
            kappas: vec![1.0, 0.75, 0.5, 0.25],
            n_sub: 4,
            trace: TraceConfig::default(),
            cm_modes: (2..=6).collect(),
            samples: 10_000,
            seed: 1,
            parallel_levels: true,
        }
    }
}

impl ExperimentConfig {
    /// Defaults of the finite-dimensional trace setting: forward interval, `T = 2`,
    /// `k = q = 2`, `gamma = 0`, `h_t = h_x`.
    pub fn trace_default() -> Self {
        Self {
            geometry: GeometryConfig::trace_default(),
            mesh: MeshConfig {
                n_x: 4,
                n_t: Some(8),
                levels: 4,
            },
            k: 2,
            q: 2,
            weights: StabilizationWeights {
                gamma: 0.0,
                ..Default::default()
            },
            trace: TraceConfig {
                use_trace_space: true,
                ..Default::default()
            },
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_over(text, &Self::default())
    }

    /// Parses `text` with every omitted key taken from `base`.
    pub fn from_json_over(text: &str, base: &Self) -> Result<Self> {
        let invalid = |e: serde_json::Error| Error::Config(format!("invalid config: {e}"));
        let patch: serde_json::Value = serde_json::from_str(text).map_err(invalid)?;
        let mut merged = serde_json::to_value(base).map_err(invalid)?;
        merge_json(&mut merged, patch);
        let cfg: Self = serde_json::from_value(merged).map_err(invalid)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.mesh.levels == 0 {
            return Err(Error::Config("need at least one refinement level".into()));
        }
        if !(1..=7).contains(&self.k) || self.q > 6 {
            return Err(Error::Config(format!("unsupported degrees k = {}, q = {}", self.k, self.q)));
        }
        if let Some(&k) = self.kappas.iter().find(|&&k| !(k > 0.0 && k <= 1.0)) {
            return Err(Error::Config(format!("kappa must lie in (0, 1], got {k}")));
        }
        for &th in self.thetas.iter().chain(std::iter::once(&self.noise.theta)) {
            if !(1.0..=2.0).contains(&th) {
                return Err(Error::Config(format!("theta must lie in [1, 2], got {th}")));
            }
        }
        if self.n_sub == 0 {
            return Err(Error::Config("n_sub must be positive".into()));
        }
        if self.trace.use_trace_space && self.trace.m == 0 {
            return Err(Error::Config("trace space dimension M must be at least 1".into()));
        }
        if self.cm_modes.contains(&0) {
            return Err(Error::Config("trace modes start at 1".into()));
        }
        if !(self.trace.eta.is_finite()) {
            return Err(Error::Config("eta must be finite".into()));
        }
        Ok(())
    }

    /// `(n_x, N)` on refinement level `level`.
    pub fn level_size(&self, level: usize) -> (usize, usize) {
        let n_t = self.mesh.n_t.unwrap_or(self.mesh.n_x);
        (self.mesh.n_x << level, n_t << level)
    }

    /// `s = min(k, q)`
    pub fn s(&self) -> usize {
        self.k.min(self.q)
    }
}

/// Recursive object merge; tagged enum values (objects with a `mode` key) are replaced whole.
fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    let tagged = |v: &serde_json::Value| v.get("mode").is_some();
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && !tagged(&v) => merge_json(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
