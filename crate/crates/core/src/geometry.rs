//! Carleman-weight geometry in one space dimension.
//!
//! The spatial domain is `Omega = (-R, 0)`, the data set is `omega = (-R, -r)` and the
//! weight is `psi(t, x) = |x - beta|^2 - (1 - eps) t^2`. Super-level sets of `psi`
//! define the regions where conditional stability holds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack accepted when validating an explicit final time against its lower bound.
const T_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeInterval {
    /// `(-T, T)`
    #[default]
    Symmetric,
    /// `(0, T)`
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum TMode {
    Minimal,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub beta: f64,
    pub eps: f64,
    pub rho_fraction: f64,
    /// `delta = delta_fraction * rho` is the lower level of the pseudoconvex region.
    pub delta_fraction: f64,
    pub t_mode: TMode,
    pub time_interval: TimeInterval,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            r: 0.75,
            big_r: 1.0,
            beta: 0.5,
            eps: 0.05,
            rho_fraction: 0.1,
            delta_fraction: 0.1,
            t_mode: TMode::Minimal,
            time_interval: TimeInterval::Symmetric,
        }
    }
}

impl GeometryConfig {
    /// The finite-dimensional-trace setting: forward interval with `T = 2`.
    pub fn trace_default() -> Self {
        Self {
            t_mode: TMode::Explicit(2.0),
            time_interval: TimeInterval::Forward,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.r, self.big_r, self.beta, self.eps, self.rho_fraction, self.delta_fraction]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("geometry parameters must be finite".into()));
        }
        if !(0.0 < self.r && self.r < self.big_r) {
            return Err(Error::Config(format!(
                "need 0 < r < R, got r = {}, R = {}",
                self.r, self.big_r
            )));
        }
        if self.beta <= 0.0 {
            return Err(Error::Config(format!("need beta > 0, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(Error::Config(format!("need eps in [0, 1), got {}", self.eps)));
        }
        if !(0.0..1.0).contains(&self.rho_fraction) {
            return Err(Error::Config(format!(
                "need rho_fraction in [0, 1), got {}",
                self.rho_fraction
            )));
        }
        if !(self.delta_fraction > 0.0 && self.delta_fraction < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < delta < rho, i.e. delta_fraction in (0, 1), got {}",
                self.delta_fraction
            )));
        }
        if let TMode::Explicit(t) = self.t_mode {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("explicit T must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Derived weight parameters together with the copies of the geometric data
/// needed by the region predicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub rho0: f64,
    pub rho1: f64,
    pub rho: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Weight center `y = beta`.
    pub y: f64,
    pub eps: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub time_interval: TimeInterval,
}

impl WeightParams {
    pub fn t_start(&self) -> f64 {
        match self.time_interval {
            TimeInterval::Symmetric => -self.t_final,
            TimeInterval::Forward => 0.0,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_final
    }

    pub fn time_length(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    /// `|Q|`
    pub fn volume(&self) -> f64 {
        self.time_length() * self.big_r
    }

    /// Lower bound on the final time: `sqrt((rho1 - rho) / (1 - eps))`.
    pub fn minimal_t(&self) -> f64 {
        minimal_t(self.rho1, self.rho, self.eps)
    }
}

fn minimal_t(rho1: f64, rho: f64, eps: f64) -> f64 {
    ((rho1 - rho) / (1.0 - eps)).sqrt()
}

pub fn derive_params(cfg: &GeometryConfig) -> Result<WeightParams> {
    cfg.validate()?;
    let rho0 = cfg.r * cfg.r + cfg.beta * cfg.beta;
    let rho1 = (cfg.r + cfg.beta) * (cfg.r + cfg.beta);
    let rho = rho0 + cfg.rho_fraction * (rho1 - rho0);
    let t_min = minimal_t(rho1, rho, cfg.eps);
    let t_final = match cfg.t_mode {
        TMode::Minimal => t_min,
        TMode::Explicit(t) => {
            if t < t_min * (1.0 - T_SLACK) {
                return Err(Error::Config(format!(
                    "T = {t} violates T >= sqrt((rho1 - rho)/(1 - eps)) = {t_min:.6}"
                )));
            }
            t
        }
    };
    Ok(WeightParams {
        rho0,
        rho1,
        rho,
        delta: cfg.delta_fraction * rho,
        t_final,
        y: cfg.beta,
        eps: cfg.eps,
        r: cfg.r,
        big_r: cfg.big_r,
        time_interval: cfg.time_interval,
    })
}

#[inline]
pub fn psi(p: &WeightParams, t: f64, x: f64) -> f64 {
    let d = x - p.y;
    d * d - (1.0 - p.eps) * t * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum Region {
    Omega,
    /// `omega_T = I_T x (-R, -r)`
    DataSet,
    /// `{psi > s}`
    SubLevel(f64),
    B,
    BKappa(f64),
    ComplementOfB,
    GammaBoundarySet,
}

impl Region {
    pub fn label(&self) -> String {
        match self {
            Region::Omega => "Q".into(),
            Region::DataSet => "omega_T".into(),
            Region::SubLevel(s) => format!("sublevel_{s}"),
            Region::B => "B".into(),
            Region::BKappa(k) => format!("B_{k}"),
            Region::ComplementOfB => "QminusB".into(),
            Region::GammaBoundarySet => "Gamma".into(),
        }
    }
}

/// Pointwise membership for `(t, x)` in the closure of `Q`.
pub fn region_contains(p: &WeightParams, reg: Region, t: f64, x: f64) -> bool {
    match reg {
        Region::Omega => (-p.big_r..=0.0).contains(&x) && (p.t_start()..=p.t_end()).contains(&t),
        Region::DataSet => x >= -p.big_r && x < -p.r,
        Region::SubLevel(s) => psi(p, t, x) > s,
        Region::B => psi(p, t, x) > p.rho,
        Region::BKappa(kappa) => psi(p, t, x) > kappa * p.rho,
        Region::ComplementOfB => psi(p, t, x) <= p.rho,
        Region::GammaBoundarySet => {
            let on_boundary = x == -p.big_r || x == 0.0;
            on_boundary
                && p.time_interval == TimeInterval::Forward
                && gamma_test(p.r, p.big_r, p.t_final, t, x)
        }
    }
}

/// Abscissa of `partial B` at `t = 0`: `x = beta - sqrt(rho)`.
pub fn b_boundary_at_t0(p: &WeightParams) -> f64 {
    p.y - p.rho.sqrt()
}

fn gamma_test(r: f64, big_r: f64, t_final: f64, t: f64, x_b: f64) -> bool {
    let dist = if x_b == -big_r { 0.0 } else { r };
    dist <= t_final / 2.0 - (t - t_final / 2.0).abs()
}

/// Membership of a lateral boundary point in `Gamma`, the part of `Sigma` reached from
/// `omega` within the light cone: `dist(x, omega) <= T/2 - |t - T/2|`.
pub fn gamma_contains(cfg: &GeometryConfig, t_final: f64, t: f64, x_b: f64) -> Result<bool> {
    if cfg.time_interval != TimeInterval::Forward {
        return Err(Error::Usage(
            "Gamma is defined on the forward interval [0, T]".into(),
        ));
    }
    if x_b != -cfg.big_r && x_b != 0.0 {
        return Err(Error::Usage(format!(
            "x_b = {x_b} is not a boundary point of Omega = (-{}, 0)",
            cfg.big_r
        )));
    }
    Ok(gamma_test(cfg.r, cfg.big_r, t_final, t, x_b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub samples: usize,
    /// Largest `|Hess psi(X, X) - 2 a^2 eps|` relative to `2 a^2`.
    pub hessian_max_error: f64,
    /// Smallest `Hess psi(X, X) / a^2` over the sampled null vectors.
    pub hessian_min_form: f64,
    /// Smallest `|grad psi|^2 - |d_t psi|^2` over sampled points of `{psi > delta}`.
    pub worst_margin: f64,
    /// First sample violating a condition, as `(t, x)`.
    pub offending: Option<(f64, f64)>,
}

/// Hessian of `psi` in `(t, x)` coordinates.
fn hessian(p: &WeightParams) -> [[f64; 2]; 2] {
    [[-2.0 * (1.0 - p.eps), 0.0], [0.0, 2.0]]
}

/// `|grad_x psi|^2 - |d_t psi|^2`
pub fn gradient_margin(p: &WeightParams, t: f64, x: f64) -> f64 {
    let dx = 2.0 * (x - p.y);
    let dt = -2.0 * (1.0 - p.eps) * t;
    dx * dx - dt * dt
}

/// Randomized verification of the pseudoconvexity conditions on `{psi > delta}`.
pub fn check_pseudoconvexity(p: &WeightParams, sample_count: usize, rng_seed: u64) -> Result<CheckReport> {
    if sample_count == 0 {
        return Err(Error::Usage("sample_count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let hess = hessian(p);
    let mut report = CheckReport {
        passed: true,
        samples: sample_count,
        hessian_max_error: 0.0,
        hessian_min_form: f64::INFINITY,
        worst_margin: f64::INFINITY,
        offending: None,
    };
    let (t0, t1) = (p.t_start(), p.t_end());
    let max_attempts = 1000 * sample_count;
    let mut attempts = 0;
    let mut accepted = 0;
    while accepted < sample_count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Numerical(format!(
                "could not sample {sample_count} points of {{psi > delta}} in {max_attempts} draws"
            )));
        }
        let t = rng.gen_range(t0..=t1);
        let x = rng.gen_range(-p.big_r..=0.0);
        if psi(p, t, x) <= p.delta {
            continue;
        }
        accepted += 1;

        // null vector X = (a, theta) with |theta| = |a| != 0
        let a: f64 = loop {
            let v = rng.gen_range(-1.0..1.0);
            if v != 0.0 {
                break v;
            }
        };
        let theta = if rng.gen::<bool>() { a } else { -a };
        let x_vec = [a, theta];
        let form: f64 = (0..2)
            .map(|i| (0..2).map(|j| hess[i][j] * x_vec[i] * x_vec[j]).sum::<f64>())
            .sum();
        let expected = 2.0 * a * a * p.eps;
        let err = (form - expected).abs() / (2.0 * a * a);
        report.hessian_max_error = report.hessian_max_error.max(err);
        report.hessian_min_form = report.hessian_min_form.min(form / (a * a));

        let margin = gradient_margin(p, t, x);
        report.worst_margin = report.worst_margin.min(margin);

        let bad = err > 1e-14 || form <= 0.0 || margin <= 0.0;
        if bad && report.offending.is_none() {
            report.offending = Some((t, x));
            report.passed = false;
        }
    }
    Ok(report)
}
