use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::ExperimentConfig;
use crate::geometry::{CheckReport, WeightParams};
use crate::spaces::A1Check;

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub n_x: usize,
    pub n_slabs: usize,
    pub h: f64,
    pub dofs: usize,
    /// Errors of the lifted field `L_h u1`, keyed by region label.
    pub errors: BTreeMap<String, f64>,
    /// Errors of the raw field `u1`.
    pub errors_raw: BTreeMap<String, f64>,
    /// `||u1 - u_data||_{omega_T}` against the (possibly perturbed) data.
    pub data_misfit: f64,
    /// `||u_data||_{omega_T}`
    pub data_norm: f64,
    pub noise_norm: f64,
    pub max_condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub level: usize,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub shift: f64,
}

/// Squared `L^2` mass of the worst mode's `u1` on the data set, `B` and `Q \ B`.
#[derive(Debug, Clone, Serialize)]
pub struct ModeMass {
    pub level: usize,
    pub omega_t: f64,
    pub b: f64,
    pub q_minus_b: f64,
    pub ratio_omega_to_complement: f64,
    /// Cosine between worst-mode and smooth noise shapes in `L^2(omega_T)`.
    pub correlation_with_smooth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CmRow {
    pub m: usize,
    pub h: f64,
    pub h3_norm: f64,
    pub error_full: f64,
    pub error_opt: f64,
    pub c_m: f64,
    pub c_m_opt: f64,
    pub a1_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub label: String,
    pub levels: Vec<LevelResult>,
    /// Rates between consecutive levels of the lifted-field errors.
    pub eoc: BTreeMap<String, Vec<Option<f64>>>,
    pub eoc_raw: BTreeMap<String, Vec<Option<f64>>>,
    /// Least-squares slope of `log e` against `log h` over the finest three levels.
    pub slope: BTreeMap<String, Option<f64>>,
    /// Fitted Hölder exponent `slope_B / s` in the noise-dominated regime.
    pub alpha_hat: Option<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, levels: Vec<LevelResult>, s: usize) -> Self {
        let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let keys: Vec<String> = levels.first().map(|l| l.errors.keys().cloned().collect()).unwrap_or_default();
        let column = |key: &str, raw: bool| -> Vec<f64> {
            levels
                .iter()
                .map(|l| if raw { l.errors_raw[key] } else { l.errors[key] })
                .collect()
        };
        let mut eoc_map = BTreeMap::new();
        let mut eoc_raw = BTreeMap::new();
        let mut slope = BTreeMap::new();
        for k in &keys {
            eoc_map.insert(k.clone(), eoc(&column(k, false), &hs));
            eoc_raw.insert(k.clone(), eoc(&column(k, true), &hs));
            slope.insert(k.clone(), fit_slope(&column(k, false), &hs, 3));
        }
        let alpha_hat = slope.get("B").copied().flatten().map(|v| v / s as f64);
        Self {
            label: label.into(),
            levels,
            eoc: eoc_map,
            eoc_raw,
            slope,
            alpha_hat,
        }
    }

    pub fn errors(&self, key: &str) -> Vec<f64> {
        self.levels.iter().map(|l| l.errors[key]).collect()
    }

    pub fn errors_raw(&self, key: &str) -> Vec<f64> {
        self.levels.iter().map(|l| l.errors_raw[key]).collect()
    }

    /// Rate on the finest pair of levels.
    pub fn final_eoc(&self, key: &str) -> Option<f64> {
        self.eoc.get(key).and_then(|v| v.last().copied().flatten())
    }

    pub fn final_eoc_raw(&self, key: &str) -> Option<f64> {
        self.eoc_raw.get(key).and_then(|v| v.last().copied().flatten())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub solution: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<WeightParams>,
    pub series: Vec<Series>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eigen: Vec<EigenSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mode_mass: Vec<ModeMass>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cm_table: Vec<CmRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<A1Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry_check: Option<CheckReport>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, solution: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.into(),
            solution: solution.into(),
            config: config.clone(),
            params: None,
            series: Vec::new(),
            eigen: Vec::new(),
            mode_mass: Vec::new(),
            cm_table: Vec::new(),
            a1: None,
            geometry_check: None,
        }
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat table: one row per level of every series, or the constant table, or the
    /// geometry check.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(chk) = &self.geometry_check {
            out.push_str("quantity,value\n");
            if let Some(p) = &self.params {
                for (k, v) in [
                    ("rho0", p.rho0),
                    ("rho1", p.rho1),
                    ("rho", p.rho),
                    ("delta", p.delta),
                    ("T", p.t_final),
                ] {
                    let _ = writeln!(out, "{k},{v:e}");
                }
            }
            let _ = writeln!(out, "passed,{}", chk.passed);
            let _ = writeln!(out, "samples,{}", chk.samples);
            let _ = writeln!(out, "worst_margin,{:e}", chk.worst_margin);
            return out;
        }
        if !self.cm_table.is_empty() {
            out.push_str("M,h,h3_norm,error_full,error_opt,C_M,C_M_opt,a1_margin\n");
            for r in &self.cm_table {
                let _ = writeln!(
                    out,
                    "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    r.m, r.h, r.h3_norm, r.error_full, r.error_opt, r.c_m, r.c_m_opt, r.a1_margin
                );
            }
            return out;
        }
        let keys = self.error_columns();
        out.push_str("series,level,h");
        for k in &keys {
            let _ = write!(out, ",err_{k}");
        }
        for k in &keys {
            let _ = write!(out, ",eoc_{k}");
        }
        out.push('\n');
        for s in &self.series {
            for (i, l) in s.levels.iter().enumerate() {
                let _ = write!(out, "{},{},{:e}", s.label, l.level, l.h);
                for k in &keys {
                    let v = if k == "omega" { l.errors_raw.get("omega_T") } else { l.errors.get(k) };
                    let _ = write!(out, ",{}", v.map(|v| format!("{v:e}")).unwrap_or_default());
                }
                for k in &keys {
                    let key = if k == "omega" { "omega_T" } else { k.as_str() };
                    let rates = if k == "omega" { s.eoc_raw.get(key) } else { s.eoc.get(key) };
                    let rate = if i == 0 {
                        None
                    } else {
                        rates.and_then(|r| r.get(i - 1).copied().flatten())
                    };
                    let _ = write!(out, ",{}", rate.map(|v| format!("{v:.6}")).unwrap_or_default());
                }
                out.push('\n');
            }
        }
        out
    }

    /// Column order `omega, B, B_kappa..., QminusB, Q`.
    fn error_columns(&self) -> Vec<String> {
        let mut keys = vec!["omega".to_string(), "B".to_string()];
        if let Some(l) = self.series.first().and_then(|s| s.levels.first()) {
            keys.extend(l.errors.keys().filter(|k| k.starts_with("B_")).cloned());
        }
        keys.push("QminusB".into());
        keys.push("Q".into());
        keys
    }
}

/// `rate_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1})`; `None` where undefined.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| {
            if e[0] > 0.0 && e[1] > 0.0 && h[0] > h[1] && h[1] > 0.0 {
                Some((e[0] / e[1]).ln() / (h[0] / h[1]).ln())
            } else {
                None
            }
        })
        .collect()
}

/// Least-squares slope of `log e` against `log h` over the last `count` entries.
pub fn fit_slope(errors: &[f64], hs: &[f64], count: usize) -> Option<f64> {
    let n = errors.len().min(hs.len());
    if n < 2 || count < 2 {
        return None;
    }
    let start = n.saturating_sub(count);
    let pts: Vec<(f64, f64)> = (start..n)
        .filter(|&i| errors[i] > 0.0 && hs[i] > 0.0)
        .map(|i| (hs[i].ln(), errors[i].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
