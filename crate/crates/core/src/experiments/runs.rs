use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;

use super::report::{CmRow, EigenSummary, ExperimentReport, LevelResult, ModeMass, Series};
use super::solution::{data_norm, make_noise, ManufacturedSolution, NoiseKind, NoiseSpec};
use super::{region_norms, ExperimentConfig};
use crate::error::{Error, Result};
use crate::forms::{Forms, SaddleSystem, StabilizationWeights};
use crate::geometry::{check_pseudoconvexity, derive_params, Region, TimeInterval, WeightParams};
use crate::mesh::build_mesh;
use crate::solver::{smallest_eigenpair_of, solve_streaming, EigenResult};
use crate::spaces::{check_a1, lift, DiscreteField, FieldPair, SlabSpace, TraceSpace};

/// A solved refinement level.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub system: SaddleSystem,
    pub u: FieldPair,
    pub mu: DVector<f64>,
    pub z: FieldPair,
    pub noise: DVector<f64>,
    pub max_condition: f64,
}

fn assemble_level(
    cfg: &ExperimentConfig,
    p: &WeightParams,
    level: usize,
    weights: &StabilizationWeights,
    trace: Option<&TraceSpace>,
) -> Result<Forms> {
    let (n_x, n_t) = cfg.level_size(level);
    let mesh = build_mesh(&cfg.geometry, p, n_x, n_t)?;
    let space = SlabSpace::new(&mesh, cfg.k, cfg.q)?;
    Forms::assemble(&space, &space, weights, trace)
}

/// Assembles and solves one level with the given data perturbation.
pub fn solve_level(forms: Forms, exact: &ManufacturedSolution, noise: DVector<f64>, refine_steps: usize) -> Result<LevelSolution> {
    let data = |t: f64, x: f64| exact.value(t, x);
    let system = SaddleSystem::from_forms(forms, &data, Some(&noise))?;
    let sol = solve_streaming(&system.matrix, &system.rhs, refine_steps)?;
    let (u, mu, z) = system.layout.split(&sol.x);
    Ok(LevelSolution {
        max_condition: sol.max_condition(),
        system,
        u,
        mu,
        z,
        noise,
    })
}

fn regions(cfg: &ExperimentConfig) -> Vec<Region> {
    let mut r = vec![Region::DataSet, Region::B];
    r.extend(cfg.kappas.iter().map(|&k| Region::BKappa(k)));
    r.push(Region::ComplementOfB);
    r.push(Region::Omega);
    r
}

fn measure(cfg: &ExperimentConfig, level: usize, sol: &LevelSolution, exact: &ManufacturedSolution) -> LevelResult {
    let space = &sol.system.forms.primal;
    let mesh = &space.mesh;
    let regs = regions(cfg);
    let f = |t: f64, x: f64| exact.value(t, x);
    let lifted = lift(space, &sol.u.u1);
    let raw = DiscreteField {
        space,
        coeffs: &sol.u.u1,
    };
    let e_lift = region_norms(mesh, &f, &lifted, &regs, cfg.n_sub);
    let e_raw = region_norms(mesh, &f, &raw, &regs, cfg.n_sub);
    let labels: Vec<String> = regs.iter().map(|r| r.label()).collect();
    let errors: BTreeMap<String, f64> = labels.iter().cloned().zip(e_lift).collect();
    let errors_raw: BTreeMap<String, f64> = labels.into_iter().zip(e_raw).collect();

    let shifted = &sol.u.u1 - &sol.noise;
    let misfit = region_norms(
        mesh,
        &f,
        &DiscreteField {
            space,
            coeffs: &shifted,
        },
        &[Region::DataSet],
        cfg.n_sub,
    )[0];
    let neg_noise = -&sol.noise;
    let data = region_norms(
        mesh,
        &f,
        &DiscreteField {
            space,
            coeffs: &neg_noise,
        },
        &[Region::DataSet],
        cfg.n_sub,
    )[0];
    LevelResult {
        level,
        n_x: mesh.n_cells(),
        n_slabs: mesh.n_slabs(),
        h: mesh.h(),
        dofs: sol.system.layout.len(),
        errors,
        errors_raw,
        data_misfit: misfit,
        data_norm: data,
        noise_norm: data_norm(&sol.system.forms, &sol.noise),
        max_condition: sol.max_condition,
    }
}

struct LevelOutcome {
    result: LevelResult,
    eigen: Option<EigenSummary>,
    mass: Option<ModeMass>,
}

fn run_level(
    cfg: &ExperimentConfig,
    p: &WeightParams,
    level: usize,
    weights: &StabilizationWeights,
    trace: Option<&TraceSpace>,
    exact: &ManufacturedSolution,
    noise: &NoiseSpec,
) -> Result<LevelOutcome> {
    let forms = assemble_level(cfg, p, level, weights, trace)?;
    let (mut eigen, mut mass, mut mode_u1) = (None, None, None);
    if noise.kind == NoiseKind::WorstMode {
        let zero = |_: f64, _: f64| 0.0;
        let sys = SaddleSystem::from_forms(forms.clone(), &zero, None)?;
        let er: EigenResult = smallest_eigenpair_of(&sys, &cfg.solver)?;
        let (u, _, _) = sys.layout.split(&er.mode);
        mass = Some(mode_mass(cfg, level, &forms, exact, &u.u1));
        eigen = Some(EigenSummary {
            level,
            lambda: er.lambda,
            residual: er.residual,
            iterations: er.iterations,
            shift: er.shift,
        });
        mode_u1 = Some(u.u1);
    }
    let delta = make_noise(noise, &forms, exact, mode_u1.as_ref())?;
    let sol = solve_level(forms, exact, delta, cfg.solver.refine_steps)?;
    Ok(LevelOutcome {
        result: measure(cfg, level, &sol, exact),
        eigen,
        mass,
    })
}

fn mode_mass(
    cfg: &ExperimentConfig,
    level: usize,
    forms: &Forms,
    exact: &ManufacturedSolution,
    u1: &DVector<f64>,
) -> ModeMass {
    let space = &forms.primal;
    let zero = |_: f64, _: f64| 0.0;
    let field = DiscreteField { space, coeffs: u1 };
    let n = region_norms(
        &space.mesh,
        &zero,
        &field,
        &[Region::DataSet, Region::B, Region::ComplementOfB],
        cfg.n_sub,
    );
    let smooth = make_noise(
        &NoiseSpec {
            kind: NoiseKind::Smooth,
            theta: 1.0,
            seed: 0,
        },
        forms,
        exact,
        None,
    )
    .unwrap_or_else(|_| space.zero());
    let nrm = data_norm(forms, u1) * data_norm(forms, &smooth);
    let ns = forms.primal.dofs_per_slab();
    let mut inner = 0.0;
    for s in 0..space.mesh.n_slabs() {
        let a = u1.rows(s * ns, ns);
        let b = smooth.rows(s * ns, ns);
        inner += a.dot(&(forms.data_mass.diag[s].view((0, 0), (ns, ns)) * b));
    }
    let (w, b, c) = (n[0] * n[0], n[1] * n[1], n[2] * n[2]);
    ModeMass {
        level,
        omega_t: w,
        b,
        q_minus_b: c,
        ratio_omega_to_complement: if c > 0.0 { w / c } else { f64::INFINITY },
        correlation_with_smooth: if nrm > 0.0 { inner.abs() / nrm } else { 0.0 },
    }
}

fn run_levels(
    cfg: &ExperimentConfig,
    weights: &StabilizationWeights,
    trace: Option<&TraceSpace>,
    exact: &ManufacturedSolution,
    noise: &NoiseSpec,
) -> Result<Vec<LevelOutcome>> {
    let p = derive_params(&cfg.geometry)?;
    let work = |level: usize| run_level(cfg, &p, level, weights, trace, exact, noise);
    if cfg.parallel_levels {
        (0..cfg.mesh.levels).into_par_iter().map(work).collect()
    } else {
        (0..cfg.mesh.levels).map(work).collect()
    }
}

fn noise_label(noise: &NoiseSpec) -> String {
    match noise.kind {
        NoiseKind::None => "clean".into(),
        NoiseKind::Smooth => format!("smooth_theta_{}", noise.theta),
        NoiseKind::WorstMode => format!("worst_mode_theta_{}", noise.theta),
    }
}

fn convergence_series(
    cfg: &ExperimentConfig,
    weights: &StabilizationWeights,
    trace: Option<&TraceSpace>,
    exact: &ManufacturedSolution,
    noise: &NoiseSpec,
    label: String,
    report: &mut ExperimentReport,
) -> Result<()> {
    let outcomes = run_levels(cfg, weights, trace, exact, noise)?;
    let mut levels = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        levels.push(o.result);
        report.eigen.extend(o.eigen);
        report.mode_mass.extend(o.mass);
    }
    report.series.push(Series::new(label, levels, cfg.s()));
    Ok(())
}

fn primal_trace(cfg: &ExperimentConfig, p: &WeightParams) -> Result<Option<TraceSpace>> {
    if !cfg.trace.use_trace_space {
        return Ok(None);
    }
    let ts = crate::spaces::build_trace_space(&cfg.geometry, p, cfg.trace.m, cfg.trace.family)?;
    Ok(Some(ts))
}

/// Convergence under uniform refinement for the configured noise model.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let p = derive_params(&cfg.geometry)?;
    let exact = if cfg.trace.use_trace_space {
        ManufacturedSolution::perturbed(cfg.trace.eta)
    } else {
        ManufacturedSolution::reference()
    };
    let trace = primal_trace(cfg, &p)?;
    let mut report = ExperimentReport::new("convergence", &exact.id, cfg);
    report.params = Some(p);
    convergence_series(cfg, &cfg.weights, trace.as_ref(), &exact, &cfg.noise, noise_label(&cfg.noise), &mut report)?;
    Ok(report)
}

/// Convergence with errors on every `B_kappa` of the configured list.
pub fn run_region_sweep(cfg: &ExperimentConfig, kappas: &[f64]) -> Result<ExperimentReport> {
    let cfg = ExperimentConfig {
        kappas: kappas.to_vec(),
        ..cfg.clone()
    };
    let mut report = run_convergence(&cfg)?;
    report.experiment = "region-sweep".into();
    Ok(report)
}

/// One series per noise exponent in `cfg.thetas` (smooth noise unless configured otherwise).
pub fn run_noise_study(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let p = derive_params(&cfg.geometry)?;
    let exact = ManufacturedSolution::reference();
    let mut report = ExperimentReport::new("noise", &exact.id, cfg);
    report.params = Some(p);
    let kind = if cfg.noise.kind == NoiseKind::None {
        NoiseKind::Smooth
    } else {
        cfg.noise.kind
    };
    for &theta in &cfg.thetas {
        let noise = NoiseSpec {
            kind,
            theta,
            seed: cfg.noise.seed,
        };
        convergence_series(cfg, &cfg.weights, None, &exact, &noise, noise_label(&noise), &mut report)?;
    }
    Ok(report)
}

/// Worst-case eigenmode noise against smooth noise at the configured `theta`.
pub fn run_worst_mode_study(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.weights.gamma <= 0.0 && !cfg.trace.use_trace_space {
        return Err(Error::Config("worst-mode study needs gamma > 0 or a trace space".into()));
    }
    let p = derive_params(&cfg.geometry)?;
    let exact = ManufacturedSolution::reference();
    let mut report = ExperimentReport::new("worst-mode", &exact.id, cfg);
    report.params = Some(p);
    let theta = cfg.noise.theta;
    for kind in [NoiseKind::WorstMode, NoiseKind::Smooth] {
        let noise = NoiseSpec {
            kind,
            theta,
            seed: cfg.noise.seed,
        };
        convergence_series(cfg, &cfg.weights, None, &exact, &noise, noise_label(&noise), &mut report)?;
    }
    Ok(report)
}

fn require_forward(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.geometry.time_interval != TimeInterval::Forward {
        return Err(Error::Config(
            "trace experiments run on the forward time interval [0, T]".into(),
        ));
    }
    Ok(())
}

fn checked_trace(cfg: &ExperimentConfig, p: &WeightParams, modes: Vec<usize>) -> Result<(TraceSpace, f64)> {
    let ts = TraceSpace::with_modes(&cfg.geometry, p, modes, cfg.trace.family);
    let chk = check_a1(&ts, cfg.trace.a1_tol)?;
    if !chk.holds {
        return Err(Error::TraceInjectivity {
            margin: chk.margin,
            tol: cfg.trace.a1_tol,
        });
    }
    Ok((ts, chk.margin))
}

/// Recovery of `5 phi_2 + eta phi_3` with the trace space `span{phi_1..phi_M}` and `gamma = 0`.
pub fn run_trace_experiment(cfg: &ExperimentConfig, m: usize, eta: f64) -> Result<ExperimentReport> {
    cfg.validate()?;
    require_forward(cfg)?;
    if m == 0 {
        return Err(Error::Config("trace space dimension M must be at least 1".into()));
    }
    let p = derive_params(&cfg.geometry)?;
    let (ts, _) = checked_trace(cfg, &p, (1..=m).collect())?;
    let exact = ManufacturedSolution::perturbed(eta);
    let weights = StabilizationWeights {
        gamma: 0.0,
        ..cfg.weights
    };
    let mut report = ExperimentReport::new("trace", &exact.id, cfg);
    report.params = Some(p);
    report.a1 = Some(check_a1(&ts, cfg.trace.a1_tol)?);
    let noise = NoiseSpec::default();
    convergence_series(cfg, &weights, Some(&ts), &exact, &noise, format!("M={m}"), &mut report)?;
    Ok(report)
}

/// `C_M = ||u_M - L_h u1||_Q / (h^{s+1} ||u_M||_{H^3(Q)})` with `u_M = phi_M`, for the full
/// space `span{phi_1..phi_M}` and the minimal space `span{phi_M}`, on the finest level.
pub fn run_cm_study(cfg: &ExperimentConfig, modes: &[usize]) -> Result<ExperimentReport> {
    cfg.validate()?;
    require_forward(cfg)?;
    let p = derive_params(&cfg.geometry)?;
    let level = cfg.mesh.levels - 1;
    let weights = StabilizationWeights {
        gamma: 0.0,
        ..cfg.weights
    };
    let mut report = ExperimentReport::new("cm-study", "u = phi_M", cfg);
    report.params = Some(p);
    let rows: Result<Vec<CmRow>> = modes
        .par_iter()
        .map(|&m| {
            let exact = ManufacturedSolution::single_mode(m);
            let (full, margin) = checked_trace(cfg, &p, (1..=m).collect())?;
            let (opt, _) = checked_trace(cfg, &p, vec![m])?;
            let mut errs = [0.0; 2];
            let mut h = 0.0;
            for (e, ts) in errs.iter_mut().zip([&full, &opt]) {
                let forms = assemble_level(cfg, &p, level, &weights, Some(ts))?;
                let noise = forms.primal.zero();
                let sol = solve_level(forms, &exact, noise, cfg.solver.refine_steps)?;
                let r = measure(cfg, level, &sol, &exact);
                h = r.h;
                *e = r.errors["Q"];
            }
            let h3 = exact.h3_norm(p.t_start(), p.t_end(), p.big_r)?;
            let scale = h.powi(cfg.s() as i32 + 1) * h3;
            Ok(CmRow {
                m,
                h,
                h3_norm: h3,
                error_full: errs[0],
                error_opt: errs[1],
                c_m: errs[0] / scale,
                c_m_opt: errs[1] / scale,
                a1_margin: margin,
            })
        })
        .collect();
    report.cm_table = rows?;
    Ok(report)
}

/// Derived parameters and the randomized pseudoconvexity check.
pub fn check_geometry(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.geometry.validate()?;
    let p = derive_params(&cfg.geometry)?;
    let mut report = ExperimentReport::new("check-geometry", "", cfg);
    report.params = Some(p);
    report.geometry_check = Some(check_pseudoconvexity(&p, cfg.samples, cfg.seed)?);
    Ok(report)
}
