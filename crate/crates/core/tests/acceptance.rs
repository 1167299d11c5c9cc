//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL` line with the
//! measured quantities. Set `UCWAVE_ACCEPTANCE_STRICT=1` to turn any `FAIL` into a test
//! failure.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucwave::experiments::{
    fit_slope, run_cm_study, run_convergence, run_noise_study, run_trace_experiment, run_worst_mode_study,
    ExperimentConfig, Series,
};
use ucwave::forms::{assemble_saddle, SaddleSystem, StabilizationWeights};
use ucwave::geometry::{check_pseudoconvexity, derive_params, GeometryConfig, TMode};
use ucwave::mesh::build_mesh;
use ucwave::solver::factorize;
use ucwave::spaces::{build_trace_space, check_a1, FieldPair, SlabSpace, TraceFamily};
use ucwave::Error;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn record(out: &mut Vec<Outcome>, id: usize, name: &'static str, passed: bool, detail: String) {
    println!("criterion {id:>2} {name:<28} {}  {detail}", if passed { "PASS" } else { "FAIL" });
    out.push(Outcome {
        id,
        name,
        passed,
        detail,
    });
}

fn final_eoc(s: &Series, key: &str, raw: bool) -> f64 {
    let v = if raw { s.final_eoc_raw(key) } else { s.final_eoc(key) };
    v.unwrap_or(f64::NAN)
}

fn raw_slope(s: &Series, key: &str) -> f64 {
    let hs: Vec<f64> = s.levels.iter().map(|l| l.h).collect();
    fit_slope(&s.errors_raw(key), &hs, 3).unwrap_or(f64::NAN)
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn small_system(trace: bool, k: usize, q: usize, n_x: usize, n_t: usize) -> SaddleSystem {
    let geo = if trace {
        GeometryConfig::trace_default()
    } else {
        GeometryConfig::default()
    };
    let p = derive_params(&geo).unwrap();
    let mesh = build_mesh(&geo, &p, n_x, n_t).unwrap();
    let space = SlabSpace::new(&mesh, k, q).unwrap();
    let ts = trace.then(|| build_trace_space(&geo, &p, 2, TraceFamily::FourierModes).unwrap());
    let weights = StabilizationWeights {
        gamma: if trace { 0.0 } else { 1e-2 },
        ..Default::default()
    };
    assemble_saddle(&space, &space, &weights, ts.as_ref(), &|t, x| (t + 1.0) * x.cos()).unwrap()
}

fn geometry(out: &mut Vec<Outcome>) {
    let p = derive_params(&GeometryConfig::default()).unwrap();
    let start = Instant::now();
    let chk = check_pseudoconvexity(&p, 10_000, 7).unwrap();
    let elapsed = start.elapsed();
    let ok = (p.t_final - 0.843).abs() <= 1e-3 && chk.passed && elapsed < Duration::from_secs(1);
    record(
        out,
        1,
        "geometry",
        ok,
        format!("T = {:.6}, check passed = {}, {:.3} s", p.t_final, chk.passed, elapsed.as_secs_f64()),
    );
}

fn norm_identity(out: &mut Vec<Outcome>) {
    let mut worst = 0.0f64;
    for trace in [false, true] {
        let sys = small_system(trace, 1, 1, 8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(if trace { 21 } else { 20 });
        for _ in 0..100 {
            let x = DVector::from_fn(sys.layout.len(), |_, _| rng.gen_range(-1.0..1.0));
            let (u, mu, z) = sys.layout.split(&x);
            let neg = FieldPair {
                u1: -&z.u1,
                u2: -&z.u2,
            };
            let y = sys.layout.join(&u, &mu, &neg);
            let n2 = sys.triple_norm(&x).powi(2);
            worst = worst.max((sys.bilinear(&x, &y) - n2).abs() / n2);
        }
    }
    record(out, 2, "norm identity", worst <= 1e-10, format!("max relative defect {worst:.2e} over 200 draws"));
}

fn oracle_equivalence(out: &mut Vec<Outcome>) {
    let mut block_err = 0.0f64;
    for (k, q) in [(1, 1), (2, 2)] {
        let mesh = common::forward_mesh_with(0.5, 2, 1);
        for (_, e) in common::block_mismatches(&mesh, k, q) {
            block_err = block_err.max(e);
        }
    }
    let mut solve_err = 0.0f64;
    for trace in [false, true] {
        let sys = small_system(trace, 1, 1, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rhs = DVector::from_fn(sys.layout.len(), |_, _| rng.gen_range(-1.0..1.0));
        let x = factorize(&sys).unwrap().apply(&rhs);
        let dense = sys.matrix.to_dense().lu().solve(&rhs).unwrap();
        solve_err = solve_err.max((&x - &dense).norm() / dense.norm());
    }
    record(
        out,
        3,
        "oracle equivalence",
        block_err <= 1e-12 && solve_err <= 1e-10,
        format!("block entry error {block_err:.2e}, block solve vs dense LU {solve_err:.2e}"),
    );
}

fn clean_convergence(out: &mut Vec<Outcome>) {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let report = run_convergence(&cfg).unwrap();
    let elapsed = start.elapsed();
    let s = &report.series[0];
    let n_x: Vec<usize> = s.levels.iter().map(|l| l.n_x).collect();
    let eoc_b = final_eoc(s, "B", true);
    record(
        out,
        4,
        "clean convergence in B",
        n_x == [8, 16, 32, 64] && eoc_b >= 1.6 && elapsed <= Duration::from_secs(300),
        format!("n_x {n_x:?}, EOC {eoc_b:.3}, errors {}, {:.1} s", fmt_list(&s.errors_raw("B")), elapsed.as_secs_f64()),
    );

    let comp = s.errors("QminusB");
    let eoc_c = final_eoc(s, "QminusB", false);
    let decreasing = comp.windows(2).all(|w| w[1] < w[0]);
    record(
        out,
        5,
        "complement behaviour",
        eoc_c <= 0.7 && decreasing,
        format!("EOC {eoc_c:.3}, errors {}", fmt_list(&comp)),
    );

    let mut rates = vec![eoc_b];
    for &k in &cfg.kappas[1..] {
        rates.push(final_eoc(s, &format!("B_{k}"), true));
    }
    let monotone = rates.windows(2).all(|w| w[1] <= w[0] + 0.2);
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.3}")).collect();
    record(
        out,
        6,
        "kappa sweep",
        monotone && rates.iter().all(|r| r.is_finite()),
        format!("EOC along kappa {:?}: [{}]", cfg.kappas, shown.join(", ")),
    );
}

fn noise_scaling(out: &mut Vec<Outcome>) {
    let cfg = ExperimentConfig::default();
    let report = run_noise_study(&cfg).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (theta, s) in cfg.thetas.iter().zip(&report.series) {
        let slope = raw_slope(s, "B");
        ok &= (slope - theta).abs() <= 0.3;
        parts.push(format!("theta {theta}: slope {slope:.3}"));
    }
    record(out, 7, "noise scaling", ok && report.series.len() == 3, parts.join(", "));
}

fn worst_mode(out: &mut Vec<Outcome>) {
    let mut cfg = ExperimentConfig::default();
    cfg.noise.theta = 2.0;
    let report = run_worst_mode_study(&cfg).unwrap();
    let series = |kind: &str| report.series.iter().find(|s| s.label.starts_with(kind)).unwrap();
    let s = cfg.s() as f64;
    let alpha_worst = raw_slope(series("worst_mode"), "B") / s;
    let alpha_smooth = raw_slope(series("smooth"), "B") / s;
    let residual = report.eigen.iter().map(|e| e.residual).fold(0.0, f64::max);
    let ratio = report.mode_mass.iter().map(|m| m.ratio_omega_to_complement).fold(0.0, f64::max);
    record(
        out,
        8,
        "worst-mode study",
        !report.eigen.is_empty() && residual <= 1e-8 && ratio < 0.2 && alpha_worst < alpha_smooth,
        format!(
            "eigen residual {residual:.2e}, mass ratio {ratio:.3e}, alpha worst {alpha_worst:.4} vs smooth {alpha_smooth:.4}"
        ),
    );
}

fn trace_recovery(out: &mut Vec<Outcome>) {
    let cfg = ExperimentConfig::trace_default();
    let good = run_trace_experiment(&cfg, 2, 0.0).unwrap();
    let wrong = run_trace_experiment(&cfg, 1, 0.0).unwrap();
    let e2 = final_eoc(&good.series[0], "QminusB", false);
    let e1 = final_eoc(&wrong.series[0], "QminusB", false);
    record(
        out,
        9,
        "trace recovery",
        e2 >= 1.5 && e1 <= 0.5,
        format!("EOC in Q\\B: M = 2 {e2:.3}, M = 1 {e1:.3}"),
    );
}

fn eta_plateau(out: &mut Vec<Outcome>) {
    let eta = 1e-3;
    let mut cfg = ExperimentConfig::trace_default();
    cfg.mesh.levels = 5;
    cfg.parallel_levels = false;
    let report = run_trace_experiment(&cfg, 2, eta).unwrap();
    let s = &report.series[0];
    let errs = s.errors("Q");
    let rates: Vec<f64> = s.eoc["Q"].iter().map(|r| r.unwrap_or(f64::NAN)).collect();
    let dropped = rates.iter().any(|&r| r < 0.5);
    let last = *errs.last().unwrap();
    record(
        out,
        10,
        "eta plateau",
        dropped && last >= 0.1 * eta && last <= 10.0 * eta,
        format!("errors in Q {}, EOC {}", fmt_list(&errs), fmt_list(&rates)),
    );
}

fn a1_checker(out: &mut Vec<Outcome>) {
    let cfg = ExperimentConfig::trace_default();
    let p = derive_params(&cfg.geometry).unwrap();
    let tol = cfg.trace.a1_tol;
    let fourier: Vec<f64> = (1..=4)
        .map(|m| {
            let ts = build_trace_space(&cfg.geometry, &p, m, TraceFamily::FourierModes).unwrap();
            let chk = check_a1(&ts, tol).unwrap();
            if chk.holds {
                chk.margin
            } else {
                -chk.margin
            }
        })
        .collect();
    // the sine family vanishes on x = -R only, so Gamma must avoid x = 0: T < 2r
    let mut short = cfg.clone();
    short.geometry.t_mode = TMode::Explicit(1.2);
    short.trace.family = TraceFamily::AdversarialSine;
    let ps = derive_params(&short.geometry).unwrap();
    let adversarial = build_trace_space(&short.geometry, &ps, 2, TraceFamily::AdversarialSine).unwrap();
    let adv = check_a1(&adversarial, tol).unwrap();
    let refused = matches!(run_trace_experiment(&short, 2, 0.0), Err(Error::TraceInjectivity { .. }));
    record(
        out,
        11,
        "A1 checker",
        fourier.iter().all(|&m| m > 0.0) && !adv.holds && refused,
        format!(
            "Fourier margins at T = 2 {}, adversarial margin at T = 1.2 {:.2e}, refused {refused}",
            fmt_list(&fourier),
            adv.margin
        ),
    );
}

fn cm_study(out: &mut Vec<Outcome>) {
    let cfg = ExperimentConfig::trace_default();
    let modes: Vec<usize> = (2..=6).collect();
    let report = run_cm_study(&cfg, &modes).unwrap();
    let cm: Vec<f64> = report.cm_table.iter().map(|r| r.c_m).collect();
    let opt: Vec<f64> = report.cm_table.iter().map(|r| r.c_m_opt).collect();
    let bounded = cm.iter().zip(&opt).all(|(c, o)| *c >= o / 1.5);
    let increasing = cm.windows(2).all(|w| w[1] > w[0]);
    record(
        out,
        12,
        "trace constant growth",
        bounded && increasing && cm.len() == modes.len(),
        format!("C_M {}, C_M opt {}", fmt_list(&cm), fmt_list(&opt)),
    );
}

#[test]
fn acceptance_criteria() {
    let mut out = Vec::new();
    geometry(&mut out);
    norm_identity(&mut out);
    oracle_equivalence(&mut out);
    clean_convergence(&mut out);
    noise_scaling(&mut out);
    worst_mode(&mut out);
    trace_recovery(&mut out);
    eta_plateau(&mut out);
    a1_checker(&mut out);
    cm_study(&mut out);
    out.sort_by_key(|o| o.id);
    let failed: Vec<String> = out
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({}): {}", o.id, o.name, o.detail))
        .collect();
    println!("{} of {} criteria pass", out.len() - failed.len(), out.len());
    assert_eq!(out.len(), 12);
    if std::env::var("UCWAVE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
    }
}
