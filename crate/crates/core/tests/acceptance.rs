//! One PASS/FAIL line per acceptance criterion. With `ACCEPTANCE_STRICT=1` any failure makes
//! the run exit non-zero.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use vanhove_core::experiments::{scaling_study, secular_demo, StudyConfig, StudyResult};
use vanhove_core::linalg::{identity, ket_bra, pauli_y, trace_distance, CMat};
use vanhove_core::liouville::{build_projectors, verify_projector_algebra_seeded, BohrDecomposition};
use vanhove_core::mixing::{autocorrelation_report, bath_autocorrelation, free_factorization_check};
use vanhove_core::model::{
    build_correlated_state, build_friedrichs, build_random_model, build_spin_bath, center_interaction,
    friedrichs_entangled_recipe, friedrichs_local_mode, random_recipe, thermal_state, CouplingProfile,
    FriedrichsParams, ModelSpec, SpinBathParams,
};
use vanhove_core::nz::{interaction_picture_exact, solve_nz, verify_recurrence, NzOptions};
use vanhove_core::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn small_model(lambda: f64, seed: u64) -> Result<(ModelSpec, CMat)> {
    let spec = center_interaction(&build_random_model(2, 3, lambda, seed)?)?;
    let rho0 = build_correlated_state(&spec, &random_recipe(&spec, seed + 1))?.rho;
    Ok((spec, rho0))
}

fn projector_algebra() -> Result<Outcome> {
    let clock = Instant::now();
    let spec = center_interaction(&build_spin_bath(&SpinBathParams::default_demo())?)?;
    let pair = build_projectors(&spec)?;
    let report = verify_projector_algebra_seeded(&pair, &spec, 20, 2024);
    let fast = within(clock.elapsed(), 5.0);
    outcome(
        report.max_residual <= 1e-9 && fast,
        format!("max residual {:.2e} over 20 probes, {:.2?}", report.max_residual, clock.elapsed()),
    )
}

fn nz_exactness() -> Result<Outcome> {
    let clock = Instant::now();
    let lambda = 0.3;
    let dt = 0.01;
    let (spec, rho0) = small_model(lambda, 3)?;
    let pair = build_projectors(&spec)?;
    let bohr = BohrDecomposition::from_spec(&spec)?;
    let taus: Vec<f64> = (0..=1000).map(|k| lambda * lambda * dt * k as f64).collect();
    let nz = solve_nz(&pair, &spec, &bohr, &rho0, &taus, lambda, dt, NzOptions::default())?;
    let exact = interaction_picture_exact(&pair, &spec, &bohr, &rho0, &taus, lambda)?;
    let mut worst = 0.0_f64;
    for (a, b) in nz.states.iter().zip(&exact.states) {
        worst = worst.max(trace_distance(a, b)?);
    }
    outcome(
        worst <= 1e-5 && within(clock.elapsed(), 60.0),
        format!("max trace distance {worst:.2e} over 1001 points, {:.2?}", clock.elapsed()),
    )
}

fn recurrence() -> Result<Outcome> {
    let clock = Instant::now();
    let (spec, _) = small_model(0.2, 11)?;
    let pair = build_projectors(&spec)?;
    let bohr = BohrDecomposition::from_spec(&spec)?;
    let mut worst = 0.0_f64;
    let mut bounded = true;
    let (mut first, mut second) = (0.0_f64, 0.0_f64);
    for m in 0..bohr.len() {
        let r = verify_recurrence(&pair, &spec, &bohr, m, 1.0, 0.2, 0.05)?;
        worst = worst.max(r.relative_residual);
        bounded &= r.conv_bounded;
        first = first.max(r.conv_max_first);
        second = second.max(r.conv_max_second);
    }
    outcome(
        worst <= 1e-6 && bounded && within(clock.elapsed(), 60.0),
        format!(
            "max relative residual {worst:.2e} over {} blocks; convolution max {first:.4} on [0,T], {second:.4} on [T,2T], {:.2?}",
            bohr.len(),
            clock.elapsed()
        ),
    )
}

fn final_values(result: &StudyResult, tau: f64, pick: impl Fn(&vanhove_core::experiments::StudyRow) -> f64) -> Vec<f64> {
    result
        .summaries
        .iter()
        .map(|s| {
            let row = result
                .rows
                .iter()
                .find(|r| r.lambda == s.lambda && (r.tau - tau).abs() < 1e-12)
                .expect("tau on grid");
            pick(row)
        })
        .collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn correlation_decay(result: &StudyResult, elapsed: Duration) -> Result<Outcome> {
    let maxima: Vec<f64> = result.summaries.iter().map(|s| s.i_norm_max).collect();
    let ratios: Vec<f64> = maxima.windows(2).map(|w| w[1] / w[0]).collect();
    let in_range = ratios.iter().all(|r| (0.3..=0.8).contains(r));
    outcome(
        strictly_decreasing(&maxima) && in_range && within(elapsed, 300.0),
        format!("max |I| {maxima:.4?}, ratios {ratios:.3?}, {elapsed:.2?}"),
    )
}

fn vanhove_convergence(result: &StudyResult) -> Result<Outcome> {
    let d = final_values(result, 2.0, |r| r.d_markov);
    let halved = d[d.len() - 1] < 0.5 * d[0];
    let change = result.summaries.iter().map(|s| s.rate_change).fold(0.0, f64::max);
    outcome(
        strictly_decreasing(&d) && halved && change < 0.3,
        format!("d_markov(tau=2) {d:.4?}, worst rate change under 2 eta {:.1}%", 100.0 * change),
    )
}

fn golden_rule(cfg: &StudyConfig) -> Result<Outcome> {
    let clock = Instant::now();
    let params = FriedrichsParams::default_demo();
    let g = match params.profile {
        CouplingProfile::Flat { g } => g,
        _ => unreachable!("demo profile is flat"),
    };
    let spacing = (params.band[1] - params.band[0]) / (params.n_modes - 1) as f64;
    let want = TAU * g * g / spacing;
    let model = build_friedrichs(&params)?;
    let spec = center_interaction(&model.spec.with_lambda(1.0))?;
    let pair = build_projectors(&spec)?;
    let bohr = BohrDecomposition::from_spec(&spec)?;
    let gen = vanhove_core::nz::vanhove_generator(&pair, &spec, &bohr, cfg.eta)?;
    let excited = (0..2).max_by(|&a, &b| spec.h_s[(a, a)].re.total_cmp(&spec.h_s[(b, b)].re)).unwrap();
    let rate = gen.depletion_rate(excited);
    let rel = (rate - want).abs() / want;
    outcome(
        rel < 0.15 && within(clock.elapsed(), 60.0),
        format!("rate {rate:.4}, 2 pi g^2 / spacing = {want:.4}, off by {:.1}%, {:.2?}", 100.0 * rel, clock.elapsed()),
    )
}

fn factorization(result: &StudyResult) -> Result<Outcome> {
    let q1 = final_values(result, 1.0, |r| r.q_norm);
    let q0 = final_values(result, 0.0, |r| r.q_norm);
    let spread = q0.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - q0.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    outcome(
        strictly_decreasing(&q1) && spread <= 1e-12,
        format!("q_norm(tau=1) {q1:.4?}, spread at tau=0 {spread:.1e}"),
    )
}

fn secular() -> Result<Outcome> {
    let mut cfg = StudyConfig::spin_bath_demo();
    let spec = build_spin_bath(&SpinBathParams::default_demo())?;
    cfg.wrong_reference = Some(thermal_state(&spec.h_b, 0.3));
    let rep = secular_demo(&cfg)?;
    let flat = rep.fit_correct.slope.abs() <= 1e-6 * rep.operand_norm;
    let linear = rep.fit_wrong.slope > 0.0 && rep.fit_wrong.max_residual < 0.01 * rep.fit_wrong.range;
    outcome(
        flat && linear,
        format!(
            "correct slope {:.1e} (operand norm {:.3}), wrong slope {:.4} with residual {:.1e} of range {:.3}",
            rep.fit_correct.slope, rep.operand_norm, rep.fit_wrong.slope, rep.fit_wrong.max_residual, rep.fit_wrong.range
        ),
    )
}

fn mixing() -> Result<Outcome> {
    let params = FriedrichsParams::default_demo();
    let model = build_friedrichs(&params)?;
    let spec = &model.spec;
    let window = spec.window.expect("Friedrichs model has a window");
    let end = 0.5 * window.t_rec;
    let times: Vec<f64> = (0..=400).map(|k| end * k as f64 / 400.0).collect();
    let (quad, occ) = friedrichs_local_mode(params.n_modes, &model.couplings);
    let auto = autocorrelation_report(&times, &bath_autocorrelation(spec, &quad, &quad, &times)?);
    let rho0 = build_correlated_state(spec, &friedrichs_entangled_recipe(&model, 0.5))?.rho;
    let panel = [pauli_y().kronecker(&quad), identity(2).kronecker(&occ), ket_bra(2, 0, 0).kronecker(&occ)];
    let free = free_factorization_check(spec, &rho0, &panel, &times)?;
    let worst = free.observables.iter().map(|o| o.tail_max / o.initial).fold(0.0, f64::max);
    outcome(
        auto.tail_max < 0.05 * auto.initial && worst < 0.05,
        format!(
            "|C| tail {:.2e} of |C(0)| {:.2e}; worst free deviation {:.2}% of initial",
            auto.tail_max,
            auto.initial,
            100.0 * worst
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/friedrichs_study.json");
    let dir = tempfile::tempdir()?;
    let mut csv = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let code = vanhove_core::experiments::cli::run_cli([
            "vanhove",
            "study",
            "--config",
            config,
            "--seed",
            "7",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert!(code == 0 || code == 1, "study exited with {code}");
        csv.push(std::fs::read(out.join("study.csv"))?);
    }
    outcome(csv[0] == csv[1], format!("two study runs, {} CSV bytes each, identical: {}", csv[0].len(), csv[0] == csv[1]))
}

fn main() {
    let cfg = StudyConfig::friedrichs_demo();
    let clock = Instant::now();
    let study = scaling_study(&cfg);
    let study_time = clock.elapsed();

    let from_study = |f: &dyn Fn(&StudyResult) -> Result<Outcome>| match &study {
        Ok(r) => f(r),
        Err(e) => outcome(false, format!("study failed: {e}")),
    };
    let results: Vec<(&str, Result<Outcome>)> = vec![
        ("1 projector algebra", projector_algebra()),
        ("2 NZ exactness", nz_exactness()),
        ("3 recurrence formula", recurrence()),
        ("4 correlation-term decay", from_study(&|r| correlation_decay(r, study_time))),
        ("5 van Hove convergence", from_study(&vanhove_convergence)),
        ("6 golden-rule rate", golden_rule(&cfg)),
        ("7 factorization", from_study(&factorization)),
        ("8 secular terms", secular()),
        ("9 mixing diagnostics", mixing()),
        ("10 determinism", determinism()),
    ];

    let mut failures = 0;
    for (name, r) in results {
        match r {
            Ok(o) => {
                println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
                failures += usize::from(!o.passed);
            }
            Err(e) => {
                println!("FAIL {name}: error: {e}");
                failures += 1;
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
