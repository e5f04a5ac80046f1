//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::time::{Duration, Instant};

use common::*;
use num_complex::Complex64 as C64;
use odeq::engine::{DilationMethod, StateVector};
use odeq::hatano_nelson::{build_hn_problem, hn_jump_operator, site_densities, HnParams, Interaction};
use odeq::instances::{random_problem, random_state, random_sum};
use odeq::oracle::{compute_bound_quantities, expm_apply, lindblad_rk4, DEFAULT_GRID_POINTS};
use odeq::pauli::PauliSum;
use odeq::problem::{build_dilation, InitialState, OdeProblem};
use odeq::solver::{
    choose_step_count, normalized_error_bound, run_lindblad, run_postselect, run_trajectories, state_ratio,
    Propagator, ShotSettings, SolverOptions, StepPlan,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Criterion 1
const DILATION_SAMPLES: usize = 200;
const TAU_RANGE: (f64, f64) = (1e-4, 1e-1);
const DILATION_SLOPE: (f64, f64) = (2.0, 0.1);
const DILATION_BUDGET: Duration = Duration::from_secs(10);
// Criterion 2
const R_SWEEP: [usize; 6] = [8, 16, 32, 64, 128, 256];
const CONVERGENCE_SLOPE: (f64, f64) = (-1.0, 0.15);
const CONVERGENCE_GAIN: f64 = 20.0;
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(60);
// Criterion 3
const SUCCESS_GAP: f64 = 0.02;
const MONOTONE_BAND: f64 = 1.10;
// Criterion 5
const EPSILONS: [f64; 3] = [0.1, 0.05, 0.01];
// Criterion 6
const NORMALIZED_PAIRS: usize = 100_000;
const NORMALIZED_DIMS: [usize; 3] = [2, 8, 64];
const NORMALIZED_BUDGET: Duration = Duration::from_secs(5);
// Criterion 7
const HN_GAMMAS: [f64; 4] = [0.3, 0.5, 1.0, 2.0];
const HN_SITES: [usize; 3] = [2, 4, 6];
const SQUARE_TOL: f64 = 1e-12;
const MIN_EIG_TOL: f64 = 1e-12;
const RECONSTRUCTION_TOL: f64 = 1e-10;
const MAX_G_WEIGHT: usize = 3;
// Criteria 8 and 9
const SHOTS: usize = 10_000;
const SIGMAS: f64 = 4.0;
const LINDBLAD_TAU: f64 = 1e-2;
const TRACE_DISTANCE_TOL: f64 = 0.05;
const TRACE_TOL: f64 = 1e-12;
// Criterion 10
const SCALING_SITES: [usize; 3] = [4, 6, 8];
const SCALING_EPSILON: f64 = 0.1;
const ALPHA_RANGE: (f64, f64) = (1.5, 2.5);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn hn_params(sites: usize, gamma: f64, initial: &str) -> HnParams {
    HnParams {
        sites,
        coupling: 1.0,
        gamma,
        interaction: Interaction::NearestNeighbor(0.5),
        initial: InitialState::basis_bits(initial),
        time: 1.0,
    }
}

fn neel(sites: usize) -> String {
    (0..sites).map(|i| if i % 2 == 0 { '1' } else { '0' }).collect()
}

/// Five random 2-qubit and three random 3-qubit instances, then HN(n = 4).
fn instances() -> Vec<(String, OdeProblem)> {
    let mut out = vec![];
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        out.push((format!("random n=2 #{seed}"), random_problem(&mut rng, 2, 2, 1.0)));
    }
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        out.push((format!("random n=3 #{seed}"), random_problem(&mut rng, 3, 2, 1.0)));
    }
    let hn = build_hn_problem(&hn_params(4, 0.5, "0110")).expect("valid HN instance");
    out.push(("HN n=4".into(), hn.problem));
    out
}

fn run(p: &OdeProblem, steps: usize) -> Vec<C64> {
    let plan = StepPlan::new(p.time(), steps).unwrap();
    run_postselect(p, &plan, SolverOptions::default()).unwrap().solution().to_vec()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    let (mut taus, mut residuals) = (vec![], vec![]);
    for _ in 0..DILATION_SAMPLES {
        let n = rng.random_range(1..=3);
        let l = random_sum(&mut rng, n, 3, 0.5);
        let psi = random_state(&mut rng, n);
        let tau = (rng.random_range(TAU_RANGE.0.ln()..TAU_RANGE.1.ln())).exp();

        let mut s = StateVector::with_ancilla(&psi).unwrap();
        s.apply_dilated_jump(&build_dilation(&l), tau, DilationMethod::Auto).unwrap();
        s.project_ancilla_zero().unwrap();

        let lm = sum_matrix(&l);
        let k = lm.adjoint() * &lm;
        let v = column(&psi);
        let first = &v - &k * &v * c(tau, 0.0);
        let bound = 2.0 * tau * tau / 3.0 * (&k * &k * &v).norm();
        let residual = distance(s.system_part(), first.as_slice());
        // Cross-check with the explicit block exponential.
        let g = dilation(&lm) * c(0.0, (2.0 * tau).sqrt());
        let top = g.exp().view((0, 0), (1 << n, 1 << n)).clone_owned() * &v;
        assert!(distance(s.system_part(), top.as_slice()) < 1e-12);
        if residual > bound {
            violations += 1;
        }
        taus.push(tau);
        residuals.push(residual);
    }
    let fit = slope(&taus, &residuals);
    let elapsed = start.elapsed();
    let pass = violations == 0 && (fit - DILATION_SLOPE.0).abs() <= DILATION_SLOPE.1 && elapsed < DILATION_BUDGET;
    verdict(
        pass,
        format!("{DILATION_SAMPLES} samples, {violations} bound violations, residual slope {fit:.4}, {elapsed:.2?}"),
    )
}

struct Sweep {
    name: String,
    normalized: Vec<f64>,
    raw: Vec<f64>,
    success: Vec<f64>,
    ideal_success: f64,
}

fn sweeps() -> (Vec<Sweep>, Duration) {
    let start = Instant::now();
    let mut out = vec![];
    for (name, p) in instances() {
        let exact = exact(&p);
        let library = expm_apply(&p.dense().unwrap().generator, p.psi0(), p.time()).unwrap();
        assert!(distance(&library, &exact) < 1e-10, "{name}: oracles disagree");
        let mut sweep = Sweep {
            name,
            normalized: vec![],
            raw: vec![],
            success: vec![],
            ideal_success: (norm(&exact) / norm(p.psi0())).powi(2),
        };
        for &r in &R_SWEEP {
            let plan = StepPlan::new(p.time(), r).unwrap();
            let res = run_postselect(&p, &plan, SolverOptions::default()).unwrap();
            sweep.normalized.push(normalized_distance(res.solution(), &exact));
            sweep.raw.push(distance(res.solution(), &exact));
            sweep.success.push(res.success_prob);
        }
        out.push(sweep);
    }
    (out, start.elapsed())
}

fn criterion_2(sweeps: &[Sweep], elapsed: Duration) -> Verdict {
    let xs: Vec<f64> = R_SWEEP.iter().map(|&r| r as f64).collect();
    let mut bad = vec![];
    let mut slopes = vec![];
    for s in sweeps {
        let fit = slope(&xs, &s.normalized);
        slopes.push(fit);
        let gain = s.normalized[0] / s.normalized[R_SWEEP.len() - 1];
        if (fit - CONVERGENCE_SLOPE.0).abs() > CONVERGENCE_SLOPE.1 || gain < CONVERGENCE_GAIN {
            bad.push(format!("{} (slope {fit:.3}, gain {gain:.1})", s.name));
        }
    }
    let (lo, hi) = slopes.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    verdict(
        bad.is_empty() && elapsed < CONVERGENCE_BUDGET,
        format!(
            "{} instances, slopes in [{lo:.3}, {hi:.3}], sweep {elapsed:.2?}{}",
            sweeps.len(),
            if bad.is_empty() { String::new() } else { format!(", failing: {}", bad.join("; ")) }
        ),
    )
}

fn criterion_3(sweeps: &[Sweep]) -> Verdict {
    let mut bad = vec![];
    let mut worst: f64 = 0.0;
    for s in sweeps {
        let gaps: Vec<f64> = s.success.iter().map(|p| (p - s.ideal_success).abs()).collect();
        let last = gaps[gaps.len() - 1];
        worst = worst.max(last);
        let monotone = gaps.windows(2).all(|w| w[1] <= w[0] * MONOTONE_BAND);
        if last > SUCCESS_GAP || !monotone {
            bad.push(format!("{} (gap {last:.2e}, monotone {monotone})", s.name));
        }
    }
    verdict(
        bad.is_empty(),
        format!("largest gap at R=256 {worst:.3e}{}", if bad.is_empty() { String::new() } else { format!(", failing: {}", bad.join("; ")) }),
    )
}

fn criterion_4(sweeps: &[Sweep]) -> Verdict {
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for (s, (_, p)) in sweeps.iter().zip(instances()) {
        let b = compute_bound_quantities(&p, DEFAULT_GRID_POINTS).unwrap();
        for (i, &r) in R_SWEEP.iter().enumerate() {
            let bound = b.cumulative_bound(p.time(), r);
            tightest = tightest.max(s.raw[i] / bound);
            if s.raw[i] > bound {
                violations += 1;
            }
        }
    }
    verdict(violations == 0, format!("{violations} violations, largest error/bound {tightest:.3}"))
}

fn criterion_5() -> Verdict {
    let mut bad = vec![];
    let mut worst: f64 = 0.0;
    for (name, p) in instances() {
        let b = compute_bound_quantities(&p, DEFAULT_GRID_POINTS).unwrap();
        let e = exact(&p);
        for eps in EPSILONS {
            let plan = choose_step_count(&p, eps, &b).unwrap();
            let err = normalized_distance(&run(&p, plan.steps), &e);
            worst = worst.max(err / eps);
            if err > eps {
                bad.push(format!("{name} eps {eps} (R {}, error {err:.3e})", plan.steps));
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("largest error/eps {worst:.3}{}", if bad.is_empty() { String::new() } else { format!(", failing: {}", bad.join("; ")) }),
    )
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut tested, mut violations) = (0usize, 0usize);
    for i in 0..NORMALIZED_PAIRS {
        let dim = NORMALIZED_DIMS[i % NORMALIZED_DIMS.len()];
        let scale = rng.random_range(0.1..10.0);
        let psi: Vec<C64> = (0..dim).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale).collect();
        let ratio: f64 = rng.random_range(0.0..0.5);
        let noise: Vec<C64> = (0..dim).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let k = ratio * norm(&psi) / norm(&noise);
        let phi: Vec<C64> = psi.iter().zip(&noise).map(|(a, b)| a + b * k).collect();
        if distance(&psi, &phi) > 0.5 * norm(&psi) {
            continue;
        }
        tested += 1;
        let bound = normalized_error_bound(&psi, &phi).expect("premise holds");
        if normalized_distance(&psi, &phi) > bound {
            violations += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && tested == NORMALIZED_PAIRS && elapsed < NORMALIZED_BUDGET,
        format!("{tested} pairs satisfying the premise, {violations} violations, {elapsed:.2?}"),
    )
}

fn criterion_7() -> Verdict {
    let mut worst = [0.0f64; 3];
    let mut max_weight = 0;
    for &n in &HN_SITES {
        for &gamma in &HN_GAMMAS {
            let hn = build_hn_problem(&hn_params(n, gamma, &neel(n))).unwrap();
            for b in 0..n - 1 {
                let (l, k) = hn_jump_operator(n, b, gamma).unwrap();
                let (lm, km) = (sum_matrix(&l), sum_matrix(&k));
                worst[0] = worst[0].max((&lm * &lm - &km).norm());
                worst[1] = worst[1].max(hermitian_eigenvalues(&km)[0].abs());
                let g = build_dilation(&l);
                max_weight = max_weight.max(g.pauli.max_weight());
            }
            let target = fermionic_hn(n, 1.0, gamma, 0.5) * c(0.0, -1.0)
                - M::identity(1 << n, 1 << n) * c((n - 1) as f64 * gamma, 0.0);
            worst[2] = worst[2].max((generator(&hn.problem) - target).norm());
        }
    }
    let pass = worst[0] <= SQUARE_TOL && worst[1] <= MIN_EIG_TOL && worst[2] <= RECONSTRUCTION_TOL && max_weight <= MAX_G_WEIGHT;
    verdict(
        pass,
        format!(
            "|L^2-K| {:.1e}, |min eig K| {:.1e}, generator residual {:.1e}, max G weight {max_weight}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn criterion_8() -> Verdict {
    let hn = build_hn_problem(&hn_params(4, 0.5, "0110")).unwrap();
    let p = &hn.problem;
    let plan = StepPlan::new(p.time(), 64).unwrap();
    let prob = run_postselect(p, &plan, SolverOptions::default()).unwrap().success_prob;
    let settings = ShotSettings::new(SHOTS, 2024).observables(site_densities(4));
    let on = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_trajectories(p, &plan, &settings, SolverOptions::default()).unwrap())
    };
    let first = on(4);
    let again = on(4);
    let single = on(1);
    let rate = first.success_rate();
    let allowed = SIGMAS * (prob * (1.0 - prob) / SHOTS as f64).sqrt();
    let identical = first == again && first == single;
    verdict(
        (rate - prob).abs() <= allowed && identical,
        format!(
            "rate {rate:.4} vs success_prob {prob:.4} (|diff| {:.4}, allowed {allowed:.4}), reruns identical: {identical}",
            (rate - prob).abs()
        ),
    )
}

fn criterion_9() -> Verdict {
    // sigma^- = (X + iY)/2 with rate 1
    let a = 0.5f64.sqrt() / 2.0;
    let decay = OdeProblem::new(
        PauliSum::zero(1),
        vec![PauliSum::from_labels(1, &[(a, 0.0, "X"), (0.0, a, "Y")]).unwrap()],
        InitialState::basis_bits("1"),
        1.0,
    )
    .unwrap();
    let hn = build_hn_problem(&hn_params(3, 0.5, "010")).unwrap().problem;
    let mut details = vec![];
    let mut pass = true;
    for (name, p) in [("decay", &decay), ("HN n=3", &hn)] {
        let steps = (p.time() / LINDBLAD_TAU).round() as usize;
        let plan = StepPlan::new(p.time(), steps).unwrap();
        let res = run_lindblad(p, &plan, &ShotSettings::new(SHOTS, 9), SolverOptions::default()).unwrap();
        let rho = res.final_snapshot().density.clone().unwrap().into_matrix();
        let rk4 = lindblad_rk4(p, &[p.time()]).unwrap().remove(0).into_matrix();
        let reference = lindblad_density(p, p.time());
        assert!((&rk4 - &reference).norm() < 1e-7, "{name}: Lindblad oracles disagree");
        let d = trace_distance(&rho, &rk4);
        let trace_err = (rho.trace() - c(1.0, 0.0)).norm();
        pass &= d <= TRACE_DISTANCE_TOL && trace_err <= TRACE_TOL;
        details.push(format!("{name}: trace distance {d:.4}, |tr - 1| {trace_err:.1e}"));
    }
    verdict(pass, details.join("; "))
}

fn criterion_10() -> Verdict {
    let mut costs = vec![];
    let mut per_step = vec![];
    let mut counter_ok = true;
    let mut notes = vec![];
    for &n in &SCALING_SITES {
        let p = build_hn_problem(&hn_params(n, 0.5, &neel(n))).unwrap().problem;
        let b = compute_bound_quantities(&p, DEFAULT_GRID_POINTS).unwrap();
        let plan = choose_step_count(&p, SCALING_EPSILON, &b).unwrap();
        let res = run_postselect(&p, &plan, SolverOptions::default()).unwrap();
        let rotations = Propagator::new(&p, SolverOptions::default()).rotations_per_step();
        counter_ok &= res.rotations() == (plan.steps * rotations) as u64;
        let q = state_ratio(&p, &exact(&p)).unwrap();
        // expected total rotations q^2 R r, with the q^3 factor of the cost law divided out
        let cost = q.repetitions(plan.steps) * rotations as f64 / q.q.powi(3);
        costs.push(cost);
        per_step.push(rotations);
        notes.push(format!("n={n}: R {} q {:.2} R/q {:.1} rot/step {rotations}", plan.steps, q.q, plan.steps as f64 / q.q));
    }
    let linear = per_step[2] - per_step[1] == per_step[1] - per_step[0];
    let xs: Vec<f64> = SCALING_SITES.iter().map(|&n| n as f64).collect();
    let alpha = slope(&xs, &costs);
    verdict(
        counter_ok && linear && (ALPHA_RANGE.0..=ALPHA_RANGE.1).contains(&alpha),
        format!(
            "alpha {alpha:.3}, counter = R x rotations/step: {counter_ok}, rotations/step linear in n: {linear} ({})",
            notes.join(", ")
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Verdict)> = vec![];
    results.push((1, "dilation identity", criterion_1()));
    let (sweeps, elapsed) = sweeps();
    results.push((2, "first-order convergence", criterion_2(&sweeps, elapsed)));
    results.push((3, "success probability", criterion_3(&sweeps)));
    results.push((4, "cumulative bound", criterion_4(&sweeps)));
    results.push((5, "step-count rule end to end", criterion_5()));
    results.push((6, "normalized error bound", criterion_6()));
    results.push((7, "Hatano-Nelson algebra", criterion_7()));
    results.push((8, "trajectory consistency", criterion_8()));
    results.push((9, "trace-out mode", criterion_9()));
    results.push((10, "scaling probe", criterion_10()));

    let mut failed = 0;
    for (id, name, v) in &results {
        println!("{} criterion {id:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += (!v.pass) as usize;
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
