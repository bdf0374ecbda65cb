//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::time::{Duration, Instant};

use coflow_core::ansatz::torsion_scalars;
use coflow_core::dynamics::{
    hitchin_rate_check, hitchin_volume, integrate, integrate_from, rhs, symbolic_rhs_crosscheck, Ball, Flavor,
    FlowConfig, RateFormula, Termination,
};
use coflow_core::forms::Orientation;
use coflow_core::scalar::{int, rat, to_f64, Scalar};
use coflow_core::sphere::{dim_difference, index_lower_bound, multiplicity_d, multiplicity_d0, multiplicity_d1};
use coflow_core::stability::{
    angle_between, classify, find_critical_points, jacobian, perturbed_state, printed_eigenvectors,
    psi_destabilizing, psi_dstar_eigenvalue, rational_direction, variation_to_form, verify_psi_identities,
    window_verdict, CriticalLabel, CriticalPoint, Verdict,
};
use coflow_core::verify::{float_rhs_error, run_identity_suite, sample_points};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

const SEED: u64 = 20240607;

const IDENTITY_TRIALS: usize = 20;
const IDENTITY_BUDGET: Duration = Duration::from_secs(5);
const RHS_POINTS: usize = 20;
const RHS_FLOAT_TOL: f64 = 1e-12;
const RHS_BUDGET: Duration = Duration::from_secs(5);
const CRITICAL_RHS_TOL: f64 = 1e-12;
const CRITICAL_TAU0_TOL: f64 = 1e-12;
const JACOBIAN_REL_TOL: f64 = 1e-6;
const ANGLE_TOL: f64 = 1e-8;
const UNIFORM_EIGEN_TOL: f64 = 1e-10;
const SPHERE_BUDGET: Duration = Duration::from_secs(1);
const CONVERGENCE_STARTS: usize = 10;
const CONVERGENCE_TOL: f64 = 1e-6;
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(30);
const KICK: f64 = 1e-3;
const ESCAPE_RADIUS: f64 = 1e-1;
const RETURN_RADIUS: f64 = 1e-6;
const INSTABILITY_BUDGET: Duration = Duration::from_secs(30);
const RATE_REL_TOL: f64 = 1e-4;

const GAMMAS: [f64; 3] = [2.5, 3.0, 4.0];
const KAPPAS: [f64; 2] = [1.0, 4.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(u: [f64; 3], v: [f64; 3]) -> f64 {
    norm([u[0] - v[0], u[1] - v[1], u[2] - v[2]])
}

fn cross(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
}

fn kappa_point(flavor: Flavor, eps: Orientation, kappa: f64, gamma: f64) -> CriticalPoint {
    find_critical_points(flavor, kappa, gamma, eps)
        .expect("critical points")
        .into_iter()
        .find(|p| p.label == CriticalLabel::Tau0EqKappa)
        .expect("tau0 = kappa point")
}

fn exact_identities() -> Outcome {
    let start = Instant::now();
    let report = match run_identity_suite(SEED, IDENTITY_TRIALS, 1) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let failed: Vec<&str> = report.identities.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let points = report.identities.first().map_or(0, |r| r.points);
    outcome(
        failed.is_empty() && elapsed < IDENTITY_BUDGET,
        format!(
            "{} identities at {points} points ({IDENTITY_TRIALS} per orientation), failed {failed:?}, {elapsed:.2?}",
            report.identities.len()
        ),
    )
}

fn rhs_cross_validation() -> Outcome {
    let start = Instant::now();
    let points = sample_points(SEED ^ 0x5eed, RHS_POINTS);
    let mut exact_failures = 0;
    let mut worst = 0.0f64;
    for pt in &points {
        for flavor in [Flavor::NormalizedCoflow, Flavor::ModifiedCoflow] {
            if symbolic_rhs_crosscheck(&pt.params, &pt.kappa, &pt.gamma, flavor).is_err() {
                exact_failures += 1;
            }
        }
        worst = worst.max(float_rhs_error(pt));
    }
    let elapsed = start.elapsed();
    outcome(
        exact_failures == 0 && worst < RHS_FLOAT_TOL && elapsed < RHS_BUDGET,
        format!(
            "{} points, exact mismatches {exact_failures}, worst float rel error {worst:.2e}, {elapsed:.2?}",
            points.len()
        ),
    )
}

fn critical_points() -> Outcome {
    let mut worst_rhs = 0.0f64;
    let mut worst_tau = 0.0f64;
    let mut count = 0;
    for eps in Orientation::BOTH {
        for kappa in KAPPAS {
            let mut sets = vec![find_critical_points(Flavor::NormalizedCoflow, kappa, 3.0, eps)];
            for gamma in GAMMAS {
                sets.push(find_critical_points(Flavor::ModifiedCoflow, kappa, gamma, eps));
            }
            for set in sets {
                let set = match set {
                    Ok(s) => s,
                    Err(e) => return outcome(false, e.to_string()),
                };
                for p in set {
                    let v = rhs(p.flavor, p.state, p.kappa, p.gamma, eps).expect("positive state");
                    worst_rhs = worst_rhs.max(norm(v));
                    worst_tau = worst_tau.max((p.tau0 - to_f64(&p.kappa_eff)).abs());
                    count += 1;
                }
            }
        }
    }
    // 2 orientations × 2 κ × (1 normalized + 3 γ × 2 modified)
    outcome(
        count == 28 && worst_rhs < CRITICAL_RHS_TOL && worst_tau < CRITICAL_TAU0_TOL,
        format!("{count} points, max |rhs| {worst_rhs:.2e}, max |tau0 - label| {worst_tau:.2e}"),
    )
}

fn linearization() -> Outcome {
    let mut worst_gap = 0.0f64;
    let mut worst_angle = 0.0f64;
    let mut worst_plane = 0.0f64;
    let mut worst_uniform = 0.0f64;
    let mut bad_index = Vec::new();
    for eps in Orientation::BOTH {
        let printed = printed_eigenvectors(eps);
        let normal = cross(printed[1], printed[2]);
        for kappa in KAPPAS {
            for gamma in GAMMAS {
                let point = kappa_point(Flavor::ModifiedCoflow, eps, kappa, gamma);
                let pair = jacobian(&point).expect("jacobian");
                worst_gap = worst_gap.max(pair.relative_gap().unwrap_or(f64::INFINITY));
                let r = classify(&point).expect("classify");
                if r.index != 1 || r.unstable_directions.len() != 1 {
                    bad_index.push((eps, kappa, gamma, r.index));
                    continue;
                }
                worst_angle = worst_angle.max(angle_between(r.unstable_directions[0], printed[0]));
                let stable: Vec<[f64; 3]> = r
                    .eigenvalues
                    .iter()
                    .zip(&r.eigenvectors)
                    .filter(|(e, _)| e.re < 0.0)
                    .map(|(_, v)| *v)
                    .collect();
                if stable.len() != 2 || angle_between(stable[0], stable[1]) < 1e-3 {
                    bad_index.push((eps, kappa, gamma, r.index));
                    continue;
                }
                for v in stable {
                    // angle between v and the printed stable plane
                    let off = (std::f64::consts::FRAC_PI_2 - angle_between(v, normal)).abs();
                    worst_plane = worst_plane.max(off);
                }
                let expect = 0.625 * kappa * kappa * (2.0 - gamma);
                let near = r.eigenvalue_nearest(expect).expect("eigenvalues");
                worst_uniform = worst_uniform.max((near.re - expect).abs());
            }
        }
    }
    outcome(
        bad_index.is_empty()
            && worst_gap < JACOBIAN_REL_TOL
            && worst_angle < ANGLE_TOL
            && worst_plane < ANGLE_TOL
            && worst_uniform < UNIFORM_EIGEN_TOL,
        format!(
            "jacobian gap {worst_gap:.2e}, unstable angle {worst_angle:.2e}, stable-plane angle {worst_plane:.2e}, \
             (1,1,1) eigenvalue error {worst_uniform:.2e}, wrong index at {bad_index:?}"
        ),
    )
}

fn psi_identities() -> Outcome {
    let mut failures = Vec::new();
    for eps in Orientation::BOTH {
        let mu = match eps {
            Orientation::Plus => rat(-5, 3),
            Orientation::Minus => rat(-3, 2),
        };
        for kappa in KAPPAS {
            let k = Scalar::from_integer(BigInt::from(kappa as i64));
            match verify_psi_identities(eps, &k) {
                Ok(r) => failures.extend(r.checks.into_iter().filter(|c| !c.passed).map(|c| format!("{eps}: {}", c.name))),
                Err(e) => failures.push(e.to_string()),
            }
            if psi_dstar_eigenvalue(eps, &k) != &mu * &k {
                failures.push(format!("{eps}: d* eigenvalue"));
            }
            let point = kappa_point(Flavor::ModifiedCoflow, eps, kappa, 3.0);
            let r = classify(&point).expect("classify");
            let form = r
                .unstable_directions
                .first()
                .and_then(|v| rational_direction(*v))
                .and_then(|dir| variation_to_form(&point, &dir).ok());
            if form.and_then(|f| f.ratio_to(&psi_destabilizing(eps))).is_none() {
                failures.push(format!("{eps} kappa {kappa}: variation not proportional"));
            }
        }
    }
    outcome(failures.is_empty(), format!("both orientations, kappa in {KAPPAS:?}, failures {failures:?}"))
}

fn window_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut gammas = vec![rat(2001, 1000), rat(201, 100), rat(5, 2), int(3), int(4), int(10), int(1000)];
    for _ in 0..50 {
        gammas.push(int(2) + rat(rng.gen_range(1..=500), rng.gen_range(1..=97)));
    }
    let mut failures = Vec::new();
    for g in &gammas {
        for mu in [rat(-5, 3), rat(-3, 2)] {
            let v = window_verdict(&mu, g, Flavor::ModifiedCoflow).expect("gamma > 2");
            if v.verdict != Verdict::Destabilizing {
                failures.push(format!("mu {mu} gamma {g}"));
            }
        }
        if window_verdict(&int(-1), g, Flavor::ModifiedCoflow).expect("gamma > 2").verdict != Verdict::Kernel {
            failures.push(format!("mu -1 gamma {g}"));
        }
    }
    let mut normalized = 0;
    for n in -300..=300 {
        let mu = rat(n, 37);
        let v = window_verdict(&mu, &int(3), Flavor::NormalizedCoflow).expect("normalized");
        if v.verdict == Verdict::Destabilizing || v.value < int(0) {
            failures.push(format!("normalized mu {mu}"));
        }
        normalized += 1;
    }
    outcome(
        failures.is_empty(),
        format!("{} gamma values, {normalized} normalized mu values, failures {failures:?}", gammas.len()),
    )
}

fn sphere_index() -> Outcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    for l in 0..=100 {
        if multiplicity_d(l).is_err() || multiplicity_d0(l).is_err() || multiplicity_d1(l).is_err() {
            problems.push(format!("inexact at l = {l}"));
        }
    }
    let diffs: Vec<BigInt> = (3..=6).map(|l| dim_difference(l).expect("exact")).collect();
    let expected: Vec<BigInt> = [160, 693, 1904, 4290].map(BigInt::from).to_vec();
    if diffs != expected {
        problems.push(format!("d - d0 - d1 = {diffs:?}"));
    }
    let total = index_lower_bound(3, 6, &int(3)).expect("valid range").total;
    if total != 7047u32.into() {
        problems.push(format!("windowed sum {total}"));
    }
    let elapsed = start.elapsed();
    outcome(
        problems.is_empty() && elapsed < SPHERE_BUDGET,
        format!("bound(3..6, gamma 3) = {total}, problems {problems:?}, {elapsed:.2?}"),
    )
}

fn convergence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let targets = [
        (Orientation::Minus, [1.0, 1.0, 1.0]),
        (Orientation::Plus, [0.6, 0.6, 0.6 * 5f64.sqrt()]),
    ];
    for (eps, target) in targets {
        let cfg = FlowConfig::new(Flavor::NormalizedCoflow, eps);
        for _ in 0..CONVERGENCE_STARTS {
            let init = target.map(|x| x * 2f64.powf(rng.gen_range(-1.0..1.0)));
            match integrate(&cfg, init) {
                Ok(traj) => {
                    let d = dist(traj.final_state(), target);
                    worst = worst.max(d);
                    if traj.termination != Termination::Converged || d >= CONVERGENCE_TOL {
                        failures.push(format!("{eps} from {init:?}: {} at distance {d:.2e}", traj.termination));
                    }
                }
                Err(e) => failures.push(e.to_string()),
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < CONVERGENCE_BUDGET,
        format!(
            "{} starts per orientation, worst final distance {worst:.2e}, failures {failures:?}, {elapsed:.2?}",
            CONVERGENCE_STARTS
        ),
    )
}

fn instability() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut slowest_return = 0.0f64;
    for eps in Orientation::BOTH {
        let point = kappa_point(Flavor::ModifiedCoflow, eps, 4.0, 3.0);
        let r = classify(&point).expect("classify");
        let ball = |radius| Ball {
            center: point.state,
            radius,
        };
        for (e, v) in r.eigenvalues.iter().zip(&r.eigenvectors) {
            let mut cfg = FlowConfig::new(Flavor::ModifiedCoflow, eps);
            cfg.step.rtol = 1e-14;
            cfg.step.atol = 1e-16;
            cfg.step.t_end = 50.0;
            let traj = if e.re > 0.0 {
                cfg.stop.escape = Some(ball(ESCAPE_RADIUS));
                integrate(&cfg, perturbed_state(&point, *v, KICK).expect("direction"))
            } else {
                // start and direction must both be clean of the unstable mode
                // beyond f64 roundoff: the critical point is taken in double-double
                // and the eigenvector in its exact rational form
                let Some(dir) = rational_direction(*v) else {
                    failures.push(format!("{eps} lambda {:.3}: no rational direction", e.re));
                    continue;
                };
                cfg.stop.capture = Some(ball(RETURN_RADIUS));
                integrate_from::<TwoFloat>(&cfg, perturbed_state(&point, dir.map(|x| to_f64(&x)), KICK).expect("direction"))
            };
            match traj {
                Ok(t) => {
                    let wanted = if e.re > 0.0 {
                        Termination::DivergedFromCritical
                    } else {
                        Termination::Captured
                    };
                    if e.re < 0.0 && t.termination == Termination::Captured {
                        slowest_return = slowest_return.max(t.final_sample().t);
                    }
                    if t.termination != wanted {
                        failures.push(format!("{eps} lambda {:.3}: {}", e.re, t.termination));
                    }
                }
                Err(err) => failures.push(err.to_string()),
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < INSTABILITY_BUDGET,
        format!(
            "kicks {KICK:e}: unstable leave radius {ESCAPE_RADIUS:e}, stable return within {RETURN_RADIUS:e} by t = {slowest_return:.3}, failures {failures:?}, {elapsed:.2?}"
        ),
    )
}

fn hitchin_rate() -> Outcome {
    let (kappa, gamma) = (4.0, 4.0);
    let mut printed = 0.0f64;
    let mut corrected = 0.0f64;
    let mut checked = 0;
    for (eps, init) in [(Orientation::Minus, [1.3, 0.8, 1.1]), (Orientation::Plus, [0.7, 0.5, 1.6])] {
        let mut cfg = FlowConfig::new(Flavor::ModifiedCoflow, eps);
        cfg.kappa = kappa;
        cfg.gamma = gamma;
        // dense sampling keeps the second-order differences well inside tolerance
        cfg.step.max_step = 2e-5;
        cfg.step.rtol = 1e-13;
        cfg.step.atol = 1e-15;
        cfg.step.t_end = 0.05;
        let traj = integrate(&cfg, init).expect("trajectory");
        let p = hitchin_rate_check(&traj, kappa, gamma, RateFormula::Printed).expect("samples");
        let c = hitchin_rate_check(&traj, kappa, gamma, RateFormula::ProjectionIdentity).expect("samples");
        printed = printed.max(p.max_rel_error);
        corrected = corrected.max(c.max_rel_error);
        checked += p.samples_checked;
    }

    // dV/dt from the right-hand side at random states inside the band
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut in_band, mut negative) = (0, 0);
    for i in 0..20000 {
        let eps = if i % 2 == 0 { Orientation::Plus } else { Orientation::Minus };
        let s = [rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)];
        let (tau0, _) = torsion_scalars(s[0], s[1], s[2], eps.as_f64());
        if !(kappa < tau0 && tau0 < (gamma - 1.0) * kappa) {
            continue;
        }
        in_band += 1;
        let v = rhs(Flavor::ModifiedCoflow, s, kappa, gamma, eps).expect("positive");
        let vdot = hitchin_volume(s) * (2.0 * v[0] / s[0] + v[1] / s[1] + 4.0 * v[2] / s[2]);
        if vdot <= 0.0 {
            negative += 1;
        }
    }
    outcome(
        printed < RATE_REL_TOL && in_band > 0 && negative == 0,
        format!(
            "printed formula rel error {printed:.3e} at {checked} samples (7x formula {corrected:.2e}); \
             dV/dt <= 0 at {negative} of {in_band} states with kappa < tau0 < (gamma-1)kappa"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("exact identities", exact_identities),
        ("rhs cross-validation", rhs_cross_validation),
        ("critical points", critical_points),
        ("linearization", linearization),
        ("psi identities", psi_identities),
        ("window consistency", window_consistency),
        ("sphere index", sphere_index),
        ("convergence", convergence),
        ("instability", instability),
        ("hitchin rate", hitchin_rate),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<22} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
