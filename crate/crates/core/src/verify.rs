//! Seeded exact-identity suite. Every identity is a rational-function
//! equality in `(a, b, q, κ, γ)`, so agreement at independent random
//! rational points certifies it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ansatz::G2Ansatz;
use crate::dynamics::{monomial_rates, monomial_rates_exact, symbolic_rhs_crosscheck, Flavor};
use crate::forms::{GeometryParams, Monomial, Orientation};
use crate::scalar::{format_scalar, int, random_positive, to_f64, Scalar};

/// Relative tolerance for the floating right-hand side against exact rates.
pub const FLOAT_RHS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("jobs must be at least 1")]
    NoJobs,
}

/// Identity ids in report order.
pub const IDENTITIES: [&str; 12] = [
    "psi-closed",
    "dphi-closed-form",
    "tau0-closed-form",
    "laplacian-psi-closed-form",
    "phi-wedge-psi-seven-vol",
    "phi-norm-seven",
    "star-psi-is-phi",
    "star-phi-is-psi",
    "dtau3-projection",
    "rhs-exact-normalized",
    "rhs-exact-modified",
    "rhs-float",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPoint {
    pub params: GeometryParams,
    pub kappa: Scalar,
    pub gamma: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityResult {
    pub id: &'static str,
    pub passed: bool,
    pub points: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub passed: bool,
    pub identities: Vec<IdentityResult>,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<(&'static str, &str)> {
        self.identities
            .iter()
            .find_map(|r| r.first_failure.as_deref().map(|f| (r.id, f)))
    }

    /// One `id: pass|FAIL` line per identity.
    pub fn summary_lines(&self) -> Vec<String> {
        self.identities
            .iter()
            .map(|r| format!("{}: {}", r.id, if r.passed { "pass" } else { "FAIL" }))
            .collect()
    }
}

/// `trials` points per orientation, drawn in a fixed order from one stream.
pub fn sample_points(seed: u64, trials: usize) -> Vec<TrialPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * trials);
    for _ in 0..trials {
        for eps in Orientation::BOTH {
            let (a, b, q) = (random_positive(&mut rng), random_positive(&mut rng), random_positive(&mut rng));
            let kappa = random_positive(&mut rng);
            let gamma = int(2) + random_positive(&mut rng);
            let params = GeometryParams::new(a, b, q, eps).expect("positive samples");
            out.push(TrialPoint { params, kappa, gamma });
        }
    }
    out
}

fn check(ok: bool, detail: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(detail())
    }
}

fn describe(p: &GeometryParams) -> String {
    format!(
        "a={} b={} q={} eps={}",
        format_scalar(p.a()),
        format_scalar(p.b()),
        format_scalar(p.q()),
        p.eps()
    )
}

/// Largest relative difference between the floating monomial rates and
/// the exact ones at `pt`, over both flavors.
pub fn float_rhs_error(pt: &TrialPoint) -> f64 {
    let p = &pt.params;
    let state = [to_f64(p.a()), to_f64(p.b()), to_f64(p.q()).sqrt()];
    let (k, g, e) = (to_f64(&pt.kappa), to_f64(&pt.gamma), p.eps().as_f64());
    [Flavor::NormalizedCoflow, Flavor::ModifiedCoflow]
        .into_iter()
        .map(|flavor| {
            let exact = monomial_rates_exact(flavor, p, &pt.kappa, &pt.gamma).map(|r| to_f64(&r));
            let float = monomial_rates(flavor, state, k, g, e);
            let scale = exact.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
            exact.iter().zip(&float).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
        })
        .fold(0.0, f64::max)
}

fn float_rhs_check(pt: &TrialPoint) -> Result<(), String> {
    let err = float_rhs_error(pt);
    check(err <= FLOAT_RHS_TOL, || format!("relative error {err:.3e}"))
}

/// Runs every identity at one point, in `IDENTITIES` order.
pub fn check_point(pt: &TrialPoint) -> Vec<Result<(), String>> {
    let p = &pt.params;
    let ans = match G2Ansatz::build(p.clone()) {
        Ok(a) => a,
        Err(e) => {
            let msg = e.to_string();
            return IDENTITIES.iter().map(|_| Err(msg.clone())).collect();
        }
    };
    let phi = ans.phi();
    let psi = ans.psi();
    let dphi = ans.dphi();
    let mut out = Vec::with_capacity(IDENTITIES.len());

    out.push(check(psi.d().is_zero(), || format!("d(psi) = {}", psi.d())));
    out.push(check(dphi == ans.dphi_printed(), || {
        format!("d(phi) = {dphi}, closed form {}", ans.dphi_printed())
    }));
    let (t, tc) = (ans.tau0(), ans.tau0_closed_form());
    out.push(check(t == tc, || {
        format!("tau0 = {}, closed form {}", format_scalar(&t), format_scalar(&tc))
    }));
    let (lap, lap_c) = (ans.laplacian_psi(), ans.laplacian_printed());
    out.push(check(lap == lap_c, || format!("laplacian = {lap}, closed form {lap_c}")));
    let top = phi.wedge(psi);
    out.push(check(top == p.volume_form().scale(&int(7)), || format!("phi^psi = {top}")));
    out.push(match phi.norm_sq(p) {
        Ok(n) => check(n == int(7), || format!("|phi|^2 = {}", format_scalar(&n))),
        Err(e) => Err(e.to_string()),
    });
    out.push(match ans.star(psi) {
        Ok(s) => check(&s == phi, || format!("star(psi) = {s}")),
        Err(e) => Err(e.to_string()),
    });
    out.push(match ans.star(phi) {
        Ok(s) => check(&s == psi, || format!("star(phi) = {s}")),
        Err(e) => Err(e.to_string()),
    });
    let lemma = ans.verify_dtau3_lemma();
    out.push(check(lemma.holds(), || {
        let m = Monomial::new(0, crate::forms::Horizontal::VolN);
        format!(
            "projection {} vs {}",
            format_scalar(&lemma.projected.coefficient(m)),
            format_scalar(&lemma.expected.coefficient(m))
        )
    }));
    for flavor in [Flavor::NormalizedCoflow, Flavor::ModifiedCoflow] {
        out.push(symbolic_rhs_crosscheck(p, &pt.kappa, &pt.gamma, flavor).map_err(|e| e.to_string()));
    }
    out.push(float_rhs_check(pt));

    out.into_iter()
        .map(|r| r.map_err(|e| format!("{} [{}]", e, describe(p))))
        .collect()
}

/// Runs the suite on `trials` points per orientation. `jobs > 1` splits
/// the points across threads; the report does not depend on `jobs`.
pub fn run_identity_suite(seed: u64, trials: usize, jobs: usize) -> Result<VerifyReport, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::NoTrials);
    }
    if jobs == 0 {
        return Err(VerifyError::NoJobs);
    }
    let points = sample_points(seed, trials);
    let per_point: Vec<Vec<Result<(), String>>> = if jobs == 1 {
        points.iter().map(check_point).collect()
    } else {
        let chunk = points.len().div_ceil(jobs);
        std::thread::scope(|s| {
            let handles: Vec<_> = points
                .chunks(chunk)
                .map(|c| s.spawn(move || c.iter().map(check_point).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("identity worker panicked"))
                .collect()
        })
    };

    let identities: Vec<IdentityResult> = IDENTITIES
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let failures: Vec<&String> = per_point.iter().filter_map(|r| r[i].as_ref().err()).collect();
            IdentityResult {
                id,
                passed: failures.is_empty(),
                points: per_point.len(),
                failures: failures.len(),
                first_failure: failures.first().map(|s| s.to_string()),
            }
        })
        .collect();
    let passed = identities.iter().all(|r| r.passed);
    log::debug!("identity suite: {} points, passed = {passed}", per_point.len());
    Ok(VerifyReport {
        seed,
        trials,
        passed,
        identities,
    })
}
