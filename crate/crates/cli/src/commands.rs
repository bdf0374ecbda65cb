use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use coflow_core::dynamics::{integrate_from, Ball, Flavor, FlowConfig, Trajectory};
use coflow_core::report::{write_sidecar_json, write_spectral_json, write_sphere_csv, write_trajectory_csv};
use coflow_core::scalar::{int, to_f64};
use coflow_core::sphere::index_lower_bound;
use coflow_core::stability::{
    classify, critical_state, find_critical_points, perturbed_state, rational_direction, verify_psi_identities,
    CriticalLabel, CriticalPoint,
};
use coflow_core::verify::run_identity_suite;
use twofloat::TwoFloat;

use crate::args::{FlowArgs, Label, Perturb, Precision, SphereArgs, StabilityArgs, VerifyArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unusable input (exit 2).
    Input(String),
    /// A check ran and failed (exit 1).
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn verify(args: &VerifyArgs, seed: u64) -> Result<(), CliError> {
    let report = run_identity_suite(seed, args.trials as usize, args.jobs as usize).map_err(input)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        writeln!(w, "{json}").map_err(input)?;
    }
    if args.json {
        println!("{json}");
    } else {
        println!("seed {seed}, {} points per orientation", report.trials);
        for line in report.summary_lines() {
            println!("{line}");
        }
    }
    match report.first_failure() {
        None => Ok(()),
        Some((id, detail)) => Err(CliError::Verification(format!("{id}: {detail}"))),
    }
}

fn kappa_point(flavor: Flavor, kappa: f64, gamma: f64, eps: coflow_core::Orientation) -> Result<CriticalPoint, CliError> {
    find_critical_points(flavor, kappa, gamma, eps)
        .map_err(input)?
        .into_iter()
        .find(|p| p.label == CriticalLabel::Tau0EqKappa)
        .ok_or_else(|| CliError::Input("no critical point with tau0 = kappa".into()))
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn run_flow(cfg: &FlowConfig, start: Start, precision: Precision) -> Result<Trajectory, CliError> {
    let traj = match (start, precision) {
        (Start::Plain(s), Precision::F64) => integrate_from::<f64>(cfg, s),
        (Start::Plain(s), Precision::DoubleDouble) => integrate_from(cfg, s.map(TwoFloat::from)),
        (Start::Kick { point, dir, delta }, Precision::F64) => {
            integrate_from(cfg, perturbed_state::<f64>(&point, dir, delta).map_err(input)?)
        }
        (Start::Kick { point, dir, delta }, Precision::DoubleDouble) => {
            integrate_from(cfg, perturbed_state::<TwoFloat>(&point, dir, delta).map_err(input)?)
        }
    };
    traj.map_err(input)
}

enum Start {
    Plain([f64; 3]),
    Kick {
        point: Box<CriticalPoint>,
        dir: [f64; 3],
        delta: f64,
    },
}

pub fn flow(args: &FlowArgs) -> Result<(), CliError> {
    let mut cfg = FlowConfig::new(args.flavor, args.eps);
    cfg.kappa = args.kappa;
    cfg.gamma = args.gamma;
    cfg.step.t_end = args.t_end;
    cfg.step.rtol = args.rtol;
    cfg.step.atol = args.atol;
    cfg.step.max_steps = args.max_steps;
    if let Some(h) = args.max_step {
        cfg.step.max_step = h;
    }
    cfg.validate().map_err(input)?;

    let start = match (args.a0.zip(args.b0).zip(args.c0), args.perturb) {
        (Some(((a, b), c)), None) => Start::Plain([a, b, c]),
        (None, Some(kind)) => {
            let delta = args.delta.ok_or_else(|| CliError::Input("--perturb needs --delta".into()))?;
            let point = kappa_point(args.flavor, args.kappa, args.gamma, args.eps)?;
            let report = classify(&point).map_err(input)?;
            let pick = match kind {
                Perturb::Unstable => report
                    .eigenvalues
                    .iter()
                    .zip(&report.eigenvectors)
                    .filter(|(e, _)| e.re > 0.0 && e.im == 0.0)
                    .max_by(|x, y| x.0.re.total_cmp(&y.0.re)),
                Perturb::Stable => report
                    .eigenvalues
                    .iter()
                    .zip(&report.eigenvectors)
                    .filter(|(e, _)| e.re < 0.0 && e.im == 0.0)
                    .max_by(|x, y| x.0.re.total_cmp(&y.0.re)),
            };
            let (_, v) = pick.ok_or_else(|| {
                CliError::Input(format!("the {} flow has no {kind:?} direction here", args.flavor).to_lowercase())
            })?;
            // an exact rational eigendirection keeps the kick clean of other modes
            let dir = rational_direction(*v).map_or(*v, |r| r.map(|x| to_f64(&x)));
            let center = critical_state::<f64>(&point);
            let escape = args.escape.or((kind == Perturb::Unstable).then_some(0.1));
            cfg.stop.escape = escape.map(|radius| Ball { center, radius });
            cfg.stop.capture = args.capture.map(|radius| Ball { center, radius });
            Start::Kick {
                point: Box::new(point),
                dir,
                delta,
            }
        }
        _ => return Err(CliError::Input("give either --a0/--b0/--c0 or --perturb with --delta".into())),
    };
    if let Start::Plain(s) = &start {
        if s.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(CliError::Input(format!("initial state must be positive, got {s:?}")));
        }
    }

    let traj = run_flow(&cfg, start, args.precision)?;
    log::info!("{} after {} steps", traj.termination, traj.steps);
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        write_trajectory_csv(&traj, &mut w).map_err(input)?;
        let side = sidecar_path(path);
        write_sidecar_json(&traj, create(&side)?).map_err(input)?;
    }
    write_sidecar_json(&traj, io::stdout().lock()).map_err(input)?;
    Ok(())
}

pub fn stability(args: &StabilityArgs) -> Result<(), CliError> {
    if args.kappa <= int(0) {
        return Err(CliError::Input(format!("kappa must be positive, got {}", args.kappa)));
    }
    if args.flavor == Flavor::ModifiedCoflow && args.gamma <= int(2) {
        return Err(CliError::Input(format!(
            "gamma must exceed 2 for the modified flow, got {}",
            args.gamma
        )));
    }
    let wanted = match args.label {
        Label::Kappa => CriticalLabel::Tau0EqKappa,
        Label::GammaMinusOne => CriticalLabel::Tau0EqGammaMinus1Kappa,
    };
    let points = find_critical_points(args.flavor, to_f64(&args.kappa), to_f64(&args.gamma), args.eps).map_err(input)?;
    let point = points
        .into_iter()
        .find(|p| p.label == wanted)
        .ok_or_else(|| CliError::Input(format!("the {} flow has no {wanted} point", args.flavor)))?;
    let report = classify(&point).map_err(input)?;
    match &args.out {
        Some(path) => write_spectral_json(&report, create(path)?).map_err(input)?,
        None => write_spectral_json(&report, io::stdout().lock()).map_err(input)?,
    }

    let checks = verify_psi_identities(args.eps, &args.kappa).map_err(input)?;
    for c in &checks.checks {
        eprintln!("{}: {}", c.name, if c.passed { "pass" } else { "FAIL" });
    }
    match checks.checks.iter().find(|c| !c.passed) {
        None => Ok(()),
        Some(c) => Err(CliError::Verification(format!(
            "{}: {}",
            c.name,
            c.detail.as_deref().unwrap_or("")
        ))),
    }
}

pub fn sphere_index(args: &SphereArgs) -> Result<(), CliError> {
    let bound = index_lower_bound(args.l_min, args.l_max, &args.gamma).map_err(input)?;
    let summary = format!(
        "index lower bound (l = {}..{}, gamma = {}): {}",
        args.l_min, args.l_max, args.gamma, bound.total
    );
    match args.out.as_deref() {
        Some(p) if p == Path::new("-") => {
            write_sphere_csv(&bound, &args.gamma, args.with_closed_form, io::stdout().lock()).map_err(input)?;
            eprintln!("{summary}");
        }
        Some(p) => {
            write_sphere_csv(&bound, &args.gamma, args.with_closed_form, create(p)?).map_err(input)?;
            println!("{summary}");
        }
        None => println!("{summary}"),
    }
    Ok(())
}
