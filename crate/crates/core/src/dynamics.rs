//! The normalized and modified co-flows as ODEs in `(a, b, c)`, the
//! scale-invariant reduction, the rescaling ODEs and an adaptive
//! Dormand–Prince integrator.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::ansatz::{horizontal_pair, torsion_scalars, G2Ansatz};
use crate::forms::{GeometryParams, Horizontal, InvariantForm, Monomial, Orientation};
use crate::scalar::{format_scalar, int, rat, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    /// `∂ψ/∂t = Δψ − κ²ψ`
    #[serde(rename = "coflow")]
    NormalizedCoflow,
    /// `∂ψ/∂t = Δψ + ½ d((5γκ − 7τ₀)φ) + (5/2)(1 − γ)κ²ψ`
    #[serde(rename = "modified")]
    ModifiedCoflow,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::NormalizedCoflow => "coflow",
            Flavor::ModifiedCoflow => "modified",
        })
    }
}

impl FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coflow" | "normalized" | "normalized_coflow" => Ok(Flavor::NormalizedCoflow),
            "modified" | "modified_coflow" => Ok(Flavor::ModifiedCoflow),
            other => Err(format!("unknown flavor {other:?} (expected coflow or modified)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("state must be positive, got {0:?}")]
    NonPositiveState([f64; 3]),
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("input must be positive, got {0}")]
    NonPositiveInput(f64),
    #[error("trajectory has {0} samples, at least 3 are needed")]
    TooShort(usize),
}

fn lit<T: Float>(x: f64) -> T {
    T::from(x).expect("float constant")
}

fn to_f64<T: Float>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Time derivatives of the monomials `(c⁴, abc², a²c²)` as printed for
/// each flow.
pub fn monomial_rates<T: Float>(flavor: Flavor, state: [T; 3], kappa: T, gamma: T, eps: T) -> [T; 3] {
    let [a, b, c] = state;
    let n = lit::<T>;
    let q = c * c;
    let (a2, b2, k2) = (a * a, b * b, kappa * kappa);
    match flavor {
        Flavor::NormalizedCoflow => {
            let c4 = n(8.0) * (n(2.0) * a2 + b2 + n(2.0) * q + n(2.0) * eps * b * q / a - b2 * q / a2)
                - k2 * q * q;
            let a2c2 = n(4.0)
                * (n(2.0) * a2 - b2 + n(2.0) * q + n(4.0) * eps * a2 * a * b / q + n(2.0) * a2 * b2 / q
                    - n(2.0) * eps * b * q / a
                    + b2 * q / a2)
                - k2 * a2 * q;
            let abc2 = n(4.0)
                * (eps * b2 + n(4.0) * a2 * a * b / q + n(2.0) * eps * a2 * b2 / q + n(2.0) * b * q / a
                    - eps * b2 * q / a2)
                - k2 * a * b * q;
            [c4, abc2, a2c2]
        }
        Flavor::ModifiedCoflow => {
            let gk = gamma * kappa;
            let damp = n(2.5) * (n(1.0) - gamma) * k2;
            let c4 = n(-48.0) * a2 - n(8.0) * b2 - n(48.0) * q + n(10.0) * eps * gk * b * q
                + n(20.0) * gk * a * q
                - n(64.0) * eps * a * b
                + damp * q * q;
            let abc2 = n(-8.0) * b * q / a + n(5.0) * gk * a2 * b + n(5.0) * gk * b * q - n(32.0) * a * b
                + damp * a * b * q;
            let a2c2 = n(-24.0) * a2 + n(8.0) * b2 - n(24.0) * q + n(16.0) * eps * b * q / a
                + n(5.0) * eps * gk * a2 * b
                + n(10.0) * gk * a * q
                - n(5.0) * eps * gk * b * q
                - n(16.0) * eps * a * b
                + damp * a2 * q;
            [c4, abc2, a2c2]
        }
    }
}

/// Inverts the Jacobian of `(a, b, c) ↦ (c⁴, abc², a²c²)` through
/// logarithmic derivatives.
pub fn velocity_from_rates<T: Float>(state: [T; 3], rates: [T; 3]) -> [T; 3] {
    let [a, b, c] = state;
    let q = c * c;
    let r1 = rates[0] / (q * q);
    let r2 = rates[1] / (a * b * q);
    let r3 = rates[2] / (a * a * q);
    let quarter = lit::<T>(0.25);
    let half = lit::<T>(0.5);
    let dc = c * r1 * quarter;
    let da = a * (r3 * half - r1 * quarter);
    let db = b * (r2 - r3 * half - r1 * quarter);
    [da, db, dc]
}

fn check_positive<T: Float>(state: [T; 3]) -> Result<(), DynamicsError> {
    if state.iter().all(|x| *x > T::zero()) {
        Ok(())
    } else {
        Err(DynamicsError::NonPositiveState(state.map(to_f64)))
    }
}

/// `(ȧ, ḃ, ċ)` for either flavor; `gamma` is ignored by the normalized flow.
pub fn rhs<T: Float>(
    flavor: Flavor,
    state: [T; 3],
    kappa: T,
    gamma: T,
    eps: Orientation,
) -> Result<[T; 3], DynamicsError> {
    check_positive(state)?;
    let rates = monomial_rates(flavor, state, kappa, gamma, lit(eps.as_f64()));
    Ok(velocity_from_rates(state, rates))
}

pub fn rhs_normalized(state: [f64; 3], kappa: f64, eps: Orientation) -> Result<[f64; 3], DynamicsError> {
    rhs(Flavor::NormalizedCoflow, state, kappa, 0.0, eps)
}

pub fn rhs_modified(state: [f64; 3], kappa: f64, gamma: f64, eps: Orientation) -> Result<[f64; 3], DynamicsError> {
    rhs(Flavor::ModifiedCoflow, state, kappa, gamma, eps)
}

/// Printed monomial rates in exact arithmetic, with `c²` replaced by `q`.
pub fn monomial_rates_exact(flavor: Flavor, p: &GeometryParams, kappa: &Scalar, gamma: &Scalar) -> [Scalar; 3] {
    let (a, b, q, e) = (p.a(), p.b(), p.q(), p.eps().as_scalar());
    let (a2, b2, k2) = (a * a, b * b, kappa * kappa);
    match flavor {
        Flavor::NormalizedCoflow => {
            let c4 = int(8) * (int(2) * &a2 + &b2 + int(2) * q + int(2) * &e * b * q / a - &b2 * q / &a2)
                - &k2 * q * q;
            let a2c2 = int(4)
                * (int(2) * &a2 - &b2 + int(2) * q + int(4) * &e * &a2 * a * b / q + int(2) * &a2 * &b2 / q
                    - int(2) * &e * b * q / a
                    + &b2 * q / &a2)
                - &k2 * &a2 * q;
            let abc2 = int(4)
                * (&e * &b2 + int(4) * &a2 * a * b / q + int(2) * &e * &a2 * &b2 / q + int(2) * b * q / a
                    - &e * &b2 * q / &a2)
                - &k2 * a * b * q;
            [c4, abc2, a2c2]
        }
        Flavor::ModifiedCoflow => {
            let gk = gamma * kappa;
            let damp = rat(5, 2) * (int(1) - gamma) * &k2;
            let c4 = int(-48) * &a2 - int(8) * &b2 - int(48) * q + int(10) * &e * &gk * b * q
                + int(20) * &gk * a * q
                - int(64) * &e * a * b
                + &damp * q * q;
            let abc2 = int(-8) * b * q / a + int(5) * &gk * &a2 * b + int(5) * &gk * b * q - int(32) * a * b
                + &damp * a * b * q;
            let a2c2 = int(-24) * &a2 + int(8) * &b2 - int(24) * q + int(16) * &e * b * q / a
                + int(5) * &e * &gk * &a2 * b
                + int(10) * &gk * a * q
                - int(5) * &e * &gk * b * q
                - int(16) * &e * a * b
                + &damp * &a2 * q;
            [c4, abc2, a2c2]
        }
    }
}

/// `∂ψ/∂t` for the ansatz given monomial rates `(ṙ(c⁴), ṙ(abc²), ṙ(a²c²))`.
pub fn rates_to_form(rates: &[Scalar; 3], eps: Orientation) -> InvariantForm {
    InvariantForm::vol_n().scale(&rates[0]) - horizontal_pair(&(eps.as_scalar() * &rates[1]))
        - InvariantForm::etas_wedge(&[1, 2], Horizontal::Omega3).scale(&rates[2])
}

/// `Q(ψ)` (modified) or `Q₀(ψ) = Δψ − κ²ψ` (normalized), computed from the
/// form algebra.
pub fn q_form(ans: &G2Ansatz, flavor: Flavor, kappa: &Scalar, gamma: &Scalar) -> InvariantForm {
    let lap = ans.laplacian_psi();
    match flavor {
        Flavor::NormalizedCoflow => &lap - &ans.psi().scale(&(kappa * kappa)),
        Flavor::ModifiedCoflow => {
            let tau0 = ans.tau0();
            let lin = (int(5) * gamma * kappa - int(7) * tau0) / int(2);
            let damp = rat(5, 2) * (int(1) - gamma) * kappa * kappa;
            &(&lap + &ans.dphi().scale(&lin)) + &ans.psi().scale(&damp)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("monomial {monomial}: form algebra gives {symbolic}, hand-coded rates give {hand_coded}")]
pub struct RhsMismatch {
    pub monomial: String,
    pub symbolic: String,
    pub hand_coded: String,
}

/// Compares `Q(ψ)` from the form algebra with the hand-coded monomial rates,
/// coefficient by coefficient.
pub fn symbolic_rhs_crosscheck(
    params: &GeometryParams,
    kappa: &Scalar,
    gamma: &Scalar,
    flavor: Flavor,
) -> Result<(), RhsMismatch> {
    let ans = G2Ansatz::build(params.clone()).expect("ansatz is co-closed");
    let symbolic = q_form(&ans, flavor, kappa, gamma);
    let hand = rates_to_form(&monomial_rates_exact(flavor, params, kappa, gamma), params.eps());
    for m in Monomial::all() {
        let (s, h) = (symbolic.coefficient(m), hand.coefficient(m));
        if s != h {
            return Err(RhsMismatch {
                monomial: m.key(),
                symbolic: format_scalar(&s),
                hand_coded: format_scalar(&h),
            });
        }
    }
    Ok(())
}

/// `(dX/ds, dY/ds)` for `X = a²/c²`, `Y = ab/c²` and `ds = dt/c²`.
pub fn reduced_xy_rhs(x: f64, y: f64, eps: Orientation) -> Result<(f64, f64), DynamicsError> {
    for v in [x, y] {
        if v <= 0.0 || v.is_nan() {
            return Err(DynamicsError::NonPositiveInput(v));
        }
    }
    let e = eps.as_f64();
    let x2 = x * x;
    let dx = 4.0 / x2
        * ((x + 1.0) * y * y + 2.0 * e * (2.0 * x2 - 2.0 * x - 1.0) * x * y
            - 2.0 * x2 * (2.0 * x - 1.0) * (x + 1.0));
    let dy = 4.0 * y / x2 * (2.0 * (1.0 - x) * y * y + e * (2.0 * x2 - 3.0 * x - 1.0) * y + 2.0 * x * (1.0 - 2.0 * x));
    Ok((dx, dy))
}

/// `μ̇` for the rescaling `ψ = μ⁴ψ₀` of a nearly-G2 structure with `τ₀ = κ`.
pub fn scaling_ode_rhs(mu: f64, kappa: f64, gamma: f64, flavor: Flavor) -> Result<f64, DynamicsError> {
    if mu <= 0.0 || mu.is_nan() {
        return Err(DynamicsError::NonPositiveInput(mu));
    }
    let k2 = kappa * kappa;
    Ok(match flavor {
        Flavor::NormalizedCoflow => k2 * (1.0 - mu * mu) / (4.0 * mu),
        Flavor::ModifiedCoflow => 5.0 / (8.0 * mu) * k2 * (mu * (1.0 - gamma) + 1.0) * (mu - 1.0),
    })
}

/// `dμ̇/dμ`.
pub fn scaling_ode_slope(mu: f64, kappa: f64, gamma: f64, flavor: Flavor) -> Result<f64, DynamicsError> {
    if mu <= 0.0 || mu.is_nan() {
        return Err(DynamicsError::NonPositiveInput(mu));
    }
    let k2 = kappa * kappa;
    Ok(match flavor {
        Flavor::NormalizedCoflow => -k2 * (1.0 + mu * mu) / (4.0 * mu * mu),
        Flavor::ModifiedCoflow => 5.0 / 8.0 * k2 * ((1.0 - gamma) + 1.0 / (mu * mu)),
    })
}

/// Hitchin volume `a²bc⁴` per unit base volume.
pub fn hitchin_volume(state: [f64; 3]) -> f64 {
    let [a, b, c] = state;
    a * a * b * c.powi(4)
}

pub fn hitchin_volume_exact(p: &GeometryParams) -> Scalar {
    p.a() * p.a() * p.b() * p.q() * p.q()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    pub fn distance<T: Float>(&self, state: [T; 3]) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            let d = state[i] - lit::<T>(self.center[i]);
            s = s + d * d;
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub initial_step: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on accepted step sizes.
    pub max_step: f64,
    pub t_end: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: 1e-3,
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 1_000_000,
            max_step: f64::INFINITY,
            t_end: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopConditions {
    /// Stop once `|(ȧ, ḃ, ċ)|` falls below this.
    pub conv_tol: f64,
    pub floor: f64,
    pub ceiling: f64,
    /// Stop when the state leaves this ball.
    pub escape: Option<Ball>,
    /// Stop when the state enters this ball.
    pub capture: Option<Ball>,
}

impl Default for StopConditions {
    fn default() -> Self {
        StopConditions {
            conv_tol: 1e-10,
            floor: 1e-8,
            ceiling: 1e8,
            escape: None,
            capture: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub flavor: Flavor,
    pub kappa: f64,
    pub gamma: f64,
    pub eps: Orientation,
    pub step: StepControl,
    pub stop: StopConditions,
}

impl FlowConfig {
    /// Defaults: `κ = 4`, `γ = 3`.
    pub fn new(flavor: Flavor, eps: Orientation) -> Self {
        FlowConfig {
            flavor,
            kappa: 4.0,
            gamma: 3.0,
            eps,
            step: StepControl::default(),
            stop: StopConditions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidConfig(msg.to_string()));
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be positive");
        }
        if !self.gamma.is_finite() {
            return bad("gamma must be finite");
        }
        let s = &self.step;
        if !(s.initial_step > 0.0 && s.rtol > 0.0 && s.atol > 0.0 && s.max_step > 0.0 && s.t_end > 0.0) {
            return bad("step-control values must be positive");
        }
        if s.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        let st = &self.stop;
        if !(st.conv_tol > 0.0 && st.floor >= 0.0 && st.ceiling > st.floor) {
            return bad("stop conditions need conv_tol > 0 and 0 <= floor < ceiling");
        }
        for ball in [st.escape, st.capture].into_iter().flatten() {
            if !(ball.radius > 0.0) {
                return bad("ball radius must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    DivergedFromCritical,
    Degenerate,
    BlowUp,
    MaxSteps,
    Captured,
    Horizon,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::DivergedFromCritical => "diverged-from-critical",
            Termination::Degenerate => "degenerate",
            Termination::BlowUp => "blow-up",
            Termination::MaxSteps => "max-steps",
            Termination::Captured => "captured",
            Termination::Horizon => "horizon",
        })
    }
}

/// One accepted step; derived scalars are recomputed from `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub tau0: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
}

impl Sample {
    pub fn new(t: f64, state: [f64; 3], eps: Orientation) -> Self {
        let [a, b, c] = state;
        let (tau0, _) = torsion_scalars(a, b, c, eps.as_f64());
        Sample {
            t,
            a,
            b,
            c,
            tau0,
            volume: hitchin_volume(state),
            x: a * a / (c * c),
            y: a * b / (c * c),
        }
    }

    pub fn state(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: FlowConfig,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    /// Accepted steps.
    pub steps: usize,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory holds the initial sample")
    }

    pub fn final_state(&self) -> [f64; 3] {
        self.final_sample().state()
    }
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are unused
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// `h·ρ` bound, inside the Dormand–Prince stability interval `(−3.3, 0)`.
const STIFF_LIMIT: f64 = 3.0;

fn norm<T: Float>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Integrates in `f64`.
pub fn integrate(config: &FlowConfig, initial: [f64; 3]) -> Result<Trajectory, DynamicsError> {
    integrate_in::<f64>(config, initial)
}

/// Integrates with working precision `T` (for instance a double-double
/// type); samples are stored in `f64`.
pub fn integrate_in<T: Float>(config: &FlowConfig, initial: [f64; 3]) -> Result<Trajectory, DynamicsError> {
    integrate_from(config, initial.map(lit::<T>))
}

/// As [`integrate_in`], with the initial state given in working precision.
pub fn integrate_from<T: Float>(config: &FlowConfig, initial: [T; 3]) -> Result<Trajectory, DynamicsError> {
    config.validate()?;
    check_positive(initial.map(to_f64))?;
    let (kappa, gamma) = (lit::<T>(config.kappa), lit::<T>(config.gamma));
    let f = |y: [T; 3]| rhs(config.flavor, y, kappa, gamma, config.eps);
    let sc = &config.step;
    let stop = &config.stop;
    let (rtol, atol) = (lit::<T>(sc.rtol), lit::<T>(sc.atol));

    let mut t = 0.0f64;
    let mut y = initial;
    let mut k1 = f(y)?;
    let mut h = sc.initial_step.min(sc.max_step);
    let mut samples = vec![Sample::new(t, initial.map(to_f64), config.eps)];
    // cap on h from the stiffness estimate of the last accepted step
    let mut h_stiff = f64::INFINITY;
    let mut steps = 0usize;
    let mut attempts = 0usize;

    let finish = |samples: Vec<Sample>, termination, steps| {
        Ok(Trajectory {
            config: *config,
            samples,
            termination,
            steps,
        })
    };

    if norm(k1) < lit(stop.conv_tol) {
        return finish(samples, Termination::Converged, 0);
    }

    loop {
        if steps >= sc.max_steps || attempts >= sc.max_steps.saturating_mul(10) {
            return finish(samples, Termination::MaxSteps, steps);
        }
        attempts += 1;
        h = h.min(sc.t_end - t);
        let ht = lit::<T>(h);

        let mut k = [[T::zero(); 3]; 7];
        k[0] = k1;
        let mut stage_failed = false;
        let mut y6 = y;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let aij = A[s][j];
                if aij != 0.0 {
                    for i in 0..3 {
                        ys[i] = ys[i] + ht * lit::<T>(aij) * kj[i];
                    }
                }
            }
            if s == 5 {
                y6 = ys;
            }
            match f(ys) {
                Ok(v) => k[s] = v,
                Err(_) => {
                    stage_failed = true;
                    break;
                }
            }
        }
        if stage_failed {
            // a stage left the positive octant: shrink and retry
            h *= 0.25;
            if h < 1e-14 * (1.0 + t.abs()) {
                return finish(samples, Termination::Degenerate, steps);
            }
            continue;
        }

        let mut y5 = y;
        let mut err_sq = T::zero();
        for i in 0..3 {
            let mut inc5 = T::zero();
            let mut inc4 = T::zero();
            for s in 0..7 {
                inc5 = inc5 + lit::<T>(B5[s]) * k[s][i];
                inc4 = inc4 + lit::<T>(B4[s]) * k[s][i];
            }
            y5[i] = y[i] + ht * inc5;
            let scale = atol + rtol * y[i].abs().max(y5[i].abs());
            let e = ht * (inc5 - inc4) / scale;
            err_sq = err_sq + e * e;
        }
        let err = to_f64((err_sq / lit::<T>(3.0)).sqrt());
        let positive = y5.iter().all(|v| *v > T::zero());

        if err <= 1.0 && positive {
            // stages 6 and 7 share t + h, so |k7 - k6| / |y7 - y6| estimates
            // the stiff eigenvalue; keeping h·ρ inside the real stability
            // interval stops the controller from parking the stiff mode at
            // |R(hλ)| = 1 near an equilibrium
            let dy = norm([0, 1, 2].map(|i| y5[i] - y6[i]));
            let rho = to_f64(norm([0, 1, 2].map(|i| k[6][i] - k[5][i])) / dy);
            h_stiff = if rho.is_finite() && rho > 0.0 {
                STIFF_LIMIT / rho
            } else {
                f64::INFINITY
            };
            t += h;
            y = y5;
            k1 = k[6];
            steps += 1;
            let y64 = y.map(to_f64);
            samples.push(Sample::new(t, y64, config.eps));

            if y64.iter().any(|v| *v < stop.floor) {
                return finish(samples, Termination::Degenerate, steps);
            }
            if y64.iter().any(|v| *v > stop.ceiling || !v.is_finite()) {
                return finish(samples, Termination::BlowUp, steps);
            }
            if let Some(ball) = &stop.escape {
                if ball.distance(y) > lit(ball.radius) {
                    return finish(samples, Termination::DivergedFromCritical, steps);
                }
            }
            if let Some(ball) = &stop.capture {
                if ball.distance(y) < lit(ball.radius) {
                    return finish(samples, Termination::Captured, steps);
                }
            }
            if norm(k1) < lit(stop.conv_tol) {
                return finish(samples, Termination::Converged, steps);
            }
            // absorb a remainder left by roundoff in the accumulated t
            if t >= sc.t_end - 1e-12 * sc.t_end.abs().max(1.0) {
                return finish(samples, Termination::Horizon, steps);
            }
        }

        let factor = if !positive {
            0.25
        } else if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(sc.max_step).min(h_stiff.max(h * 0.2));
        if h < 1e-14 * (1.0 + t.abs()) {
            return finish(samples, Termination::Degenerate, steps);
        }
    }
}

/// Which closed form the Hitchin volume rate is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFormula {
    /// `(1/4)((1/7)|τ₃|² − (5/2)(τ₀ − κ)(τ₀ − (γ − 1)κ)) V`, as printed.
    Printed,
    /// `(1/4)(|τ₃|² − (35/2)(τ₀ − κ)(τ₀ − (γ − 1)κ)) V`, from
    /// `dV/dt = (1/4)∫ φ ∧ π₁(∂ψ/∂t)`.
    ProjectionIdentity,
}

pub fn hitchin_rate(formula: RateFormula, state: [f64; 3], kappa: f64, gamma: f64, eps: Orientation) -> f64 {
    let [a, b, c] = state;
    let (tau0, tau3_sq) = torsion_scalars(a, b, c, eps.as_f64());
    let quad = (tau0 - kappa) * (tau0 - (gamma - 1.0) * kappa);
    let integrand = 0.25 * (tau3_sq / 7.0 - 2.5 * quad);
    let scale = match formula {
        RateFormula::Printed => 1.0,
        RateFormula::ProjectionIdentity => 7.0,
    };
    scale * integrand * hitchin_volume(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub max_rel_error: f64,
    pub samples_checked: usize,
    /// Smallest finite-difference `dV/dt` among checked samples.
    pub min_fd_rate: f64,
}

/// Compares centered differences of `V(t)` with a closed-form rate at the
/// interior samples. Samples where the predicted rate is below `1e-6` of
/// its maximum are skipped, since a relative error is meaningless there.
pub fn hitchin_rate_check(
    traj: &Trajectory,
    kappa: f64,
    gamma: f64,
    formula: RateFormula,
) -> Result<RateCheck, DynamicsError> {
    let s = &traj.samples;
    if s.len() < 3 {
        return Err(DynamicsError::TooShort(s.len()));
    }
    let eps = traj.config.eps;
    let mut rows = Vec::with_capacity(s.len() - 2);
    for i in 1..s.len() - 1 {
        let (hm, hp) = (s[i].t - s[i - 1].t, s[i + 1].t - s[i].t);
        let fd = (hm * hm * s[i + 1].volume - hp * hp * s[i - 1].volume + (hp * hp - hm * hm) * s[i].volume)
            / (hm * hp * (hm + hp));
        let pred = hitchin_rate(formula, s[i].state(), kappa, gamma, eps);
        rows.push((fd, pred));
    }
    let max_pred = rows.iter().map(|(_, p)| p.abs()).fold(0.0, f64::max);
    let mut out = RateCheck {
        max_rel_error: 0.0,
        samples_checked: 0,
        min_fd_rate: f64::INFINITY,
    };
    for (fd, pred) in rows {
        if pred.abs() < 1e-6 * max_pred || pred == 0.0 {
            continue;
        }
        out.samples_checked += 1;
        out.max_rel_error = out.max_rel_error.max(((fd - pred) / pred).abs());
        out.min_fd_rate = out.min_fd_rate.min(fd);
    }
    Ok(out)
}
