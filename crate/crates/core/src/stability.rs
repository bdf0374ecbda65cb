//! Critical points of the two flows inside the ansatz, their linearization
//! and spectra, the destabilizing 4-forms `Ψ±`, and eigenvalue-window
//! verdicts.

use std::fmt;

use num_complex::Complex64;
use num_traits::{Float, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Serialize, Serializer};
use twofloat::TwoFloat;

use crate::ansatz::{horizontal_pair, torsion_scalars, G2Ansatz};
use crate::dynamics::{rhs, Flavor};
use crate::forms::{FormError, GeometryParams, Horizontal, InvariantForm, Monomial, Orientation};
use crate::scalar::{format_scalar, from_f64, int, rat, to_f64, Scalar};

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StabilityError {
    #[error("kappa must be positive and finite, got {0}")]
    InvalidKappa(f64),
    #[error("gamma must exceed 2 for the modified flow, got {0}")]
    InvalidGamma(String),
    #[error("Newton refinement of the {label} point did not converge (residual {residual:e})")]
    NewtonDiverged { label: CriticalLabel, residual: f64 },
    #[error("point is not critical: |rhs| = {0:e}")]
    NotCritical(f64),
    #[error("perturbation direction is zero")]
    ZeroDirection,
    #[error(transparent)]
    Form(#[from] FormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalLabel {
    /// `τ₀ = κ`
    Tau0EqKappa,
    /// `τ₀ = (γ − 1)κ`
    Tau0EqGammaMinus1Kappa,
}

impl fmt::Display for CriticalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriticalLabel::Tau0EqKappa => "tau0_eq_kappa",
            CriticalLabel::Tau0EqGammaMinus1Kappa => "tau0_eq_gamma_minus_1_kappa",
        })
    }
}

/// A nearly-G2 critical point `dφ = κ′ψ` of one of the flows.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub flavor: Flavor,
    pub eps: Orientation,
    pub kappa: f64,
    pub gamma: f64,
    pub label: CriticalLabel,
    /// `κ′`, the value of `τ₀` at the point.
    pub kappa_eff: Scalar,
    /// Exact `(a, b, q)`.
    pub params: GeometryParams,
    /// Newton-refined `(a, b, c)`.
    pub state: [f64; 3],
    pub tau0: f64,
    pub residual: f64,
}

fn exact(x: f64) -> Scalar {
    from_f64(x).expect("finite input")
}

fn scalar_to<T: Float>(x: &Scalar) -> T {
    let n = T::from(x.numer().to_f64().unwrap_or(f64::NAN)).expect("float");
    let d = T::from(x.denom().to_f64().unwrap_or(f64::NAN)).expect("float");
    n / d
}

fn check_inputs(flavor: Flavor, kappa: f64, gamma: f64) -> Result<(), StabilityError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(StabilityError::InvalidKappa(kappa));
    }
    if flavor == Flavor::ModifiedCoflow && !(gamma > 2.0 && gamma.is_finite()) {
        return Err(StabilityError::InvalidGamma(gamma.to_string()));
    }
    Ok(())
}

/// `(a, b, q)` of the nearly-G2 point with `τ₀ = κ′`.
pub fn nearly_g2_params(eps: Orientation, kappa_eff: &Scalar) -> GeometryParams {
    let (a, q) = match eps {
        Orientation::Plus => {
            let a = rat(12, 5) / kappa_eff;
            let q = int(5) * &a * &a;
            (a, q)
        }
        Orientation::Minus => {
            let a = int(4) / kappa_eff;
            let q = &a * &a;
            (a, q)
        }
    };
    GeometryParams::new(a.clone(), a, q, eps).expect("positive kappa")
}

fn params_state<T: Float>(p: &GeometryParams) -> [T; 3] {
    [scalar_to(p.a()), scalar_to(p.b()), scalar_to::<T>(p.q()).sqrt()]
}

fn rhs_norm(flavor: Flavor, s: [f64; 3], kappa: f64, gamma: f64, eps: Orientation) -> f64 {
    match rhs(flavor, s, kappa, gamma, eps) {
        Ok(v) => (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt(),
        Err(_) => f64::INFINITY,
    }
}

fn fd_jacobian_abc(flavor: Flavor, s: [f64; 3], kappa: f64, gamma: f64, eps: Orientation) -> Option<Matrix3> {
    let mut j = [[0.0; 3]; 3];
    for col in 0..3 {
        let h = 1e-7 * s[col].abs().max(1e-3);
        let (mut up, mut dn) = (s, s);
        up[col] += h;
        dn[col] -= h;
        let fu = rhs(flavor, up, kappa, gamma, eps).ok()?;
        let fd = rhs(flavor, dn, kappa, gamma, eps).ok()?;
        for row in 0..3 {
            j[row][col] = (fu[row] - fd[row]) / (2.0 * h);
        }
    }
    Some(j)
}

/// Damped Newton iteration on the flow's right-hand side, kept inside the
/// positive octant. Returns the refined point and its residual.
pub fn newton_refine(
    flavor: Flavor,
    seed: [f64; 3],
    kappa: f64,
    gamma: f64,
    eps: Orientation,
) -> ([f64; 3], f64) {
    let mut x = seed;
    let mut res = rhs_norm(flavor, x, kappa, gamma, eps);
    for _ in 0..100 {
        if res < 1e-14 {
            break;
        }
        let Some(j) = fd_jacobian_abc(flavor, x, kappa, gamma, eps) else {
            break;
        };
        let Ok(f) = rhs(flavor, x, kappa, gamma, eps) else {
            break;
        };
        let Some(step) = solve3(j, f) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = [x[0] - t * step[0], x[1] - t * step[1], x[2] - t * step[2]];
            if trial.iter().all(|v| *v > 0.0) {
                let r = rhs_norm(flavor, trial, kappa, gamma, eps);
                if r < res {
                    x = trial;
                    res = r;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, res)
}

fn solve3(m: Matrix3, b: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..4 {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

/// The analytic nearly-G2 points of a flow, each Newton-refined against the
/// floating right-hand side.
pub fn find_critical_points(
    flavor: Flavor,
    kappa: f64,
    gamma: f64,
    eps: Orientation,
) -> Result<Vec<CriticalPoint>, StabilityError> {
    check_inputs(flavor, kappa, gamma)?;
    let mut targets = vec![(CriticalLabel::Tau0EqKappa, exact(kappa))];
    if flavor == Flavor::ModifiedCoflow {
        targets.push((
            CriticalLabel::Tau0EqGammaMinus1Kappa,
            (exact(gamma) - int(1)) * exact(kappa),
        ));
    }
    targets
        .into_iter()
        .map(|(label, kappa_eff)| {
            let params = nearly_g2_params(eps, &kappa_eff);
            let seed = params_state::<f64>(&params);
            let (state, residual) = newton_refine(flavor, seed, kappa, gamma, eps);
            if residual >= 1e-12 {
                return Err(StabilityError::NewtonDiverged { label, residual });
            }
            let (tau0, _) = torsion_scalars(state[0], state[1], state[2], eps.as_f64());
            Ok(CriticalPoint {
                flavor,
                eps,
                kappa,
                gamma,
                label,
                kappa_eff,
                params,
                state,
                tau0,
                residual,
            })
        })
        .collect()
}

/// Positive zeros of the right-hand side reached by Newton from `seeds`
/// random starts in `[0.05, 3]³`, deduplicated. Points within a factor
/// `1e-3` of a face of the octant are discarded.
pub fn search_equilibria<R: Rng + ?Sized>(
    flavor: Flavor,
    kappa: f64,
    gamma: f64,
    eps: Orientation,
    seeds: usize,
    rng: &mut R,
) -> Vec<[f64; 3]> {
    let mut roots: Vec<[f64; 3]> = Vec::new();
    for _ in 0..seeds {
        let seed = [rng.gen_range(0.05..3.0), rng.gen_range(0.05..3.0), rng.gen_range(0.05..3.0)];
        let (x, res) = newton_refine(flavor, seed, kappa, gamma, eps);
        // the face b = 0 is invariant (ḃ ∝ b) and holds zeros of its own
        // that Newton creeps towards
        let (lo, hi) = x.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        if res > 1e-10 || lo < 1e-3 * hi {
            continue;
        }
        let known = roots
            .iter()
            .any(|r| (0..3).map(|i| (r[i] - x[i]).abs()).fold(0.0, f64::max) < 1e-6);
        if !known {
            roots.push(x);
        }
    }
    roots
}

/// Scales `(sa, sb, sc)` with `δa = sa·A`, `δb = sb·B`, `δc = sc·C`.
pub fn perturbation_scales<T: Float>(eps: Orientation, kappa_eff: T) -> [T; 3] {
    let n = |x: f64| T::from(x).expect("float");
    match eps {
        Orientation::Plus => {
            let s = kappa_eff / n(12.0);
            [s, s, s * n(5.0).sqrt()]
        }
        Orientation::Minus => [kappa_eff / n(4.0); 3],
    }
}

/// Unit `(δa, δb, δc)` along an `(A, B, C)` direction at `point`.
pub fn abc_direction(point: &CriticalPoint, v: [f64; 3]) -> Result<[f64; 3], StabilityError> {
    let s = perturbation_scales(point.eps, to_f64(&point.kappa_eff));
    let w = [s[0] * v[0], s[1] * v[1], s[2] * v[2]];
    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(StabilityError::ZeroDirection);
    }
    Ok(w.map(|x| x / n))
}

/// The critical point in working precision `T`, from its exact `(a, b, q)`.
pub fn critical_state<T: Float>(point: &CriticalPoint) -> [T; 3] {
    params_state(&point.params)
}

/// `point + delta · abc_direction(v)` in precision `T`, so the start lies
/// at distance `|delta|` from the critical point.
pub fn perturbed_state<T: Float>(point: &CriticalPoint, v: [f64; 3], delta: f64) -> Result<[T; 3], StabilityError> {
    let d = abc_direction(point, v)?;
    let base = critical_state::<T>(point);
    let lit = |x: f64| T::from(x).expect("float");
    Ok([0, 1, 2].map(|i| base[i] + lit(delta) * lit(d[i])))
}

/// Linearization in `(A, B, C)` coordinates by a fourth-order central
/// difference stencil evaluated in double-double arithmetic.
pub fn jacobian_fd(point: &CriticalPoint) -> Matrix3 {
    type T = TwoFloat;
    let x0: [T; 3] = params_state(&point.params);
    let kappa = T::from(point.kappa);
    let gamma = T::from(point.gamma);
    let scales = perturbation_scales(point.eps, scalar_to::<T>(&point.kappa_eff));
    let f = |x: [T; 3]| rhs(point.flavor, x, kappa, gamma, point.eps).expect("near a positive point");
    let h = T::from(1e-4);
    let mut j = [[0.0; 3]; 3];
    for col in 0..3 {
        let at = |k: f64| {
            let mut x = x0;
            x[col] += T::from(k) * h * scales[col];
            f(x)
        };
        let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
        for row in 0..3 {
            let d = (m2[row] - p2[row] + T::from(8.0) * (p1[row] - m1[row])) / (T::from(12.0) * h);
            j[row][col] = (d / scales[row]).into();
        }
    }
    j
}

/// Closed-form linearization at the `τ₀ = κ` point of the modified flow.
pub fn analytic_jacobian(eps: Orientation, kappa: f64, gamma: f64) -> Matrix3 {
    let g = gamma;
    let (pre, m) = match eps {
        Orientation::Plus => (
            5.0 * kappa * kappa / 72.0,
            [
                [2.0 * (2.0 - 3.0 * g), 22.0 - 15.0 * g, 4.0 * (3.0 * g - 2.0)],
                [2.0 * (22.0 - 15.0 * g), 9.0 * (g - 2.0), 4.0 * (3.0 * g - 2.0)],
                [2.0 * (3.0 * g - 2.0), 3.0 * g - 2.0, 6.0 * (4.0 - 3.0 * g)],
            ],
        ),
        Orientation::Minus => (
            kappa * kappa / 8.0,
            [
                [10.0 * (2.0 - 3.0 * g), 5.0 * g - 2.0, 4.0 * (5.0 * g - 2.0)],
                [2.0 * (5.0 * g - 2.0), 5.0 * (g - 2.0), 4.0 * (6.0 - 5.0 * g)],
                [2.0 * (5.0 * g - 2.0), 6.0 - 5.0 * g, 2.0 * (4.0 - 5.0 * g)],
            ],
        ),
    };
    m.map(|row| row.map(|x| pre * x))
}

/// Printed eigenvectors at the `τ₀ = κ` point of the modified flow, unstable
/// one first.
pub fn printed_eigenvectors(eps: Orientation) -> [[f64; 3]; 3] {
    match eps {
        Orientation::Plus => [[-1.0, 2.0, 0.0], [-4.0, -4.0, 3.0], [1.0, 1.0, 1.0]],
        Orientation::Minus => [[0.0, -4.0, 1.0], [-5.0, 2.0, 2.0], [1.0, 1.0, 1.0]],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPair {
    pub numeric: Matrix3,
    pub analytic: Option<Matrix3>,
}

impl JacobianPair {
    /// `max |numeric − analytic| / max |analytic|`.
    pub fn relative_gap(&self) -> Option<f64> {
        let an = self.analytic?;
        let scale = an.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let gap = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max((self.numeric[i][j] - an[i][j]).abs()));
        Some(gap / scale)
    }
}

pub fn jacobian(point: &CriticalPoint) -> Result<JacobianPair, StabilityError> {
    if point.residual >= 1e-10 {
        return Err(StabilityError::NotCritical(point.residual));
    }
    let analytic = (point.flavor == Flavor::ModifiedCoflow && point.label == CriticalLabel::Tau0EqKappa)
        .then(|| analytic_jacobian(point.eps, point.kappa, point.gamma));
    Ok(JacobianPair {
        numeric: jacobian_fd(point),
        analytic,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    /// Unit vector, phase fixed so the largest entry is real and positive.
    pub vector: [Complex64; 3],
    /// `‖Av − λv‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigen3 {
    pub pairs: Vec<EigenPair>,
    /// Some eigenvalue has fewer independent eigenvectors than its
    /// multiplicity; the missing vectors repeat an available one.
    pub defective: bool,
}

pub fn frobenius(m: &Matrix3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

fn cubic_roots(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    // λ = t − c2/3 turns λ³ + c2λ² + c1λ + c0 into t³ + pt + q
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let roots = if disc > 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = std::f64::consts::TAU;
        [0.0, 1.0, 2.0].map(|k| Complex64::new(r * (theta - tau * k / 3.0).cos(), 0.0))
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let re = -(u + v) / 2.0;
        let im = 3f64.sqrt() / 2.0 * (u - v);
        [
            Complex64::new(u + v, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    };
    let poly = |z: Complex64| ((z + c2) * z + c1) * z + c0;
    let dpoly = |z: Complex64| (3.0 * z + 2.0 * c2) * z + c1;
    roots.map(|t| {
        let mut z = t - shift;
        for _ in 0..3 {
            let d = dpoly(z);
            if d.norm() < 1e-12 {
                break;
            }
            let step = poly(z) / d;
            if !step.is_finite() {
                break;
            }
            z -= step;
        }
        z
    })
}

fn complex_solve(mut a: [[Complex64; 3]; 3], mut b: [Complex64; 3]) -> Option<[Complex64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for k in col..3 {
                let t = a[col][k];
                a[r][k] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    let mut x = [Complex64::zero(); 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for k in i + 1..3 {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

fn normalize(v: [Complex64; 3]) -> [Complex64; 3] {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let big = v
        .iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = big.conj() / big.norm();
    v.map(|z| z * phase / n)
}

fn residual(m: &Matrix3, lambda: Complex64, v: &[Complex64; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let av: Complex64 = (0..3).map(|k| v[k] * m[i][k]).sum();
            (av - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Real null space of `m` by Gaussian elimination with full pivoting.
fn null_space(m: Matrix3, tol: f64) -> Vec<[f64; 3]> {
    let mut a = m;
    let mut cols = [0usize, 1, 2];
    let mut rank = 0;
    for step in 0..3 {
        let mut best = (step, step, 0.0);
        for (i, row) in a.iter().enumerate().skip(step) {
            for (j, x) in row.iter().enumerate().skip(step) {
                if x.abs() > best.2 {
                    best = (i, j, x.abs());
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        a.swap(step, best.0);
        for row in a.iter_mut() {
            row.swap(step, best.1);
        }
        cols.swap(step, best.1);
        for r in 0..3 {
            if r != step {
                let f = a[r][step] / a[step][step];
                for k in step..3 {
                    a[r][k] -= f * a[step][k];
                }
            }
        }
        rank += 1;
    }
    (rank..3)
        .map(|free| {
            let mut v = [0.0; 3];
            v[cols[free]] = 1.0;
            for piv in 0..rank {
                v[cols[piv]] = -a[piv][free] / a[piv][piv];
            }
            v
        })
        .collect()
}

/// Eigenpairs of a real 3×3 matrix: closed-form characteristic roots and
/// shifted inverse iteration for the vectors.
pub fn eigen3(m: &Matrix3) -> Eigen3 {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut values = cubic_roots(-tr, minors, -det).to_vec();
    values.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));

    let scale = frobenius(m).max(1e-300);
    let cluster_tol = 1e-7 * scale;
    let mut pairs = Vec::with_capacity(3);
    let mut defective = false;
    let mut i = 0;
    while i < 3 {
        let mut j = i + 1;
        while j < 3 && (values[j] - values[i]).norm() <= cluster_tol {
            j += 1;
        }
        let mult = j - i;
        if mult == 1 {
            let lambda = values[i];
            let sigma = lambda + Complex64::new(1e-10 * scale, 0.0);
            let shifted: [[Complex64; 3]; 3] = std::array::from_fn(|r| {
                std::array::from_fn(|c| Complex64::new(m[r][c], 0.0) - if r == c { sigma } else { Complex64::zero() })
            });
            let mut v = normalize([
                Complex64::new(1.0, 0.0),
                Complex64::new(0.618, 0.1),
                Complex64::new(0.414, -0.2),
            ]);
            for _ in 0..4 {
                match complex_solve(shifted, v) {
                    Some(x) if x.iter().all(|z| z.is_finite()) => v = normalize(x),
                    _ => break,
                }
            }
            pairs.push(EigenPair {
                value: lambda,
                vector: v,
                residual: residual(m, lambda, &v),
            });
        } else {
            let lambda_re = values[i..j].iter().map(|z| z.re).sum::<f64>() / mult as f64;
            let lambda = Complex64::new(lambda_re, 0.0);
            let shifted: Matrix3 = std::array::from_fn(|r| std::array::from_fn(|c| m[r][c] - if r == c { lambda_re } else { 0.0 }));
            let mut basis = null_space(shifted, 1e-6 * scale);
            if basis.len() < mult {
                defective = true;
            }
            if basis.is_empty() {
                basis.push([1.0, 0.0, 0.0]);
            }
            for k in 0..mult {
                let b = basis[k.min(basis.len() - 1)];
                let v = normalize(b.map(|x| Complex64::new(x, 0.0)));
                pairs.push(EigenPair {
                    value: lambda,
                    vector: v,
                    residual: residual(m, lambda, &v),
                });
            }
        }
        i = j;
    }
    Eigen3 { pairs, defective }
}

/// Angle between two real directions (sign-insensitive).
pub fn angle_between(u: [f64; 3], v: [f64; 3]) -> f64 {
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let n = |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let dot = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).abs();
    n(cross).atan2(dot)
}

/// Continued-fraction approximation with denominator at most `max_den`.
pub fn rationalize(x: f64, max_den: i64) -> Scalar {
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i64;
        let (h2, k2) = (ai.saturating_mul(h1).saturating_add(h0), ai.saturating_mul(k1).saturating_add(k0));
        if k2 > max_den || k2 <= 0 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 == 0 {
        return exact(x);
    }
    rat(h1, k1)
}

/// Rational direction proportional to `v` (largest entry scaled to ±1) if
/// one with small denominators fits to `1e-9`.
pub fn rational_direction(v: [f64; 3]) -> Option<[Scalar; 3]> {
    let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big == 0.0 {
        return None;
    }
    let w = v.map(|x| x / big);
    let r = w.map(|x| rationalize(x, 1000));
    (0..3).all(|i| (to_f64(&r[i]) - w[i]).abs() < 1e-9).then_some(r)
}

/// Derivative of `ψ(a, b, q)` along `δa = sa·A`, `δb = sb·B`,
/// `δq = 2c·sc·C`; at the nearly-G2 points `c·sc = 1`, so `δq = 2C`.
pub fn variation_to_form(point: &CriticalPoint, direction: &[Scalar; 3]) -> Result<InvariantForm, StabilityError> {
    if direction.iter().all(|x| x.is_zero()) {
        return Err(StabilityError::ZeroDirection);
    }
    let p = &point.params;
    let (a, b, q, e) = (p.a(), p.b(), p.q(), p.eps().as_scalar());
    let s = match point.eps {
        Orientation::Plus => &point.kappa_eff / int(12),
        Orientation::Minus => &point.kappa_eff / int(4),
    };
    let da = &s * &direction[0];
    let db = &s * &direction[1];
    let dq = int(2) * &direction[2];
    let e12w3 = InvariantForm::etas_wedge(&[1, 2], Horizontal::Omega3);
    let d_a = horizontal_pair(&(-(&e * b * q))) - e12w3.scale(&(int(2) * a * q));
    let d_b = horizontal_pair(&(-(&e * a * q)));
    let d_q = InvariantForm::vol_n().scale(&(int(2) * q)) - horizontal_pair(&(&e * a * b)) - e12w3.scale(&(a * a));
    Ok(&(&d_a.scale(&da) + &d_b.scale(&db)) + &d_q.scale(&dq))
}

/// `Ψ₊ = η₂₃∧ω₁ + η₃₁∧ω₂ − 2η₁₂∧ω₃` and
/// `Ψ₋ = 2vol_N − (η₂₃∧ω₁ + η₃₁∧ω₂ + η₁₂∧ω₃)`.
pub fn psi_destabilizing(eps: Orientation) -> InvariantForm {
    let e12w3 = InvariantForm::etas_wedge(&[1, 2], Horizontal::Omega3);
    match eps {
        Orientation::Plus => horizontal_pair(&int(1)) - e12w3.scale(&int(2)),
        Orientation::Minus => InvariantForm::vol_n().scale(&int(2)) - horizontal_pair(&int(1)) - e12w3,
    }
}

fn eta_omega_sum(c1: i64, c2: i64, c3: i64) -> InvariantForm {
    InvariantForm::etas_wedge(&[1], Horizontal::Omega1).scale(&int(c1))
        + InvariantForm::etas_wedge(&[2], Horizontal::Omega2).scale(&int(c2))
        + InvariantForm::etas_wedge(&[3], Horizontal::Omega3).scale(&int(c3))
}

/// Printed `⋆Ψ±` at the `τ₀ = κ` point.
pub fn star_psi_printed(eps: Orientation, kappa: &Scalar) -> InvariantForm {
    match eps {
        Orientation::Plus => eta_omega_sum(1, 1, -2).scale(&(int(5) * kappa / int(12))),
        Orientation::Minus => {
            (eta_omega_sum(1, 1, 1) - InvariantForm::etas(&[1, 2, 3]).scale(&int(2))).scale(&(kappa / int(4)))
        }
    }
}

/// Printed primitive `β` with `dβ = Ψ±`.
pub fn psi_primitive(eps: Orientation) -> InvariantForm {
    match eps {
        Orientation::Plus => eta_omega_sum(-1, -1, 2).scale(&rat(1, 4)),
        Orientation::Minus => {
            (InvariantForm::etas(&[1, 2, 3]).scale(&int(2)) - eta_omega_sum(1, 1, 1)).scale(&rat(1, 6))
        }
    }
}

/// `d⋆Ψ± = λ Ψ±` with `λ = −(5/3)κ` or `−(3/2)κ`.
pub fn psi_dstar_eigenvalue(eps: Orientation, kappa: &Scalar) -> Scalar {
    match eps {
        Orientation::Plus => rat(-5, 3) * kappa,
        Orientation::Minus => rat(-3, 2) * kappa,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

fn first_difference(lhs: &InvariantForm, rhs: &InvariantForm) -> Option<String> {
    let diff = lhs - rhs;
    let first = diff.terms().next().map(|(m, _)| m);
    first.map(|m| {
        format!(
            "{m}: {} vs {}",
            format_scalar(&lhs.coefficient(m)),
            format_scalar(&rhs.coefficient(m))
        )
    })
}

fn compare(name: &str, lhs: &InvariantForm, rhs: &InvariantForm) -> IdentityCheck {
    let detail = first_difference(lhs, rhs);
    IdentityCheck {
        name: name.to_string(),
        passed: detail.is_none(),
        detail,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PsiIdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl PsiIdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Exact checks on `Ψ±` at the `τ₀ = κ` point: `Ω⁴₂₇` wedge certificate,
/// exactness through the printed primitive, the `d⋆` eigenvalue and the
/// printed `⋆Ψ±`.
pub fn verify_psi_identities(eps: Orientation, kappa: &Scalar) -> Result<PsiIdentityReport, StabilityError> {
    if !kappa.is_positive() {
        return Err(StabilityError::InvalidKappa(to_f64(kappa)));
    }
    let params = nearly_g2_params(eps, kappa);
    let ans = G2Ansatz::build(params.clone()).expect("co-closed");
    let psi_d = psi_destabilizing(eps);
    let star = psi_d.star(&params)?;
    let zero = InvariantForm::zero();
    let checks = vec![
        compare("omega27-wedge-phi", &star.wedge(ans.phi()), &zero),
        compare("omega27-wedge-psi", &star.wedge(ans.psi()), &zero),
        compare("exact-primitive", &psi_primitive(eps).d(), &psi_d),
        compare(
            "dstar-eigenvalue",
            &psi_d.dstar(&params)?,
            &psi_d.scale(&psi_dstar_eigenvalue(eps, kappa)),
        ),
        compare("star-closed-form", &star, &star_psi_printed(eps, kappa)),
    ];
    Ok(PsiIdentityReport { checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Destabilizing,
    Kernel,
    StableDirection,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Destabilizing => "destabilizing",
            Verdict::Kernel => "kernel",
            Verdict::StableDirection => "stable-direction",
        })
    }
}

fn ser_scalar<S: Serializer>(x: &Scalar, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_scalar(x))
}

/// Sign of the quadratic form on a `d⋆`-eigenform with eigenvalue `κμ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowVerdict {
    #[serde(serialize_with = "ser_scalar")]
    pub mu: Scalar,
    #[serde(serialize_with = "ser_scalar")]
    pub gamma: Scalar,
    pub flavor: Flavor,
    pub verdict: Verdict,
    /// `(μ + 1)(μ + 5(γ − 1)/2)` for the modified flow, `(μ + 1)²` for the
    /// normalized one (the `−κ²|η|²` prefactor dropped).
    #[serde(serialize_with = "ser_scalar")]
    pub value: Scalar,
}

pub fn window_verdict(mu: &Scalar, gamma: &Scalar, flavor: Flavor) -> Result<WindowVerdict, StabilityError> {
    let one = int(1);
    let value = match flavor {
        Flavor::ModifiedCoflow => {
            if gamma <= &int(2) {
                return Err(StabilityError::InvalidGamma(format_scalar(gamma)));
            }
            (mu + &one) * (mu + rat(5, 2) * (gamma - &one))
        }
        Flavor::NormalizedCoflow => (mu + &one) * (mu + &one),
    };
    let verdict = if value.is_zero() {
        Verdict::Kernel
    } else if value.is_negative() {
        Verdict::Destabilizing
    } else {
        Verdict::StableDirection
    };
    Ok(WindowVerdict {
        mu: mu.clone(),
        gamma: gamma.clone(),
        flavor,
        verdict,
        value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenValueEntry {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointEntry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowEntry {
    pub mu: f64,
    #[serde(serialize_with = "ser_scalar")]
    pub mu_exact: Scalar,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub flavor: Flavor,
    pub epsilon: Orientation,
    pub kappa: f64,
    pub gamma: f64,
    pub label: CriticalLabel,
    pub point: PointEntry,
    pub tau0: f64,
    pub jacobian: Matrix3,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_jacobian: Option<Matrix3>,
    pub eigenvalues: Vec<EigenValueEntry>,
    /// Real parts of the unit eigenvectors.
    pub eigenvectors: Vec<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvectors_imag: Option<Vec<[f64; 3]>>,
    pub index: usize,
    pub marginal: usize,
    pub defective: bool,
    /// Real unit eigenvectors with positive eigenvalue.
    pub unstable_directions: Vec<[f64; 3]>,
    /// Angle between the computed unstable direction and the printed one,
    /// where the latter exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub printed_unstable_angle: Option<f64>,
    pub unstable_form: Option<InvariantForm>,
    pub window: Option<WindowEntry>,
}

impl SpectralReport {
    pub fn eigenvalue_nearest(&self, target: f64) -> Option<&EigenValueEntry> {
        self.eigenvalues
            .iter()
            .min_by(|x, y| ((x.re - target).abs() + x.im.abs()).total_cmp(&((y.re - target).abs() + y.im.abs())))
    }
}

/// Spectrum of the linearization within the family, index, and the 4-form
/// and window verdict for the leading unstable direction.
pub fn classify(point: &CriticalPoint) -> Result<SpectralReport, StabilityError> {
    let jac = jacobian(point)?;
    let j = jac.numeric;
    let eig = eigen3(&j);
    let scale = frobenius(&j);
    let marginal_tol = 1e-9 * scale;
    let index = eig.pairs.iter().filter(|p| p.value.re > marginal_tol).count();
    let marginal = eig.pairs.iter().filter(|p| p.value.re.abs() <= marginal_tol).count();

    let real_vec = |p: &EigenPair| p.vector.map(|z| z.re);
    let unstable: Vec<&EigenPair> = eig.pairs.iter().filter(|p| p.value.re > marginal_tol).collect();
    let unstable_directions: Vec<[f64; 3]> = unstable
        .iter()
        .filter(|p| p.value.im.abs() <= marginal_tol)
        .map(|p| real_vec(p))
        .collect();

    let printed_unstable_angle = (point.flavor == Flavor::ModifiedCoflow
        && point.label == CriticalLabel::Tau0EqKappa
        && unstable_directions.len() == 1)
        .then(|| angle_between(unstable_directions[0], printed_eigenvectors(point.eps)[0]));

    let leading = unstable_directions.first().copied();
    let unstable_form = match leading.and_then(rational_direction) {
        Some(dir) => Some(variation_to_form(point, &dir)?),
        None => None,
    };
    // the window describes d*-eigenforms at a point with τ₀ = κ
    let window = match unstable_form.as_ref().filter(|_| point.label == CriticalLabel::Tau0EqKappa) {
        Some(form) => {
            let kappa = exact(point.kappa);
            match form.dstar(&point.params)?.ratio_to(form) {
                Some(lambda) if point.flavor == Flavor::NormalizedCoflow || point.gamma > 2.0 => {
                    let mu = lambda / &kappa;
                    let w = window_verdict(&mu, &exact(point.gamma), point.flavor)?;
                    Some(WindowEntry {
                        mu: to_f64(&mu),
                        mu_exact: mu,
                        verdict: w.verdict,
                    })
                }
                _ => None,
            }
        }
        None => None,
    };

    let any_complex = eig.pairs.iter().any(|p| p.value.im != 0.0);
    Ok(SpectralReport {
        flavor: point.flavor,
        epsilon: point.eps,
        kappa: point.kappa,
        gamma: point.gamma,
        label: point.label,
        point: PointEntry {
            a: point.state[0],
            b: point.state[1],
            c: point.state[2],
        },
        tau0: point.tau0,
        jacobian: j,
        analytic_jacobian: jac.analytic,
        eigenvalues: eig
            .pairs
            .iter()
            .map(|p| EigenValueEntry {
                re: p.value.re,
                im: p.value.im,
                residual: p.residual,
            })
            .collect(),
        eigenvectors: eig.pairs.iter().map(real_vec).collect(),
        eigenvectors_imag: any_complex.then(|| eig.pairs.iter().map(|p| p.vector.map(|z| z.im)).collect()),
        index,
        marginal,
        defective: eig.defective,
        unstable_directions,
        printed_unstable_angle,
        unstable_form,
        window,
    })
}

/// Keys of the monomials spanned by the ansatz 4-forms.
pub fn ansatz_four_form_keys() -> Vec<String> {
    Monomial::all().filter(|m| m.degree() == 4).map(|m| m.key()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modified_points(eps: Orientation) -> Vec<CriticalPoint> {
        find_critical_points(Flavor::ModifiedCoflow, 4.0, 3.0, eps).unwrap()
    }

    #[test]
    fn modified_minus_points() {
        let pts = modified_points(Orientation::Minus);
        assert_eq!(pts.len(), 2);
        for (p, expected) in pts.iter().zip([1.0, 0.5]) {
            for x in p.state {
                assert!((x - expected).abs() < 1e-12);
            }
        }
        assert!((pts[1].tau0 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_plus_point() {
        let pts = find_critical_points(Flavor::NormalizedCoflow, 4.0, 0.0, Orientation::Plus).unwrap();
        assert_eq!(pts.len(), 1);
        let s = pts[0].state;
        assert!((s[0] - 0.6).abs() < 1e-12 && (s[1] - 0.6).abs() < 1e-12);
        assert!((s[2] - 0.6 * 5f64.sqrt()).abs() < 1e-12);
        assert!((pts[0].tau0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bad_gamma_rejected() {
        assert!(matches!(
            find_critical_points(Flavor::ModifiedCoflow, 4.0, 2.0, Orientation::Plus),
            Err(StabilityError::InvalidGamma(_))
        ));
        assert!(find_critical_points(Flavor::NormalizedCoflow, -1.0, 3.0, Orientation::Plus).is_err());
    }

    #[test]
    fn printed_matrices_at_gamma_three() {
        let m = analytic_jacobian(Orientation::Plus, 1.0, 3.0);
        let expected = [[-14.0, -23.0, 28.0], [-46.0, 9.0, 28.0], [14.0, 7.0, -30.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] * 72.0 / 5.0 - expected[i][j]).abs() < 1e-12);
            }
        }
        let m = analytic_jacobian(Orientation::Minus, 1.0, 3.0);
        let expected = [[-70.0, 13.0, 52.0], [26.0, 5.0, -36.0], [26.0, -9.0, -22.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] * 8.0 - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn printed_eigenvectors_are_eigenvectors() {
        // M v = λ v on the unscaled printed matrices
        let m = analytic_jacobian(Orientation::Plus, 1.0, 3.0).map(|r| r.map(|x| x * 72.0 / 5.0));
        let v = [-1.0, 2.0, 0.0];
        let mv: Vec<f64> = (0..3).map(|i| (0..3).map(|k| m[i][k] * v[k]).sum()).collect();
        for i in 0..3 {
            assert!((mv[i] - 32.0 * v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen3_identity_and_diagonal() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let e = eigen3(&id);
        assert!(!e.defective);
        assert!(e.pairs.iter().all(|p| (p.value.re - 1.0).abs() < 1e-12 && p.residual < 1e-12));
        let jordan = [[2.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        assert!(eigen3(&jordan).defective);
    }

    #[test]
    fn eigen3_complex_pair() {
        let rot = [[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, -1.0]];
        let e = eigen3(&rot);
        let mut ims: Vec<f64> = e.pairs.iter().map(|p| p.value.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 2.0).abs() < 1e-12 && ims[1].abs() < 1e-12 && (ims[2] - 2.0).abs() < 1e-12);
        assert!(e.pairs.iter().all(|p| p.residual < 1e-10 * frobenius(&rot)));
    }

    #[test]
    fn rationalize_recovers_small_fractions() {
        assert_eq!(rationalize(-0.5, 1000), rat(-1, 2));
        assert_eq!(rationalize(0.75, 1000), rat(3, 4));
        assert!(rational_direction([1.0, std::f64::consts::PI, 0.0]).is_none());
        let d = rational_direction([0.0, -4.0 / 17f64.sqrt(), 1.0 / 17f64.sqrt()]).unwrap();
        assert_eq!(d, [int(0), int(1), rat(-1, 4)]);
    }

    #[test]
    fn window_examples() {
        let v = window_verdict(&rat(-5, 3), &int(3), Flavor::ModifiedCoflow).unwrap();
        assert_eq!(v.verdict, Verdict::Destabilizing);
        for flavor in [Flavor::ModifiedCoflow, Flavor::NormalizedCoflow] {
            assert_eq!(window_verdict(&int(-1), &int(3), flavor).unwrap().verdict, Verdict::Kernel);
        }
        let v = window_verdict(&rat(-3, 2), &int(3), Flavor::NormalizedCoflow).unwrap();
        assert_eq!(v.verdict, Verdict::StableDirection);
        assert!(window_verdict(&int(-2), &int(2), Flavor::ModifiedCoflow).is_err());
    }

    #[test]
    fn psi_identities_hold() {
        for eps in Orientation::BOTH {
            let r = verify_psi_identities(eps, &int(4)).unwrap();
            assert!(r.all_passed(), "{r:?}");
        }
    }
}
