//! Multiplicity counts for the `d⋆` spectrum on exact 4-forms of the round
//! 7-sphere and the resulting index lower bound for the modified co-flow.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::scalar::{format_scalar, int, rat, Scalar};
use crate::dynamics::Flavor;
use crate::stability::{window_verdict, StabilityError, Verdict};

/// `τ₀` of the unit round sphere.
pub const SPHERE_KAPPA: i64 = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SphereError {
    #[error("{what}: {num} is not divisible by {den}")]
    InexactDivision { what: &'static str, num: BigUint, den: BigUint },
    #[error("invalid range: l_min = {0} > l_max = {1}")]
    InvalidRange(u32, u32),
    #[error("gamma must exceed 2, got {0}")]
    InvalidGamma(String),
}

fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

fn exact_div(num: BigUint, den: BigUint, what: &'static str) -> Result<BigUint, SphereError> {
    let (q, r) = num.div_rem(&den);
    if r.is_zero() {
        Ok(q)
    } else {
        Err(SphereError::InexactDivision { what, num, den })
    }
}

fn big(n: u32) -> BigUint {
    BigUint::from(n)
}

/// `d = (l+7)! / ((3!)² (l+4) l!)`.
pub fn multiplicity_d(l: u32) -> Result<BigUint, SphereError> {
    exact_div(factorial(l + 7), big(36) * big(l + 4) * factorial(l), "d")
}

/// `d₀ = 2 (l+7)! (l+5) / (6! (l+2)!)`.
pub fn multiplicity_d0(l: u32) -> Result<BigUint, SphereError> {
    exact_div(big(2) * factorial(l + 7) * big(l + 5), big(720) * factorial(l + 2), "d0")
}

/// `d₁ = 2 (l+7)! (l+4) / (5! l! (l+2)(l+6))`.
pub fn multiplicity_d1(l: u32) -> Result<BigUint, SphereError> {
    exact_div(
        big(2) * factorial(l + 7) * big(l + 4),
        big(120) * factorial(l) * big(l + 2) * big(l + 6),
        "d1",
    )
}

/// `d − d₀ − d₁`, possibly negative.
pub fn dim_difference(l: u32) -> Result<BigInt, SphereError> {
    Ok(BigInt::from(multiplicity_d(l)?) - BigInt::from(multiplicity_d0(l)?) - BigInt::from(multiplicity_d1(l)?))
}

/// `max(0, d − d₀ − d₁)`.
pub fn dim_lower(l: u32) -> Result<BigUint, SphereError> {
    let diff = dim_difference(l)?;
    Ok(if diff.is_positive() {
        diff.to_biguint().expect("positive")
    } else {
        BigUint::zero()
    })
}

/// `(1/120) (l² + 5l − 16) / ((l+4)(l+6)) · (l+7)!`, the closed form shown
/// alongside the bound. It does not agree with `d − d₀ − d₁` and is kept
/// only for comparison.
pub fn displayed_closed_form(l: u32) -> Scalar {
    let l = i64::from(l);
    let fact = Scalar::from_integer(BigInt::from(factorial(l as u32 + 7)));
    rat(l * l + 5 * l - 16, 120 * (l + 4) * (l + 6)) * fact
}

/// The eigenvalue pair `∓(4 + l)`.
pub fn sphere_eigenvalue(l: u32) -> (i64, i64) {
    let v = 4 + i64::from(l);
    (-v, v)
}

/// `μ = −(4 + l)/4`, the ratio to `κ = 4`.
pub fn sphere_mu(l: u32) -> Scalar {
    rat(-(4 + i64::from(l)), SPHERE_KAPPA)
}

fn ser_big<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn ser_bigint<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn ser_scalar<S: Serializer>(x: &Scalar, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_scalar(x))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultiplicityRecord {
    pub l: u32,
    pub eigenvalue: i64,
    #[serde(serialize_with = "ser_big")]
    pub d: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub d0: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub d1: BigUint,
    /// `d − d₀ − d₁` before clamping.
    #[serde(serialize_with = "ser_bigint")]
    pub difference: BigInt,
    #[serde(serialize_with = "ser_big")]
    pub lower_bound: BigUint,
    /// Flagged comparison column; disagrees with `difference`.
    #[serde(serialize_with = "ser_scalar")]
    pub displayed_closed_form: Scalar,
}

impl MultiplicityRecord {
    pub fn compute(l: u32) -> Result<Self, SphereError> {
        let (d, d0, d1) = (multiplicity_d(l)?, multiplicity_d0(l)?, multiplicity_d1(l)?);
        let difference = BigInt::from(d.clone()) - BigInt::from(d0.clone()) - BigInt::from(d1.clone());
        let lower_bound = if difference.is_positive() {
            difference.to_biguint().expect("positive")
        } else {
            BigUint::zero()
        };
        Ok(MultiplicityRecord {
            l,
            eigenvalue: sphere_eigenvalue(l).0,
            d,
            d0,
            d1,
            difference,
            lower_bound,
            displayed_closed_form: displayed_closed_form(l),
        })
    }

    /// Whether `μ = −(4 + l)/4` lies in the destabilizing window for `γ`.
    pub fn in_window(&self, gamma: &Scalar) -> Result<bool, SphereError> {
        in_window(self.l, gamma)
    }
}

pub fn in_window(l: u32, gamma: &Scalar) -> Result<bool, SphereError> {
    match window_verdict(&sphere_mu(l), gamma, Flavor::ModifiedCoflow) {
        Ok(v) => Ok(v.verdict == Verdict::Destabilizing),
        Err(StabilityError::InvalidGamma(g)) => Err(SphereError::InvalidGamma(g)),
        Err(other) => unreachable!("window verdict failed: {other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexBound {
    #[serde(serialize_with = "ser_big")]
    pub total: BigUint,
    /// `(l, lower bound)` for each `l` in the window.
    pub contributions: Vec<(u32, String)>,
    pub records: Vec<MultiplicityRecord>,
}

/// Sum of `dim_lower(l)` over `l_min ≤ l ≤ l_max` whose `μ` lies in the
/// window `−1 > μ > −(5/2)(γ − 1)`.
pub fn index_lower_bound(l_min: u32, l_max: u32, gamma: &Scalar) -> Result<IndexBound, SphereError> {
    if l_min > l_max {
        return Err(SphereError::InvalidRange(l_min, l_max));
    }
    if gamma <= &int(2) {
        return Err(SphereError::InvalidGamma(format_scalar(gamma)));
    }
    let mut total = BigUint::zero();
    let mut contributions = Vec::new();
    let mut records = Vec::new();
    for l in l_min..=l_max {
        let rec = MultiplicityRecord::compute(l)?;
        if rec.in_window(gamma)? {
            total += &rec.lower_bound;
            contributions.push((l, rec.lower_bound.to_string()));
        }
        records.push(rec);
    }
    Ok(IndexBound {
        total,
        contributions,
        records,
    })
}
