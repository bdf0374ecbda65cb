//! Exact exterior algebra on invariant forms.
//!
//! The algebra is generated by the vertical coframe `η₁, η₂, η₃` and the
//! horizontal forms `ω₁, ω₂, ω₃, vol_N` of a 3-Sasakian 7-manifold. Every
//! invariant form is a rational combination of the 40 monomials
//! `η_S ∧ h` with `S ⊆ {1,2,3}` and `h ∈ {1, ω₁, ω₂, ω₃, vol_N}`.
//!
//! Relations:
//!
//! * `ω_i ∧ ω_j = 2 δ_ij vol_N`, `ω_i ∧ vol_N = 0`;
//! * `dη_i = −2 η_j∧η_k − 2 ω_i` for cyclic `(i, j, k)`;
//! * `dω_i = 2 η_k∧ω_j − 2 η_j∧ω_k`, `d vol_N = 0`.
//!
//! The metric `a²(η₁² + η₂²) + b²η₃² + c² g_N` is carried by
//! [`GeometryParams`], parametrized by `q = c²` so every coefficient stays
//! rational.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::{format_scalar, int, parse_scalar, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormError {
    #[error("form mixes degrees {0:?}")]
    MixedDegree(Vec<usize>),
    #[error("expected a form of degree {expected}, got degree {found}")]
    WrongDegree { expected: usize, found: usize },
    #[error("forms have different degrees ({0} and {1})")]
    DegreeMismatch(usize, usize),
    #[error("invalid geometry parameters: {0}")]
    InvalidParams(String),
    #[error("unknown monomial key {0:?}")]
    BadKey(String),
    #[error("bad coefficient {0:?}")]
    BadCoefficient(String),
}

/// Horizontal factor of a monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Horizontal {
    Unit,
    Omega1,
    Omega2,
    Omega3,
    VolN,
}

impl Horizontal {
    pub const ALL: [Horizontal; 5] = [
        Horizontal::Unit,
        Horizontal::Omega1,
        Horizontal::Omega2,
        Horizontal::Omega3,
        Horizontal::VolN,
    ];

    pub fn degree(self) -> usize {
        match self {
            Horizontal::Unit => 0,
            Horizontal::VolN => 4,
            _ => 2,
        }
    }

    /// `ω_i` for `i ∈ {1,2,3}`.
    pub fn omega(i: u8) -> Horizontal {
        match i {
            1 => Horizontal::Omega1,
            2 => Horizontal::Omega2,
            3 => Horizontal::Omega3,
            _ => panic!("omega index {i} out of range"),
        }
    }

    fn omega_index(self) -> Option<u8> {
        match self {
            Horizontal::Omega1 => Some(1),
            Horizontal::Omega2 => Some(2),
            Horizontal::Omega3 => Some(3),
            _ => None,
        }
    }

    /// Hodge complement inside the horizontal 4-plane.
    fn complement(self) -> Horizontal {
        match self {
            Horizontal::Unit => Horizontal::VolN,
            Horizontal::VolN => Horizontal::Unit,
            other => other,
        }
    }

    /// Product of horizontal factors as `(multiplier, result)`.
    fn mul(self, other: Horizontal) -> Option<(i64, Horizontal)> {
        match (self, other) {
            (Horizontal::Unit, h) | (h, Horizontal::Unit) => Some((1, h)),
            (x, y) if x == y && x.omega_index().is_some() => Some((2, Horizontal::VolN)),
            _ => None,
        }
    }

    fn key(self) -> &'static str {
        match self {
            Horizontal::Unit => "",
            Horizontal::Omega1 => "w1",
            Horizontal::Omega2 => "w2",
            Horizontal::Omega3 => "w3",
            Horizontal::VolN => "vol",
        }
    }
}

/// `η_S ∧ h` with `S` stored as a bitmask (bit `i-1` for `η_i`) in
/// ascending index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    vertical: u8,
    horizontal: Horizontal,
}

impl Monomial {
    pub const TOP: Monomial = Monomial {
        vertical: 0b111,
        horizontal: Horizontal::VolN,
    };

    pub const UNIT: Monomial = Monomial {
        vertical: 0,
        horizontal: Horizontal::Unit,
    };

    pub fn new(vertical_mask: u8, horizontal: Horizontal) -> Monomial {
        assert!(vertical_mask < 8, "vertical mask {vertical_mask:#b} out of range");
        Monomial {
            vertical: vertical_mask,
            horizontal,
        }
    }

    /// Canonical monomial for `η_{i₁} ∧ … ∧ η_{i_k} ∧ h` in the given order,
    /// together with the sign of the reordering. `None` if an index repeats.
    pub fn from_etas(indices: &[u8], horizontal: Horizontal) -> Option<(i64, Monomial)> {
        let mut mask = 0u8;
        let mut sign = 1;
        for (pos, &i) in indices.iter().enumerate() {
            assert!((1..=3).contains(&i), "eta index {i} out of range");
            let bit = 1 << (i - 1);
            if mask & bit != 0 {
                return None;
            }
            mask |= bit;
            if indices[..pos].iter().filter(|&&j| j > i).count() % 2 == 1 {
                sign = -sign;
            }
        }
        Some((sign, Monomial::new(mask, horizontal)))
    }

    /// All 40 monomials.
    pub fn all() -> impl Iterator<Item = Monomial> {
        (0u8..8).flat_map(|v| Horizontal::ALL.into_iter().map(move |h| Monomial::new(v, h)))
    }

    pub fn vertical_mask(self) -> u8 {
        self.vertical
    }

    pub fn horizontal(self) -> Horizontal {
        self.horizontal
    }

    pub fn vertical_indices(self) -> Vec<u8> {
        (1..=3u8).filter(|i| self.vertical & (1 << (i - 1)) != 0).collect()
    }

    pub fn degree(self) -> usize {
        self.vertical.count_ones() as usize + self.horizontal.degree()
    }

    fn complement(self) -> Monomial {
        Monomial::new(!self.vertical & 0b111, self.horizontal.complement())
    }

    /// Wedge product of two monomials as `(integer multiplier, monomial)`.
    pub fn wedge(self, other: Monomial) -> Option<(i64, Monomial)> {
        if self.vertical & other.vertical != 0 {
            return None;
        }
        let (mult, h) = self.horizontal.mul(other.horizontal)?;
        // Horizontal factors are even, so only the η's need reordering.
        let mut swaps = 0;
        for j in 0..3 {
            if other.vertical & (1 << j) != 0 {
                swaps += (self.vertical >> (j + 1)).count_ones();
            }
        }
        let sign = if swaps % 2 == 0 { 1 } else { -1 };
        Some((sign * mult, Monomial::new(self.vertical | other.vertical, h)))
    }

    /// Key such as `e23^w1`, `e123^vol`, `w2` or `1`.
    pub fn key(self) -> String {
        let mut out = String::new();
        if self.vertical != 0 {
            out.push('e');
            for i in self.vertical_indices() {
                out.push(char::from(b'0' + i));
            }
        }
        let h = self.horizontal.key();
        if !h.is_empty() {
            if !out.is_empty() {
                out.push('^');
            }
            out.push_str(h);
        }
        if out.is_empty() {
            out.push('1');
        }
        out
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for Monomial {
    type Err = FormError;

    /// Accepts canonical keys only (ascending η indices).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FormError::BadKey(s.to_string());
        if s == "1" {
            return Ok(Monomial::UNIT);
        }
        let (vertical, horizontal) = match s.split_once('^') {
            Some((v, h)) => (Some(v), Some(h)),
            None if s.starts_with('e') => (Some(s), None),
            None => (None, Some(s)),
        };
        let mut mask = 0u8;
        if let Some(v) = vertical {
            let digits = v.strip_prefix('e').ok_or_else(bad)?;
            let mut last = 0u8;
            if digits.is_empty() {
                return Err(bad());
            }
            for c in digits.chars() {
                let i = c.to_digit(10).ok_or_else(bad)? as u8;
                if !(1..=3).contains(&i) || i <= last {
                    return Err(bad());
                }
                last = i;
                mask |= 1 << (i - 1);
            }
        }
        let h = match horizontal {
            None => Horizontal::Unit,
            Some("w1") => Horizontal::Omega1,
            Some("w2") => Horizontal::Omega2,
            Some("w3") => Horizontal::Omega3,
            Some("vol") => Horizontal::VolN,
            Some(_) => return Err(bad()),
        };
        Ok(Monomial::new(mask, h))
    }
}

/// Sign of the ansatz family; also fixes the orientation
/// `vol_ε = ε a² b q² η₁₂₃ ∧ vol_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Plus,
    Minus,
}

impl Orientation {
    pub const BOTH: [Orientation; 2] = [Orientation::Plus, Orientation::Minus];

    pub fn sign(self) -> i64 {
        match self {
            Orientation::Plus => 1,
            Orientation::Minus => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.sign() as f64
    }

    pub fn as_scalar(self) -> Scalar {
        int(self.sign())
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Plus => "+1",
            Orientation::Minus => "-1",
        })
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+1" | "1" | "+" | "plus" => Ok(Orientation::Plus),
            "-1" | "-" | "minus" => Ok(Orientation::Minus),
            other => Err(format!("epsilon must be +1 or -1, got {other:?}")),
        }
    }
}

impl Serialize for Orientation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i64(self.sign())
    }
}

impl<'de> Deserialize<'de> for Orientation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match i64::deserialize(deserializer)? {
            1 => Ok(Orientation::Plus),
            -1 => Ok(Orientation::Minus),
            other => Err(D::Error::custom(format!("epsilon must be ±1, got {other}"))),
        }
    }
}

/// One member `(a, b, q = c², ε)` of the ansatz family.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    a: Scalar,
    b: Scalar,
    q: Scalar,
    eps: Orientation,
}

impl GeometryParams {
    pub fn new(a: Scalar, b: Scalar, q: Scalar, eps: Orientation) -> Result<Self, FormError> {
        for (name, v) in [("a", &a), ("b", &b), ("q", &q)] {
            if !v.is_positive() {
                return Err(FormError::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        Ok(GeometryParams { a, b, q, eps })
    }

    /// Convenience constructor from a rational `c` (so `q = c²`).
    pub fn from_abc(a: Scalar, b: Scalar, c: Scalar, eps: Orientation) -> Result<Self, FormError> {
        if !c.is_positive() {
            return Err(FormError::InvalidParams(format!("c = {c} must be positive")));
        }
        let q = &c * &c;
        GeometryParams::new(a, b, q, eps)
    }

    pub fn a(&self) -> &Scalar {
        &self.a
    }

    pub fn b(&self) -> &Scalar {
        &self.b
    }

    pub fn q(&self) -> &Scalar {
        &self.q
    }

    pub fn eps(&self) -> Orientation {
        self.eps
    }

    /// Coefficient of `η₁₂₃ ∧ vol_N` in the Riemannian volume form.
    pub fn volume_coefficient(&self) -> Scalar {
        self.eps.as_scalar() * &self.a * &self.a * &self.b * &self.q * &self.q
    }

    pub fn volume_form(&self) -> InvariantForm {
        InvariantForm::term(self.volume_coefficient(), Monomial::TOP)
    }

    /// `⟨m, m⟩`; distinct monomials are orthogonal.
    pub fn norm_sq(&self, m: Monomial) -> Scalar {
        let mut out = Scalar::one();
        for i in m.vertical_indices() {
            let scale = if i == 3 { &self.b } else { &self.a };
            out /= scale * scale;
        }
        match m.horizontal {
            Horizontal::Unit => {}
            // |ω_i|² = 2 for the base metric; each horizontal 2-form picks
            // up 1/c⁴ = 1/q² from the c² g_N scaling.
            Horizontal::Omega1 | Horizontal::Omega2 | Horizontal::Omega3 => {
                out *= int(2);
                out /= &self.q * &self.q;
            }
            Horizontal::VolN => {
                let q2 = &self.q * &self.q;
                out /= &q2 * &q2;
            }
        }
        out
    }
}

/// Rational combination of invariant monomials (not necessarily
/// homogeneous). Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InvariantForm {
    terms: BTreeMap<Monomial, Scalar>,
}

impl InvariantForm {
    pub fn zero() -> Self {
        InvariantForm::default()
    }

    pub fn constant(c: Scalar) -> Self {
        InvariantForm::term(c, Monomial::UNIT)
    }

    pub fn one() -> Self {
        InvariantForm::constant(Scalar::one())
    }

    pub fn term(c: Scalar, m: Monomial) -> Self {
        let mut f = InvariantForm::zero();
        f.add_term(m, c);
        f
    }

    pub fn monomial(m: Monomial) -> Self {
        InvariantForm::term(Scalar::one(), m)
    }

    /// `η_i`.
    pub fn eta(i: u8) -> Self {
        let (_, m) = Monomial::from_etas(&[i], Horizontal::Unit).expect("single index");
        InvariantForm::monomial(m)
    }

    /// `η_{i₁} ∧ … ∧ η_{i_k}` in the given order (sign included).
    pub fn etas(indices: &[u8]) -> Self {
        InvariantForm::etas_wedge(indices, Horizontal::Unit)
    }

    /// `η_{i₁} ∧ … ∧ η_{i_k} ∧ h` in the given order (sign included).
    pub fn etas_wedge(indices: &[u8], h: Horizontal) -> Self {
        match Monomial::from_etas(indices, h) {
            Some((sign, m)) => InvariantForm::term(int(sign), m),
            None => InvariantForm::zero(),
        }
    }

    pub fn omega(i: u8) -> Self {
        InvariantForm::monomial(Monomial::new(0, Horizontal::omega(i)))
    }

    pub fn vol_n() -> Self {
        InvariantForm::monomial(Monomial::new(0, Horizontal::VolN))
    }

    pub fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(Scalar::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn coefficient(&self, m: Monomial) -> Scalar {
        self.terms.get(&m).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, &Scalar)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// Degree of a homogeneous form; `Ok(None)` for the zero form.
    pub fn degree(&self) -> Result<Option<usize>, FormError> {
        let mut degrees: Vec<usize> = self.terms.keys().map(|m| m.degree()).collect();
        degrees.sort_unstable();
        degrees.dedup();
        match degrees.len() {
            0 => Ok(None),
            1 => Ok(Some(degrees[0])),
            _ => Err(FormError::MixedDegree(degrees)),
        }
    }

    /// Errors unless the form is zero or homogeneous of degree `k`.
    pub fn expect_degree(&self, k: usize) -> Result<(), FormError> {
        match self.degree()? {
            Some(found) if found != k => Err(FormError::WrongDegree { expected: k, found }),
            _ => Ok(()),
        }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        if c.is_zero() {
            return InvariantForm::zero();
        }
        InvariantForm {
            terms: self.terms.iter().map(|(m, x)| (*m, x * c)).collect(),
        }
    }

    pub fn wedge(&self, other: &InvariantForm) -> Self {
        let mut out = InvariantForm::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                if let Some((mult, m)) = m1.wedge(*m2) {
                    out.add_term(m, c1 * c2 * int(mult));
                }
            }
        }
        out
    }

    /// Exterior derivative from the structure equations and the graded
    /// Leibniz rule.
    pub fn d(&self) -> Self {
        let mut out = InvariantForm::zero();
        for (m, c) in &self.terms {
            out += &d_monomial(*m).scale(c);
        }
        out
    }

    /// Hodge star for the metric and orientation of `p`.
    pub fn star(&self, p: &GeometryParams) -> Result<Self, FormError> {
        self.degree()?;
        let vol = p.volume_coefficient();
        let mut out = InvariantForm::zero();
        for (m, c) in &self.terms {
            let dual = m.complement();
            let (mult, top) = m.wedge(dual).expect("complement is disjoint");
            debug_assert_eq!(top, Monomial::TOP);
            // m ∧ (x · dual) = |m|² vol  ⇒  x = |m|² vol / mult
            out.add_term(dual, c * p.norm_sq(*m) * &vol / int(mult));
        }
        Ok(out)
    }

    /// Pointwise inner product of two homogeneous forms of equal degree.
    pub fn inner(&self, other: &InvariantForm, p: &GeometryParams) -> Result<Scalar, FormError> {
        if let (Some(k1), Some(k2)) = (self.degree()?, other.degree()?) {
            if k1 != k2 {
                return Err(FormError::DegreeMismatch(k1, k2));
            }
        }
        Ok(self
            .terms
            .iter()
            .filter_map(|(m, c)| other.terms.get(m).map(|c2| c * c2 * p.norm_sq(*m)))
            .fold(Scalar::zero(), |acc, x| acc + x))
    }

    pub fn norm_sq(&self, p: &GeometryParams) -> Result<Scalar, FormError> {
        self.inner(self, p)
    }

    /// `d ∘ ⋆` on 4-forms.
    pub fn dstar(&self, p: &GeometryParams) -> Result<Self, FormError> {
        self.expect_degree(4)?;
        Ok(self.star(p)?.d())
    }

    /// Integral of a 7-form per unit `∫ η₁₂₃ ∧ vol_N`.
    pub fn total_integral(&self) -> Result<Scalar, FormError> {
        self.expect_degree(7)?;
        Ok(self.coefficient(Monomial::TOP))
    }

    /// If `self = λ · other` for a rational `λ`, returns `λ`.
    pub fn ratio_to(&self, other: &InvariantForm) -> Option<Scalar> {
        if other.is_zero() {
            return if self.is_zero() { Some(Scalar::zero()) } else { None };
        }
        let (m0, c0) = other.terms.iter().next()?;
        let lambda = self.coefficient(*m0) / c0;
        (self == &other.scale(&lambda)).then_some(lambda)
    }
}

/// Exterior derivative of the generators `η_i`, `ω_i`, `vol_N`.
fn d_generator(m: Monomial) -> InvariantForm {
    let cyc = |i: u8| -> (u8, u8) { (i % 3 + 1, (i + 1) % 3 + 1) };
    match (m.vertical_indices().as_slice(), m.horizontal) {
        ([i], Horizontal::Unit) => {
            let (j, k) = cyc(*i);
            InvariantForm::etas(&[j, k]).scale(&int(-2)) + InvariantForm::omega(*i).scale(&int(-2))
        }
        ([], h) if h.omega_index().is_some() => {
            let i = h.omega_index().unwrap_or_default();
            let (j, k) = cyc(i);
            InvariantForm::etas_wedge(&[k], Horizontal::omega(j)).scale(&int(2))
                - InvariantForm::etas_wedge(&[j], Horizontal::omega(k)).scale(&int(2))
        }
        ([], Horizontal::VolN) | ([], Horizontal::Unit) => InvariantForm::zero(),
        _ => unreachable!("{m} is not a generator"),
    }
}

fn d_monomial(m: Monomial) -> InvariantForm {
    let mut factors: Vec<Monomial> = m
        .vertical_indices()
        .into_iter()
        .map(|i| Monomial::new(1 << (i - 1), Horizontal::Unit))
        .collect();
    if m.horizontal != Horizontal::Unit {
        factors.push(Monomial::new(0, m.horizontal));
    }
    let product = |fs: &[Monomial]| {
        fs.iter()
            .fold(InvariantForm::one(), |acc, f| acc.wedge(&InvariantForm::monomial(*f)))
    };
    let mut out = InvariantForm::zero();
    let mut left_degree = 0;
    for (pos, f) in factors.iter().enumerate() {
        let term = product(&factors[..pos])
            .wedge(&d_generator(*f))
            .wedge(&product(&factors[pos + 1..]));
        let sign = if left_degree % 2 == 0 { 1 } else { -1 };
        out += &term.scale(&int(sign));
        left_degree += f.degree();
    }
    out
}

impl AddAssign<&InvariantForm> for InvariantForm {
    fn add_assign(&mut self, rhs: &InvariantForm) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, c.clone());
        }
    }
}

impl Add for InvariantForm {
    type Output = InvariantForm;

    fn add(mut self, rhs: InvariantForm) -> InvariantForm {
        self += &rhs;
        self
    }
}

impl Add<&InvariantForm> for &InvariantForm {
    type Output = InvariantForm;

    fn add(self, rhs: &InvariantForm) -> InvariantForm {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Neg for InvariantForm {
    type Output = InvariantForm;

    fn neg(self) -> InvariantForm {
        InvariantForm {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl Neg for &InvariantForm {
    type Output = InvariantForm;

    fn neg(self) -> InvariantForm {
        -self.clone()
    }
}

impl Sub for InvariantForm {
    type Output = InvariantForm;

    fn sub(self, rhs: InvariantForm) -> InvariantForm {
        self + (-rhs)
    }
}

impl Sub<&InvariantForm> for &InvariantForm {
    type Output = InvariantForm;

    fn sub(self, rhs: &InvariantForm) -> InvariantForm {
        self + &(-rhs)
    }
}

impl Mul<&InvariantForm> for &Scalar {
    type Output = InvariantForm;

    fn mul(self, rhs: &InvariantForm) -> InvariantForm {
        rhs.scale(self)
    }
}

impl Mul<InvariantForm> for Scalar {
    type Output = InvariantForm;

    fn mul(self, rhs: InvariantForm) -> InvariantForm {
        rhs.scale(&self)
    }
}

impl fmt::Display for InvariantForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (n, (m, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c})*{m}")?;
        }
        Ok(())
    }
}

impl Serialize for InvariantForm {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.terms.len()))?;
        for (m, c) in &self.terms {
            map.serialize_entry(&m.key(), &format_scalar(c))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for InvariantForm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(deserializer)?;
        let mut out = InvariantForm::zero();
        for (k, v) in raw {
            let m: Monomial = k.parse().map_err(D::Error::custom)?;
            let c = parse_scalar(&v)
                .map_err(|_| D::Error::custom(FormError::BadCoefficient(v.clone())))?;
            out.add_term(m, c);
        }
        Ok(out)
    }
}
