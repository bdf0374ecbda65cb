//! Exact rational scalars and the random sampling used for identity testing.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

/// Arbitrary-precision rational; always stored in lowest terms with a
/// positive denominator.
pub type Scalar = BigRational;

/// Largest numerator/denominator drawn by [`random_positive`].
pub const SAMPLE_HEIGHT: i64 = 97;

pub fn int(n: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(n))
}

pub fn rat(num: i64, den: i64) -> Scalar {
    Scalar::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(x: &Scalar) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite float.
pub fn from_f64(x: f64) -> Option<Scalar> {
    Scalar::from_float(x)
}

/// `num/den` rendering used by every file format (integers keep the `/1`).
pub fn format_scalar(x: &Scalar) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as an exact rational")]
pub struct ParseScalarError(pub String);

/// Parses `p/q`, an integer, or a plain decimal (`2.1`, `-0.125`, `1e-3`)
/// into an exact rational.
pub fn parse_scalar(s: &str) -> Result<Scalar, ParseScalarError> {
    let err = || ParseScalarError(s.to_string());
    let t = s.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Scalar::new(n, d));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches('-');
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let mut value = Scalar::from_integer(BigInt::from_str(&digits).map_err(|_| err())?);
    let shift = exponent - frac.len() as i32;
    let ten = int(10);
    for _ in 0..shift.unsigned_abs() {
        if shift > 0 {
            value *= &ten;
        } else {
            value /= &ten;
        }
    }
    Ok(if negative { -value } else { value })
}

/// Uniform numerator and denominator in `[1, SAMPLE_HEIGHT]`, reduced.
pub fn random_positive<R: Rng + ?Sized>(rng: &mut R) -> Scalar {
    let n = rng.gen_range(1..=SAMPLE_HEIGHT);
    let d = rng.gen_range(1..=SAMPLE_HEIGHT);
    rat(n, d)
}

pub fn is_positive(x: &Scalar) -> bool {
    x.is_positive()
}

pub fn one() -> Scalar {
    Scalar::one()
}

pub fn zero() -> Scalar {
    Scalar::zero()
}

/// Solves `m x = rhs` exactly by Gaussian elimination; `None` if singular.
pub fn solve_linear(mut m: Vec<Vec<Scalar>>, mut rhs: Vec<Scalar>) -> Option<Vec<Scalar>> {
    let n = rhs.len();
    assert!(m.len() == n && m.iter().all(|row| row.len() == n), "square system expected");
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &m[col][col];
            for k in col..n {
                let delta = &factor * &m[col][k];
                m[r][k] -= delta;
            }
            let delta = &factor * &rhs[col];
            rhs[r] -= delta;
        }
    }
    Some((0..n).map(|i| &rhs[i] / &m[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_scalar("5/2").unwrap(), rat(5, 2));
        assert_eq!(parse_scalar("-10/4").unwrap(), rat(-5, 2));
        assert_eq!(parse_scalar("2.1").unwrap(), rat(21, 10));
        assert_eq!(parse_scalar("+3").unwrap(), int(3));
        assert_eq!(parse_scalar("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse_scalar("-.5").unwrap(), rat(-1, 2));
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("abc").is_err());
        assert!(parse_scalar("").is_err());
    }

    #[test]
    fn solves_small_systems() {
        let m = vec![vec![int(2), int(1)], vec![int(1), int(3)]];
        let x = solve_linear(m.clone(), vec![int(3), int(5)]).unwrap();
        assert_eq!(x, vec![rat(4, 5), rat(7, 5)]);
        let singular = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert!(solve_linear(singular, vec![int(1), int(1)]).is_none());
    }

    #[test]
    fn format_keeps_denominator() {
        assert_eq!(format_scalar(&int(2)), "2/1");
        assert_eq!(format_scalar(&rat(6, -4)), "-3/2");
    }
}
