//! Exact integer and rational arithmetic.
//!
//! Everything geometric in this crate reduces to inner products and squared
//! norms of integer vectors, plus the occasional single square root (a norm
//! such as `‖S‖`). Quantities containing one square root are carried as
//! [`QuadSurd`] values `a + b·√r` and compared exactly by squaring with sign
//! analysis, so no floating-point value ever decides a branch.

use std::cmp::Ordering;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub use num_bigint::{BigInt, BigUint, Sign};

use crate::error::{Error, Result};

/// Exact rational, always stored reduced with a positive denominator.
pub type Rational = num_rational::BigRational;

/// `⌊√a⌋`.
pub fn isqrt(a: &BigUint) -> BigUint {
    a.sqrt()
}

/// `⌊a / √b⌋`, evaluated as `⌊√⌊a²/b⌋⌋`.
pub fn floor_div_sqrt(a: &BigUint, b: &BigUint) -> Result<BigUint> {
    if b.is_zero() {
        return Err(Error::Domain(
            "floor_div_sqrt: divisor radicand is zero".into(),
        ));
    }
    let a_sq = a * a;
    let r = isqrt(&(&a_sq / b));
    debug_assert!(&r * &r * b <= a_sq);
    debug_assert!((&r + 1u32) * (&r + 1u32) * b > a_sq);
    Ok(r)
}

pub fn rational(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Rational {
    Rational::new(num.into(), den.into())
}

pub fn rational_int(v: impl Into<BigInt>) -> Rational {
    Rational::from_integer(v.into())
}

pub fn to_bigint(v: &BigUint) -> BigInt {
    BigInt::from(v.clone())
}

/// Lossy conversion used only for reporting and cross-checks.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 gives up on huge operands; scale down by bit length.
        let num_bits = r.numer().bits() as i64;
        let den_bits = r.denom().bits() as i64;
        let shift_n = (num_bits - 1000).max(0);
        let shift_d = (den_bits - 1000).max(0);
        let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(f64::NAN);
        n / d * 2f64.powi((shift_n - shift_d) as i32)
    })
}

/// Exact binary value of a finite double.
pub fn rational_from_f64(v: f64) -> Option<Rational> {
    Rational::from_float(v)
}

fn sign_of(r: &Rational) -> Ordering {
    r.cmp(&Rational::zero())
}

/// Sign of `a + b·√r` for rationals `a`, `b` and `r ≥ 0`.
pub fn sign_surd(a: &Rational, b: &Rational, r: &Rational) -> Ordering {
    debug_assert!(!r.is_negative());
    let sb = if r.is_zero() {
        Ordering::Equal
    } else {
        sign_of(b)
    };
    let sa = sign_of(a);
    if sb == Ordering::Equal {
        return sa;
    }
    if sa == Ordering::Equal || sa == sb {
        return sb;
    }
    // Opposite signs: the larger magnitude wins.
    match (a * a).cmp(&(b * b * r)) {
        Ordering::Greater => sa,
        Ordering::Less => sb,
        Ordering::Equal => Ordering::Equal,
    }
}

/// Sign of `a + b·√ra + c·√rb`.
pub fn sign_two_surds(
    a: &Rational,
    b: &Rational,
    ra: &Rational,
    c: &Rational,
    rb: &Rational,
) -> Ordering {
    let sx = sign_surd(a, b, ra);
    let sy = if rb.is_zero() {
        Ordering::Equal
    } else {
        sign_of(c)
    };
    if sy == Ordering::Equal {
        return sx;
    }
    if sx == Ordering::Equal || sx == sy {
        return sy;
    }
    // X² − Y² = (a² + b²·ra − c²·rb) + 2ab·√ra
    let rational_part = a * a + b * b * ra - c * c * rb;
    let surd_part = rational_int(2) * a * b;
    match sign_surd(&rational_part, &surd_part, ra) {
        Ordering::Greater => sx,
        Ordering::Less => sy,
        Ordering::Equal => Ordering::Equal,
    }
}

/// Compares `√r` with `q` (`r ≥ 0`).
pub fn cmp_sqrt_rational(r: &Rational, q: &Rational) -> Ordering {
    sign_surd(&-q, &Rational::one(), r)
}

/// A real number `rational + coeff·√radicand` with exact comparisons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadSurd {
    pub rational: Rational,
    pub coeff: Rational,
    pub radicand: Rational,
}

impl QuadSurd {
    pub fn new(rational: Rational, coeff: Rational, radicand: Rational) -> Self {
        assert!(!radicand.is_negative(), "negative radicand");
        QuadSurd {
            rational,
            coeff,
            radicand,
        }
    }

    pub fn signum(&self) -> Ordering {
        sign_surd(&self.rational, &self.coeff, &self.radicand)
    }

    pub fn cmp_rational(&self, q: &Rational) -> Ordering {
        sign_surd(&(&self.rational - q), &self.coeff, &self.radicand)
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.rational)
            + rational_to_f64(&self.coeff) * rational_to_f64(&self.radicand).sqrt()
    }
}

/// Wire form of a rational: `{"num": "...", "den": "..."}` with decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl From<&Rational> for RationalJson {
    fn from(r: &Rational) -> Self {
        RationalJson {
            num: r.numer().to_str_radix(10),
            den: r.denom().to_str_radix(10),
        }
    }
}

impl RationalJson {
    pub fn parse(&self, field: &str) -> Result<Rational> {
        let num: BigInt = self
            .num
            .parse()
            .map_err(|_| Error::field(format!("{field}.num"), "not a decimal integer"))?;
        let den: BigInt = self
            .den
            .parse()
            .map_err(|_| Error::field(format!("{field}.den"), "not a decimal integer"))?;
        if den.is_zero() {
            return Err(Error::field(format!("{field}.den"), "zero denominator"));
        }
        Ok(Rational::new(num, den))
    }
}

pub fn parse_biguint(s: &str, field: &str) -> Result<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::field(
            field,
            format!("`{s}` is not a non-negative decimal integer"),
        ));
    }
    s.parse()
        .map_err(|_| Error::field(field, format!("`{s}` is not a decimal integer")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn isqrt_small_cases() {
        assert_eq!(isqrt(&big(0)), big(0));
        assert_eq!(isqrt(&big(25)), big(5));
        assert_eq!(isqrt(&big(26)), big(5));
        assert_eq!(isqrt(&big(24)), big(4));
    }

    #[test]
    fn floor_div_sqrt_cases() {
        assert_eq!(floor_div_sqrt(&big(30), &big(25)).unwrap(), big(6));
        assert_eq!(floor_div_sqrt(&big(10), &big(2)).unwrap(), big(7));
        assert_eq!(floor_div_sqrt(&big(40), &big(25)).unwrap(), big(8));
        assert!(matches!(
            floor_div_sqrt(&big(1), &big(0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sqrt_comparisons() {
        // √2 < 3/2
        assert_eq!(
            cmp_sqrt_rational(&rational_int(2), &rational(3, 2)),
            Ordering::Less
        );
        assert_eq!(
            cmp_sqrt_rational(&rational_int(25), &rational_int(5)),
            Ordering::Equal
        );
        assert_eq!(
            cmp_sqrt_rational(&rational_int(26), &rational_int(5)),
            Ordering::Greater
        );
    }

    #[test]
    fn surd_sign_cases() {
        // 3 − √8 > 0, 3 − √9 = 0, 3 − √10 < 0
        let three = rational_int(3);
        let minus_one = rational_int(-1);
        assert_eq!(
            sign_surd(&three, &minus_one, &rational_int(8)),
            Ordering::Greater
        );
        assert_eq!(
            sign_surd(&three, &minus_one, &rational_int(9)),
            Ordering::Equal
        );
        assert_eq!(
            sign_surd(&three, &minus_one, &rational_int(10)),
            Ordering::Less
        );
        // √2 + √3 − √(5 + 2√6) = 0 is out of reach, but √2 + √3 − 3 > 0
        assert_eq!(
            sign_two_surds(
                &rational_int(-3),
                &Rational::one(),
                &rational_int(2),
                &Rational::one(),
                &rational_int(3)
            ),
            Ordering::Greater
        );
        // 1 + √2 − √8 = 1 − √2 < 0
        assert_eq!(
            sign_two_surds(
                &Rational::one(),
                &Rational::one(),
                &rational_int(2),
                &minus_one,
                &rational_int(8)
            ),
            Ordering::Less
        );
    }

    #[test]
    fn rational_json_round_trip() {
        let r = rational(-6, 4);
        let j = RationalJson::from(&r);
        assert_eq!(j.num, "-3");
        assert_eq!(j.den, "2");
        assert_eq!(j.parse("x").unwrap(), r);
        let bad = RationalJson {
            num: "1".into(),
            den: "0".into(),
        };
        assert!(bad.parse("x").is_err());
    }

    #[test]
    fn parse_biguint_rejects_signs() {
        assert!(parse_biguint("-3", "w").is_err());
        assert!(parse_biguint("", "w").is_err());
        assert_eq!(
            parse_biguint("999999999999999999999999", "w")
                .unwrap()
                .to_string(),
            "999999999999999999999999"
        );
    }

    proptest! {
        #[test]
        fn isqrt_brackets(a in any::<u128>()) {
            let a = BigUint::from(a);
            let r = isqrt(&a);
            prop_assert!(&r * &r <= a);
            let r1 = &r + 1u32;
            prop_assert!(&r1 * &r1 > a);
        }

        #[test]
        fn floor_div_sqrt_brackets(a in any::<u64>(), b in 1u64..) {
            let (a, b) = (BigUint::from(a), BigUint::from(b));
            let r = floor_div_sqrt(&a, &b).unwrap();
            let a2 = &a * &a;
            prop_assert!(&r * &r * &b <= a2);
            let r1 = &r + 1u32;
            prop_assert!(&r1 * &r1 * &b > a2);
        }

        #[test]
        fn rational_matches_f64(n1 in any::<i32>(), d1 in 1i32.., n2 in any::<i32>(), d2 in 1i32..) {
            let x = rational(n1, d1) * rational(n2, d2) + rational(n2, d1);
            let f = (n1 as f64 / d1 as f64) * (n2 as f64 / d2 as f64) + n2 as f64 / d1 as f64;
            let got = rational_to_f64(&x);
            prop_assert!((got - f).abs() <= 1e-9 * f.abs().max(1.0));
        }

        #[test]
        fn surd_sign_matches_f64(a in -1000i64..1000, b in -1000i64..1000, r in 0i64..10_000) {
            let exact = sign_surd(&rational_int(a), &rational_int(b), &rational_int(r));
            let approx = a as f64 + b as f64 * (r as f64).sqrt();
            if approx.abs() > 1e-6 {
                prop_assert_eq!(exact, approx.partial_cmp(&0.0).unwrap());
            }
        }
    }
}
