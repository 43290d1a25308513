//! Low-bit approximation `U` of the hyperplane normal `S`.
//!
//! `u_k = ⌊N·s_k / ‖S‖⌋` with `N = n^c` (or an explicit `N`). All derived
//! quantities are kept exact: `cos²a` and `(d★)²` are rationals, the
//! normalization residual `‖S/‖S‖ − U/N‖²` is a [`QuadSurd`] because it
//! carries one factor `1/‖S‖`.

use std::cmp::Ordering;

use num_traits::{One, Pow, Signed, Zero};

use crate::error::{Error, Result};
use crate::instance::PartitionInstance;
use crate::numerics::{
    floor_div_sqrt, isqrt, rational, rational_int, sign_surd, to_bigint, BigInt, BigUint, QuadSurd,
    Rational,
};

/// How the quantization scale `N` is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Resolution {
    /// `N = n^c`, `c ≥ 2`.
    Exponent(u32),
    /// Any `N ≥ 1`.
    Explicit(BigUint),
}

impl Resolution {
    pub fn scale(&self, n: usize) -> Result<BigUint> {
        match self {
            Resolution::Exponent(c) => {
                if *c < 2 {
                    return Err(Error::Domain(format!("exponent c = {c}, need c ≥ 2")));
                }
                Ok(BigUint::from(n).pow(*c))
            }
            Resolution::Explicit(big_n) => {
                if big_n.is_zero() {
                    return Err(Error::Domain("explicit N must be positive".into()));
                }
                Ok(big_n.clone())
            }
        }
    }

    fn exponent(&self) -> Option<u32> {
        match self {
            Resolution::Exponent(c) => Some(*c),
            Resolution::Explicit(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuantizedNormal {
    pub u: Vec<BigUint>,
    pub big_n: BigUint,
    pub c: Option<u32>,
    pub norm_u_sq: BigUint,
    pub dot_su: BigUint,
    pub norm_s_sq: BigUint,
    pub cos_sq: Rational,
    pub d_star_sq: Rational,
    pub norm_residual: QuadSurd,
}

fn dot(a: &[BigUint], b: &[BigUint]) -> BigUint {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest `N` for which no `u_k` underflows, i.e. `N·s_min ≥ ‖S‖`.
pub fn min_scale_without_underflow(weights: &[BigUint]) -> BigUint {
    let norm_sq = dot(weights, weights);
    let s_min = weights.iter().min().expect("non-empty weights");
    let s_min_sq = s_min * s_min;
    let mut big_n = isqrt(&(&norm_sq / &s_min_sq));
    while &big_n * &big_n * &s_min_sq < norm_sq {
        big_n += 1u32;
    }
    big_n.max(BigUint::one())
}

/// Quantize an arbitrary positive normal vector at scale `big_n`.
pub fn quantize_normal(
    weights: &[BigUint],
    big_n: BigUint,
    c: Option<u32>,
) -> Result<QuantizedNormal> {
    if weights.is_empty() || weights.iter().any(Zero::is_zero) {
        return Err(Error::InvalidInstance(
            "normal must have positive entries".into(),
        ));
    }
    let n = weights.len();
    let norm_s_sq = dot(weights, weights);
    let u = weights
        .iter()
        .map(|s| floor_div_sqrt(&(&big_n * s), &norm_s_sq))
        .collect::<Result<Vec<_>>>()?;
    let underflow: Vec<usize> = (0..n).filter(|&k| u[k].is_zero()).collect();
    if !underflow.is_empty() {
        return Err(Error::QuantizationUnderflow {
            indices: underflow,
            big_n: big_n.to_string(),
        });
    }

    let norm_u_sq = dot(&u, &u);
    let dot_su = dot(weights, &u);
    let cos_sq = Rational::new(
        to_bigint(&(&dot_su * &dot_su)),
        to_bigint(&(&norm_s_sq * &norm_u_sq)),
    );
    let d_star_sq = rational(n as u64, 4u32) * (Rational::one() - &cos_sq);

    // ‖S/‖S‖ − U/N‖² = 1 + ‖U‖²/N² − 2·SᵀU/(N·‖S‖),  with 1/‖S‖ = √‖S‖² / ‖S‖²
    let n_sq = to_bigint(&(&big_n * &big_n));
    let rational_part = Rational::one() + Rational::new(to_bigint(&norm_u_sq), n_sq);
    let coeff = -Rational::new(
        to_bigint(&dot_su) * 2,
        to_bigint(&big_n) * to_bigint(&norm_s_sq),
    );
    let norm_residual = QuadSurd::new(rational_part, coeff, Rational::from(to_bigint(&norm_s_sq)));

    Ok(QuantizedNormal {
        u,
        big_n,
        c,
        norm_u_sq,
        dot_su,
        norm_s_sq,
        cos_sq,
        d_star_sq,
        norm_residual,
    })
}

pub fn quantize(inst: &PartitionInstance, res: &Resolution) -> Result<QuantizedNormal> {
    let big_n = res.scale(inst.n())?;
    quantize_normal(inst.weights(), big_n, res.exponent())
}

/// Exact value of `(d★·‖U‖)²` checked against the monitored cap
/// `(n/2)²·(1 + 4n/N²)`.
#[derive(Clone, Debug)]
pub struct ShiftBound {
    pub value_sq: Rational,
    pub cap_sq: Rational,
    pub within: bool,
}

impl QuantizedNormal {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn sum_u(&self) -> BigUint {
        self.u.iter().sum()
    }

    /// `n / N²`.
    pub fn residual_bound(&self) -> Rational {
        Rational::new(
            BigInt::from(self.n()),
            to_bigint(&(&self.big_n * &self.big_n)),
        )
    }

    /// `‖S/‖S‖ − U/N‖² ≤ n/N²`, decided exactly.
    pub fn residual_within_bound(&self) -> bool {
        self.norm_residual.cmp_rational(&self.residual_bound()) != Ordering::Greater
    }

    /// `u_k²·‖S‖² ≤ N²·s_k² < (u_k+1)²·‖S‖²` for every `k`.
    pub fn floor_property_holds(&self, weights: &[BigUint]) -> bool {
        weights.iter().zip(&self.u).all(|(s, u)| {
            let lhs = &self.big_n * &self.big_n * s * s;
            let u1 = u + 1u32;
            u * u * &self.norm_s_sq <= lhs && lhs < &u1 * &u1 * &self.norm_s_sq && *u <= self.big_n
        })
    }

    /// `|N²/‖U‖² − 1|`, the finite-N proxy for `N/‖U‖ → 1`.
    pub fn normalization_gap(&self) -> Rational {
        let ratio = Rational::new(
            to_bigint(&(&self.big_n * &self.big_n)),
            to_bigint(&self.norm_u_sq),
        );
        (ratio - Rational::one()).abs()
    }

    /// `N − √n ≤ ‖U‖ ≤ N + √n`, which follows from the residual bound by the
    /// triangle inequality.
    pub fn norm_u_within_root_n(&self) -> bool {
        let n = rational_int(self.n() as u64);
        let big_n = Rational::from(to_bigint(&self.big_n));
        let norm_u_sq = Rational::from(to_bigint(&self.norm_u_sq));
        let base = &norm_u_sq - &big_n * &big_n - &n;
        let two_n = rational_int(2) * &big_n;
        // ‖U‖² ≥ (N − √n)²  ⇔  base + 2N√n ≥ 0 (only needed when N > √n)
        let lower = if big_n.clone() * &big_n <= n {
            true
        } else {
            sign_surd(&base, &two_n, &n) != Ordering::Less
        };
        // ‖U‖² ≤ (N + √n)²  ⇔  base − 2N√n ≤ 0
        let upper = sign_surd(&base, &-two_n, &n) != Ordering::Greater;
        lower && upper
    }

    pub fn shift_bound(&self) -> ShiftBound {
        let n = rational_int(self.n() as u64);
        let value_sq = &self.d_star_sq * Rational::from(to_bigint(&self.norm_u_sq));
        let half_n_sq = (&n / rational_int(2)).pow(2u32);
        let slack = Rational::one() + rational_int(4) * self.residual_bound();
        let cap_sq = half_n_sq * slack;
        ShiftBound {
            within: value_sq <= cap_sq,
            value_sq,
            cap_sq,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gen_random;

    fn inst(w: &[u64]) -> PartitionInstance {
        PartitionInstance::from_u64(w).unwrap()
    }

    #[test]
    fn three_four_fixture() {
        let q = quantize(&inst(&[3, 4]), &Resolution::Explicit(10u32.into())).unwrap();
        assert_eq!(q.u, vec![BigUint::from(6u32), BigUint::from(8u32)]);
        assert_eq!(q.norm_u_sq, BigUint::from(100u32));
        assert_eq!(q.cos_sq, Rational::one());
        assert!(q.d_star_sq.is_zero());
        // residual is exactly zero here: U/N = S/‖S‖
        assert_eq!(q.norm_residual.signum(), Ordering::Equal);
        assert!(q.residual_within_bound());
    }

    #[test]
    fn all_ones_is_parallel() {
        for n in [1usize, 4, 7, 9] {
            let q = quantize(&inst(&vec![1; n]), &Resolution::Exponent(2)).unwrap();
            let expect = isqrt(&BigUint::from((n * n * n * n / n) as u64));
            assert!(q.u.iter().all(|u| *u == expect), "n = {n}");
            assert_eq!(q.cos_sq, Rational::one());
            assert!(q.d_star_sq.is_zero());
        }
    }

    #[test]
    fn underflow_is_reported() {
        let err = quantize(&inst(&[1, 1000]), &Resolution::Exponent(2)).unwrap_err();
        match err {
            Error::QuantizationUnderflow { indices, .. } => assert_eq!(indices, vec![0]),
            other => panic!("unexpected {other}"),
        }
        let min = min_scale_without_underflow(&[1u32.into(), 1000u32.into()]);
        assert!(quantize(&inst(&[1, 1000]), &Resolution::Explicit(min.clone())).is_ok());
        assert!(quantize(&inst(&[1, 1000]), &Resolution::Explicit(min - 1u32)).is_err());
    }

    #[test]
    fn bad_resolution() {
        assert!(quantize(&inst(&[1, 2]), &Resolution::Exponent(1)).is_err());
        assert!(quantize(&inst(&[1, 2]), &Resolution::Explicit(BigUint::zero())).is_err());
    }

    #[test]
    fn d_star_identity_and_floor_property() {
        for seed in 0..200 {
            let i = gen_random(8, 24, seed).unwrap();
            let q = match quantize(&i, &Resolution::Exponent(2)) {
                Ok(q) => q,
                Err(Error::QuantizationUnderflow { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(q.floor_property_holds(i.weights()));
            assert_eq!(
                q.d_star_sq,
                rational(8u32, 4u32) * (Rational::one() - &q.cos_sq)
            );
            assert!(q.cos_sq <= Rational::one() && !q.cos_sq.is_negative());
            assert!(q.residual_within_bound(), "seed {seed}");
            assert!(q.norm_u_within_root_n(), "seed {seed}");
        }
    }

    #[test]
    fn residual_matches_brute_force_for_three_four() {
        // n/N² = 2/100; residual is 0 ≤ 2/100
        let q = quantize(&inst(&[3, 4]), &Resolution::Explicit(10u32.into())).unwrap();
        assert_eq!(q.residual_bound(), rational(1, 50));
        let direct: f64 = [3.0f64, 4.0]
            .iter()
            .zip([6.0f64, 8.0])
            .map(|(s, u)| (s / 5.0 - u / 10.0).powi(2))
            .sum();
        assert!(direct <= 0.02);
        assert!(q.residual_within_bound());
    }

    #[test]
    fn residual_surd_matches_f64() {
        for seed in 0..100 {
            let i = gen_random(6, 16, seed).unwrap();
            let Ok(q) = quantize(&i, &Resolution::Exponent(3)) else {
                continue;
            };
            let norm = i
                .weights()
                .iter()
                .map(|w| crate::numerics::rational_to_f64(&Rational::from(to_bigint(w))).powi(2))
                .sum::<f64>()
                .sqrt();
            let big_n = 216.0;
            let direct: f64 = i
                .weights()
                .iter()
                .zip(&q.u)
                .map(|(s, u)| {
                    let s = s.to_string().parse::<f64>().unwrap();
                    let u = u.to_string().parse::<f64>().unwrap();
                    (s / norm - u / big_n).powi(2)
                })
                .sum();
            let surd = q.norm_residual.to_f64();
            assert!((surd - direct).abs() < 1e-9, "{surd} vs {direct}");
        }
    }

    #[test]
    fn shift_bound_examples() {
        let q = quantize(&inst(&[3, 4]), &Resolution::Explicit(10u32.into())).unwrap();
        let b = q.shift_bound();
        assert!(b.value_sq.is_zero() && b.within);

        let q = quantize(&inst(&[1, 2, 3, 4]), &Resolution::Exponent(2)).unwrap();
        // U = ⌊16·(1,2,3,4)/√30⌋ = (2, 5, 8, 11)
        assert_eq!(
            q.u,
            [2u32, 5, 8, 11]
                .iter()
                .map(|&v| BigUint::from(v))
                .collect::<Vec<_>>()
        );
        let b = q.shift_bound();
        // SᵀU = 80, ‖U‖² = 214, ‖S‖² = 30: (d★‖U‖)² = (4/4)·(214 − 6400/30) = 2/3
        assert_eq!(b.value_sq, rational(2, 3));
        assert!(b.within);
    }
}
