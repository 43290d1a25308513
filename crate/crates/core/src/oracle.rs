//! Brute-force ground truth over all `2^n` hypercube vertices.
//!
//! Vertices are visited in Gray-code order so each step flips one
//! coordinate and updates the running sums in O(1). The vertex space is
//! sharded by the top coordinates and the shards run in parallel; results
//! are merged in shard order, so output does not depend on scheduling.

use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{PartitionInstance, SspInstance, SsspInstance};
use crate::numerics::{isqrt, rational_int, to_bigint, BigInt, BigUint, Rational};

/// Default largest `n` the oracle will enumerate.
pub const DEFAULT_CAP: usize = 26;

/// Witnesses kept per report.
pub const MAX_WITNESSES: usize = 64;

const SHARD_BITS: usize = 6;
const SUM_BITS_LIMIT: u64 = 120;

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::resource(
            "oracle enumeration",
            format!("n = {n}"),
            format!("n = {cap}"),
        ));
    }
    Ok(())
}

fn small(v: &BigInt, what: &str) -> Result<i128> {
    if v.bits() > SUM_BITS_LIMIT {
        return Err(Error::Domain(format!(
            "oracle: {what} needs more than {SUM_BITS_LIMIT} bits"
        )));
    }
    Ok(v.to_i128().expect("bounded bit length"))
}

/// Calls `visit(x, value)` on every vertex, where `value` starts at `base`
/// and moves by `step[k]` whenever `x_k` goes from 0 to 1.
///
/// Each shard returns its own accumulator; accumulators come back in
/// shard order.
fn enumerate<A, F>(
    n: usize,
    base: i128,
    step: &[i128],
    init: impl Fn() -> A + Sync,
    visit: F,
) -> Vec<A>
where
    A: Send,
    F: Fn(&mut A, &[u8], i128) + Sync,
{
    let prefix = SHARD_BITS.min(n);
    let low = n - prefix;
    (0u64..1 << prefix)
        .into_par_iter()
        .map(|shard| {
            let mut acc = init();
            let mut x = vec![0u8; n];
            let mut value = base;
            for j in 0..prefix {
                if shard >> j & 1 == 1 {
                    x[low + j] = 1;
                    value += step[low + j];
                }
            }
            visit(&mut acc, &x, value);
            for i in 1u64..1 << low {
                let k = i.trailing_zeros() as usize;
                if x[k] == 0 {
                    x[k] = 1;
                    value += step[k];
                } else {
                    x[k] = 0;
                    value -= step[k];
                }
                visit(&mut acc, &x, value);
            }
            acc
        })
        .collect()
}

/// Result of a partition enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    /// Lexicographically smallest exact solutions, at most [`MAX_WITNESSES`].
    pub solutions: Vec<Vec<u8>>,
    /// Total number of exact solutions.
    pub count: u64,
    /// `min_x (Sᵀ(x − C))² / ‖S‖²` with `C = ½·1`.
    pub min_distance_sq: Rational,
    /// Lexicographically smallest vertex attaining the minimum.
    pub nearest: Vec<u8>,
}

impl OracleReport {
    pub fn has_solution(&self) -> bool {
        self.count > 0
    }
}

#[derive(Default)]
struct PartitionAcc {
    count: u64,
    solutions: Vec<Vec<u8>>,
    best: Option<(i128, Vec<u8>)>,
}

fn keep_smallest(list: &mut Vec<Vec<u8>>, x: &[u8]) {
    if list.len() < MAX_WITNESSES {
        list.push(x.to_vec());
    } else if let Some(max) = list.iter_mut().max() {
        if x < max.as_slice() {
            *max = x.to_vec();
        }
    }
}

/// Enumerates every vertex of a partition instance.
pub fn enumerate_partition(inst: &PartitionInstance, cap: usize) -> Result<OracleReport> {
    let n = inst.n();
    check_cap(n, cap)?;
    let total = BigInt::from(inst.total());
    // v(x) = 2·Sᵀx − Σs
    let base = -small(&total, "weight sum")?;
    let step: Vec<i128> = inst
        .weights()
        .iter()
        .map(|w| small(&(to_bigint(w) * 2), "weight"))
        .collect::<Result<_>>()?;
    let shards = enumerate(n, base, &step, PartitionAcc::default, |acc, x, v| {
        if v == 0 {
            acc.count += 1;
            keep_smallest(&mut acc.solutions, x);
        }
        let a = v.unsigned_abs() as i128;
        match &acc.best {
            Some((b, bx)) if (a, x) >= (*b, bx.as_slice()) => {}
            _ => acc.best = Some((a, x.to_vec())),
        }
    });

    let mut count = 0;
    let mut solutions = Vec::new();
    let mut best: Option<(i128, Vec<u8>)> = None;
    for acc in shards {
        count += acc.count;
        for s in &acc.solutions {
            keep_smallest(&mut solutions, s);
        }
        if let Some(b) = acc.best {
            if best.as_ref().is_none_or(|cur| b < *cur) {
                best = Some(b);
            }
        }
    }
    solutions.sort();
    let (v, nearest) = best.expect("at least one vertex");
    let norm_sq: BigUint = inst.weights().iter().map(|w| w * w).sum();
    // (v/2)² / ‖S‖²
    let min_distance_sq = Rational::new(BigInt::from(v) * BigInt::from(v), to_bigint(&norm_sq) * 4);
    Ok(OracleReport {
        solutions,
        count,
        min_distance_sq,
        nearest,
    })
}

/// All subset sums of a subset-sum instance hitting its target.
pub fn count_subset_solutions(inst: &SspInstance, cap: usize) -> Result<u64> {
    let n = inst.n();
    check_cap(n, cap)?;
    let base = -small(&to_bigint(inst.target()), "target")?;
    let step: Vec<i128> = inst
        .weights()
        .iter()
        .map(|w| small(&to_bigint(w), "weight"))
        .collect::<Result<_>>()?;
    let shards = enumerate(
        n,
        base,
        &step,
        || 0u64,
        |acc, _, v| {
            if v == 0 {
                *acc += 1;
            }
        },
    );
    Ok(shards.into_iter().sum())
}

/// Exact existence answer for a subset-sum instance.
pub fn subset_sum_exists(inst: &SspInstance, cap: usize) -> Result<bool> {
    Ok(count_subset_solutions(inst, cap)? > 0)
}

/// Vertex population of a slab.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Population {
    pub count: u64,
    /// Lexicographically smallest members, at most [`MAX_WITNESSES`].
    pub witnesses: Vec<Vec<u8>>,
}

/// Counts vertices `x` with `(Sᵀ(x − C))² ≤ (θ/4)·‖S‖²`, where `θ` is the
/// squared slab thickness.
pub fn slab_population(
    normal: &[BigUint],
    center: &[Rational],
    thickness_sq: &Rational,
    cap: usize,
) -> Result<Population> {
    let n = normal.len();
    check_cap(n, cap)?;
    if center.len() != n {
        return Err(Error::Domain("slab center dimension mismatch".into()));
    }
    if thickness_sq.is_negative() {
        return Err(Error::Domain("negative slab thickness".into()));
    }
    // SᵀC = a/b; with v = b·Sᵀx − a the test is v² ≤ b²·θ·‖S‖²/4.
    let sc: Rational = normal
        .iter()
        .zip(center)
        .map(|(s, c)| Rational::from(to_bigint(s)) * c)
        .sum();
    let (a, b) = (sc.numer().clone(), sc.denom().clone());
    let norm_sq: BigUint = normal.iter().map(|w| w * w).sum();
    let bound = Rational::from(&b * &b * to_bigint(&norm_sq)) * thickness_sq / rational_int(4);
    let floor = bound.floor().to_integer();
    let h = isqrt(&floor.to_biguint().expect("non-negative"));
    // Beyond the reachable range every vertex is inside.
    let h = match BigInt::from(h).to_i128() {
        Some(h) if h < 1i128 << 126 => h,
        _ => i128::MAX,
    };
    let base = -small(&a, "center offset")?;
    let step: Vec<i128> = normal
        .iter()
        .map(|w| small(&(to_bigint(w) * &b), "scaled weight"))
        .collect::<Result<_>>()?;

    let shards = enumerate(
        n,
        base,
        &step,
        || (0u64, Vec::new()),
        |acc, x, v| {
            if v.unsigned_abs() <= h as u128 {
                acc.0 += 1;
                keep_smallest(&mut acc.1, x);
            }
        },
    );
    let mut count = 0;
    let mut witnesses = Vec::new();
    for (c, w) in shards {
        count += c;
        for x in &w {
            keep_smallest(&mut witnesses, x);
        }
    }
    witnesses.sort();
    Ok(Population { count, witnesses })
}

/// The hypercube center `½·1`.
pub fn cube_center(n: usize) -> Vec<Rational> {
    vec![Rational::new(BigInt::one(), BigInt::from(2)); n]
}

/// `Σ_i (‖x − C_i‖² − R_i²)²` for explicit rational shells `(C_i, R_i²)`.
pub fn eval_l0_shells(x: &[Rational], shells: &[(Vec<Rational>, Rational)]) -> Rational {
    shells
        .iter()
        .map(|(c, r_sq)| {
            let d: Rational = x
                .iter()
                .zip(c)
                .map(|(xi, ci)| {
                    let t = xi - ci;
                    &t * &t
                })
                .sum();
            let r = d - r_sq;
            &r * &r
        })
        .sum()
}

/// Exact shell objective of an SSSP instance at a vertex.
///
/// With `C_i = ½·1 − ρ·S_i/‖S_i‖` and `R_i² = ρ² + n/4`, every vertex has
/// `‖x − C_i‖² − R_i² = 2ρ·S_iᵀ(x − ½·1)/‖S_i‖`, so
/// `L₀(x) = Σ_i ρ²·(2·S_iᵀx − Σ S_i)² / ‖S_i‖²`, a rational.
pub fn eval_l0(inst: &SsspInstance, x: &[u8]) -> Rational {
    let rho_sq = inst.rho() * inst.rho();
    inst.rows()
        .iter()
        .map(|row| {
            let r = PartitionInstance::new(row.clone())
                .expect("validated row")
                .doubled_residual(x);
            let norm_sq: BigUint = row.iter().map(|w| w * w).sum();
            Rational::new(&r * &r, to_bigint(&norm_sq))
        })
        .sum::<Rational>()
        * rho_sq
}

/// Smallest `L₀` over all vertices, with the lexicographically smallest minimizer.
pub fn min_l0(inst: &SsspInstance, cap: usize) -> Result<(Rational, Vec<u8>)> {
    let n = inst.n();
    check_cap(n, cap)?;
    let norms: Vec<BigInt> = inst
        .rows()
        .iter()
        .map(|row| to_bigint(&row.iter().map(|w| w * w).sum::<BigUint>()))
        .collect();
    // Integer key Σ_i r_i²·(Π_{j≠i} ‖S_j‖²) orders vertices like L₀.
    let weights: Vec<BigInt> = (0..norms.len())
        .map(|i| {
            norms
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.clone())
                .product()
        })
        .collect();
    let bases: Vec<i128> = inst
        .rows()
        .iter()
        .map(|row| small(&-to_bigint(&row.iter().sum::<BigUint>()), "row sum"))
        .collect::<Result<_>>()?;
    let steps: Vec<Vec<i128>> = inst
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .map(|w| small(&(to_bigint(w) * 2), "weight"))
                .collect()
        })
        .collect::<Result<_>>()?;

    let prefix = SHARD_BITS.min(n);
    let low = n - prefix;
    let p = inst.p();
    let best = (0u64..1 << prefix)
        .into_par_iter()
        .map(|shard| {
            let mut x = vec![0u8; n];
            let mut r = bases.clone();
            for j in 0..prefix {
                if shard >> j & 1 == 1 {
                    x[low + j] = 1;
                    for i in 0..p {
                        r[i] += steps[i][low + j];
                    }
                }
            }
            let key = |r: &[i128]| -> BigInt {
                r.iter()
                    .zip(&weights)
                    .map(|(ri, wi)| BigInt::from(*ri) * BigInt::from(*ri) * wi)
                    .sum()
            };
            let mut best = (key(&r), x.clone());
            for it in 1u64..1 << low {
                let k = it.trailing_zeros() as usize;
                let sign = if x[k] == 0 { 1 } else { -1 };
                x[k] ^= 1;
                for i in 0..p {
                    r[i] += sign * steps[i][k];
                }
                let kv = key(&r);
                if (&kv, &x) < (&best.0, &best.1) {
                    best = (kv, x.clone());
                }
            }
            best
        })
        .reduce_with(|a, b| if (&b.0, &b.1) < (&a.0, &a.1) { b } else { a })
        .expect("at least one shard");
    let x = best.1;
    Ok((eval_l0(inst, &x), x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gen_planted;
    use crate::numerics::rational;
    use num_traits::Zero;

    fn inst(w: &[u64]) -> PartitionInstance {
        PartitionInstance::from_u64(w).unwrap()
    }

    #[test]
    fn two_ones() {
        let r = enumerate_partition(&inst(&[1, 1]), DEFAULT_CAP).unwrap();
        assert_eq!(r.solutions, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(r.count, 2);
        assert!(r.min_distance_sq.is_zero());
    }

    #[test]
    fn one_two() {
        let r = enumerate_partition(&inst(&[1, 2]), DEFAULT_CAP).unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(r.min_distance_sq, rational(1, 20));
        assert_eq!(r.nearest, vec![0, 1]);
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_partition(&inst(&[1; 10]), 8).unwrap_err();
        assert!(err.is_resource());
    }

    #[test]
    fn planted_has_complement_pair() {
        let (p, x) = gen_planted(18, 12, 5).unwrap();
        let r = enumerate_partition(&p, DEFAULT_CAP).unwrap();
        assert!(r.count >= 2);
        let comp: Vec<u8> = x.iter().map(|b| 1 - b).collect();
        assert!(p.is_solution(&x) && p.is_solution(&comp));
        for s in &r.solutions {
            let c: Vec<u8> = s.iter().map(|b| 1 - b).collect();
            assert!(p.is_solution(&c));
        }
        assert_eq!(r.count % 2, 0);
    }

    #[test]
    fn gray_code_visits_every_vertex_once() {
        for n in [1usize, 3, 7, 9] {
            let step: Vec<i128> = (0..n).map(|k| 1i128 << k).collect();
            let seen = enumerate(n, 0, &step, Vec::new, |acc: &mut Vec<i128>, x, v| {
                let direct: i128 = (0..n).filter(|&k| x[k] == 1).map(|k| 1i128 << k).sum();
                assert_eq!(direct, v);
                acc.push(v);
            });
            let mut all: Vec<i128> = seen.into_iter().flatten().collect();
            all.sort();
            assert_eq!(all, (0..1i128 << n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn population_examples() {
        let s = vec![BigUint::from(1u32); 2];
        let c = cube_center(2);
        assert_eq!(
            slab_population(&s, &c, &Rational::zero(), DEFAULT_CAP)
                .unwrap()
                .count,
            2
        );
        // thickness √n covers the whole cube
        let s: Vec<BigUint> = [3u32, 1, 4, 1, 5].iter().map(|&v| v.into()).collect();
        let c = cube_center(5);
        let all = slab_population(&s, &c, &rational_int(5), DEFAULT_CAP).unwrap();
        assert_eq!(all.count, 32);
    }

    #[test]
    fn l0_of_central_shell_is_zero() {
        let n = 5;
        let shells = vec![(cube_center(n), rational(n as i64, 4))];
        for mask in 0..1u32 << n {
            let x: Vec<Rational> = (0..n)
                .map(|k| rational_int((mask >> k & 1) as i64))
                .collect();
            assert!(eval_l0_shells(&x, &shells).is_zero());
        }
    }

    #[test]
    fn subset_counts() {
        let s = SspInstance::new(
            [1u32, 2, 3].iter().map(|&v| v.into()).collect(),
            3u32.into(),
        )
        .unwrap();
        assert_eq!(count_subset_solutions(&s, DEFAULT_CAP).unwrap(), 2);
    }
}
