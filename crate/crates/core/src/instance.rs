//! Problem instances, seeded generators and the JSON instance file.

use std::path::Path;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{parse_biguint, BigInt, BigUint, Rational, RationalJson};

/// `∃? x ∈ {0,1}^n : Sᵀx = T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SspInstance {
    weights: Vec<BigUint>,
    target: BigUint,
}

/// `∃? x ∈ {0,1}^n : Sᵀ(x − ½·1) = 0`; the target `Σs/2` is implicit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionInstance {
    weights: Vec<BigUint>,
}

/// `p` simultaneous partition constraints plus the shell relaxation
/// parameters `ρ` (shell center offset) and `δ` (target residual).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsspInstance {
    rows: Vec<Vec<BigUint>>,
    rho: Rational,
    delta: Rational,
}

fn check_weights(weights: &[BigUint], what: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidInstance(format!(
            "{what}: n must be at least 1"
        )));
    }
    if let Some(k) = weights.iter().position(Zero::is_zero) {
        return Err(Error::InvalidInstance(format!(
            "{what}: weight {k} is zero"
        )));
    }
    Ok(())
}

/// Smallest `m` with every weight `< 2^m`.
pub fn bit_width(weights: &[BigUint]) -> u64 {
    weights.iter().map(BigUint::bits).max().unwrap_or(0)
}

pub fn weight_sum(weights: &[BigUint]) -> BigUint {
    weights.iter().sum()
}

impl SspInstance {
    pub fn new(weights: Vec<BigUint>, target: BigUint) -> Result<Self> {
        check_weights(&weights, "ssp")?;
        if target > weight_sum(&weights) {
            return Err(Error::InvalidInstance(
                "ssp: target exceeds Σ weights".into(),
            ));
        }
        Ok(SspInstance { weights, target })
    }

    pub fn weights(&self) -> &[BigUint] {
        &self.weights
    }

    pub fn target(&self) -> &BigUint {
        &self.target
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn bits(&self) -> u64 {
        bit_width(&self.weights)
    }
}

impl PartitionInstance {
    pub fn new(weights: Vec<BigUint>) -> Result<Self> {
        check_weights(&weights, "partition")?;
        Ok(PartitionInstance { weights })
    }

    pub fn from_u64(weights: &[u64]) -> Result<Self> {
        Self::new(weights.iter().map(|&w| BigUint::from(w)).collect())
    }

    pub fn weights(&self) -> &[BigUint] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn bits(&self) -> u64 {
        bit_width(&self.weights)
    }

    pub fn total(&self) -> BigUint {
        weight_sum(&self.weights)
    }

    /// `2·Sᵀx − Σs`, twice the signed residual against the partition target.
    pub fn doubled_residual(&self, x: &[u8]) -> BigInt {
        assert_eq!(x.len(), self.n(), "vertex dimension mismatch");
        let picked: BigUint = self
            .weights
            .iter()
            .zip(x)
            .filter(|(_, &b)| b != 0)
            .map(|(w, _)| w)
            .sum();
        BigInt::from(picked) * 2 - BigInt::from(self.total())
    }

    pub fn is_solution(&self, x: &[u8]) -> bool {
        self.doubled_residual(x).is_zero()
    }
}

impl SsspInstance {
    pub fn new(rows: Vec<Vec<BigUint>>, rho: Rational, delta: Rational) -> Result<Self> {
        let p = rows.len();
        if p == 0 || !p.is_power_of_two() {
            return Err(Error::InvalidInstance(format!(
                "sssp: p = {p} must be a power of two"
            )));
        }
        let n = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInstance(format!(
                    "sssp: row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            check_weights(row, &format!("sssp row {i}"))?;
        }
        if p >= n {
            return Err(Error::InvalidInstance(format!(
                "sssp: need p < n, got p = {p}, n = {n}"
            )));
        }
        if !rho.is_positive() {
            return Err(Error::InvalidInstance("sssp: rho must be positive".into()));
        }
        if !delta.is_positive() {
            return Err(Error::InvalidInstance(
                "sssp: delta must be positive".into(),
            ));
        }
        Ok(SsspInstance { rows, rho, delta })
    }

    pub fn rows(&self) -> &[Vec<BigUint>] {
        &self.rows
    }

    pub fn p(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rho(&self) -> &Rational {
        &self.rho
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn with_params(&self, rho: Rational, delta: Rational) -> Result<Self> {
        SsspInstance::new(self.rows.clone(), rho, delta)
    }

    pub fn bits(&self) -> u64 {
        self.rows.iter().map(|r| bit_width(r)).max().unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// generators

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[0, bound)` by rejection on the bit length of `bound`.
fn uniform_below<R: RngCore>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero());
    let bits = bound.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let top_mask = if bits.is_multiple_of(8) {
        0xff
    } else {
        (1u8 << (bits % 8)) - 1
    };
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        // little-endian: the last byte is the most significant
        buf[nbytes - 1] &= top_mask;
        let v = BigUint::from_bytes_le(&buf);
        if &v < bound {
            return v;
        }
    }
}

/// Uniform weight in `[1, 2^m)`.
fn random_weight<R: RngCore>(rng: &mut R, m: u32) -> BigUint {
    let span = (BigUint::one() << m) - 1u32;
    uniform_below(rng, &span) + 1u32
}

fn check_gen_args(n: usize, m: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("generator: n must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::Domain("generator: m must be at least 1".into()));
    }
    Ok(())
}

/// `n` weights uniform in `[1, 2^m)`.
pub fn gen_random(n: usize, m: u32, seed: u64) -> Result<PartitionInstance> {
    check_gen_args(n, m)?;
    let mut rng = seeded(seed);
    let weights = (0..n).map(|_| random_weight(&mut rng, m)).collect();
    PartitionInstance::new(weights)
}

/// Random balanced 0/1 pattern with exactly `n/2` ones.
fn balanced_pattern<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    let mut x: Vec<u8> = (0..n).map(|k| u8::from(k < n / 2)).collect();
    x.shuffle(rng);
    x
}

/// Weights that make `x` (with `n/2` ones) an exact partition.
///
/// The `x = 0` side mirrors the `x = 1` side item by item with a small
/// perturbation; its last item is the correction term that equalizes the
/// two sums. Rejected and resampled when the correction leaves `[1, 2^m)`.
fn planted_row<R: RngCore>(rng: &mut R, x: &[u8], m: u32) -> Vec<BigUint> {
    let ones: Vec<usize> = (0..x.len()).filter(|&k| x[k] == 1).collect();
    let zeros: Vec<usize> = (0..x.len()).filter(|&k| x[k] == 0).collect();
    debug_assert_eq!(ones.len(), zeros.len());
    let h = ones.len();
    let upper = BigInt::from(BigUint::one() << m);
    let spread = {
        let s = (BigUint::one() << m) / (4u32 * (num_integer::Roots::sqrt(&h) as u32 + 1));
        BigInt::from(s)
    };
    let spread_span = BigUint::try_from(&spread * 2 + 1).expect("non-negative");

    loop {
        let a: Vec<BigUint> = (0..h).map(|_| random_weight(rng, m)).collect();
        let mut b: Vec<BigInt> = Vec::with_capacity(h);
        for aj in a.iter().take(h - 1) {
            let aj = BigInt::from(aj.clone());
            let bj = loop {
                let d = BigInt::from(uniform_below(rng, &spread_span)) - &spread;
                let cand = &aj + d;
                if cand >= BigInt::one() && cand < upper {
                    break cand;
                }
            };
            b.push(bj);
        }
        let sum_a: BigInt = a.iter().map(|v| BigInt::from(v.clone())).sum();
        let sum_b: BigInt = b.iter().sum();
        let correction = sum_a - sum_b;
        if correction < BigInt::one() || correction >= upper {
            continue;
        }
        b.push(correction);

        let mut weights = vec![BigUint::zero(); x.len()];
        for (slot, v) in ones.iter().zip(a) {
            weights[*slot] = v;
        }
        for (slot, v) in zeros.iter().zip(b) {
            weights[*slot] = BigUint::try_from(v).expect("positive");
        }
        return weights;
    }
}

/// Instance with a known exact partition; returns the planted vertex too.
pub fn gen_planted(n: usize, m: u32, seed: u64) -> Result<(PartitionInstance, Vec<u8>)> {
    check_gen_args(n, m)?;
    if !n.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "planted generator pairs items, n = {n} must be even"
        )));
    }
    let mut rng = seeded(seed);
    let x = balanced_pattern(&mut rng, n);
    let weights = planted_row(&mut rng, &x, m);
    Ok((PartitionInstance::new(weights)?, x))
}

/// Random subset-sum instance. With `planted`, the target is `Sᵀx` for a
/// random vertex `x` (returned); otherwise it is uniform in `[0, Σs]`.
pub fn gen_ssp(
    n: usize,
    m: u32,
    seed: u64,
    planted: bool,
) -> Result<(SspInstance, Option<Vec<u8>>)> {
    check_gen_args(n, m)?;
    let mut rng = seeded(seed);
    let weights: Vec<BigUint> = (0..n).map(|_| random_weight(&mut rng, m)).collect();
    if planted {
        let x: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let target = weights
            .iter()
            .zip(&x)
            .filter(|(_, &b)| b == 1)
            .map(|(w, _)| w)
            .sum();
        Ok((SspInstance::new(weights, target)?, Some(x)))
    } else {
        let total = weight_sum(&weights);
        let target = uniform_below(&mut rng, &(total + 1u32));
        Ok((SspInstance::new(weights, target)?, None))
    }
}

/// `p` rows sharing one planted vertex. With `duplicate`, all rows are the
/// same planted row.
pub fn gen_sssp(
    n: usize,
    m: u32,
    p: usize,
    seed: u64,
    duplicate: bool,
    rho: Rational,
    delta: Rational,
) -> Result<(SsspInstance, Vec<u8>)> {
    check_gen_args(n, m)?;
    if !n.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "planted generator pairs items, n = {n} must be even"
        )));
    }
    let mut rng = seeded(seed);
    let x = balanced_pattern(&mut rng, n);
    let rows = if duplicate {
        let row = planted_row(&mut rng, &x, m);
        vec![row; p]
    } else {
        (0..p).map(|_| planted_row(&mut rng, &x, m)).collect()
    };
    Ok((SsspInstance::new(rows, rho, delta)?, x))
}

// ---------------------------------------------------------------------------
// file format

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Ssp(SspInstance),
    Partition(PartitionInstance),
    Sssp(SsspInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Ssp(_) => "ssp",
            Instance::Partition(_) => "partition",
            Instance::Sssp(_) => "sssp",
        }
    }
}

/// Generator provenance stored next to an instance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_x: Option<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceFile {
    pub instance: Instance,
    pub meta: InstanceMeta,
}

#[derive(Serialize, Deserialize)]
struct RawFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight_rows: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<RationalJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<RationalJson>,
    #[serde(default)]
    meta: InstanceMeta,
}

fn decimal_list(v: &[BigUint]) -> Vec<String> {
    v.iter().map(|w| w.to_str_radix(10)).collect()
}

fn parse_list(v: &[String], field: &str) -> Result<Vec<BigUint>> {
    v.iter()
        .enumerate()
        .map(|(k, s)| parse_biguint(s, &format!("{field}[{k}]")))
        .collect()
}

fn require<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::field(field, "missing"))
}

impl InstanceFile {
    pub fn new(instance: Instance) -> Self {
        InstanceFile {
            instance,
            meta: InstanceMeta::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut raw = RawFile {
            kind: self.instance.kind().to_string(),
            weights: None,
            weight_rows: None,
            target: None,
            rho: None,
            delta: None,
            meta: self.meta.clone(),
        };
        match &self.instance {
            Instance::Ssp(i) => {
                raw.weights = Some(decimal_list(i.weights()));
                raw.target = Some(i.target().to_str_radix(10));
            }
            Instance::Partition(i) => raw.weights = Some(decimal_list(i.weights())),
            Instance::Sssp(i) => {
                raw.weight_rows = Some(i.rows().iter().map(|r| decimal_list(r)).collect());
                raw.rho = Some(i.rho().into());
                raw.delta = Some(i.delta().into());
            }
        }
        serde_json::to_string_pretty(&raw).expect("instance serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawFile = serde_json::from_str(text)?;
        let instance = match raw.kind.as_str() {
            "ssp" => {
                let weights = parse_list(&require(raw.weights, "weights")?, "weights")?;
                let target = parse_biguint(&require(raw.target, "target")?, "target")?;
                Instance::Ssp(SspInstance::new(weights, target)?)
            }
            "partition" => {
                let weights = parse_list(&require(raw.weights, "weights")?, "weights")?;
                Instance::Partition(PartitionInstance::new(weights)?)
            }
            "sssp" => {
                let rows = require(raw.weight_rows, "weight_rows")?
                    .iter()
                    .enumerate()
                    .map(|(i, r)| parse_list(r, &format!("weight_rows[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                let rho = require(raw.rho, "rho")?.parse("rho")?;
                let delta = require(raw.delta, "delta")?.parse("delta")?;
                Instance::Sssp(SsspInstance::new(rows, rho, delta)?)
            }
            other => {
                return Err(Error::field(
                    "kind",
                    format!("unknown kind `{other}` (expected ssp, partition or sssp)"),
                ))
            }
        };
        Ok(InstanceFile {
            instance,
            meta: raw.meta,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
