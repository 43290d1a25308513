//! Slab membership and the two-alternative decision procedure.
//!
//! [`decide`] quantizes the normal, scans the integer targets within `n` of
//! `Σu/2`, and returns exactly one of two outcomes. Either no target is
//! reachable, which certifies that no vertex lies within `d★` of the central
//! hyperplane (an inner slab of thickness `2d★`), or a vertex is found, which
//! is then checked exactly against the outer slab of thickness `8d★` and the
//! quality bound `rel_error ≤ 2n/N`. A failed check is kept in the verdict as
//! an anomaly instead of being discarded.
//!
//! Thicknesses are stored squared because `d★` is irrational in general.

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::dp::{decide_items, machine_weights, scan_family, DpLimits, ScanMode};
use crate::error::{Error, Result};
use crate::instance::PartitionInstance;
use crate::numerics::{rational_int, to_bigint, BigInt, BigUint, Rational, RationalJson};
use crate::quantize::{
    min_scale_without_underflow, quantize, quantize_normal, QuantizedNormal, Resolution,
};

/// Point the slab's hyperplane passes through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Center {
    /// `½·1`.
    Cube,
    Point(Vec<Rational>),
}

/// Points within `δ/2` of the hyperplane `{y : Sᵀ(y − C) = 0}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlabSpec {
    pub normal: Vec<BigUint>,
    pub center: Center,
    /// `δ²`.
    pub thickness_sq: Rational,
}

impl SlabSpec {
    pub fn new(normal: Vec<BigUint>, center: Center, thickness: Rational) -> Result<Self> {
        if thickness.is_negative() {
            return Err(Error::Domain("slab thickness must be non-negative".into()));
        }
        Self::with_thickness_sq(normal, center, &thickness * &thickness)
    }

    pub fn with_thickness_sq(
        normal: Vec<BigUint>,
        center: Center,
        thickness_sq: Rational,
    ) -> Result<Self> {
        if thickness_sq.is_negative() {
            return Err(Error::Domain(
                "squared thickness must be non-negative".into(),
            ));
        }
        if normal.is_empty() || normal.iter().all(Zero::is_zero) {
            return Err(Error::Domain("slab normal must be non-zero".into()));
        }
        if let Center::Point(c) = &center {
            if c.len() != normal.len() {
                return Err(Error::Domain("slab center dimension mismatch".into()));
            }
        }
        Ok(SlabSpec {
            normal,
            center,
            thickness_sq,
        })
    }

    pub fn n(&self) -> usize {
        self.normal.len()
    }

    pub fn center_point(&self) -> Vec<Rational> {
        match &self.center {
            Center::Cube => vec![Rational::new(BigInt::one(), BigInt::from(2)); self.n()],
            Center::Point(c) => c.clone(),
        }
    }

    fn norm_sq(&self) -> BigUint {
        self.normal.iter().map(|s| s * s).sum()
    }

    fn center_dot(&self) -> Rational {
        match &self.center {
            Center::Cube => Rational::new(to_bigint(&self.normal.iter().sum()), BigInt::from(2)),
            Center::Point(c) => self
                .normal
                .iter()
                .zip(c)
                .map(|(s, ci)| Rational::from(to_bigint(s)) * ci)
                .sum(),
        }
    }

    /// `(Sᵀ(y − C))² / ‖S‖²`, the squared distance of `y` from the hyperplane.
    pub fn distance_sq(&self, y: &[Rational]) -> Rational {
        assert_eq!(y.len(), self.n(), "point dimension mismatch");
        let sy: Rational = self
            .normal
            .iter()
            .zip(y)
            .map(|(s, yi)| Rational::from(to_bigint(s)) * yi)
            .sum();
        let v = sy - self.center_dot();
        &v * &v / Rational::from(to_bigint(&self.norm_sq()))
    }

    pub fn vertex_distance_sq(&self, x: &[u8]) -> Rational {
        let y: Vec<Rational> = x.iter().map(|&b| rational_int(b)).collect();
        self.distance_sq(&y)
    }

    /// Exact test `(Sᵀ(y − C))² ≤ (δ²/4)·‖S‖²`.
    pub fn contains(&self, y: &[Rational]) -> bool {
        self.distance_sq(y) * rational_int(4) <= self.thickness_sq
    }

    pub fn contains_vertex(&self, x: &[u8]) -> bool {
        self.vertex_distance_sq(x) * rational_int(4) <= self.thickness_sq
    }
}

/// Membership of a vertex in the slab `𝒮(S, C, δ)`.
pub fn slab_contains(
    normal: &[BigUint],
    center: &[Rational],
    thickness: &Rational,
    x: &[u8],
) -> Result<bool> {
    let spec = SlabSpec::new(
        normal.to_vec(),
        Center::Point(center.to_vec()),
        thickness.clone(),
    )?;
    Ok(spec.contains_vertex(x))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// The found vertex is farther than `4d★` from the hyperplane.
    OuterSlab,
    /// `rel_error > 2n/N`.
    QualityBound,
}

/// Diagnostics attached to a verdict whose certificate check failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Anomaly {
    pub kinds: Vec<AnomalyKind>,
    pub cos_sq: Rational,
    /// Squared distance of the vertex from the hyperplane.
    pub distance_sq: Rational,
    /// `(4d★)²`.
    pub outer_limit_sq: Rational,
    /// `2n/N`.
    pub quality_bound: Rational,
    /// `‖S/‖S‖ − U/N‖²`, reporting only.
    pub normalization_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// No vertex within `d★` of the hyperplane.
    EmptyInner { inner_thickness_sq: Rational },
    VertexFound {
        x: Vec<u8>,
        tau: BigUint,
        /// `τ − ⌊Σu/2⌋`.
        t: i64,
        outer_thickness_sq: Rational,
        /// `|Sᵀx / (Σs/2) − 1|`.
        rel_error: Rational,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlabVerdict {
    pub outcome: Outcome,
    pub big_n: BigUint,
    pub c: Option<u32>,
    pub d_star_sq: Rational,
    pub targets_scanned: usize,
    pub table_cells: u128,
    pub anomaly: Option<Anomaly>,
}

impl SlabVerdict {
    pub fn is_empty_inner(&self) -> bool {
        matches!(self.outcome, Outcome::EmptyInner { .. })
    }

    pub fn vertex(&self) -> Option<&[u8]> {
        match &self.outcome {
            Outcome::VertexFound { x, .. } => Some(x),
            Outcome::EmptyInner { .. } => None,
        }
    }

    pub fn rel_error(&self) -> Option<&Rational> {
        match &self.outcome {
            Outcome::VertexFound { rel_error, .. } => Some(rel_error),
            Outcome::EmptyInner { .. } => None,
        }
    }

    pub fn has_anomaly(&self) -> bool {
        self.anomaly.is_some()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&VerdictJson::from(self)).expect("plain data");
        s.push('\n');
        s
    }
}

#[derive(Serialize)]
struct AnomalyJson {
    kinds: Vec<AnomalyKind>,
    cos_sq: RationalJson,
    distance_sq: RationalJson,
    outer_limit_sq: RationalJson,
    quality_bound: RationalJson,
    normalization_residual: f64,
}

#[derive(Serialize)]
struct VerdictJson {
    verdict: &'static str,
    x: Option<Vec<u8>>,
    t: Option<i64>,
    d_star_sq: RationalJson,
    rel_error: Option<RationalJson>,
    targets_scanned: usize,
    anomaly: bool,
    #[serde(rename = "N")]
    big_n: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<AnomalyJson>,
}

impl From<&SlabVerdict> for VerdictJson {
    fn from(v: &SlabVerdict) -> Self {
        let (verdict, x, t, rel_error) = match &v.outcome {
            Outcome::EmptyInner { .. } => ("empty_inner", None, None, None),
            Outcome::VertexFound {
                x, t, rel_error, ..
            } => (
                "vertex_found",
                Some(x.clone()),
                Some(*t),
                Some(rel_error.into()),
            ),
        };
        VerdictJson {
            verdict,
            x,
            t,
            d_star_sq: (&v.d_star_sq).into(),
            rel_error,
            targets_scanned: v.targets_scanned,
            anomaly: v.anomaly.is_some(),
            big_n: v.big_n.to_string(),
            diagnostics: v.anomaly.as_ref().map(|a| AnomalyJson {
                kinds: a.kinds.clone(),
                cos_sq: (&a.cos_sq).into(),
                distance_sq: (&a.distance_sq).into(),
                outer_limit_sq: (&a.outer_limit_sq).into(),
                quality_bound: (&a.quality_bound).into(),
                normalization_residual: a.normalization_residual,
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DecideOptions {
    pub mode: ScanMode,
    pub limits: DpLimits,
}

/// `|2·Sᵀx − Σs| / Σs`.
pub fn rel_error(inst: &PartitionInstance, x: &[u8]) -> Rational {
    Rational::new(inst.doubled_residual(x).abs(), to_bigint(&inst.total()))
}

pub fn decide(inst: &PartitionInstance, res: &Resolution) -> Result<SlabVerdict> {
    decide_with(inst, res, &DecideOptions::default())
}

pub fn decide_with(
    inst: &PartitionInstance,
    res: &Resolution,
    opts: &DecideOptions,
) -> Result<SlabVerdict> {
    let q = quantize(inst, res)?;
    decide_quantized(inst, &q, opts)
}

/// Runs the target scan for an already quantized normal.
pub fn decide_quantized(
    inst: &PartitionInstance,
    q: &QuantizedNormal,
    opts: &DecideOptions,
) -> Result<SlabVerdict> {
    let scan = scan_family(q, opts.mode, &opts.limits)?;
    let four = rational_int(4);
    let Some(tau) = scan.hit_tau() else {
        return Ok(SlabVerdict {
            outcome: Outcome::EmptyInner {
                inner_thickness_sq: &four * &q.d_star_sq,
            },
            big_n: q.big_n.clone(),
            c: q.c,
            d_star_sq: q.d_star_sq.clone(),
            targets_scanned: scan.targets_scanned,
            table_cells: scan.cells,
            anomaly: None,
        });
    };

    let items = machine_weights(&q.u)?;
    let x = decide_items(&items, tau).expect("scan reported this target reachable");
    let rel = rel_error(inst, &x);

    let spec = SlabSpec::with_thickness_sq(
        inst.weights().to_vec(),
        Center::Cube,
        rational_int(64) * &q.d_star_sq,
    )?;
    let distance_sq = spec.vertex_distance_sq(&x);
    let outer_limit_sq = rational_int(16) * &q.d_star_sq;
    let quality_bound = Rational::new(BigInt::from(2 * q.n()), to_bigint(&q.big_n));
    let mut kinds = Vec::new();
    if distance_sq > outer_limit_sq {
        kinds.push(AnomalyKind::OuterSlab);
    }
    if rel > quality_bound {
        kinds.push(AnomalyKind::QualityBound);
    }
    let anomaly = (!kinds.is_empty()).then(|| Anomaly {
        kinds,
        cos_sq: q.cos_sq.clone(),
        distance_sq,
        outer_limit_sq,
        quality_bound,
        normalization_residual: q.norm_residual.to_f64(),
    });

    Ok(SlabVerdict {
        outcome: Outcome::VertexFound {
            t: scan.family.offset(tau),
            tau: BigUint::from(tau),
            x,
            outer_thickness_sq: spec.thickness_sq,
            rel_error: rel,
        },
        big_n: q.big_n.clone(),
        c: q.c,
        d_star_sq: q.d_star_sq.clone(),
        targets_scanned: scan.targets_scanned,
        table_cells: scan.cells,
        anomaly,
    })
}

/// Scale used for a requested accuracy `ε`: `N = ⌈n/ε⌉`, raised to the
/// smallest value without quantization underflow if needed.
pub fn scale_for_epsilon(inst: &PartitionInstance, epsilon: &Rational) -> Result<BigUint> {
    if !epsilon.is_positive() || *epsilon >= Rational::one() {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let n = rational_int(inst.n() as u64);
    let big_n = (n / epsilon)
        .ceil()
        .to_integer()
        .to_biguint()
        .expect("positive");
    Ok(big_n.max(min_scale_without_underflow(inst.weights())))
}

/// Verdict at accuracy `ε` together with the scale that was used.
#[derive(Clone, Debug)]
pub struct EpsilonVerdict {
    pub verdict: SlabVerdict,
    pub epsilon: Rational,
    /// `8d★ ≤ 4ε`, i.e. the reported outer slab is within the `4ε` promise.
    pub within_four_epsilon: bool,
}

pub fn epsilon_api(inst: &PartitionInstance, epsilon: &Rational) -> Result<EpsilonVerdict> {
    epsilon_api_with(inst, epsilon, &DecideOptions::default())
}

pub fn epsilon_api_with(
    inst: &PartitionInstance,
    epsilon: &Rational,
    opts: &DecideOptions,
) -> Result<EpsilonVerdict> {
    let big_n = scale_for_epsilon(inst, epsilon)?;
    let q = quantize_normal(inst.weights(), big_n, None)?;
    let verdict = decide_quantized(inst, &q, opts)?;
    // (8d★)² ≤ (4ε)²  ⇔  4·d★² ≤ ε²
    let within_four_epsilon = rational_int(4) * &verdict.d_star_sq <= epsilon * epsilon;
    Ok(EpsilonVerdict {
        verdict,
        epsilon: epsilon.clone(),
        within_four_epsilon,
    })
}

/// Parses a decimal accuracy such as `0.05` exactly.
pub fn parse_epsilon(text: &str) -> Result<Rational> {
    let bad = || Error::field("epsilon", format!("`{text}` is not a decimal number"));
    let t = text.trim();
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Ok(Rational::new(num, den))
}

/// Lossy view of a squared thickness as the thickness itself.
pub fn thickness_f64(thickness_sq: &Rational) -> f64 {
    thickness_sq.to_f64().unwrap_or(f64::NAN).sqrt()
}
