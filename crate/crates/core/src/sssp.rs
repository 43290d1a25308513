//! Simultaneous subset-sum through spherical shells.
//!
//! Each constraint `S_iᵀx = ΣS_i/2` is relaxed to a shell around
//! `C_i = ½·1 − ρ·S_i/‖S_i‖` with `R_i² = ρ² + n/4`. For every vertex the
//! shell residual `r_i(x) = ‖x − C_i‖² − R_i²` equals
//! `2ρ·S_iᵀ(x − ½·1)/‖S_i‖`, so `L₀(x) = Σ r_i(x)²` vanishes exactly on
//! simultaneous solutions.
//!
//! Shells are merged pairwise up a tree of depth `k = log₂p`. The merged
//! residual satisfies `r_a + r_b = 2·r_ab`, hence
//! `r_a² + r_b² = 4·r_ab² − 2·r_a·r_b`, and by induction
//!
//! ```text
//! L₀(x) = 4^k·r_root(x)² − Σ_{q<k} 4^q·M_q(x),   M_q(x) = Σ_blocks 2·r_left·r_right.
//! ```
//!
//! The solver guesses every `M_q` on a grid and the root distance scale `B`
//! on another. Each grid leaf bounds `|r_root|`, which becomes a slab around
//! the root direction and is handed to the slab engine. Every vertex the
//! slab engine returns is validated, and the exact `L₀` decides acceptance.

use std::collections::HashMap;
use std::ops::Neg;
use std::sync::{Arc, Mutex};

use num_traits::{Num, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::dp::{solve_family, DpLimits, ScanMode};
use crate::error::{Error, Result};
use crate::instance::SsspInstance;
use crate::numerics::{
    rational_from_f64, rational_int, rational_to_f64, sign_two_surds, to_bigint, BigInt, BigUint,
    Rational, RationalJson,
};
use crate::oracle::eval_l0;
use crate::quantize::{min_scale_without_underflow, quantize_normal};

/// Field the shell geometry is evaluated in: exact rationals for
/// identities, `f64` for the search.
pub trait Scalar: Num + Clone + PartialOrd + Neg<Output = Self> {}

impl<T: Num + Clone + PartialOrd + Neg<Output = T>> Scalar for T {}

fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

/// Sphere `‖y − center‖² = radius_sq` used as a soft constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Shell<T> {
    pub center: Vec<T>,
    pub radius_sq: T,
}

impl<T: Scalar> Shell<T> {
    /// `‖y − C‖² − R²`.
    pub fn residual(&self, y: &[T]) -> T {
        assert_eq!(y.len(), self.center.len(), "dimension mismatch");
        let d = y
            .iter()
            .zip(&self.center)
            .map(|(a, c)| {
                let t = a.clone() - c.clone();
                t.clone() * t
            })
            .fold(T::zero(), |acc, v| acc + v);
        d - self.radius_sq.clone()
    }

    /// Midpoint center, `R² = (R_a² + R_b²)/2 − ‖C_a − C_b‖²/4`.
    pub fn merge(&self, other: &Shell<T>) -> Shell<T> {
        let two = two::<T>();
        let center: Vec<T> = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a.clone() + b.clone()) / two.clone())
            .collect();
        let gap = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| {
                let t = a.clone() - b.clone();
                t.clone() * t
            })
            .fold(T::zero(), |acc, v| acc + v);
        let radius_sq = (self.radius_sq.clone() + other.radius_sq.clone()) / two.clone()
            - gap / (two.clone() * two);
        Shell { center, radius_sq }
    }
}

/// Pairwise merge tree: `levels[0]` are the input shells, `levels[k]` the root.
#[derive(Clone, Debug)]
pub struct MergeTree<T> {
    levels: Vec<Vec<Shell<T>>>,
}

impl<T: Scalar> MergeTree<T> {
    pub fn build(shells: Vec<Shell<T>>) -> Result<Self> {
        let p = shells.len();
        if p == 0 || !p.is_power_of_two() {
            return Err(Error::Domain(format!(
                "merge tree needs a power of two shells, got {p}"
            )));
        }
        let mut levels = vec![shells];
        while levels.last().expect("non-empty").len() > 1 {
            let next = levels
                .last()
                .expect("non-empty")
                .chunks(2)
                .map(|pair| pair[0].merge(&pair[1]))
                .collect();
            levels.push(next);
        }
        Ok(MergeTree { levels })
    }

    /// Number of merge levels, `log₂p`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, q: usize) -> &[Shell<T>] {
        &self.levels[q]
    }

    pub fn root(&self) -> &Shell<T> {
        &self.levels[self.depth()][0]
    }

    /// Residuals of every node, level by level.
    pub fn residuals(&self, y: &[T]) -> Vec<Vec<T>> {
        self.levels
            .iter()
            .map(|lvl| lvl.iter().map(|s| s.residual(y)).collect())
            .collect()
    }

    /// `M_q(y)` for `q = 0..k`.
    pub fn cross_terms(&self, y: &[T]) -> Vec<T> {
        cross_terms_from(&self.residuals(y))
    }

    /// `Σ_i r_i(y)²`.
    pub fn l0(&self, y: &[T]) -> T {
        self.levels[0]
            .iter()
            .map(|s| {
                let r = s.residual(y);
                r.clone() * r
            })
            .fold(T::zero(), |acc, v| acc + v)
    }

    /// `4^k·r_root(y)² − Σ_q 4^q·M_q`.
    pub fn telescoped(&self, y: &[T], m: &[T]) -> T {
        assert_eq!(m.len(), self.depth(), "one correction per level");
        let r = self.root().residual(y);
        telescope(&r, m)
    }
}

fn pow4<T: Scalar>(q: usize) -> T {
    let four = two::<T>() * two::<T>();
    (0..q).fold(T::one(), |acc, _| acc * four.clone())
}

fn telescope<T: Scalar>(r_root: &T, m: &[T]) -> T {
    let k = m.len();
    let mut total = pow4::<T>(k) * r_root.clone() * r_root.clone();
    for (q, mq) in m.iter().enumerate() {
        total = total - pow4::<T>(q) * mq.clone();
    }
    total
}

fn cross_terms_from<T: Scalar>(res: &[Vec<T>]) -> Vec<T> {
    res[..res.len() - 1]
        .iter()
        .map(|lvl| {
            lvl.chunks(2)
                .map(|pair| two::<T>() * pair[0].clone() * pair[1].clone())
                .fold(T::zero(), |acc, v| acc + v)
        })
        .collect()
}

fn norm_f64(row: &[BigUint]) -> f64 {
    row.iter()
        .map(|w| w.to_f64().unwrap_or(f64::INFINITY).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn unit_rows(inst: &SsspInstance) -> Vec<Vec<f64>> {
    inst.rows()
        .iter()
        .map(|row| {
            let norm = norm_f64(row);
            row.iter()
                .map(|w| w.to_f64().unwrap_or(f64::INFINITY) / norm)
                .collect()
        })
        .collect()
}

fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows[0].len();
    let p = rows.len() as f64;
    (0..n)
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / p)
        .collect()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Shells `C_i = ½·1 − ρ·S_i/‖S_i‖`, `R_i² = ρ² + n/4`, in double precision.
pub fn build_shells(inst: &SsspInstance) -> Vec<Shell<f64>> {
    let n = inst.n();
    let rho = rational_to_f64(inst.rho());
    unit_rows(inst)
        .into_iter()
        .map(|u| Shell {
            center: u.iter().map(|a| 0.5 - rho * a).collect(),
            radius_sq: rho * rho + n as f64 / 4.0,
        })
        .collect()
}

/// Default `ρ`: the smallest multiple of `1/1024` with `ρ·‖m‖ ≥ n/δ`, where
/// `m` is the mean unit row. This keeps the curvature term `n/(8ρ‖m‖)`
/// at or below `δ/8`.
pub fn default_rho(rows: &[Vec<BigUint>], delta: &Rational) -> Rational {
    let units: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            let norm = norm_f64(row);
            row.iter()
                .map(|w| w.to_f64().unwrap_or(f64::INFINITY) / norm)
                .collect()
        })
        .collect();
    let m = l2(&mean(&units));
    let target = rows[0].len() as f64 / (rational_to_f64(delta) * m);
    let scaled = (target * 1024.0 * (1.0 + 1e-12)).ceil().max(1.0);
    Rational::new(BigInt::from(scaled as u64), BigInt::from(1024))
}

/// Exact shell test for one constraint.
///
/// Decides `|‖x − C₁‖ − R| ≤ h` with `C₁ = ½·1 − ρ·S/‖S‖` and
/// `R² = ρ² + n/4`, using `‖x − C₁‖² = R² + 2ρ·v/‖S‖`, `v = Sᵀ(x − ½·1)`.
pub fn in_shell_exact(normal: &[BigUint], rho: &Rational, h: &Rational, x: &[u8]) -> bool {
    let n = normal.len();
    let norm_sq = Rational::from(to_bigint(&normal.iter().map(|s| s * s).sum::<BigUint>()));
    let radius_sq = rho * rho + rational_int(n as u64) / rational_int(4);
    let v = half_residual(normal, x);
    // 2ρv/‖S‖ = (2ρv/‖S‖²)·√‖S‖²
    let a = rational_int(2) * rho * &v / &norm_sq;
    let h_sq = h * h;
    let two_h = rational_int(2) * h;
    // ‖x − C₁‖ ≤ R + h  ⇔  −h² + a√‖S‖² − 2h√R² ≤ 0
    let upper = sign_two_surds(&-h_sq.clone(), &a, &norm_sq, &-two_h.clone(), &radius_sq)
        != std::cmp::Ordering::Greater;
    // ‖x − C₁‖ ≥ R − h, trivial when R ≤ h
    let lower = radius_sq <= h_sq
        || sign_two_surds(&-h_sq, &a, &norm_sq, &two_h, &radius_sq) != std::cmp::Ordering::Less;
    upper && lower
}

/// `|Sᵀ(x − ½·1)| / ‖S‖ ≤ half_width`, exactly.
pub fn in_slab_exact(normal: &[BigUint], half_width: &Rational, x: &[u8]) -> bool {
    let norm_sq = Rational::from(to_bigint(&normal.iter().map(|s| s * s).sum::<BigUint>()));
    let v = half_residual(normal, x);
    &v * &v <= half_width * half_width * norm_sq
}

/// `n/(8ρ)`, the bound on `√(ρ² + n/4) − ρ`.
pub fn curvature_bound(n: usize, rho: &Rational) -> Rational {
    rational_int(n as u64) / (rational_int(8) * rho)
}

fn half_residual(normal: &[BigUint], x: &[u8]) -> Rational {
    let picked: BigUint = normal
        .iter()
        .zip(x)
        .filter(|(_, &b)| b != 0)
        .map(|(w, _)| w)
        .sum();
    let total: BigUint = normal.iter().sum();
    Rational::new(
        BigInt::from(picked) * 2 - BigInt::from(total),
        BigInt::from(2),
    )
}

/// One axis of the correction grid: `{−M̄, −M̄ + step, …}` up to `M̄`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridAxis {
    pub bound: Rational,
    pub step: Rational,
    pub count: u64,
}

impl GridAxis {
    fn new(bound: Rational, step: Rational) -> Self {
        let count = (rational_int(2) * &bound / &step).ceil().to_integer();
        let count = count.to_u64().unwrap_or(u64::MAX - 1) + 1;
        GridAxis { bound, step, count }
    }

    pub fn value(&self, j: u64) -> Rational {
        -&self.bound + &self.step * rational_int(j)
    }
}

/// Per-level correction grids.
///
/// `|r_node(x)| ≤ ρ√n` at every vertex, and level `q` has `p/2^{q+1}`
/// blocks, so `|M_q| ≤ p·ρ²·n/2^q`. The step is `δ/(4^q·log₂p)`, which
/// keeps the total telescoping error at most `δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrectionGrid {
    pub levels: Vec<GridAxis>,
}

impl CorrectionGrid {
    pub fn new(p: usize, n: usize, rho: &Rational, delta: &Rational) -> Self {
        let k = p.trailing_zeros() as usize;
        let levels = (0..k)
            .map(|q| {
                let bound = rational_int(p as u64) * rho * rho * rational_int(n as u64)
                    / rational_int(1u64 << q);
                let step = delta / (pow4::<Rational>(q) * rational_int(k as u64));
                GridAxis::new(bound, step)
            })
            .collect();
        CorrectionGrid { levels }
    }

    pub fn cardinality(&self) -> u128 {
        self.levels.iter().map(|a| a.count as u128).product()
    }
}

/// Grid over `B ≈ ‖x − C_root‖ + R_root`.
#[derive(Clone, Debug, PartialEq)]
pub struct BGrid {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
    pub count: u64,
}

impl BGrid {
    pub fn value(&self, j: u64) -> f64 {
        self.lower + self.step * j as f64
    }
}

/// Instance geometry prepared for the search.
#[derive(Clone, Debug)]
pub struct ShellSystem {
    pub n: usize,
    pub p: usize,
    pub rho: Rational,
    pub delta: Rational,
    /// Mean unit direction of each tree node, level by level.
    pub node_dirs: Vec<Vec<Vec<f64>>>,
    pub tree: MergeTree<f64>,
    pub grid: CorrectionGrid,
    /// `ρ·‖m‖`, the root shell's distance from the cube center.
    pub rho_root: f64,
    pub root_radius: f64,
    pub curvature_term: f64,
}

impl ShellSystem {
    pub fn new(inst: &SsspInstance) -> Result<Self> {
        let n = inst.n();
        let p = inst.p();
        let units = unit_rows(inst);
        let mut node_dirs = vec![units];
        while node_dirs.last().expect("non-empty").len() > 1 {
            let next = node_dirs
                .last()
                .expect("non-empty")
                .chunks(2)
                .map(mean)
                .collect();
            node_dirs.push(next);
        }
        let tree = MergeTree::build(build_shells(inst))?;
        let rho = rational_to_f64(inst.rho());
        let root_dir = &node_dirs.last().expect("root")[0];
        let rho_root = rho * l2(root_dir);
        let root_radius = (rho_root * rho_root + n as f64 / 4.0).sqrt();
        let curvature_term = n as f64 / (8.0 * rho_root);
        Ok(ShellSystem {
            n,
            p,
            rho: inst.rho().clone(),
            delta: inst.delta().clone(),
            node_dirs,
            tree,
            grid: CorrectionGrid::new(p, n, inst.rho(), inst.delta()),
            rho_root,
            root_radius,
            curvature_term,
        })
    }

    pub fn depth(&self) -> usize {
        self.node_dirs.len() - 1
    }

    /// Node residuals at a vertex from `r_node(x) = 2ρ·m_nodeᵀ(x − ½·1)`.
    pub fn vertex_residuals(&self, x: &[u8]) -> Vec<Vec<f64>> {
        let rho = rational_to_f64(&self.rho);
        self.node_dirs
            .iter()
            .map(|lvl| {
                lvl.iter()
                    .map(|m| {
                        2.0 * rho
                            * m.iter()
                                .zip(x)
                                .map(|(mk, &xk)| mk * (xk as f64 - 0.5))
                                .sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn vertex_cross_terms(&self, x: &[u8]) -> Vec<f64> {
        cross_terms_from(&self.vertex_residuals(x))
    }

    /// `B` range from the triangle inequality around the root center.
    pub fn b_grid(&self, step: Option<f64>) -> BGrid {
        let half_diag = (self.n as f64).sqrt() / 2.0;
        let lower = (half_diag - self.rho_root).abs() + self.root_radius;
        let upper = half_diag + self.rho_root + self.root_radius;
        let step = step.unwrap_or_else(|| rational_to_f64(&self.delta) / (8.0 * upper));
        let count = ((upper - lower) / step).ceil() as u64 + 1;
        BGrid {
            lower,
            upper,
            step,
            count,
        }
    }
}

/// Search parameters.
#[derive(Clone, Debug)]
pub struct SsspOptions {
    /// Spacing of the `B` grid; defaults to `δ/(8·B_U)`.
    pub epsilon_b: Option<f64>,
    /// Largest admissible number of grid leaves.
    pub leaf_budget: u128,
    /// Leaf slabs are quantized at no less than `n^leaf_c`.
    pub leaf_c: u32,
    pub limits: DpLimits,
}

/// Default cap on grid leaves.
pub const DEFAULT_LEAF_BUDGET: u128 = 10_000_000;

impl Default for SsspOptions {
    fn default() -> Self {
        SsspOptions {
            epsilon_b: None,
            leaf_budget: DEFAULT_LEAF_BUDGET,
            leaf_c: 2,
            limits: DpLimits::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsspCertificate {
    pub x: Vec<u8>,
    /// Chosen grid value per level.
    pub m: Vec<Rational>,
    pub b: f64,
    pub l0: Rational,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsspResult {
    pub certificate: Option<SsspCertificate>,
    pub grid_size: u128,
    pub curvature_term: f64,
}

#[derive(Serialize)]
struct SsspJson {
    found: bool,
    x: Option<Vec<u8>>,
    #[serde(rename = "M")]
    m: Option<Vec<RationalJson>>,
    #[serde(rename = "B")]
    b: Option<RationalJson>,
    #[serde(rename = "L0")]
    l0: Option<RationalJson>,
    curvature_term: RationalJson,
    grid_size: u128,
}

fn f64_json(v: f64) -> RationalJson {
    (&rational_from_f64(v).unwrap_or_else(Rational::zero)).into()
}

impl SsspResult {
    pub fn to_json(&self) -> String {
        let c = self.certificate.as_ref();
        let j = SsspJson {
            found: c.is_some(),
            x: c.map(|c| c.x.clone()),
            m: c.map(|c| c.m.iter().map(RationalJson::from).collect()),
            b: c.map(|c| f64_json(c.b)),
            l0: c.map(|c| (&c.l0).into()),
            curvature_term: f64_json(self.curvature_term),
            grid_size: self.grid_size,
        };
        serde_json::to_string_pretty(&j).expect("plain data") + "\n"
    }
}

/// A vertex returned by a leaf slab, with everything validation needs.
struct Candidate {
    x: Vec<u8>,
    cross: Vec<f64>,
    /// `‖x − C_root‖ + R_root`.
    b_true: f64,
    l0: Rational,
    l0_ok: bool,
}

/// Leaf normal: the root direction scaled to 40-bit integers.
fn leaf_normal(sys: &ShellSystem) -> Vec<BigUint> {
    let root = &sys.node_dirs[sys.depth()][0];
    root.iter()
        .map(|&a| BigUint::from(((a * (1u64 << 40) as f64).round() as u64).max(1)))
        .collect()
}

struct LeafSolver<'a> {
    inst: &'a SsspInstance,
    sys: &'a ShellSystem,
    normal: Vec<BigUint>,
    floor: BigUint,
    limits: DpLimits,
    five_delta: Rational,
    cache: Mutex<HashMap<BigUint, Arc<Vec<Candidate>>>>,
}

impl LeafSolver<'_> {
    fn candidates(&self, big_n: BigUint) -> Result<Arc<Vec<Candidate>>> {
        if let Some(c) = self.cache.lock().expect("cache lock").get(&big_n) {
            return Ok(c.clone());
        }
        let q = quantize_normal(&self.normal, big_n.clone(), None)?;
        let family = solve_family(&q, ScanMode::Full, &self.limits)?;
        let mut hits: Vec<_> = family
            .into_iter()
            .filter_map(|o| o.x.map(|x| (o.t, o.tau, x)))
            .collect();
        // center-out, smaller target first on ties
        let sum_u: usize = crate::dp::machine_weights(&q.u)?.iter().sum();
        hits.sort_by_key(|(_, tau, _)| ((2 * tau).abs_diff(sum_u), *tau));
        let root = self.sys.tree.root();
        let list: Vec<Candidate> = hits
            .into_iter()
            .map(|(_, _, x)| {
                let cross = self.sys.vertex_cross_terms(&x);
                let y: Vec<f64> = x.iter().map(|&b| b as f64).collect();
                let dist = (root.residual(&y) + root.radius_sq).max(0.0).sqrt();
                let l0 = eval_l0(self.inst, &x);
                Candidate {
                    l0_ok: l0 <= self.five_delta,
                    cross,
                    b_true: dist + self.sys.root_radius,
                    l0,
                    x,
                }
            })
            .collect();
        let list = Arc::new(list);
        self.cache
            .lock()
            .expect("cache lock")
            .entry(big_n)
            .or_insert_with(|| list.clone());
        Ok(list)
    }

    fn scale_for(&self, thickness: f64) -> Result<BigUint> {
        let want = self.sys.n as f64 / thickness;
        if !want.is_finite() || want > 1e30 {
            return Err(Error::resource(
                "leaf slab scale",
                format!("N ≈ {want:e}"),
                "1e30",
            ));
        }
        Ok(BigUint::from(want.ceil() as u128).max(self.floor.clone()))
    }
}

/// Runs the grid search. Returns the first validated certificate in
/// lexicographic `(M_0, …, M_{k−1}, B)` order, if any.
pub fn solve(inst: &SsspInstance, opts: &SsspOptions) -> Result<SsspResult> {
    let sys = ShellSystem::new(inst)?;
    let delta = rational_to_f64(inst.delta());
    if sys.curvature_term > delta / 8.0 * (1.0 + 1e-9) {
        let norm_m = sys.rho_root / rational_to_f64(inst.rho());
        return Err(Error::Domain(format!(
            "rho = {} is too small: curvature n/(8ρ‖m‖) = {:.6} exceeds δ/8 = {:.6}; use rho ≥ {:.6}",
            inst.rho(),
            sys.curvature_term,
            delta / 8.0,
            inst.n() as f64 / (delta * norm_m)
        )));
    }
    let b_grid = sys.b_grid(opts.epsilon_b);
    let grid_size = sys.grid.cardinality().saturating_mul(b_grid.count as u128);
    if grid_size > opts.leaf_budget {
        return Err(Error::resource(
            "SSSP grid",
            format!("{grid_size} leaves"),
            format!("{} leaves", opts.leaf_budget),
        ));
    }

    let normal = leaf_normal(&sys);
    let floor = BigUint::from(inst.n())
        .pow(opts.leaf_c.max(1))
        .max(min_scale_without_underflow(&normal));
    let solver = LeafSolver {
        inst,
        sys: &sys,
        normal,
        floor,
        limits: opts.limits,
        five_delta: rational_int(5) * inst.delta(),
        cache: Mutex::new(HashMap::new()),
    };
    let k = sys.depth();
    let steps: Vec<f64> = sys
        .grid
        .levels
        .iter()
        .map(|a| rational_to_f64(&a.step))
        .collect();
    let bounds: Vec<f64> = sys
        .grid
        .levels
        .iter()
        .map(|a| rational_to_f64(&a.bound))
        .collect();
    let four_k = 4f64.powi(k as i32);

    let leaf = |index: u128| -> Option<Result<SsspCertificate>> {
        // decompose: B is the fastest-moving coordinate, M_0 the slowest
        let mut rest = index;
        let jb = (rest % b_grid.count as u128) as u64;
        rest /= b_grid.count as u128;
        let mut jm = vec![0u64; k];
        for q in (0..k).rev() {
            let c = sys.grid.levels[q].count as u128;
            jm[q] = (rest % c) as u64;
            rest /= c;
        }
        let m: Vec<f64> = (0..k)
            .map(|q| -bounds[q] + steps[q] * jm[q] as f64)
            .collect();
        let weighted: f64 = m
            .iter()
            .enumerate()
            .map(|(q, v)| 4f64.powi(q as i32) * v)
            .sum();
        let w = (3.0 * delta + weighted) / four_k;
        if w < 0.0 {
            return None;
        }
        let b = b_grid.value(jb);
        let h = w.sqrt() / b;
        let thickness = 2.0 * (h + sys.curvature_term);
        let big_n = match solver.scale_for(thickness) {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        let cands = match solver.candidates(big_n) {
            Ok(c) => c,
            Err(e) => return Some(Err(e)),
        };
        cands
            .iter()
            .find(|c| {
                c.l0_ok
                    && (b - c.b_true).abs() <= b_grid.step
                    && (0..k).all(|q| (m[q] - c.cross[q]).abs() <= steps[q])
            })
            .map(|c| {
                Ok(SsspCertificate {
                    x: c.x.clone(),
                    m: (0..k).map(|q| sys.grid.levels[q].value(jm[q])).collect(),
                    b,
                    l0: c.l0.clone(),
                    accepted: true,
                })
            })
    };

    let found = (0..grid_size)
        .into_par_iter()
        .find_map_first(leaf)
        .transpose()?;
    Ok(SsspResult {
        certificate: found,
        grid_size,
        curvature_term: sys.curvature_term,
    })
}
