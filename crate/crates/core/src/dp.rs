//! Pseudo-polynomial subset-sum dynamic program over bit rows.
//!
//! Row `k` of the table is the set of sums reachable with the first `k`
//! items, stored as a bitset truncated at the target. Decision needs a
//! single rolling row. Reconstruction keeps a snapshot every `⌈√n⌉` rows and
//! re-derives each segment while backtracking, so memory stays at
//! `O(√n · τ)` bits instead of `O(n · τ)`.

use std::cmp::Ordering;

use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{BigInt, BigUint};
use crate::quantize::QuantizedNormal;

/// Environment variable overriding [`DEFAULT_MAX_CELLS`].
pub const BUDGET_ENV: &str = "SLABSUM_BUDGET_CELLS";

/// Default cap on `n · (τ + 1)` cells per DP table.
pub const DEFAULT_MAX_CELLS: u128 = 1 << 38;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpLimits {
    pub max_cells: u128,
}

impl Default for DpLimits {
    fn default() -> Self {
        DpLimits {
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

impl DpLimits {
    /// Reads [`BUDGET_ENV`], falling back to the default when unset or unparsable.
    pub fn from_env() -> Self {
        std::env::var(BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u128>().ok())
            .map(|max_cells| DpLimits { max_cells })
            .unwrap_or_default()
    }

    fn check(&self, n: usize, tau: usize) -> Result<()> {
        let cells = table_cells(n, tau);
        if cells > self.max_cells {
            return Err(Error::resource(
                format!("DP table (n = {n}, target = {tau})"),
                format!("{cells} cells"),
                format!("{} cells", self.max_cells),
            ));
        }
        Ok(())
    }
}

/// `n · (τ + 1)`.
pub fn table_cells(n: usize, tau: usize) -> u128 {
    n as u128 * (tau as u128 + 1)
}

fn to_usize(v: &BigUint, what: &str) -> Result<usize> {
    v.to_usize()
        .ok_or_else(|| Error::resource(what, v, format!("{} (machine word)", usize::MAX)))
}

/// Converts weights to machine words; every weight must be positive.
pub fn machine_weights(u: &[BigUint]) -> Result<Vec<usize>> {
    let out = u
        .iter()
        .map(|w| to_usize(w, "DP item weight"))
        .collect::<Result<Vec<_>>>()?;
    if out.contains(&0) {
        return Err(Error::Domain("DP weights must be positive".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct BitRow {
    words: Vec<u64>,
    cap: usize,
    /// Largest sum that can be set in this row.
    reach: usize,
}

impl BitRow {
    fn origin(cap: usize) -> Self {
        let mut words = vec![0u64; cap / 64 + 1];
        words[0] = 1;
        BitRow {
            words,
            cap,
            reach: 0,
        }
    }

    #[inline]
    fn get(&self, sigma: usize) -> bool {
        sigma <= self.cap && (self.words[sigma / 64] >> (sigma % 64)) & 1 == 1
    }

    /// `row |= row << shift`, truncated at `cap`.
    fn add_item(&mut self, shift: usize) {
        if shift > self.cap {
            return;
        }
        let new_reach = (self.reach + shift).min(self.cap);
        let ws = shift / 64;
        let bs = (shift % 64) as u32;
        let top = new_reach / 64;
        let words = &mut self.words;
        if bs == 0 {
            for i in (ws..=top).rev() {
                words[i] |= words[i - ws];
            }
        } else {
            for i in (ws..=top).rev() {
                let src = i - ws;
                let mut v = words[src] << bs;
                if src > 0 {
                    v |= words[src - 1] >> (64 - bs);
                }
                words[i] |= v;
            }
        }
        let tail = (self.cap % 64) as u32;
        if tail != 63 {
            let last = words.len() - 1;
            words[last] &= (1u64 << (tail + 1)) - 1;
        }
        self.reach = new_reach;
    }
}

/// Decision only: is `tau` a subset sum of `items`?
pub fn reachable(items: &[usize], tau: usize) -> bool {
    let total: usize = items.iter().sum();
    if tau > total {
        return false;
    }
    let mut row = BitRow::origin(tau);
    for &w in items {
        row.add_item(w);
        if row.get(tau) {
            return true;
        }
    }
    row.get(tau)
}

/// Prefix reachability table with checkpointed rows.
///
/// `row(k)[σ]` is true iff some subset of the first `k` items sums to `σ`.
#[derive(Clone, Debug)]
pub struct ReachTable {
    items: Vec<usize>,
    target_cap: usize,
    stride: usize,
    checkpoints: Vec<BitRow>,
    last: BitRow,
}

impl ReachTable {
    pub fn build(items: Vec<usize>, target_cap: usize) -> Self {
        let n = items.len();
        let stride = num_integer::Roots::sqrt(&n).max(1);
        let mut row = BitRow::origin(target_cap);
        let mut checkpoints = vec![row.clone()];
        for (k, &w) in items.iter().enumerate() {
            row.add_item(w);
            if (k + 1) % stride == 0 && k + 1 < n {
                checkpoints.push(row.clone());
            }
        }
        ReachTable {
            items,
            target_cap,
            stride,
            checkpoints,
            last: row,
        }
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn target_cap(&self) -> usize {
        self.target_cap
    }

    /// Final-row lookup.
    pub fn reachable(&self, sigma: usize) -> bool {
        self.last.get(sigma)
    }

    fn derive_row(&self, k: usize) -> BitRow {
        let seg = (k / self.stride).min(self.checkpoints.len() - 1);
        let mut row = self.checkpoints[seg].clone();
        for &w in &self.items[seg * self.stride..k] {
            row.add_item(w);
        }
        row
    }

    /// Row `k` as booleans over `[0, target_cap]`.
    pub fn row(&self, k: usize) -> Vec<bool> {
        assert!(k <= self.n());
        let row = self.derive_row(k);
        (0..=self.target_cap).map(|s| row.get(s)).collect()
    }

    /// Backtracks from item `n` down to item 1, excluding item `k` whenever
    /// the remaining sum is already reachable without it.
    pub fn reconstruct(&self, tau: usize) -> Option<Vec<u8>> {
        if tau > self.target_cap || !self.reachable(tau) {
            return None;
        }
        let n = self.n();
        let mut x = vec![0u8; n];
        let mut sigma = tau;
        let mut k = n;
        for seg in (0..self.checkpoints.len()).rev() {
            let start = seg * self.stride;
            if start >= k {
                continue;
            }
            // rows start .. k-1 of this segment
            let mut rows = Vec::with_capacity(k - start);
            let mut row = self.checkpoints[seg].clone();
            rows.push(row.clone());
            for &w in &self.items[start..k - 1] {
                row.add_item(w);
                rows.push(row.clone());
            }
            while k > start {
                let prev = &rows[k - 1 - start];
                if !prev.get(sigma) {
                    x[k - 1] = 1;
                    sigma -= self.items[k - 1];
                }
                k -= 1;
            }
        }
        debug_assert_eq!(sigma, 0);
        Some(x)
    }
}

/// Finds `x ∈ {0,1}^n` with `uᵀx = τ`, or `None`.
///
/// Among all solutions the lexicographically smallest `x` is returned
/// (item 1 is excluded whenever possible, then item 2, ...).
pub fn dp_decide(u: &[BigUint], tau: &BigUint, limits: &DpLimits) -> Result<Option<Vec<u8>>> {
    let total: BigUint = u.iter().sum();
    if *tau > total {
        return Ok(None);
    }
    let items = machine_weights(u)?;
    let tau = to_usize(tau, "DP target")?;
    limits.check(items.len(), tau)?;
    Ok(decide_items(&items, tau))
}

/// Machine-word variant of [`dp_decide`].
pub fn decide_items(items: &[usize], tau: usize) -> Option<Vec<u8>> {
    if tau > items.iter().sum::<usize>() {
        return None;
    }
    // Building over the reversed items makes "exclude item n first" in the
    // table's own order mean "exclude item 1 first" in the caller's.
    let reversed: Vec<usize> = items.iter().rev().copied().collect();
    let table = ReachTable::build(reversed, tau);
    let mut x = table.reconstruct(tau)?;
    x.reverse();
    Some(x)
}

/// Integer targets within `n` of `Σu/2`:
/// `{⌈Σu/2⌉ − n, …, ⌊Σu/2⌋ + n} ∩ [0, Σu]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetFamily {
    pub sum_u: usize,
    pub targets: Vec<usize>,
}

impl TargetFamily {
    pub fn new(sum_u: usize, n: usize) -> Self {
        let lo = sum_u.div_ceil(2).saturating_sub(n);
        let hi = (sum_u / 2 + n).min(sum_u);
        TargetFamily {
            sum_u,
            targets: (lo..=hi).collect(),
        }
    }

    /// `τ − ⌊Σu/2⌋`.
    pub fn offset(&self, tau: usize) -> i64 {
        tau as i64 - (self.sum_u / 2) as i64
    }

    /// Window indices ordered by `|2τ − Σu|`, smaller `τ` first on ties.
    pub fn center_out(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.targets.len()).collect();
        idx.sort_by(|&a, &b| {
            let da = (2 * self.targets[a]).abs_diff(self.sum_u);
            let db = (2 * self.targets[b]).abs_diff(self.sum_u);
            da.cmp(&db).then(self.targets[a].cmp(&self.targets[b]))
        });
        idx
    }

    /// Largest table among the window's targets, in cells.
    pub fn max_cells(&self, n: usize) -> u128 {
        self.targets.last().map_or(0, |&t| table_cells(n, t))
    }

    /// Total work over the window, in cells.
    pub fn total_cells(&self, n: usize) -> u128 {
        self.targets.iter().map(|&t| table_cells(n, t)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScanMode {
    /// Visit targets center-out and stop at the first reachable one.
    #[default]
    FirstHit,
    /// Decide every target (in parallel), then pick the first hit
    /// in center-out order.
    Full,
}

/// Verdict of one family target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyOutcome {
    pub tau: usize,
    pub t: i64,
    pub x: Option<Vec<u8>>,
}

/// Result of scanning a family for reachability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyScan {
    pub family: TargetFamily,
    pub hit: Option<usize>,
    pub targets_scanned: usize,
    pub cells: u128,
}

fn family_for(q: &QuantizedNormal, limits: &DpLimits) -> Result<(Vec<usize>, TargetFamily)> {
    let items = machine_weights(&q.u)?;
    let sum_u: usize = items
        .iter()
        .try_fold(0usize, |acc, &w| acc.checked_add(w))
        .ok_or_else(|| Error::resource("Σu", "overflow", usize::MAX))?;
    let family = TargetFamily::new(sum_u, items.len());
    let big = family.max_cells(items.len());
    if big > limits.max_cells {
        return Err(Error::resource(
            format!("DP table for N = {}", q.big_n),
            format!("{big} cells"),
            format!("{} cells", limits.max_cells),
        ));
    }
    Ok((items, family))
}

/// Reachability of the family targets; returns the window index of the
/// center-most reachable target.
pub fn scan_family(q: &QuantizedNormal, mode: ScanMode, limits: &DpLimits) -> Result<FamilyScan> {
    let (items, family) = family_for(q, limits)?;
    let n = items.len();
    let order = family.center_out();
    match mode {
        ScanMode::FirstHit => {
            let mut scanned = 0;
            let mut cells = 0u128;
            for &i in &order {
                scanned += 1;
                cells += table_cells(n, family.targets[i]);
                if reachable(&items, family.targets[i]) {
                    return Ok(FamilyScan {
                        family,
                        hit: Some(i),
                        targets_scanned: scanned,
                        cells,
                    });
                }
            }
            Ok(FamilyScan {
                targets_scanned: scanned,
                cells,
                family,
                hit: None,
            })
        }
        ScanMode::Full => {
            let verdicts: Vec<bool> = family
                .targets
                .par_iter()
                .map(|&tau| reachable(&items, tau))
                .collect();
            let hit = order.iter().copied().find(|&i| verdicts[i]);
            Ok(FamilyScan {
                targets_scanned: family.targets.len(),
                cells: family.total_cells(n),
                family,
                hit,
            })
        }
    }
}

/// DP verdict with reconstruction for every window target.
///
/// In [`ScanMode::FirstHit`] only the targets up to the first hit in
/// center-out order are solved; the returned list is always in window order.
pub fn solve_family(
    q: &QuantizedNormal,
    mode: ScanMode,
    limits: &DpLimits,
) -> Result<Vec<FamilyOutcome>> {
    let (items, family) = family_for(q, limits)?;
    let outcome = |tau: usize| FamilyOutcome {
        tau,
        t: family.offset(tau),
        x: decide_items(&items, tau),
    };
    match mode {
        ScanMode::Full => Ok(family.targets.par_iter().map(|&tau| outcome(tau)).collect()),
        ScanMode::FirstHit => {
            let mut solved = Vec::new();
            for i in family.center_out() {
                let o = outcome(family.targets[i]);
                let hit = o.x.is_some();
                solved.push(o);
                if hit {
                    break;
                }
            }
            solved.sort_by_key(|o| o.tau);
            Ok(solved)
        }
    }
}

/// `uᵀx` as an exact integer.
pub fn dot_vertex(u: &[BigUint], x: &[u8]) -> BigUint {
    u.iter()
        .zip(x)
        .filter(|(_, &b)| b != 0)
        .map(|(w, _)| w)
        .sum()
}

/// Compares `2·uᵀx` against `Σu`, i.e. which side of the center `x` lies.
pub fn side_of_center(u: &[BigUint], x: &[u8]) -> Ordering {
    let total: BigUint = u.iter().sum();
    let twice = BigInt::from(dot_vertex(u, x)) * BigInt::from(2u8);
    twice.cmp(&BigInt::from(total))
}

impl FamilyOutcome {
    pub fn is_hit(&self) -> bool {
        self.x.is_some()
    }
}

impl FamilyScan {
    pub fn hit_tau(&self) -> Option<usize> {
        self.hit.map(|i| self.family.targets[i])
    }
}
