//! Runtime scaling harness for the slab decision procedure.

use std::time::Instant;

use crate::dp::{DpLimits, ScanMode};
use crate::error::{Error, Result};
use crate::instance::{gen_random, PartitionInstance};
use crate::quantize::{quantize, QuantizedNormal, Resolution};
use crate::slab::{decide_quantized, DecideOptions};

pub const CSV_HEADER: &str = "n,N,c,wall_ms,targets_scanned,table_cells";

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub c: u32,
    pub repeats: usize,
    /// Weight bit width of the generated instances.
    pub bits: u32,
    pub seed: u64,
    pub limits: DpLimits,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ns: vec![64, 128, 256, 512],
            c: 2,
            repeats: 3,
            bits: 32,
            seed: 0,
            limits: DpLimits::from_env(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub big_n: String,
    pub c: u32,
    pub wall_ms: f64,
    pub targets_scanned: usize,
    pub table_cells: u128,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.3},{},{}",
            self.n, self.big_n, self.c, self.wall_ms, self.targets_scanned, self.table_cells
        )
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln(median wall_ms)` against `ln n`.
    pub slope: Option<f64>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    /// Median wall time per `n`, in the order of first appearance.
    pub fn medians(&self) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = Vec::new();
        for r in &self.rows {
            if !ns.contains(&r.n) {
                ns.push(r.n);
            }
        }
        ns.into_iter()
            .map(|n| {
                let times: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.n == n)
                    .map(|r| r.wall_ms)
                    .collect();
                (n, median(times))
            })
            .collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Random instance of size `n` that quantizes without underflow at `res`,
/// trying seeds `seed, seed + 1, …`.
pub fn bench_instance(
    n: usize,
    bits: u32,
    seed: u64,
    res: &Resolution,
) -> Result<(PartitionInstance, QuantizedNormal)> {
    let mut last = None;
    for s in seed..seed + 1000 {
        let inst = gen_random(n, bits, s)?;
        match quantize(&inst, res) {
            Ok(q) => return Ok((inst, q)),
            Err(e @ Error::QuantizationUnderflow { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("loop ran"))
}

pub fn run(config: &BenchConfig) -> Result<BenchReport> {
    let res = Resolution::Exponent(config.c);
    let opts = DecideOptions {
        mode: ScanMode::Full,
        limits: config.limits,
    };
    let mut rows = Vec::new();
    for &n in &config.ns {
        let (inst, q) = bench_instance(n, config.bits, config.seed, &res)?;
        for _ in 0..config.repeats.max(1) {
            let start = Instant::now();
            let v = decide_quantized(&inst, &q, &opts)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            rows.push(BenchRow {
                n,
                big_n: q.big_n.to_string(),
                c: config.c,
                wall_ms,
                targets_scanned: v.targets_scanned,
                table_cells: v.table_cells,
            });
        }
    }
    let mut report = BenchReport { rows, slope: None };
    let points: Vec<(f64, f64)> = report
        .medians()
        .into_iter()
        .filter(|&(_, t)| t > 0.0)
        .map(|(n, t)| ((n as f64).ln(), t.ln()))
        .collect();
    report.slope = fit_slope(&points);
    Ok(report)
}
