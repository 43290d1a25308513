use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use slabsum::bench::{self, BenchConfig};
use slabsum::dp::{dp_decide, DpLimits, ScanMode};
use slabsum::instance::{
    gen_planted, gen_random, gen_ssp, gen_sssp, Instance, InstanceFile, InstanceMeta,
    PartitionInstance, SsspInstance,
};
use slabsum::numerics::{parse_biguint, rational_int, Rational, RationalJson};
use slabsum::oracle;
use slabsum::quantize::Resolution;
use slabsum::slab::{decide_with, epsilon_api_with, parse_epsilon, DecideOptions};
use slabsum::sssp::{self, SsspOptions};
use slabsum::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_RESOURCE: u8 = 2;
const EXIT_ANOMALY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "slabsum",
    version,
    about = "Subset-sum solvers over the hypercube"
)]
struct Cli {
    /// Worker threads (default: all cores). `1` runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Cap on DP table cells, overriding SLABSUM_BUDGET_CELLS.
    #[arg(long, global = true)]
    budget_cells: Option<u128>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Exact DP on a subset-sum (or even-sum partition) instance.
    SolveExact(SolveExactArgs),
    /// Slab decision at accuracy epsilon.
    SolveFptas(FptasArgs),
    /// Slab decision at an explicit resolution.
    DecideSlab(DecideArgs),
    /// Grid search for a simultaneous subset-sum instance.
    SolveSssp(SsspArgs),
    /// Brute-force enumeration.
    Oracle(OracleArgs),
    /// Runtime scaling sweep, written as CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Partition,
    Ssp,
    Sssp,
}

#[derive(Args)]
struct Io {
    /// Instance file, or `-` for stdin.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output file (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "partition")]
    kind: Kind,
    #[arg(long)]
    n: usize,
    /// Weights are drawn from [1, 2^bits).
    #[arg(long, default_value_t = 16)]
    bits: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Plant a known solution.
    #[arg(long)]
    planted: bool,
    /// Number of rows (sssp).
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Repeat one planted row (sssp).
    #[arg(long)]
    duplicate: bool,
    /// Shell offset (sssp); defaults to the curvature-safe value.
    #[arg(long)]
    rho: Option<String>,
    /// Target residual (sssp).
    #[arg(long, default_value = "1")]
    delta: String,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveExactArgs {
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct ScanArgs {
    /// Decide every target of the window instead of stopping at the first hit.
    #[arg(long)]
    full_scan: bool,
}

#[derive(Args)]
struct FptasArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long)]
    epsilon: String,
    #[command(flatten)]
    scan: ScanArgs,
}

#[derive(Args)]
#[group(id = "resolution", required = true, multiple = false)]
struct ResolutionArgs {
    /// N = n^c.
    #[arg(long, group = "resolution")]
    c: Option<u32>,
    /// Explicit N.
    #[arg(long, group = "resolution")]
    big_n: Option<String>,
}

#[derive(Args)]
struct DecideArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    res: ResolutionArgs,
    #[command(flatten)]
    scan: ScanArgs,
}

#[derive(Args)]
struct SsspArgs {
    #[command(flatten)]
    io: Io,
    /// Override the file's delta.
    #[arg(long)]
    delta: Option<String>,
    /// Override the file's rho.
    #[arg(long)]
    rho: Option<String>,
    /// Spacing of the B grid (default delta / (8 B_U)).
    #[arg(long)]
    epsilon_b: Option<f64>,
    #[arg(long, default_value_t = sssp::DEFAULT_LEAF_BUDGET)]
    leaf_budget: u128,
    /// Leaf slabs use N ≥ n^leaf_c.
    #[arg(long, default_value_t = 2)]
    leaf_c: u32,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
    oracle_cap: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    c: u32,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 32)]
    bits: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Command output plus whether it carries an anomaly.
struct Report {
    text: String,
    anomaly: bool,
}

impl Report {
    fn plain(text: String) -> Self {
        Report {
            text,
            anomaly: false,
        }
    }
}

fn read_instance(path: &Path) -> slabsum::Result<InstanceFile> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        InstanceFile::from_json(&s)
    } else {
        InstanceFile::read(path)
    }
}

fn emit(out: Option<&Path>, text: &str) -> slabsum::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_rational(text: &str, field: &str) -> slabsum::Result<Rational> {
    if let Some((a, b)) = text.split_once('/') {
        return RationalJson {
            num: a.trim().to_string(),
            den: b.trim().to_string(),
        }
        .parse(field);
    }
    parse_epsilon(text).map_err(|_| Error::Field {
        field: field.to_string(),
        message: format!("`{text}` is not a decimal or a/b fraction"),
    })
}

fn partition_of(file: &InstanceFile, cmd: &str) -> slabsum::Result<PartitionInstance> {
    match &file.instance {
        Instance::Partition(p) => Ok(p.clone()),
        other => Err(Error::InvalidInstance(format!(
            "{cmd} expects a partition instance, got `{}`",
            other.kind()
        ))),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value") + "\n"
}

fn cmd_gen(a: &GenArgs) -> slabsum::Result<Report> {
    let mut meta = InstanceMeta {
        n: Some(a.n),
        m: Some(a.bits as u64),
        seed: Some(a.seed),
        planted_x: None,
    };
    let instance = match a.kind {
        Kind::Partition if a.planted => {
            let (inst, x) = gen_planted(a.n, a.bits, a.seed)?;
            meta.planted_x = Some(x);
            Instance::Partition(inst)
        }
        Kind::Partition => Instance::Partition(gen_random(a.n, a.bits, a.seed)?),
        Kind::Ssp => {
            let (inst, x) = gen_ssp(a.n, a.bits, a.seed, a.planted)?;
            meta.planted_x = x;
            Instance::Ssp(inst)
        }
        Kind::Sssp => {
            let delta = parse_rational(&a.delta, "delta")?;
            let (inst, x) = gen_sssp(
                a.n,
                a.bits,
                a.p,
                a.seed,
                a.duplicate,
                rational_int(1),
                delta.clone(),
            )?;
            let rho = match &a.rho {
                Some(r) => parse_rational(r, "rho")?,
                None => sssp::default_rho(inst.rows(), &delta),
            };
            meta.planted_x = Some(x);
            Instance::Sssp(inst.with_params(rho, delta)?)
        }
    };
    let file = InstanceFile { instance, meta };
    Ok(Report::plain(file.to_json()))
}

fn cmd_solve_exact(a: &SolveExactArgs, limits: &DpLimits) -> slabsum::Result<Report> {
    let file = read_instance(&a.io.input)?;
    let (weights, target) = match &file.instance {
        Instance::Ssp(s) => (s.weights().to_vec(), Some(s.target().clone())),
        Instance::Partition(p) => {
            let total = p.total();
            let even = (&total % 2u32) == 0u32.into();
            (p.weights().to_vec(), even.then(|| total / 2u32))
        }
        Instance::Sssp(_) => {
            return Err(Error::InvalidInstance(
                "solve-exact expects an ssp or partition instance".into(),
            ))
        }
    };
    let x = match &target {
        Some(t) => dp_decide(&weights, t, limits)?,
        None => None,
    };
    let v = json!({
        "found": x.is_some(),
        "x": x,
        "target": target.map(|t| t.to_string()),
    });
    Ok(Report::plain(pretty(&v)))
}

fn scan_mode(s: &ScanArgs) -> ScanMode {
    if s.full_scan {
        ScanMode::Full
    } else {
        ScanMode::FirstHit
    }
}

fn cmd_fptas(a: &FptasArgs, limits: &DpLimits) -> slabsum::Result<Report> {
    let inst = partition_of(&read_instance(&a.io.input)?, "solve-fptas")?;
    let eps = parse_epsilon(&a.epsilon)?;
    let opts = DecideOptions {
        mode: scan_mode(&a.scan),
        limits: *limits,
    };
    let v = epsilon_api_with(&inst, &eps, &opts)?;
    Ok(Report {
        text: v.verdict.to_json(),
        anomaly: v.verdict.has_anomaly(),
    })
}

fn cmd_decide(a: &DecideArgs, limits: &DpLimits) -> slabsum::Result<Report> {
    let inst = partition_of(&read_instance(&a.io.input)?, "decide-slab")?;
    let res = match (&a.res.c, &a.res.big_n) {
        (Some(c), None) => Resolution::Exponent(*c),
        (None, Some(n)) => Resolution::Explicit(parse_biguint(n, "big-n")?),
        _ => unreachable!("clap enforces exactly one resolution flag"),
    };
    let opts = DecideOptions {
        mode: scan_mode(&a.scan),
        limits: *limits,
    };
    let v = decide_with(&inst, &res, &opts)?;
    Ok(Report {
        text: v.to_json(),
        anomaly: v.has_anomaly(),
    })
}

fn cmd_sssp(a: &SsspArgs, limits: &DpLimits) -> slabsum::Result<Report> {
    let file = read_instance(&a.io.input)?;
    let Instance::Sssp(inst) = &file.instance else {
        return Err(Error::InvalidInstance(
            "solve-sssp expects an sssp instance".into(),
        ));
    };
    let delta = match &a.delta {
        Some(d) => parse_rational(d, "delta")?,
        None => inst.delta().clone(),
    };
    let rho = match &a.rho {
        Some(r) => parse_rational(r, "rho")?,
        None if a.delta.is_some() => sssp::default_rho(inst.rows(), &delta),
        None => inst.rho().clone(),
    };
    let inst: SsspInstance = inst.with_params(rho, delta)?;
    let opts = SsspOptions {
        epsilon_b: a.epsilon_b,
        leaf_budget: a.leaf_budget,
        leaf_c: a.leaf_c,
        limits: *limits,
    };
    let res = sssp::solve(&inst, &opts)?;
    Ok(Report::plain(res.to_json()))
}

fn cmd_oracle(a: &OracleArgs) -> slabsum::Result<Report> {
    let file = read_instance(&a.io.input)?;
    let v = match &file.instance {
        Instance::Partition(p) => {
            let r = oracle::enumerate_partition(p, a.oracle_cap)?;
            json!({
                "count": r.count,
                "min_distance_sq": RationalJson::from(&r.min_distance_sq),
                "nearest": r.nearest,
                "solutions": r.solutions,
            })
        }
        Instance::Ssp(s) => json!({ "count": oracle::count_subset_solutions(s, a.oracle_cap)? }),
        Instance::Sssp(s) => {
            let (l0, x) = oracle::min_l0(s, a.oracle_cap)?;
            json!({ "min_L0": RationalJson::from(&l0), "x": x })
        }
    };
    Ok(Report::plain(pretty(&v)))
}

fn cmd_bench(a: &BenchArgs, limits: &DpLimits) -> slabsum::Result<Report> {
    let cfg = BenchConfig {
        ns: a.n.clone(),
        c: a.c,
        repeats: a.repeats,
        bits: a.bits,
        seed: a.seed,
        limits: *limits,
    };
    let rep = bench::run(&cfg)?;
    match rep.slope {
        Some(s) => eprintln!("log-log slope of median wall time vs n: {s:.3}"),
        None => eprintln!("log-log slope: not enough points"),
    }
    Ok(Report::plain(rep.to_csv()))
}

fn run(cli: &Cli) -> slabsum::Result<Report> {
    let limits = match cli.budget_cells {
        Some(max_cells) => DpLimits { max_cells },
        None => DpLimits::from_env(),
    };
    let (report, out) = match &cli.command {
        Command::Gen(a) => (cmd_gen(a)?, a.out.as_deref()),
        Command::SolveExact(a) => (cmd_solve_exact(a, &limits)?, a.io.out.as_deref()),
        Command::SolveFptas(a) => (cmd_fptas(a, &limits)?, a.io.out.as_deref()),
        Command::DecideSlab(a) => (cmd_decide(a, &limits)?, a.io.out.as_deref()),
        Command::SolveSssp(a) => (cmd_sssp(a, &limits)?, a.io.out.as_deref()),
        Command::Oracle(a) => (cmd_oracle(a)?, a.io.out.as_deref()),
        Command::Bench(a) => (cmd_bench(a, &limits)?, a.out.as_deref()),
    };
    emit(out, &report.text)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(r) if r.anomaly => {
            eprintln!("warning: certificate check failed, see `diagnostics`");
            ExitCode::from(EXIT_ANOMALY)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_resource() {
                EXIT_RESOURCE
            } else {
                EXIT_USAGE
            })
        }
    }
}
