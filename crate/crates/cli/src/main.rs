//! `rsp` — generate, solve, cross-check and benchmark reverse shortest path
//! instances on unit-disk graphs.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rsp_core::model::{generate, rstar_exact, GenKind};
use rsp_core::pipelines::{solve, Algorithm, SolveParams, SolveReport};
use rsp_core::selection::DEFAULT_SELECTION_BUDGET;
use rsp_core::Instance;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "rsp", version, about = "Reverse shortest path in unit-disk graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded instance and write it as JSON.
    Gen(GenArgs),
    /// Solve an instance file with one algorithm and print a report.
    Solve(SolveArgs),
    /// Cross-check all four algorithms over a family grid; nonzero exit on
    /// any mismatch.
    Verify(VerifyArgs),
    /// Time algorithms over a size sweep and write a CSV; prints fitted
    /// log-log slopes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// uniform | cluster | grid | line
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hop budget; defaults to ceil(sqrt(n)).
    #[arg(long)]
    lambda: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// brute | distsel | generic | fast
    #[arg(long)]
    algo: String,
    #[arg(long = "in")]
    input: PathBuf,
    /// Interval-shrinking parameter; defaults to the algorithm's exponent.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Heavy-cell threshold for the fast algorithm.
    #[arg(long)]
    delta: Option<usize>,
    /// Pending comparisons per bifurcation resolution.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pair budget for brute-force selection.
    #[arg(long, default_value_t = DEFAULT_SELECTION_BUDGET)]
    budget: usize,
    /// json | csv
    #[arg(long, default_value = "json")]
    report: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Doubling range "lo..hi", e.g. 8..256.
    #[arg(long = "n-range", default_value = "8..64")]
    n_range: String,
    /// Seeds 0..count per configuration.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Comma-separated generator kinds.
    #[arg(long, default_value = "uniform,cluster,grid,line")]
    kinds: String,
    /// Comma-separated hop budgets; defaults to 1,2,sqrt,max.
    #[arg(long)]
    lambdas: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated algorithms.
    #[arg(long, default_value = "fast,distsel")]
    algo: String,
    /// Comma-separated instance sizes.
    #[arg(long = "n-list", default_value = "1024,2048,4096,8192")]
    n_list: String,
    #[arg(long, default_value_t = 3)]
    repeats: u64,
    #[arg(long, default_value = "uniform")]
    kind: String,
    /// Pair budget for brute-force selection (distsel needs C(n,2)).
    #[arg(long, default_value_t = DEFAULT_SELECTION_BUDGET)]
    budget: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Gen(a) => run_gen(a),
        Cmd::Solve(a) => run_solve(a),
        Cmd::Verify(a) => run_verify(a),
        Cmd::Bench(a) => run_bench(a),
    }
}

fn run_gen(a: GenArgs) -> Result<()> {
    let kind = GenKind::from_str(&a.kind)?;
    let mut inst = generate(kind, a.n, a.seed)?;
    if let Some(lambda) = a.lambda {
        inst = inst.with_lambda(lambda);
    }
    fs::write(&a.out, inst.to_json()).with_context(|| format!("writing {:?}", a.out))?;
    eprintln!(
        "wrote {} points (kind {}, seed {}, lambda {}) to {:?}",
        a.n, a.kind, a.seed, inst.lambda, a.out
    );
    Ok(())
}

fn run_solve(a: SolveArgs) -> Result<()> {
    let algo = Algorithm::from_str(&a.algo)?;
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {:?}", a.input))?;
    let inst = Instance::from_json(&text)?;
    let params = SolveParams {
        l: a.l,
        delta: a.delta,
        batch: a.batch,
        seed: a.seed,
        selection_budget: a.budget,
    };
    let report = solve(&inst, algo, &params)?;
    match a.report.as_str() {
        "json" => println!("{}", report.to_json()),
        "csv" => {
            println!("{}", SolveReport::CSV_HEADER);
            println!("{}", report.to_csv_row(inst.n()));
        }
        other => bail!("unknown report format {other:?}"),
    }
    Ok(())
}

fn parse_doubling_range(s: &str) -> Result<Vec<usize>> {
    let (lo, hi) = s
        .split_once("..")
        .with_context(|| format!("range {s:?} must look like 8..256"))?;
    let lo: usize = lo.parse()?;
    let hi: usize = hi.parse()?;
    if lo < 2 || hi < lo {
        bail!("bad range {s:?}");
    }
    let mut out = Vec::new();
    let mut n = lo;
    while n <= hi {
        out.push(n);
        n *= 2;
    }
    Ok(out)
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    <T as FromStr>::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(Into::into))
        .collect()
}

fn lambdas_for(n: usize, custom: &Option<String>) -> Result<Vec<u32>> {
    match custom {
        Some(s) => parse_list::<u32>(s),
        None => {
            let mut v = vec![
                1,
                2,
                (n as f64).sqrt().ceil() as u32,
                (n - 1) as u32,
            ];
            v.dedup();
            Ok(v)
        }
    }
}

fn run_verify(a: VerifyArgs) -> Result<()> {
    let sizes = parse_doubling_range(&a.n_range)?;
    let kinds: Vec<GenKind> = a
        .kinds
        .split(',')
        .map(|k| GenKind::from_str(k.trim()))
        .collect::<rsp_core::Result<_>>()?;

    let mut cases = Vec::new();
    for &kind in &kinds {
        for &n in &sizes {
            for lambda in lambdas_for(n, &a.lambdas)? {
                for seed in 0..a.seeds {
                    cases.push((kind, n, lambda.max(1), seed));
                }
            }
        }
    }

    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|&(kind, n, lambda, seed)| {
            let inst = match generate(kind, n, seed) {
                Ok(i) => i.with_lambda(lambda),
                Err(e) => return Some(format!("gen {kind:?} n={n}: {e}")),
            };
            let expect = rstar_exact(&inst).sq.get();
            let params = SolveParams { seed, ..SolveParams::default() };
            for algo in [Algorithm::DistselBinary, Algorithm::Generic, Algorithm::Fast] {
                match solve(&inst, algo, &params) {
                    Ok(rep) if rep.r_star_sq == expect && rep.certified => {}
                    Ok(rep) => {
                        return Some(format!(
                            "{} {kind:?} n={n} lambda={lambda} seed={seed}: got {} want {expect} (certified={})",
                            algo.name(), rep.r_star_sq, rep.certified
                        ))
                    }
                    Err(e) => {
                        return Some(format!(
                            "{} {kind:?} n={n} lambda={lambda} seed={seed}: {e}",
                            algo.name()
                        ))
                    }
                }
            }
            None
        })
        .collect();

    println!(
        "verify: {} cases x 3 algorithms, {} mismatches",
        cases.len(),
        failures.len()
    );
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("MISMATCH {f}");
        }
        bail!("{} mismatches", failures.len());
    }
    Ok(())
}

/// Least-squares slope of ln(y) against ln(x).
fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|&(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    cov / var
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let algos: Vec<Algorithm> = a
        .algo
        .split(',')
        .map(|s| Algorithm::from_str(s.trim()))
        .collect::<rsp_core::Result<_>>()?;
    let sizes: Vec<usize> = parse_list(&a.n_list)?;
    let kind = GenKind::from_str(&a.kind)?;

    let mut rows = vec![SolveReport::CSV_HEADER.to_string()];
    let mut summary: Vec<(Algorithm, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for &algo in &algos {
        let mut ns = Vec::new();
        let mut decides = Vec::new();
        let mut walls = Vec::new();
        for &n in &sizes {
            let mut decide_acc = 0.0;
            let mut wall_acc = 0.0;
            let mut ok = 0u64;
            for seed in 0..a.repeats {
                let inst = generate(kind, n, seed)?;
                let params = SolveParams {
                    seed,
                    selection_budget: a.budget,
                    ..SolveParams::default()
                };
                match solve(&inst, algo, &params) {
                    Ok(rep) => {
                        rows.push(rep.to_csv_row(n));
                        decide_acc += (rep.counters.decide + rep.counters.decide_strict) as f64;
                        wall_acc += rep.counters.wall_ms;
                        ok += 1;
                    }
                    Err(e) => {
                        eprintln!("skip {} n={n} seed={seed}: {e}", algo.name());
                    }
                }
            }
            if ok > 0 {
                ns.push(n as f64);
                decides.push(decide_acc / ok as f64);
                walls.push(wall_acc / ok as f64);
                eprintln!(
                    "{} n={n}: decide+strict {:.0}, wall {:.1} ms",
                    algo.name(),
                    decide_acc / ok as f64,
                    wall_acc / ok as f64
                );
            }
        }
        summary.push((algo, ns, decides, walls));
    }
    fs::write(&a.out, rows.join("\n") + "\n").with_context(|| format!("writing {:?}", a.out))?;

    println!("fitted log-log slopes (value ~ n^slope):");
    for (algo, ns, decides, walls) in &summary {
        println!(
            "  {:8} decide calls: {:.3}   wall time: {:.3}",
            algo.name(),
            loglog_slope(ns, decides),
            loglog_slope(ns, walls)
        );
    }
    println!("wrote {:?}", a.out);
    Ok(())
}
