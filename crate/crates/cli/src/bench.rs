//! The bench subcommand: full pipeline over fresh synthetic models, per-run
//! metrics with an order/total wall-clock split, JSON results, and a
//! human-readable table. Completed runs are flushed to a sidecar `.runs.jsonl`
//! so interrupted benchmarks can be resumed.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;
use score_dag_core::{
    benchmark_instance, d_top, derive_seed, prune, score_order, shd, sid, var_sort_order,
    BenchmarkConfig, GraphKind, NoiseFamily, PruneConfig,
};
use serde::{Deserialize, Serialize};

use crate::files::{check_overwrite, write_json};

pub struct Args {
    pub seed: u64,
    pub jobs: usize,
    pub force: bool,
    pub d: usize,
    pub graph: String,
    pub noise: String,
    pub n: usize,
    pub runs: usize,
    pub eta: f64,
    pub cutoff: f64,
    pub out: PathBuf,
    pub resume: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub d: usize,
    pub graph: GraphKind,
    pub noise: NoiseFamily,
    pub n: usize,
    pub runs: usize,
    pub eta: f64,
    pub cutoff: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub shd: usize,
    pub sid: usize,
    pub d_top: usize,
    pub varsort_d_top: usize,
    pub order_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub shd: Stat,
    pub sid: Stat,
    pub d_top: Stat,
    pub varsort_d_top: Stat,
    pub order_seconds: Stat,
    pub total_seconds: Stat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: ConfigEcho,
    pub runs: Vec<RunRow>,
    pub aggregate: Option<Aggregate>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let graph: GraphKind = args.graph.parse()?;
    let noise: NoiseFamily = args.noise.parse()?;
    let config = ConfigEcho {
        d: args.d,
        graph,
        noise,
        n: args.n,
        runs: args.runs,
        eta: args.eta,
        cutoff: args.cutoff,
        seed: args.seed,
    };
    if !args.resume {
        check_overwrite(&[args.out.as_path()], args.force)?;
    }
    let rows_path = runs_sidecar(&args.out);

    let mut slots: Vec<Option<RunRow>> = vec![None; args.runs];
    if args.resume {
        let mut prior = load_rows(&rows_path)?;
        if args.out.exists() {
            let previous = load_result(&args.out)
                .with_context(|| format!("validating existing {}", args.out.display()))?;
            prior.extend(previous.runs);
        }
        for row in prior {
            let run = row.run;
            if run < args.runs {
                slots[run] = Some(row);
            }
        }
        let done = slots.iter().filter(|s| s.is_some()).count();
        if done > 0 {
            println!("resuming: {done}/{} runs already complete", args.runs);
        }
    }

    let sidecar = Mutex::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .truncate(false)
            .open(&rows_path)
            .with_context(|| format!("opening {}", rows_path.display()))?,
    );
    if !args.resume {
        sidecar.lock().unwrap().set_len(0)?;
    }

    let pending: Vec<usize> = (0..args.runs).filter(|&r| slots[r].is_none()).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, anyhow::Result<RunRow>)>> = Mutex::new(Vec::new());
    let bench_cfg = BenchmarkConfig {
        d: args.d,
        graph,
        noise,
        n: args.n,
        runs: args.runs,
        seed: args.seed,
    };
    let prune_cfg = PruneConfig {
        cutoff: args.cutoff,
        ..PruneConfig::default()
    };

    std::thread::scope(|scope| {
        for _ in 0..args.jobs.min(pending.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= pending.len() {
                    break;
                }
                let run = pending[idx];
                let outcome = execute_run(&bench_cfg, &prune_cfg, args.eta, run);
                if let Ok(row) = &outcome {
                    let line = serde_json::to_string(row).expect("row serialization");
                    let mut file = sidecar.lock().unwrap();
                    let _ = writeln!(file, "{line}");
                    let _ = file.flush();
                    println!(
                        "run {:>3}: shd {:>3}  sid {:>4}  d_top {:>3}  varsort {:>3}  order {:>6.2}s  total {:>6.2}s",
                        row.run, row.shd, row.sid, row.d_top, row.varsort_d_top,
                        row.order_seconds, row.total_seconds
                    );
                }
                results.lock().unwrap().push((run, outcome));
            });
        }
    });

    for (run, outcome) in results.into_inner().unwrap() {
        slots[run] = Some(outcome.with_context(|| format!("benchmark run {run}"))?);
    }
    let rows: Vec<RunRow> = slots.into_iter().map(|s| s.expect("all runs done")).collect();
    let aggregate = aggregate(&rows);
    let result = BenchResult {
        config,
        runs: rows,
        aggregate,
    };
    write_json(&args.out, &result)?;
    print_table(&result);
    println!("results -> {}", args.out.display());
    Ok(())
}

fn execute_run(
    cfg: &BenchmarkConfig,
    prune_cfg: &PruneConfig,
    eta: f64,
    run: usize,
) -> anyhow::Result<RunRow> {
    let instance = benchmark_instance(cfg, run)?;
    let start = Instant::now();
    let trace = score_order(&instance.data, eta)?;
    let order_seconds = start.elapsed().as_secs_f64();
    let est = prune(&instance.data, &trace.order, prune_cfg)?;
    let total_seconds = start.elapsed().as_secs_f64();
    Ok(RunRow {
        run,
        seed: derive_seed(cfg.seed, run as u64),
        shd: shd(&instance.truth, &est)?,
        sid: sid(&instance.truth, &est)?,
        d_top: d_top(&trace.order, &instance.truth)?,
        varsort_d_top: d_top(&var_sort_order(&instance.data), &instance.truth)?,
        order_seconds,
        total_seconds,
    })
}

fn runs_sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".runs.jsonl");
    out.with_file_name(name)
}

fn load_rows(path: &Path) -> anyhow::Result<Vec<RunRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        rows.push(serde_json::from_str(line).context("parsing completed-run record")?);
    }
    Ok(rows)
}

fn stat(values: impl Iterator<Item = f64>) -> Stat {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Stat { mean, std }
}

fn aggregate(rows: &[RunRow]) -> Option<Aggregate> {
    if rows.is_empty() {
        return None;
    }
    Some(Aggregate {
        shd: stat(rows.iter().map(|r| r.shd as f64)),
        sid: stat(rows.iter().map(|r| r.sid as f64)),
        d_top: stat(rows.iter().map(|r| r.d_top as f64)),
        varsort_d_top: stat(rows.iter().map(|r| r.varsort_d_top as f64)),
        order_seconds: stat(rows.iter().map(|r| r.order_seconds)),
        total_seconds: stat(rows.iter().map(|r| r.total_seconds)),
    })
}

/// Reads a result file back, recomputing the aggregate from the per-run rows
/// and rejecting the file if the stored aggregate disagrees.
pub fn load_result(path: &Path) -> anyhow::Result<BenchResult> {
    let text = std::fs::read_to_string(path)?;
    let result: BenchResult = serde_json::from_str(&text)?;
    let recomputed = aggregate(&result.runs);
    match (&result.aggregate, &recomputed) {
        (None, None) => {}
        (Some(stored), Some(fresh)) => {
            let close = |a: &Stat, b: &Stat| {
                (a.mean - b.mean).abs() <= 1e-9 * a.mean.abs().max(1.0)
                    && (a.std - b.std).abs() <= 1e-9 * a.std.abs().max(1.0)
            };
            let all_close = close(&stored.shd, &fresh.shd)
                && close(&stored.sid, &fresh.sid)
                && close(&stored.d_top, &fresh.d_top)
                && close(&stored.varsort_d_top, &fresh.varsort_d_top)
                && close(&stored.order_seconds, &fresh.order_seconds)
                && close(&stored.total_seconds, &fresh.total_seconds);
            anyhow::ensure!(all_close, "stored aggregate is inconsistent with per-run rows");
        }
        _ => anyhow::bail!("aggregate presence inconsistent with per-run rows"),
    }
    Ok(result)
}

fn print_table(result: &BenchResult) {
    let c = &result.config;
    println!();
    println!(
        "benchmark: d={} {} {} n={} runs={} eta={} cutoff={} seed={}",
        c.d, c.graph, c.noise, c.n, c.runs, c.eta, c.cutoff, c.seed
    );
    match &result.aggregate {
        None => println!("no runs"),
        Some(a) => {
            println!("  metric           mean ± std");
            let line = |name: &str, s: &Stat| println!("  {name:<14} {:>7.2} ± {:.2}", s.mean, s.std);
            line("shd", &a.shd);
            line("sid", &a.sid);
            line("d_top", &a.d_top);
            line("varsort d_top", &a.varsort_d_top);
            line("order seconds", &a.order_seconds);
            line("total seconds", &a.total_seconds);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, shd: usize) -> RunRow {
        RunRow {
            run,
            seed: run as u64,
            shd,
            sid: shd * 2,
            d_top: 0,
            varsort_d_top: 1,
            order_seconds: 0.5,
            total_seconds: 1.0,
        }
    }

    #[test]
    fn aggregate_mean_and_std() {
        let agg = aggregate(&[row(0, 2), row(1, 4)]).unwrap();
        assert_eq!(agg.shd.mean, 3.0);
        assert!((agg.shd.std - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(aggregate(&[]).is_none());
    }

    #[test]
    fn load_rejects_tampered_aggregate() {
        let dir = std::env::temp_dir().join(format!("score-dag-bench-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("result.json");
        let rows = vec![row(0, 2), row(1, 4)];
        let mut result = BenchResult {
            config: ConfigEcho {
                d: 5,
                graph: GraphKind::Er1,
                noise: NoiseFamily::Gaussian,
                n: 100,
                runs: 2,
                eta: 0.01,
                cutoff: 0.001,
                seed: 0,
            },
            aggregate: aggregate(&rows),
            runs: rows,
        };
        write_json(&path, &result).unwrap();
        assert!(load_result(&path).is_ok());

        result.aggregate.as_mut().unwrap().shd.mean = 99.0;
        write_json(&path, &result).unwrap();
        assert!(load_result(&path).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
