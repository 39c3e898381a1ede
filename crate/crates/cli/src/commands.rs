//! The generate, discover and eval subcommands.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use score_dag_core::{
    d_top, generate_instance, prune, score_order, shd, sid, Dag, DataMatrix, GraphKind,
    MetricReport, NoiseFamily, PruneConfig, TopoOrder,
};
use serde::Deserialize;

use crate::files::{check_overwrite, write_json};

#[allow(clippy::too_many_arguments)]
pub fn generate(
    seed: u64,
    force: bool,
    d: usize,
    graph: &str,
    noise: &str,
    n: usize,
    out_data: &Path,
    out_graph: &Path,
    out_model: &Path,
) -> anyhow::Result<()> {
    let kind: GraphKind = graph.parse()?;
    let family: NoiseFamily = noise.parse()?;
    check_overwrite(&[out_data, out_graph, out_model], force)?;
    let instance = generate_instance(d, kind, family, n, seed)?;
    instance
        .data
        .write_csv_path(out_data)
        .with_context(|| format!("writing {}", out_data.display()))?;
    instance.truth.write_json_path(out_graph)?;
    instance.model.write_json_path(out_model)?;
    println!(
        "generated {n}x{d} dataset ({kind}, {family} noise, {} true edges, seed {seed})",
        instance.truth.edge_count()
    );
    println!("  data  -> {}", out_data.display());
    println!("  graph -> {}", out_graph.display());
    println!("  model -> {}", out_model.display());
    Ok(())
}

pub fn discover(
    force: bool,
    data: &Path,
    eta: f64,
    cutoff: f64,
    basis_size: usize,
    trace_out: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut outputs = vec![out];
    outputs.extend(trace_out);
    check_overwrite(&outputs, force)?;
    let x = DataMatrix::read_csv_path(data)
        .with_context(|| format!("reading {}", data.display()))?;
    let cfg = PruneConfig {
        cutoff,
        basis_size,
        ..PruneConfig::default()
    };

    let start = Instant::now();
    let trace = score_order(&x, eta)?;
    let order_seconds = start.elapsed().as_secs_f64();
    let dag = prune(&x, &trace.order, &cfg)?;
    let total_seconds = start.elapsed().as_secs_f64();

    dag.write_json_path(out)?;
    if let Some(path) = trace_out {
        trace.write_json_path(path)?;
    }
    println!("order: {:?}", trace.order.as_slice());
    println!(
        "edges kept: {} of {}",
        dag.edge_count(),
        x.d() * x.d().saturating_sub(1) / 2
    );
    println!("order search: {order_seconds:.2}s, total: {total_seconds:.2}s");
    println!("graph -> {}", out.display());
    Ok(())
}

/// Accepts either `{"order": [...]}` or a full discover trace.
#[derive(Deserialize)]
struct OrderFile {
    order: TopoOrder,
}

pub fn eval(
    force: bool,
    true_graph: &Path,
    est_graph: &Path,
    order: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    if let Some(path) = out {
        check_overwrite(&[path], force)?;
    }
    let truth = Dag::read_json_path(true_graph)
        .with_context(|| format!("reading {}", true_graph.display()))?;
    let est = Dag::read_json_path(est_graph)
        .with_context(|| format!("reading {}", est_graph.display()))?;
    let d_top_value = match order {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let file: OrderFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            Some(d_top(&file.order, &truth)?)
        }
        None => None,
    };
    let report = MetricReport {
        shd: shd(&truth, &est)?,
        sid: sid(&truth, &est)?,
        d_top: d_top_value,
    };
    println!("{}", serde_json::to_string(&report)?);
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(())
}
