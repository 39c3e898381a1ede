//! Command-line surface: dataset generation, discovery, evaluation, and
//! benchmark reproduction with stable file formats.

mod bench;
mod commands;
mod files;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use score_dag_core::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "score-dag",
    version,
    about = "Causal discovery for non-linear additive noise models"
)]
struct Cli {
    /// Seed driving all randomness of the invocation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for independent benchmark runs
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Overwrite existing output files
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a benchmark SCM; write dataset CSV, true-graph JSON and model JSON
    Generate {
        /// Number of variables
        #[arg(long)]
        d: usize,
        /// Graph family: er1 | er4 | sf1 | sf4
        #[arg(long)]
        graph: String,
        /// Noise family: gaussian | laplace | gumbel
        #[arg(long, default_value = "gaussian")]
        noise: String,
        /// Sample count
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        out_data: std::path::PathBuf,
        #[arg(long)]
        out_graph: std::path::PathBuf,
        #[arg(long)]
        out_model: std::path::PathBuf,
    },
    /// Recover a DAG from a dataset CSV
    Discover {
        /// Input dataset (CSV, one sample per row)
        #[arg(long)]
        data: std::path::PathBuf,
        /// Ridge regulariser of the Stein estimators
        #[arg(long, default_value_t = score_dag_core::DEFAULT_ETA)]
        eta: f64,
        /// Significance cutoff of the pruning F-tests
        #[arg(long, default_value_t = 0.001)]
        cutoff: f64,
        /// Spline basis functions per covariate in the pruning regressions
        #[arg(long, default_value_t = 10)]
        basis_size: usize,
        /// Write the order-search trace JSON here
        #[arg(long)]
        trace: Option<std::path::PathBuf>,
        /// Output estimated-graph JSON
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Compare an estimated graph against the true graph
    Eval {
        #[arg(long)]
        true_graph: std::path::PathBuf,
        #[arg(long)]
        est_graph: std::path::PathBuf,
        /// Order JSON ({"order": [...]} or a discover trace); adds D_top
        #[arg(long)]
        order: Option<std::path::PathBuf>,
        /// Also write the metric report JSON here
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Run the full pipeline on fresh synthetic models and aggregate metrics
    Bench {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        graph: String,
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = score_dag_core::DEFAULT_ETA)]
        eta: f64,
        #[arg(long, default_value_t = 0.001)]
        cutoff: f64,
        /// Output BenchResult JSON
        #[arg(long)]
        out: std::path::PathBuf,
        /// Reuse completed runs from a previous interrupted invocation
        #[arg(long)]
        resume: bool,
    },
}

fn main() {
    env_logger::init();
    init_thread_pool();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

/// SCORE_DAG_THREADS caps the internal linear-algebra parallelism (the rayon
/// pool used for kernel assembly and per-node pruning regressions).
fn init_thread_pool() {
    if let Ok(value) = std::env::var("SCORE_DAG_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate {
            d,
            graph,
            noise,
            n,
            out_data,
            out_graph,
            out_model,
        } => commands::generate(
            cli.seed, cli.force, d, &graph, &noise, n, &out_data, &out_graph, &out_model,
        ),
        Command::Discover {
            data,
            eta,
            cutoff,
            basis_size,
            trace,
            out,
        } => commands::discover(
            cli.force,
            &data,
            eta,
            cutoff,
            basis_size,
            trace.as_deref(),
            &out,
        ),
        Command::Eval {
            true_graph,
            est_graph,
            order,
            out,
        } => commands::eval(
            cli.force,
            &true_graph,
            &est_graph,
            order.as_deref(),
            out.as_deref(),
        ),
        Command::Bench {
            d,
            graph,
            noise,
            n,
            runs,
            eta,
            cutoff,
            out,
            resume,
        } => bench::run(bench::Args {
            seed: cli.seed,
            jobs: cli.jobs.max(1),
            force: cli.force,
            d,
            graph,
            noise,
            n,
            runs,
            eta,
            cutoff,
            out,
            resume,
        }),
    }
}

/// Exit codes: 0 success, 1 usage/config, 2 data, 3 numerical failure.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::InvalidConfig(_) => 1,
                CoreError::Numerical(_) | CoreError::DegenerateData(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}
