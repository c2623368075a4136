//! Benchmark CLI: generate workloads from ANN datasets, build and snapshot
//! graph indexes, replay workloads under each deletion strategy, sweep for
//! recall operating points, and merge reports.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use proxigraph::bench::{
    self, OperatingPoint, ReportFormat, RunConfig,
};
use proxigraph::graph::ProximityGraph;
use proxigraph::maintenance::{self, DeleteStrategy, MaintenanceConfig};
use proxigraph::store::{Metric, VectorStore};
use proxigraph::workload::{
    self, UpdatePattern, Workload, WorkloadSpec,
};

#[derive(Parser)]
#[command(name = "proxigraph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L2,
    Cosine,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::L2 => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Pure,
    Mask,
    Local,
    Global,
    Rebuild,
}

impl From<StrategyArg> for DeleteStrategy {
    fn from(s: StrategyArg) -> DeleteStrategy {
        match s {
            StrategyArg::Pure => DeleteStrategy::Pure,
            StrategyArg::Mask => DeleteStrategy::Mask,
            StrategyArg::Local => DeleteStrategy::LocalReconnect,
            StrategyArg::Global => DeleteStrategy::GlobalReconnect,
            StrategyArg::Rebuild => DeleteStrategy::Rebuild,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Random,
    Clustered,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Build a delete/insert/query workload from an fvecs dataset.
    GenWorkload(GenWorkloadArgs),
    /// Build the base graph from a workload and write a snapshot.
    BuildIndex(BuildIndexArgs),
    /// Replay a workload under one strategy and emit per-batch metrics.
    Run(RunArgs),
    /// Find, per batch, the smallest queue length reaching a target recall.
    Sweep(SweepArgs),
    /// Merge run reports and add the relative-QPS column (vs rebuild).
    Report(ReportArgs),
}

#[derive(Args)]
struct GenWorkloadArgs {
    /// Base dataset in fvecs format.
    #[arg(long)]
    dataset: PathBuf,
    /// Separate query pool in fvecs format; defaults to a held-out slice.
    #[arg(long)]
    query_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "random")]
    pattern: PatternArg,
    #[arg(long, default_value_t = 5_000)]
    base: usize,
    #[arg(long, default_value_t = 500)]
    deletes: usize,
    #[arg(long, default_value_t = 500)]
    inserts: usize,
    #[arg(long, default_value_t = 500)]
    queries: usize,
    #[arg(long, default_value_t = 10)]
    batches: usize,
    #[arg(long, default_value_t = 10)]
    kmeans_k: usize,
    #[arg(long, default_value_t = 1)]
    query_repeat: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Workload log whose base section becomes the index.
    #[arg(long)]
    workload: PathBuf,
    #[arg(long, value_enum, default_value = "l2")]
    metric: MetricArg,
    #[arg(long, default_value_t = 64)]
    k: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Snapshot output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long, value_enum, default_value = "l2")]
    metric: MetricArg,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 64)]
    k: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Recall cutoff K.
    #[arg(long, default_value_t = 10)]
    topk: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Extra seeds; metrics are averaged over all seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Run queries at the per-batch operating point that reaches this
    /// recall instead of at fixed k.
    #[arg(long)]
    target_recall: Option<f64>,
    /// Verify the base graph against a snapshot built by build-index.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Write the final graph snapshot here.
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    /// Single-threaded, byte-stable outputs.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long, value_enum, default_value = "l2")]
    metric: MetricArg,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 64)]
    k: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    topk: usize,
    #[arg(long, default_value_t = 0.8)]
    target: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run report CSVs to merge; must include a rebuild run.
    #[arg(long, required = true, value_delimiter = ',')]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenWorkload(args) => gen_workload(args),
        Command::BuildIndex(args) => build_index(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report(args),
    }
}

fn gen_workload(args: GenWorkloadArgs) -> Result<()> {
    let dataset = VectorStore::load_fvecs(&args.dataset, Metric::Euclidean)
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    let spec = WorkloadSpec {
        base_size: args.base,
        delete_per_batch: args.deletes,
        insert_per_batch: args.inserts,
        query_per_batch: args.queries,
        num_batches: args.batches,
        pattern: match args.pattern {
            PatternArg::Random => UpdatePattern::Random,
            PatternArg::Clustered => UpdatePattern::Clustered,
        },
        kmeans_k: args.kmeans_k,
        seed: args.seed,
        query_repeat: args.query_repeat,
    };
    let w = match &args.query_file {
        Some(path) => {
            let (queries, _dim) = proxigraph::io::read_fvecs(path)
                .with_context(|| format!("loading {}", path.display()))?;
            workload::build_workload_with_queries(&dataset, &spec, queries)?
        }
        None => workload::build_workload(&dataset, &spec)?,
    };
    workload::write_workload(&args.out, &w)?;
    println!(
        "workload: {} base, {} batches, {} ops -> {}",
        w.base.len(),
        w.batches.len(),
        w.op_count(),
        args.out.display()
    );
    Ok(())
}

fn build_index(args: BuildIndexArgs) -> Result<()> {
    let w = workload::read_workload(&args.workload)?;
    if w.base.is_empty() {
        bail!("workload has no base section");
    }
    let metric: Metric = args.metric.into();
    let cfg = MaintenanceConfig::new(args.k, args.d, metric, DeleteStrategy::Pure, args.seed);
    let mut store = VectorStore::new(w.dimension, metric);
    let (graph, cost) = maintenance::build_base(&mut store, &w.base, &cfg)?;
    graph.write_snapshot(&args.out, store.dimension(), metric)?;
    println!(
        "index: {} vertices, {} edges, {} distance computations -> {}",
        graph.vertex_count(),
        graph.edge_count(),
        cost,
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let w = workload::read_workload(&args.workload)?;
    let metric: Metric = args.metric.into();
    let strategy: DeleteStrategy = args.strategy.into();
    let mut seeds = vec![args.seed];
    seeds.extend(args.seeds.iter().copied().filter(|s| *s != args.seed));

    if let Some(path) = &args.index {
        verify_snapshot(path, &w, metric, &args)?;
    }

    let mut cfg = RunConfig::new(metric, strategy, args.k, args.d, args.topk, seeds)?;
    cfg.parallel = !args.deterministic;
    if let Some(target) = args.target_recall {
        cfg.operating_point = OperatingPoint::TargetRecall(target);
    }

    let records = bench::run_benchmark(&w, &cfg)?;
    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Jsonl => ReportFormat::JsonLines,
    };
    bench::emit_report(&records, format, &args.out)?;

    if let Some(snapshot_path) = &args.snapshot_out {
        // replay the first seed once more to capture the final graph state
        let cache = bench::GroundTruthCache::new();
        let run = bench::run_seeded(&w, &cfg, cfg.seeds[0], &cache)?;
        run.graph
            .write_snapshot(snapshot_path, run.store.dimension(), metric)?;
    }

    println!(
        "{} run: {} batches -> {}",
        strategy.name(),
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn verify_snapshot(path: &PathBuf, w: &Workload, metric: Metric, args: &RunArgs) -> Result<()> {
    let (graph, dim, snap_metric) = ProximityGraph::load_snapshot(path)?;
    if dim != w.dimension {
        bail!("snapshot dimension {dim} != workload dimension {}", w.dimension);
    }
    if snap_metric != metric {
        bail!("snapshot metric {} != --metric", snap_metric.name());
    }
    if graph.degree_limit() != args.d {
        bail!("snapshot degree limit {} != --d {}", graph.degree_limit(), args.d);
    }
    if graph.vertex_count() != w.base.len() {
        bail!(
            "snapshot has {} vertices, workload base has {}",
            graph.vertex_count(),
            w.base.len()
        );
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let w = workload::read_workload(&args.workload)?;
    let metric: Metric = args.metric.into();
    let strategy: DeleteStrategy = args.strategy.into();
    let mut cfg = RunConfig::new(metric, strategy, args.k, args.d, args.topk, vec![args.seed])?;
    cfg.parallel = !args.deterministic;
    cfg.operating_point = OperatingPoint::TargetRecall(args.target);

    let cache = bench::GroundTruthCache::new();
    let run = bench::run_seeded(&w, &cfg, args.seed, &cache)?;

    let mut out = String::from("strategy,batch,k_star,recall,mean_distance_computations,reached\n");
    for b in &run.batches {
        let s = b.sweep.as_ref().expect("sweep mode records an outcome");
        writeln!(
            out,
            "{},{},{},{},{},{}",
            strategy.name(),
            b.batch,
            s.k,
            s.recall,
            s.mean_distance_computations,
            s.reached
        )?;
    }
    std::fs::write(&args.out, out)?;
    println!("sweep: {} batches -> {}", run.batches.len(), args.out.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for input in &args.inputs {
        records.extend(
            bench::read_report_csv(input)
                .with_context(|| format!("reading {}", input.display()))?,
        );
    }
    bench::write_report_with_relative(&records, &args.out)?;
    println!("report: {} rows -> {}", records.len(), args.out.display());
    Ok(())
}
