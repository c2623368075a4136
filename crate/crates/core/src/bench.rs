//! Benchmark harness: replays a workload under one deletion strategy,
//! scores every batch against freshly computed brute-force ground truth,
//! and emits per-batch metric records for plotting.
//!
//! Wall-clock QPS is reported for orientation; comparisons meant to be
//! hardware-independent should use the distance-computation columns, which
//! are exact and reproducible.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use thiserror::Error;

use crate::graph::ProximityGraph;
use crate::maintenance::{
    self, BatchOutcome, DeleteStrategy, MaintainError, MaintenanceConfig,
};
use crate::oracle::{recall_at_k, GroundTruth};
use crate::store::{Metric, StoreError, VectorStore};
use crate::workload::{Workload, WorkloadBatch};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("malformed report at line {line}: {message}")]
    MalformedReport { line: usize, message: String },
    #[error(transparent)]
    Maintain(#[from] MaintainError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One row of the benchmark report: a (strategy, batch) cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsRecord {
    pub strategy: DeleteStrategy,
    pub batch: usize,
    pub recall_at_k: f64,
    pub queries_per_second: f64,
    pub mean_distance_computations: f64,
    pub accumulated_time_seconds: f64,
    pub deletes: usize,
    pub inserts: usize,
    pub queries: usize,
}

/// How the query phase picks its queue length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatingPoint {
    /// Fixed queue length for every batch.
    FixedK,
    /// Per-batch binary search for the smallest k reaching the target
    /// recall; queries then run at that k (capped at the live-set size).
    TargetRecall(f64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub metric: Metric,
    pub strategy: DeleteStrategy,
    /// Queue length for maintenance searches, and for queries under
    /// `OperatingPoint::FixedK`.
    pub k: usize,
    /// Out-degree threshold.
    pub d: usize,
    /// Recall cutoff K (top-10/20/100).
    pub recall_k: usize,
    pub seeds: Vec<u64>,
    pub operating_point: OperatingPoint,
    /// False forces the single-threaded deterministic query path.
    pub parallel: bool,
}

impl RunConfig {
    pub fn new(
        metric: Metric,
        strategy: DeleteStrategy,
        k: usize,
        d: usize,
        recall_k: usize,
        seeds: Vec<u64>,
    ) -> Result<Self, BenchError> {
        if recall_k > k {
            return Err(BenchError::InvalidConfig(format!(
                "recall cutoff K={recall_k} exceeds queue length k={k}"
            )));
        }
        if seeds.is_empty() {
            return Err(BenchError::InvalidConfig("at least one seed".into()));
        }
        Ok(RunConfig {
            metric,
            strategy,
            k,
            d,
            recall_k,
            seeds,
            operating_point: OperatingPoint::FixedK,
            parallel: true,
        })
    }

    pub fn maintenance_config(&self, seed: u64) -> MaintenanceConfig {
        MaintenanceConfig::new(self.k, self.d, self.metric, self.strategy, seed)
    }
}

/// Ground truth memoized by (live set, query pool, K); strategy runs over
/// the same workload and seed share identical live sets per batch, so the
/// brute-force scans are paid once.
#[derive(Default)]
pub struct GroundTruthCache {
    map: Mutex<HashMap<(u64, u64, usize), Arc<GroundTruth>>>,
}

impl GroundTruthCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        store: &VectorStore,
        pool: &[Vec<f32>],
        k: usize,
    ) -> Result<Arc<GroundTruth>, StoreError> {
        let live = store.ids();
        let mut hasher = DefaultHasher::new();
        live.hash(&mut hasher);
        let live_hash = hasher.finish();
        let mut hasher = DefaultHasher::new();
        for q in pool {
            for c in q {
                c.to_bits().hash(&mut hasher);
            }
        }
        let key = (live_hash, hasher.finish(), k);
        if let Some(found) = self.map.lock().unwrap().get(&key) {
            return Ok(found.clone());
        }
        let truth = Arc::new(GroundTruth::compute(store, pool, k, &live)?);
        self.map.lock().unwrap().insert(key, truth.clone());
        Ok(truth)
    }
}

/// Result of one recall sweep: the operating point and what it measured.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub k: usize,
    pub recall: f64,
    pub mean_distance_computations: f64,
    /// False when recall plateaus below the target even at the cap; the
    /// reported k is then the cap itself.
    pub reached: bool,
}

/// Per-batch measurements of one seeded run (batch 0 is the base graph
/// before any update).
#[derive(Debug, Clone)]
pub struct SeedBatch {
    pub batch: usize,
    pub deletes: usize,
    pub inserts: usize,
    pub queries: usize,
    pub recall: f64,
    pub used_k: usize,
    pub maintenance_distance_computations: u64,
    pub query_distance_computations: u64,
    pub maintenance_seconds: f64,
    pub query_seconds: f64,
    pub sweep: Option<SweepOutcome>,
}

#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub batches: Vec<SeedBatch>,
    pub graph: ProximityGraph,
    pub store: VectorStore,
}

fn mean_recall(outcome: &BatchOutcome, truth: &GroundTruth, recall_k: usize) -> f64 {
    if outcome.query_results.is_empty() {
        return 0.0;
    }
    let total: f64 = outcome
        .query_results
        .iter()
        .map(|(qid, result)| recall_at_k(&result.ids(), &truth.lists[*qid], recall_k))
        .sum();
    total / outcome.query_results.len() as f64
}

fn query_only_batch(queries: Vec<usize>) -> WorkloadBatch {
    WorkloadBatch {
        deletes: Vec::new(),
        inserts: Vec::new(),
        queries,
    }
}

/// Binary search for the smallest queue length whose mean recall reaches
/// `target`, capped at the live-set size. The probe queries use the same
/// per-query seeds as the measured run.
#[allow(clippy::too_many_arguments)]
pub fn sweep_to_recall(
    graph: &mut ProximityGraph,
    store: &mut VectorStore,
    queries: &[usize],
    pool: &[Vec<f32>],
    cfg: &RunConfig,
    mcfg: &MaintenanceConfig,
    truth: &GroundTruth,
    batch_index: usize,
    target: f64,
) -> Result<SweepOutcome, BenchError> {
    let cap = graph.live_count().max(1);
    let mut probe = |k: usize| -> Result<(f64, f64), BenchError> {
        let batch = query_only_batch(queries.to_vec());
        let outcome = maintenance::run_batch(
            graph,
            store,
            &batch,
            pool,
            mcfg,
            batch_index,
            k,
            cfg.parallel,
            None,
        )?;
        let recall = mean_recall(&outcome, truth, cfg.recall_k);
        let mean_cost = outcome.query_distance_computations as f64
            / outcome.query_results.len().max(1) as f64;
        Ok((recall, mean_cost))
    };

    // gallop upwards first so the expensive near-cap probes only run when
    // the target is actually out of reach
    let floor = cfg.recall_k.min(cap);
    let mut last_fail: Option<usize> = None;
    let mut k = floor;
    let mut hi = loop {
        let (recall, cost) = probe(k)?;
        if recall >= target {
            break k;
        }
        if k >= cap {
            return Ok(SweepOutcome {
                k: cap,
                recall,
                mean_distance_computations: cost,
                reached: false,
            });
        }
        last_fail = Some(k);
        k = (k * 2).min(cap);
    };
    let mut lo = last_fail.map_or(floor, |f| f + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let (recall, _) = probe(mid)?;
        if recall >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let (recall, cost) = probe(lo)?;
    Ok(SweepOutcome {
        k: lo,
        recall,
        mean_distance_computations: cost,
        reached: true,
    })
}

/// Replays the workload once under `cfg.strategy` with one seed. Ground
/// truth is recomputed from the live set at every batch (through `cache`).
pub fn run_seeded(
    workload: &Workload,
    cfg: &RunConfig,
    seed: u64,
    cache: &GroundTruthCache,
) -> Result<SeedRun, BenchError> {
    let mcfg = cfg.maintenance_config(seed);
    let mut store = VectorStore::new(workload.dimension.max(1), cfg.metric);
    let build_started = Instant::now();
    let (mut graph, build_cost) = maintenance::build_base(&mut store, &workload.base, &mcfg)?;
    let build_seconds = build_started.elapsed().as_secs_f64();

    let base_queries: Vec<usize> = workload
        .batches
        .first()
        .map(|b| b.queries.clone())
        .unwrap_or_else(|| (0..workload.query_pool.len()).collect());

    let mut batches = Vec::with_capacity(workload.batches.len() + 1);

    // batch 0: queries on the base graph before any update
    {
        let truth = cache.get_or_compute(&store, &workload.query_pool, cfg.recall_k)?;
        let (used_k, sweep) = match cfg.operating_point {
            OperatingPoint::FixedK => (cfg.k, None),
            OperatingPoint::TargetRecall(target) => {
                let outcome = sweep_to_recall(
                    &mut graph,
                    &mut store,
                    &base_queries,
                    &workload.query_pool,
                    cfg,
                    &mcfg,
                    &truth,
                    0,
                    target,
                )?;
                (outcome.k, Some(outcome))
            }
        };
        let outcome = maintenance::run_batch(
            &mut graph,
            &mut store,
            &query_only_batch(base_queries),
            &workload.query_pool,
            &mcfg,
            0,
            used_k,
            cfg.parallel,
            None,
        )?;
        batches.push(SeedBatch {
            batch: 0,
            deletes: 0,
            inserts: workload.base.len(),
            queries: outcome.query_count(),
            recall: mean_recall(&outcome, &truth, cfg.recall_k),
            used_k,
            maintenance_distance_computations: build_cost,
            query_distance_computations: outcome.query_distance_computations,
            maintenance_seconds: build_seconds,
            query_seconds: outcome.query_seconds,
            sweep,
        });
    }

    for (i, batch) in workload.batches.iter().enumerate() {
        let batch_index = i + 1;
        let maintenance_only = WorkloadBatch {
            deletes: batch.deletes.clone(),
            inserts: batch.inserts.clone(),
            queries: Vec::new(),
        };
        let m_outcome = maintenance::run_batch(
            &mut graph,
            &mut store,
            &maintenance_only,
            &workload.query_pool,
            &mcfg,
            batch_index,
            cfg.k,
            cfg.parallel,
            None,
        )?;

        // fresh ground truth for the updated live set
        let truth = cache.get_or_compute(&store, &workload.query_pool, cfg.recall_k)?;

        let (used_k, sweep) = match cfg.operating_point {
            OperatingPoint::FixedK => (cfg.k, None),
            OperatingPoint::TargetRecall(target) => {
                let outcome = sweep_to_recall(
                    &mut graph,
                    &mut store,
                    &batch.queries,
                    &workload.query_pool,
                    cfg,
                    &mcfg,
                    &truth,
                    batch_index,
                    target,
                )?;
                (outcome.k, Some(outcome))
            }
        };

        let q_outcome = maintenance::run_batch(
            &mut graph,
            &mut store,
            &query_only_batch(batch.queries.clone()),
            &workload.query_pool,
            &mcfg,
            batch_index,
            used_k,
            cfg.parallel,
            None,
        )?;

        batches.push(SeedBatch {
            batch: batch_index,
            deletes: m_outcome.deletes + m_outcome.skipped_deletes,
            inserts: m_outcome.inserts,
            queries: q_outcome.query_count(),
            recall: mean_recall(&q_outcome, &truth, cfg.recall_k),
            used_k,
            maintenance_distance_computations: m_outcome.maintenance_distance_computations,
            query_distance_computations: q_outcome.query_distance_computations,
            maintenance_seconds: m_outcome.maintenance_seconds,
            query_seconds: q_outcome.query_seconds,
            sweep,
        });
    }

    Ok(SeedRun {
        seed,
        batches,
        graph,
        store,
    })
}

/// Runs every configured seed and averages the per-batch metrics into one
/// record per batch, with accumulated time carried across batches.
pub fn run_benchmark(
    workload: &Workload,
    cfg: &RunConfig,
) -> Result<Vec<MetricsRecord>, BenchError> {
    let cache = GroundTruthCache::new();
    let mut per_seed: Vec<Vec<MetricsRecord>> = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let run = run_seeded(workload, cfg, seed, &cache)?;
        per_seed.push(records_from_run(&run, cfg.strategy));
    }
    Ok(average_records(&per_seed))
}

/// Converts one seeded run into report rows (accumulated time is the
/// running total of maintenance plus query wall time).
pub fn records_from_run(run: &SeedRun, strategy: DeleteStrategy) -> Vec<MetricsRecord> {
    let mut accumulated = 0f64;
    run.batches
        .iter()
        .map(|b| {
            accumulated += b.maintenance_seconds + b.query_seconds;
            MetricsRecord {
                strategy,
                batch: b.batch,
                recall_at_k: b.recall,
                queries_per_second: if b.query_seconds > 0.0 {
                    b.queries as f64 / b.query_seconds
                } else {
                    0.0
                },
                mean_distance_computations: b.query_distance_computations as f64
                    / b.queries.max(1) as f64,
                accumulated_time_seconds: accumulated,
                deletes: b.deletes,
                inserts: b.inserts,
                queries: b.queries,
            }
        })
        .collect()
}

fn average_records(per_seed: &[Vec<MetricsRecord>]) -> Vec<MetricsRecord> {
    let runs = per_seed.len();
    assert!(runs > 0);
    let batches = per_seed[0].len();
    (0..batches)
        .map(|b| {
            let first = &per_seed[0][b];
            let mut avg = MetricsRecord {
                recall_at_k: 0.0,
                queries_per_second: 0.0,
                mean_distance_computations: 0.0,
                accumulated_time_seconds: 0.0,
                ..first.clone()
            };
            for run in per_seed {
                let r = &run[b];
                debug_assert_eq!(r.batch, first.batch);
                avg.recall_at_k += r.recall_at_k;
                avg.queries_per_second += r.queries_per_second;
                avg.mean_distance_computations += r.mean_distance_computations;
                avg.accumulated_time_seconds += r.accumulated_time_seconds;
            }
            avg.recall_at_k /= runs as f64;
            avg.queries_per_second /= runs as f64;
            avg.mean_distance_computations /= runs as f64;
            avg.accumulated_time_seconds /= runs as f64;
            avg
        })
        .collect()
}

pub const CSV_HEADER: &str = "strategy,batch,recall_at_k,queries_per_second,mean_distance_computations,accumulated_time_seconds,deletes,inserts,queries";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

pub fn format_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.strategy.name(),
            r.batch,
            r.recall_at_k,
            r.queries_per_second,
            r.mean_distance_computations,
            r.accumulated_time_seconds,
            r.deletes,
            r.inserts,
            r.queries
        ));
    }
    out
}

/// Writes the report: CSV (stable column order, header row) or JSON lines
/// (one object per record).
pub fn emit_report<P: AsRef<Path>>(
    records: &[MetricsRecord],
    format: ReportFormat,
    path: P,
) -> Result<(), BenchError> {
    let mut file = std::fs::File::create(path)?;
    match format {
        ReportFormat::Csv => file.write_all(format_csv(records).as_bytes())?,
        ReportFormat::JsonLines => {
            for r in records {
                serde_json::to_writer(&mut file, r)?;
                file.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>, BenchError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, other)) => {
            return Err(BenchError::MalformedReport {
                line: 1,
                message: format!("unexpected header {other:?}"),
            })
        }
        None => return Ok(Vec::new()),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(BenchError::MalformedReport {
                line: i + 1,
                message: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let bad = |message: String| BenchError::MalformedReport {
            line: i + 1,
            message,
        };
        records.push(MetricsRecord {
            strategy: DeleteStrategy::parse(fields[0])
                .ok_or_else(|| bad(format!("unknown strategy {:?}", fields[0])))?,
            batch: fields[1].parse().map_err(|e| bad(format!("batch: {e}")))?,
            recall_at_k: fields[2].parse().map_err(|e| bad(format!("recall: {e}")))?,
            queries_per_second: fields[3].parse().map_err(|e| bad(format!("qps: {e}")))?,
            mean_distance_computations: fields[4]
                .parse()
                .map_err(|e| bad(format!("distcomp: {e}")))?,
            accumulated_time_seconds: fields[5]
                .parse()
                .map_err(|e| bad(format!("time: {e}")))?,
            deletes: fields[6].parse().map_err(|e| bad(format!("deletes: {e}")))?,
            inserts: fields[7].parse().map_err(|e| bad(format!("inserts: {e}")))?,
            queries: fields[8].parse().map_err(|e| bad(format!("queries: {e}")))?,
        });
    }
    Ok(records)
}

pub fn read_report_csv<P: AsRef<Path>>(path: P) -> Result<Vec<MetricsRecord>, BenchError> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Per-batch QPS of each strategy divided by the rebuild baseline's QPS in
/// the same batch. Requires rebuild rows in the record set.
pub fn relative_qps(
    records: &[MetricsRecord],
) -> Result<Vec<(DeleteStrategy, usize, f64)>, BenchError> {
    let baseline: HashMap<usize, f64> = records
        .iter()
        .filter(|r| r.strategy == DeleteStrategy::Rebuild)
        .map(|r| (r.batch, r.queries_per_second))
        .collect();
    if baseline.is_empty() {
        return Err(BenchError::InvalidConfig(
            "relative QPS needs rebuild rows in the report set".into(),
        ));
    }
    records
        .iter()
        .map(|r| {
            let base = baseline.get(&r.batch).ok_or_else(|| {
                BenchError::InvalidConfig(format!("no rebuild row for batch {}", r.batch))
            })?;
            Ok((r.strategy, r.batch, r.queries_per_second / base))
        })
        .collect()
}

/// Merged report with a relative-QPS column; the header comment records the
/// baseline convention (QPS at the nearest measured operating point,
/// divided by rebuild's in the same batch).
pub fn write_report_with_relative<P: AsRef<Path>>(
    records: &[MetricsRecord],
    path: P,
) -> Result<(), BenchError> {
    let ratios = relative_qps(records)?;
    let mut out = String::from(
        "# relative_qps = strategy QPS / rebuild QPS per batch, at the nearest measured operating point\n",
    );
    out.push_str(CSV_HEADER);
    out.push_str(",relative_qps\n");
    for (r, (_, _, ratio)) in records.iter().zip(&ratios) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.strategy.name(),
            r.batch,
            r.recall_at_k,
            r.queries_per_second,
            r.mean_distance_computations,
            r.accumulated_time_seconds,
            r.deletes,
            r.inserts,
            r.queries,
            ratio
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_blobs;
    use crate::workload::{build_workload, UpdatePattern, WorkloadSpec};

    fn tiny_workload(seed: u64) -> Workload {
        let data = gaussian_blobs(160, 4, 3, 0.08, 31);
        let ds = VectorStore::from_rows(Metric::Euclidean, data).unwrap();
        build_workload(
            &ds,
            &WorkloadSpec {
                base_size: 80,
                delete_per_batch: 10,
                insert_per_batch: 10,
                query_per_batch: 8,
                num_batches: 3,
                pattern: UpdatePattern::Random,
                kmeans_k: 1,
                seed,
                query_repeat: 1,
            },
        )
        .unwrap()
    }

    fn run_cfg(strategy: DeleteStrategy, seeds: Vec<u64>) -> RunConfig {
        RunConfig::new(Metric::Euclidean, strategy, 16, 6, 5, seeds).unwrap()
    }

    #[test]
    fn recall_cutoff_must_fit_queue() {
        assert!(matches!(
            RunConfig::new(Metric::Euclidean, DeleteStrategy::Pure, 8, 4, 10, vec![1]),
            Err(BenchError::InvalidConfig(_))
        ));
    }

    #[test]
    fn benchmark_emits_one_record_per_batch_plus_base() {
        let w = tiny_workload(3);
        let records =
            run_benchmark(&w, &run_cfg(DeleteStrategy::GlobalReconnect, vec![1])).unwrap();
        assert_eq!(records.len(), 4); // base + 3 update batches
        assert_eq!(records[0].batch, 0);
        assert_eq!(records[0].deletes, 0);
        assert!(records[0].recall_at_k > 0.0);
        for w in records.windows(2) {
            assert!(w[1].accumulated_time_seconds >= w[0].accumulated_time_seconds);
        }
    }

    #[test]
    fn rebuild_relative_qps_is_identity() {
        let w = tiny_workload(5);
        let records = run_benchmark(&w, &run_cfg(DeleteStrategy::Rebuild, vec![2])).unwrap();
        for (strategy, _, ratio) in relative_qps(&records).unwrap() {
            assert_eq!(strategy, DeleteStrategy::Rebuild);
            assert!((ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_report_round_trips() {
        let w = tiny_workload(7);
        let mut records = run_benchmark(&w, &run_cfg(DeleteStrategy::Pure, vec![3])).unwrap();
        records.extend(run_benchmark(&w, &run_cfg(DeleteStrategy::Rebuild, vec![3])).unwrap());
        assert_eq!(records.len(), 8); // 2 strategies x (base + 3 batches)

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        emit_report(&records, ReportFormat::Csv, &path).unwrap();
        let loaded = read_report_csv(&path).unwrap();
        assert_eq!(records, loaded);
    }

    #[test]
    fn json_lines_are_individually_valid() {
        let w = tiny_workload(9);
        let records = run_benchmark(&w, &run_cfg(DeleteStrategy::Mask, vec![4])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.jsonl");
        emit_report(&records, ReportFormat::JsonLines, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut count = 0;
        for line in text.lines() {
            let value: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(value.get("strategy").is_some());
            count += 1;
        }
        assert_eq!(count, records.len());
    }

    #[test]
    fn sweep_finds_a_finite_operating_point() {
        let w = tiny_workload(11);
        let mut cfg = run_cfg(DeleteStrategy::GlobalReconnect, vec![6]);
        cfg.operating_point = OperatingPoint::TargetRecall(0.8);
        let cache = GroundTruthCache::new();
        let run = run_seeded(&w, &cfg, 6, &cache).unwrap();
        for batch in &run.batches {
            let sweep = batch.sweep.as_ref().unwrap();
            assert!(sweep.reached, "sweep failed at batch {}", batch.batch);
            assert!(sweep.recall >= 0.8);
            assert!(sweep.k <= run.store.len());
        }
    }

    #[test]
    fn exhaustive_queue_reaches_full_recall_on_connected_graph() {
        // with k = live-set size on a complete graph the search is
        // exhaustive and recall is exactly 1.0
        let data = gaussian_blobs(30, 4, 2, 0.1, 17);
        let ds = VectorStore::from_rows(Metric::Euclidean, data).unwrap();
        let w = build_workload(
            &ds,
            &WorkloadSpec {
                base_size: 20,
                delete_per_batch: 0,
                insert_per_batch: 0,
                query_per_batch: 5,
                num_batches: 1,
                pattern: UpdatePattern::Random,
                kmeans_k: 1,
                seed: 2,
                query_repeat: 1,
            },
        )
        .unwrap();

        // complete graph: degree limit n-1, exhaustive searches
        let mut store = VectorStore::new(w.dimension, Metric::Euclidean);
        let mut graph = ProximityGraph::new(19);
        for (id, v) in &w.base {
            store.insert_with_id(*id, v.clone()).unwrap();
            graph.add_vertex(*id).unwrap();
        }
        let ids = store.ids();
        for &u in &ids {
            for &v in &ids {
                if u != v {
                    graph.add_edge(u, v).unwrap();
                }
            }
        }
        let cfg = RunConfig::new(Metric::Euclidean, DeleteStrategy::Pure, 20, 19, 5, vec![1])
            .unwrap();
        let mcfg = cfg.maintenance_config(1);
        let truth = GroundTruth::compute(&store, &w.query_pool, 5, &ids).unwrap();
        let outcome = sweep_to_recall(
            &mut graph,
            &mut store,
            &w.batches[0].queries,
            &w.query_pool,
            &cfg,
            &mcfg,
            &truth,
            1,
            1.0,
        )
        .unwrap();
        assert!(outcome.reached);
        assert_eq!(outcome.recall, 1.0);
    }

    #[test]
    fn ground_truth_cache_hits_for_identical_state() {
        let data = gaussian_blobs(50, 4, 2, 0.1, 13);
        let store = VectorStore::from_rows(Metric::Euclidean, data).unwrap();
        let pool: Vec<Vec<f32>> = gaussian_blobs(4, 4, 2, 0.1, 14);
        let cache = GroundTruthCache::new();
        let a = cache.get_or_compute(&store, &pool, 5).unwrap();
        let b = cache.get_or_compute(&store, &pool, 5).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = cache.get_or_compute(&store, &pool, 3).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
    }
}
