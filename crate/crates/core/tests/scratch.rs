//! throwaway exploration harness (not part of the suite)

use proxigraph::bench::{self, GroundTruthCache, RunConfig};
use proxigraph::maintenance::DeleteStrategy;
use proxigraph::store::{Metric, VectorStore};
use proxigraph::synthetic::gaussian_blobs;
use proxigraph::workload::{build_workload, UpdatePattern, WorkloadSpec};

#[test]
#[ignore]
fn explore_dataset_geometry() {
    for (blobs, spread) in [(12usize, 0.10f64), (12, 0.18), (12, 0.25), (25, 0.18)] {
        let rows = gaussian_blobs(10_600, 16, blobs, spread, 90_210);
        let dataset = VectorStore::from_rows(Metric::Euclidean, rows).unwrap();
        println!("=== blobs={blobs} spread={spread} ===");
        for seed in [100u64, 101, 102] {
            let spec = WorkloadSpec::desk_scale(UpdatePattern::Clustered, seed);
            let w = build_workload(&dataset, &spec).unwrap();
            let cache = GroundTruthCache::new();
            for strategy in [
                DeleteStrategy::GlobalReconnect,
                DeleteStrategy::LocalReconnect,
                DeleteStrategy::Mask,
                DeleteStrategy::Pure,
            ] {
                let mut cfg =
                    RunConfig::new(Metric::Euclidean, strategy, 64, 16, 10, vec![seed]).unwrap();
                cfg.parallel = false;
                let mut run = bench::run_seeded(&w, &cfg, seed, &cache).unwrap();
                let recall64 = run.batches.last().unwrap().recall;
                let truth = cache
                    .get_or_compute(&run.store, &w.query_pool, 10)
                    .unwrap();
                let queries = w.batches.last().unwrap().queries.clone();
                let mcfg = cfg.maintenance_config(seed);
                let sweep = bench::sweep_to_recall(
                    &mut run.graph,
                    &mut run.store,
                    &queries,
                    &w.query_pool,
                    &cfg,
                    &mcfg,
                    &truth,
                    w.batches.len(),
                    0.8,
                )
                .unwrap();
                println!(
                    "seed {seed} {:>7}: recall@k64={recall64:.3} sweep k*={} recall={:.3} cost={:.0} reached={}",
                    strategy.name(),
                    sweep.k,
                    sweep.recall,
                    sweep.mean_distance_computations,
                    sweep.reached
                );
            }
        }
    }
}
