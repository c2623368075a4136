//! Online index maintenance: insertion, the four vertex-deletion strategies,
//! the rebuild baseline, and the batch dispatcher that replays workloads.
//!
//! Deletion strategies, cheapest to most thorough:
//! - `Pure`: drop the vertex and every incident edge; nothing is repaired.
//! - `Mask`: tombstone the vertex; edges stay and searches traverse it but
//!   never return it.
//! - `LocalReconnect`: compensate each in-neighbor with at most one edge
//!   into the deleted vertex's former out-neighborhood.
//! - `GlobalReconnect`: re-insert each in-neighbor, re-selecting its entire
//!   out-edge list from a fresh global search.
//! - `Rebuild` is the baseline that reconstructs the whole graph at each
//!   batch boundary before queries run.


use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{GraphError, ProximityGraph};
use crate::rng::{op_rng, stream};
use crate::search::{self, SearchError, SearchResult};
use crate::store::{IdSet, Metric, StoreError, VectorId, VectorStore};
use crate::workload::{Workload, WorkloadBatch};

#[derive(Debug, Error)]
pub enum MaintainError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum DeleteStrategy {
    #[serde(rename = "pure")]
    Pure,
    #[serde(rename = "mask")]
    Mask,
    #[serde(rename = "local")]
    LocalReconnect,
    #[serde(rename = "global")]
    GlobalReconnect,
    #[serde(rename = "rebuild")]
    Rebuild,
}

impl DeleteStrategy {
    pub const ALL: [DeleteStrategy; 5] = [
        DeleteStrategy::Pure,
        DeleteStrategy::Mask,
        DeleteStrategy::LocalReconnect,
        DeleteStrategy::GlobalReconnect,
        DeleteStrategy::Rebuild,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DeleteStrategy::Pure => "pure",
            DeleteStrategy::Mask => "mask",
            DeleteStrategy::LocalReconnect => "local",
            DeleteStrategy::GlobalReconnect => "global",
            DeleteStrategy::Rebuild => "rebuild",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pure" => Some(DeleteStrategy::Pure),
            "mask" => Some(DeleteStrategy::Mask),
            "local" => Some(DeleteStrategy::LocalReconnect),
            "global" => Some(DeleteStrategy::GlobalReconnect),
            "rebuild" => Some(DeleteStrategy::Rebuild),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MaintenanceConfig {
    /// Candidate queue length for searches issued by maintenance.
    pub k: usize,
    /// Out-degree threshold.
    pub d: usize,
    pub metric: Metric,
    pub strategy: DeleteStrategy,
    pub seed: u64,
}

impl MaintenanceConfig {
    pub fn new(k: usize, d: usize, metric: Metric, strategy: DeleteStrategy, seed: u64) -> Self {
        assert!(d >= 1 && k >= d, "queue length k must be >= degree d >= 1");
        MaintenanceConfig {
            k,
            d,
            metric,
            strategy,
            seed,
        }
    }
}

/// Inserts a new vector: store it, search for its neighborhood on the
/// pre-insertion graph, then link the new vertex to a diversity-pruned
/// selection. Only out-edges of the new vertex are created. Returns the id
/// and the distance computations spent.
pub fn insert(
    graph: &mut ProximityGraph,
    store: &mut VectorStore,
    vector: Vec<f32>,
    cfg: &MaintenanceConfig,
    rng: &mut impl Rng,
) -> Result<(VectorId, u64), MaintainError> {
    let id = store.insert(vector)?;
    let cost = insert_existing(graph, store, id, cfg, rng)?;
    Ok((id, cost))
}

/// Links an id that is already present in the store (workload replay and
/// rebuild assign ids up front).
///
/// Each selected neighbor with spare out-degree capacity also receives a
/// back-edge to the new vertex. Without that, every edge would point from
/// newer to older vertices and a single-start greedy walk could never reach
/// anything inserted after its start vertex.
pub fn insert_existing(
    graph: &mut ProximityGraph,
    store: &VectorStore,
    id: VectorId,
    cfg: &MaintenanceConfig,
    rng: &mut impl Rng,
) -> Result<u64, MaintainError> {
    debug_assert_eq!(graph.degree_limit(), cfg.d);
    let vector = store.get(id)?.to_vec();
    if graph.live_count() == 0 {
        graph.add_vertex(id)?;
        return Ok(0);
    }
    // the search runs on the graph as it was before this vertex existed;
    // tombstones may guide it but never become neighbors
    let found = search::greedy_search_mask_aware(
        graph,
        store,
        &vector,
        cfg.k,
        graph.tombstones(),
        rng,
    )?;
    let (neighbors, select_cost) =
        search::select_neighbors(store, &vector, &found.ids(), cfg.d, &IdSet::default())?;
    graph.add_vertex(id)?;
    for z in neighbors {
        graph.add_edge(id, z)?;
        if graph.out_neighbors(z)?.len() < cfg.d {
            graph.add_edge(z, id)?;
        }
    }
    Ok(found.distance_computations + select_cost)
}

/// Removes the vertex and every incident edge; no repair.
pub fn delete_pure(
    graph: &mut ProximityGraph,
    store: &mut VectorStore,
    x: VectorId,
) -> Result<u64, MaintainError> {
    graph.remove_vertex(x)?;
    store.remove(x)?;
    Ok(0)
}

/// Tombstones the vertex; edges and the stored vector are retained so the
/// vertex can keep guiding traversal.
pub fn delete_mask(graph: &mut ProximityGraph, x: VectorId) -> Result<u64, MaintainError> {
    graph.mask(x)?;
    Ok(0)
}

/// For each in-neighbor of `x`, compensates the lost edge with at most one
/// diverse pick from x's former out-neighborhood, then drops `x`.
pub fn delete_local_reconnect(
    graph: &mut ProximityGraph,
    store: &mut VectorStore,
    x: VectorId,
    cfg: &MaintenanceConfig,
) -> Result<u64, MaintainError> {
    // candidate set is N(x) captured before any edge removal
    let former_out = graph.out_neighbors(x)?.to_vec();
    let former_in = graph.in_neighbors(x)?.to_vec();
    let mut cost = 0u64;

    for xj in former_in {
        let xj_vector = store.get(xj)?.to_vec();
        let mut invalid: IdSet = graph.out_neighbors(xj)?.iter().copied().collect();
        invalid.insert(xj);
        invalid.insert(x);
        let (choice, select_cost) =
            search::select_neighbors(store, &xj_vector, &former_out, 1, &invalid)?;
        cost += select_cost;
        graph.remove_edge(xj, x)?;
        if let Some(&z) = choice.first() {
            if graph.out_neighbors(xj)?.len() < cfg.d {
                graph.add_edge(xj, z)?;
            }
        }
    }
    graph.remove_vertex(x)?;
    store.remove(x)?;
    Ok(cost)
}

/// Re-inserts every in-neighbor of `x`: a fresh global search proposes
/// candidates, the diversity rule re-selects its entire out-edge list, and
/// only then is `x` dropped. `x` stays traversable during the searches but
/// can never be selected.
pub fn delete_global_reconnect(
    graph: &mut ProximityGraph,
    store: &mut VectorStore,
    x: VectorId,
    cfg: &MaintenanceConfig,
    rng: &mut impl Rng,
) -> Result<u64, MaintainError> {
    let former_in = graph.in_neighbors(x)?.to_vec();
    let mut search_mask: IdSet = graph.tombstones().clone();
    search_mask.insert(x);
    let mut cost = 0u64;

    for xj in former_in {
        let xj_vector = store.get(xj)?.to_vec();
        let found =
            search::greedy_search_mask_aware(graph, store, &xj_vector, cfg.k, &search_mask, rng)?;
        cost += found.distance_computations;
        let invalid = IdSet::from_iter([x, xj]);
        let (selected, select_cost) =
            search::select_neighbors(store, &xj_vector, &found.ids(), cfg.d, &invalid)?;
        cost += select_cost;
        graph.clear_out_edges(xj)?;
        for z in selected {
            graph.add_edge(xj, z)?;
        }
    }
    graph.remove_vertex(x)?;
    store.remove(x)?;
    Ok(cost)
}

/// Applies the configured strategy's delete. Under `Rebuild` the structural
/// work is deferred to the batch boundary; the vertex is plainly removed so
/// the interim graph never references a deleted id.
pub fn dispatch_delete(
    graph: &mut ProximityGraph,
    store: &mut VectorStore,
    x: VectorId,
    cfg: &MaintenanceConfig,
    rng: &mut impl Rng,
) -> Result<u64, MaintainError> {
    match cfg.strategy {
        DeleteStrategy::Pure | DeleteStrategy::Rebuild => delete_pure(graph, store, x),
        DeleteStrategy::Mask => delete_mask(graph, x),
        DeleteStrategy::LocalReconnect => delete_local_reconnect(graph, store, x, cfg),
        DeleteStrategy::GlobalReconnect => delete_global_reconnect(graph, store, x, cfg, rng),
    }
}

/// Builds a fresh graph by sequential insertion over `live` in ascending id
/// order, with per-step RNGs derived from `seed`.
pub fn rebuild(
    store: &VectorStore,
    live: &[VectorId],
    cfg: &MaintenanceConfig,
    seed: u64,
) -> Result<(ProximityGraph, u64), MaintainError> {
    let mut ordered = live.to_vec();
    ordered.sort_unstable();
    let mut graph = ProximityGraph::new(cfg.d);
    let mut cost = 0u64;
    for (i, &id) in ordered.iter().enumerate() {
        let mut rng = op_rng(seed, stream::REBUILD, i as u64);
        cost += insert_existing(&mut graph, store, id, cfg, &mut rng)?;
    }
    Ok((graph, cost))
}

/// What happened to one workload operation; used by test observers.
#[derive(Debug)]
pub enum OpEvent<'a> {
    Delete(VectorId),
    SkippedDelete(VectorId),
    Insert(VectorId),
    Rebuild,
    Query { qid: usize, result: &'a SearchResult },
}

/// Callback invoked after every applied workload operation.
pub type OpObserver<'a> = dyn FnMut(&ProximityGraph, &VectorStore, OpEvent) + 'a;

/// Per-batch accounting from the dispatcher.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub batch: usize,
    pub deletes: usize,
    pub skipped_deletes: usize,
    pub inserts: usize,
    pub maintenance_distance_computations: u64,
    pub maintenance_seconds: f64,
    pub query_distance_computations: u64,
    pub query_seconds: f64,
    /// (qid, result) in op order.
    pub query_results: Vec<(usize, SearchResult)>,
}

impl BatchOutcome {
    pub fn query_count(&self) -> usize {
        self.query_results.len()
    }
}

/// Builds the base graph by sequential insertion of the workload's base set.
/// Identical for every strategy given the same seed.
pub fn build_base(
    store: &mut VectorStore,
    base: &[(VectorId, Vec<f32>)],
    cfg: &MaintenanceConfig,
) -> Result<(ProximityGraph, u64), MaintainError> {
    let mut graph = ProximityGraph::new(cfg.d);
    let mut cost = 0u64;
    for (i, (id, vector)) in base.iter().enumerate() {
        store.insert_with_id(*id, vector.clone())?;
        let mut rng = op_rng(cfg.seed, stream::BUILD, i as u64);
        cost += insert_existing(&mut graph, store, *id, cfg, &mut rng)?;
    }
    Ok((graph, cost))
}

/// Runs one update batch: deletes, inserts, an optional boundary rebuild,
/// then the query phase at queue length `query_k`.
///
/// `batch_index` seeds the per-operation RNGs; query RNGs depend only on
/// (seed, batch, qid) so repeated queries are bit-identical. Queries fan
/// out over the rayon pool unless `parallel` is false or an observer is
/// installed.
#[allow(clippy::too_many_arguments)]
pub fn run_batch(
    graph: &mut ProximityGraph,
    store: &mut VectorStore,
    batch: &WorkloadBatch,
    query_pool: &[Vec<f32>],
    cfg: &MaintenanceConfig,
    batch_index: usize,
    query_k: usize,
    parallel: bool,
    mut observer: Option<&mut OpObserver<'_>>,
) -> Result<BatchOutcome, MaintainError> {
    let mut maintenance_cost = 0u64;
    let mut skipped = 0usize;
    let maintenance_started = Instant::now();

    for (i, &id) in batch.deletes.iter().enumerate() {
        let mut rng = op_rng(
            cfg.seed,
            stream::DELETE,
            ((batch_index as u64) << 32) | i as u64,
        );
        if graph.contains(id) && !graph.is_masked(id) {
            maintenance_cost += dispatch_delete(graph, store, id, cfg, &mut rng)?;
            if let Some(obs) = observer.as_deref_mut() {
                obs(graph, store, OpEvent::Delete(id));
            }
        } else {
            skipped += 1;
            if let Some(obs) = observer.as_deref_mut() {
                obs(graph, store, OpEvent::SkippedDelete(id));
            }
        }
    }

    for (i, (id, vector)) in batch.inserts.iter().enumerate() {
        store.insert_with_id(*id, vector.clone())?;
        if cfg.strategy == DeleteStrategy::Rebuild {
            // structural work happens at the boundary; keep the vertex set
            // consistent in the meantime
            graph.add_vertex(*id)?;
        } else {
            let mut rng = op_rng(
                cfg.seed,
                stream::INSERT,
                ((batch_index as u64) << 32) | i as u64,
            );
            maintenance_cost += insert_existing(graph, store, *id, cfg, &mut rng)?;
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(graph, store, OpEvent::Insert(*id));
        }
    }

    // the boundary reconstruction runs once per update batch, before its
    // queries; query-only batches leave the graph untouched
    let has_updates = !batch.deletes.is_empty() || !batch.inserts.is_empty();
    if cfg.strategy == DeleteStrategy::Rebuild && has_updates {
        let rebuild_seed = crate::rng::derive(cfg.seed, stream::REBUILD, batch_index as u64);
        let (fresh, cost) = rebuild(store, &store.ids(), cfg, rebuild_seed)?;
        *graph = fresh;
        maintenance_cost += cost;
        if let Some(obs) = observer.as_deref_mut() {
            obs(graph, store, OpEvent::Rebuild);
        }
    }
    let maintenance_seconds = maintenance_started.elapsed().as_secs_f64();

    let run_query = |qid: usize| -> Result<(usize, SearchResult), MaintainError> {
        let mut rng = op_rng(
            cfg.seed,
            stream::QUERY,
            ((batch_index as u64) << 32) | qid as u64,
        );
        let q = &query_pool[qid];
        let result = if cfg.strategy == DeleteStrategy::Mask {
            search::greedy_search_mask_aware(graph, store, q, query_k, graph.tombstones(), &mut rng)?
        } else {
            search::greedy_search(graph, store, q, query_k, &EMPTY_MASK, &mut rng)?
        };
        Ok((qid, result))
    };

    let query_started = Instant::now();
    let query_results: Vec<(usize, SearchResult)> = if parallel && observer.is_none() {
        batch
            .queries
            .par_iter()
            .map(|&qid| run_query(qid))
            .collect::<Result<_, _>>()?
    } else {
        let mut results = Vec::with_capacity(batch.queries.len());
        for &qid in &batch.queries {
            let r = run_query(qid)?;
            if let Some(obs) = observer.as_deref_mut() {
                obs(
                    graph,
                    store,
                    OpEvent::Query {
                        qid: r.0,
                        result: &r.1,
                    },
                );
            }
            results.push(r);
        }
        results
    };
    let query_seconds = query_started.elapsed().as_secs_f64();
    let query_distance_computations = query_results
        .iter()
        .map(|(_, r)| r.distance_computations)
        .sum();

    Ok(BatchOutcome {
        batch: batch_index,
        deletes: batch.deletes.len() - skipped,
        skipped_deletes: skipped,
        inserts: batch.inserts.len(),
        maintenance_distance_computations: maintenance_cost,
        maintenance_seconds,
        query_distance_computations,
        query_seconds,
        query_results,
    })
}

static EMPTY_MASK: std::sync::LazyLock<IdSet> =
    std::sync::LazyLock::new(IdSet::default);

/// Replays a whole workload: builds the base graph, then runs every batch
/// in order. Returns the final graph/store and per-batch outcomes.
pub fn apply_workload(
    workload: &Workload,
    cfg: &MaintenanceConfig,
    parallel: bool,
    mut observer: Option<&mut OpObserver<'_>>,
) -> Result<(ProximityGraph, VectorStore, Vec<BatchOutcome>), MaintainError> {
    let mut store = VectorStore::new(workload.dimension.max(1), cfg.metric);
    let (mut graph, _) = build_base(&mut store, &workload.base, cfg)?;
    let mut outcomes = Vec::with_capacity(workload.batches.len());
    for (b, batch) in workload.batches.iter().enumerate() {
        let outcome = run_batch(
            &mut graph,
            &mut store,
            batch,
            &workload.query_pool,
            cfg,
            b + 1,
            cfg.k,
            parallel,
            observer.as_deref_mut(),
        )?;
        outcomes.push(outcome);
    }
    Ok((graph, store, outcomes))
}
