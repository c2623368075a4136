//! Greedy best-first search over the proximity graph and the
//! diversity-based neighbor selection rule.
//!
//! A search keeps a bounded candidate queue of the best `k` scored vertices
//! and repeatedly expands the best not-yet-expanded candidate, pushing its
//! unseen out-neighbors, until every remaining candidate has been expanded.
//! Scores are the metric similarity f (higher is better), so one code path
//! serves Euclidean and cosine.
//!
//! Two mask semantics exist. The plain search never touches masked ids at
//! all. The mask-aware variant (tombstone deletion) computes distances to
//! masked vertices and expands them so they keep guiding the walk, but they
//! never occupy a slot in the result queue.

use std::collections::BinaryHeap;

use rand::Rng;
use thiserror::Error;

use crate::graph::{GraphError, ProximityGraph};
use crate::store::{IdSet, StoreError, VectorId, VectorStore};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("every vertex is masked")]
    AllMasked,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A scored vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: VectorId,
    pub score: f64,
}

/// Ranking used everywhere: descending score, ties by ascending id.
pub fn rank(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

/// Bounded best-first candidate queue plus the set of ids ever scored.
#[derive(Debug, Clone)]
pub struct CandidateQueue {
    entries: Vec<Candidate>,
    capacity: usize,
    seen: IdSet,
}

impl CandidateQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be positive");
        CandidateQueue {
            entries: Vec::with_capacity(capacity + 1),
            capacity,
            seen: IdSet::default(),
        }
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn contains(&self, id: VectorId) -> bool {
        self.entries.iter().any(|c| c.id == id)
    }

    /// Marks an id as scored; returns false if it was already seen.
    pub fn mark_seen(&mut self, id: VectorId) -> bool {
        self.seen.insert(id)
    }

    pub fn is_seen(&self, id: VectorId) -> bool {
        self.seen.contains(&id)
    }

    /// Inserts in rank order and truncates to capacity. Returns true when
    /// the candidate made it into the queue.
    pub fn try_push(&mut self, c: Candidate) -> bool {
        debug_assert!(!self.contains(c.id), "candidate pushed twice");
        let idx = self
            .entries
            .partition_point(|e| rank(e, &c) == std::cmp::Ordering::Less);
        if idx >= self.capacity {
            return false;
        }
        self.entries.insert(idx, c);
        self.entries.truncate(self.capacity);
        true
    }
}

/// Outcome of one graph search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Best candidates, descending by score, ties by ascending id.
    pub topk: Vec<Candidate>,
    /// Number of similarity evaluations performed.
    pub distance_computations: u64,
    /// Number of vertices expanded.
    pub hops: u64,
}

impl SearchResult {
    pub fn ids(&self) -> Vec<VectorId> {
        self.topk.iter().map(|c| c.id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MaskMode {
    /// Masked ids are invisible: never scored, never traversed.
    Exclude,
    /// Masked ids are scored and expanded but never enter the result queue.
    Traverse,
}

// Max-heap entry: best score first, ties by ascending id.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier(Candidate);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .score
            .total_cmp(&other.0.score)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn sample_start(
    graph: &ProximityGraph,
    mask: &IdSet,
    rng: &mut impl Rng,
) -> Result<VectorId, SearchError> {
    if graph.vertex_count() == 0 {
        return Err(SearchError::EmptyGraph);
    }
    graph
        .sample_vertex_excluding(rng, mask)
        .ok_or(SearchError::AllMasked)
}

fn traverse(
    graph: &ProximityGraph,
    store: &VectorStore,
    query: &[f32],
    k: usize,
    mask: &IdSet,
    mode: MaskMode,
    start: VectorId,
) -> Result<SearchResult, SearchError> {
    let prepared = store.prepare_query(query)?;
    let mut queue = CandidateQueue::new(k);
    let mut frontier: BinaryHeap<Frontier> = BinaryHeap::new();
    let mut distance_computations = 0u64;
    let mut hops = 0u64;

    debug_assert!(!mask.contains(&start), "start vertex must be unmasked");
    let start_score = store.score(start, &prepared);
    distance_computations += 1;
    queue.mark_seen(start);
    let start_candidate = Candidate {
        id: start,
        score: start_score,
    };
    queue.try_push(start_candidate);
    frontier.push(Frontier(start_candidate));

    while let Some(Frontier(candidate)) = frontier.pop() {
        // candidates truncated out of the bounded queue are dead; masked
        // ones stay expandable in traverse mode
        let masked = mask.contains(&candidate.id);
        if !masked && !queue.contains(candidate.id) {
            continue;
        }
        hops += 1;
        for &v in graph.out_neighbors(candidate.id)? {
            if queue.is_seen(v) {
                continue;
            }
            let v_masked = mask.contains(&v);
            if v_masked && mode == MaskMode::Exclude {
                continue;
            }
            queue.mark_seen(v);
            let score = store.score(v, &prepared);
            distance_computations += 1;
            let c = Candidate { id: v, score };
            if v_masked {
                frontier.push(Frontier(c));
            } else if queue.try_push(c) {
                frontier.push(Frontier(c));
            }
        }
    }

    Ok(SearchResult {
        topk: queue.entries().to_vec(),
        distance_computations,
        hops,
    })
}

/// Greedy beam search from a uniformly sampled unmasked start vertex.
/// Masked ids are skipped entirely; pass an empty mask for a plain search.
pub fn greedy_search(
    graph: &ProximityGraph,
    store: &VectorStore,
    query: &[f32],
    k: usize,
    mask: &IdSet,
    rng: &mut impl Rng,
) -> Result<SearchResult, SearchError> {
    let start = sample_start(graph, mask, rng)?;
    traverse(graph, store, query, k, mask, MaskMode::Exclude, start)
}

/// As [`greedy_search`] but with a caller-chosen start vertex.
pub fn greedy_search_from(
    graph: &ProximityGraph,
    store: &VectorStore,
    query: &[f32],
    k: usize,
    mask: &IdSet,
    start: VectorId,
) -> Result<SearchResult, SearchError> {
    traverse(graph, store, query, k, mask, MaskMode::Exclude, start)
}

/// Tombstone-aware search: masked vertices are scored and expanded (they
/// keep guiding the walk) but are excluded from the returned top-k.
pub fn greedy_search_mask_aware(
    graph: &ProximityGraph,
    store: &VectorStore,
    query: &[f32],
    k: usize,
    masked: &IdSet,
    rng: &mut impl Rng,
) -> Result<SearchResult, SearchError> {
    let start = sample_start(graph, masked, rng)?;
    traverse(graph, store, query, k, masked, MaskMode::Traverse, start)
}

/// As [`greedy_search_mask_aware`] with a caller-chosen start vertex.
pub fn greedy_search_mask_aware_from(
    graph: &ProximityGraph,
    store: &VectorStore,
    query: &[f32],
    k: usize,
    masked: &IdSet,
    start: VectorId,
) -> Result<SearchResult, SearchError> {
    traverse(graph, store, query, k, masked, MaskMode::Traverse, start)
}

/// Diversity-based neighbor selection.
///
/// Candidates are ranked by similarity to the target; a candidate is
/// accepted only if it is not invalid and is at least as close to the
/// target as to every already-accepted neighbor. Stops after `d`
/// acceptances. There is no backfill: fewer than `d` (possibly zero)
/// accepted neighbors is a valid outcome.
///
/// Returns the accepted ids in acceptance order along with the number of
/// similarity evaluations spent.
pub fn select_neighbors(
    store: &VectorStore,
    target: &[f32],
    candidates: &[VectorId],
    d: usize,
    invalid: &IdSet,
) -> Result<(Vec<VectorId>, u64), SearchError> {
    assert!(d >= 1, "degree threshold must be positive");
    let prepared = store.prepare_query(target)?;
    let mut distance_computations = 0u64;

    let mut ranked: Vec<Candidate> = Vec::with_capacity(candidates.len());
    for &id in candidates {
        store.get(id)?;
        let score = store.score(id, &prepared);
        distance_computations += 1;
        ranked.push(Candidate { id, score });
    }
    ranked.sort_unstable_by(rank);

    let mut accepted: Vec<VectorId> = Vec::new();
    for c in &ranked {
        if accepted.len() >= d {
            break;
        }
        if invalid.contains(&c.id) {
            continue;
        }
        let mut diverse = true;
        for &z in &accepted {
            let rival = store.score_between(z, c.id);
            distance_computations += 1;
            if c.score < rival {
                diverse = false;
                break;
            }
        }
        if diverse {
            accepted.push(c.id);
        }
    }
    Ok((accepted, distance_computations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Metric;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(points: &[[f32; 2]]) -> (ProximityGraph, VectorStore, Vec<VectorId>) {
        let mut store = VectorStore::new(2, Metric::Euclidean);
        let mut graph = ProximityGraph::new(points.len().max(2));
        let mut ids = Vec::new();
        for p in points {
            let id = store.insert(p.to_vec()).unwrap();
            graph.add_vertex(id).unwrap();
            ids.push(id);
        }
        (graph, store, ids)
    }

    fn complete(graph: &mut ProximityGraph, ids: &[VectorId]) {
        for &u in ids {
            for &v in ids {
                if u != v {
                    graph.add_edge(u, v).unwrap();
                }
            }
        }
    }

    #[test]
    fn single_vertex_graph_returns_it() {
        let (graph, store, ids) = setup(&[[0.5, 0.5]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let res = greedy_search(&graph, &store, &[9.0, 9.0], 3, &IdSet::default(), &mut rng).unwrap();
        assert_eq!(res.ids(), vec![ids[0]]);
        assert_eq!(res.distance_computations, 1);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let store = VectorStore::new(2, Metric::Euclidean);
        let graph = ProximityGraph::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            greedy_search(&graph, &store, &[0.0, 0.0], 1, &IdSet::default(), &mut rng),
            Err(SearchError::EmptyGraph)
        ));
    }

    #[test]
    fn complete_graph_matches_brute_force() {
        let (mut graph, store, ids) = setup(&[[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]]);
        complete(&mut graph, &ids);
        let q = [0.9f32, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let res = greedy_search(&graph, &store, &q, 3, &IdSet::default(), &mut rng).unwrap();
        let got: Vec<u64> = res.ids().iter().map(|id| id.0).collect();
        assert_eq!(got, vec![1, 0, 2]);

        let oracle = store.brute_force_topk(&q, 3, store.ids()).unwrap();
        let want: Vec<u64> = oracle.iter().map(|(id, _)| id.0).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn mask_aware_walks_through_tombstones() {
        // chain a -> b -> c with b masked; query sits at c
        let (mut graph, store, ids) = setup(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let (a, b, c) = (ids[0], ids[1], ids[2]);
        graph.add_edge(a, b).unwrap();
        graph.add_edge(b, c).unwrap();
        let masked = IdSet::from_iter([b]);

        let res =
            greedy_search_mask_aware_from(&graph, &store, &[2.0, 0.0], 2, &masked, a).unwrap();
        assert_eq!(res.ids(), vec![c, a]);
        // a, b and c were all scored
        assert_eq!(res.distance_computations, 3);

        // the plain search cannot cross the tombstone
        let blocked = greedy_search_from(&graph, &store, &[2.0, 0.0], 2, &masked, a).unwrap();
        assert_eq!(blocked.ids(), vec![a]);
    }

    #[test]
    fn empty_mask_matches_plain_search() {
        let (mut graph, store, ids) = setup(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.5], [0.5, 2.0]]);
        complete(&mut graph, &ids);
        let q = [1.2f32, 0.4];
        let empty = IdSet::default();
        let mut rng_a = ChaCha8Rng::seed_from_u64(11);
        let mut rng_b = ChaCha8Rng::seed_from_u64(11);
        let plain = greedy_search(&graph, &store, &q, 2, &empty, &mut rng_a).unwrap();
        let aware = greedy_search_mask_aware(&graph, &store, &q, 2, &empty, &mut rng_b).unwrap();
        assert_eq!(plain.ids(), aware.ids());
        assert_eq!(plain.distance_computations, aware.distance_computations);
    }

    #[test]
    fn fully_masked_graph_is_an_error() {
        let (graph, store, ids) = setup(&[[0.0, 0.0], [1.0, 0.0]]);
        let masked: IdSet = ids.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            greedy_search_mask_aware(&graph, &store, &[0.0, 0.0], 1, &masked, &mut rng),
            Err(SearchError::AllMasked)
        ));
    }

    #[test]
    fn topk_never_contains_masked_ids() {
        let (mut graph, store, ids) = setup(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        complete(&mut graph, &ids);
        let masked = IdSet::from_iter([ids[1], ids[2]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let res =
            greedy_search_mask_aware(&graph, &store, &[1.4, 0.0], 4, &masked, &mut rng).unwrap();
        assert!(res.ids().iter().all(|id| !masked.contains(id)));
        assert_eq!(res.topk.len(), 2);
    }

    #[test]
    fn select_single_candidate_is_vacuous() {
        let (_, store, ids) = setup(&[[5.0, 5.0], [1.0, 0.0]]);
        let (accepted, _) =
            select_neighbors(&store, &[5.0, 5.0], &[ids[1]], 1, &IdSet::default()).unwrap();
        assert_eq!(accepted, vec![ids[1]]);
    }

    #[test]
    fn select_rejects_candidate_closer_to_accepted() {
        // target x at origin; (1.9, 0) is closer to (1, 0) than to x
        let (_, store, ids) = setup(&[[0.0, 0.0], [1.0, 0.0], [1.9, 0.0], [0.0, 2.5]]);
        let (accepted, _) = select_neighbors(
            &store,
            &[0.0, 0.0],
            &[ids[1], ids[2], ids[3]],
            3,
            &IdSet::default(),
        )
        .unwrap();
        assert_eq!(accepted, vec![ids[1], ids[3]]);
    }

    #[test]
    fn select_with_everything_invalid_is_empty() {
        let (_, store, ids) = setup(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let invalid = IdSet::from_iter([ids[1], ids[2]]);
        let (accepted, _) =
            select_neighbors(&store, &[0.0, 0.0], &[ids[1], ids[2]], 2, &invalid).unwrap();
        assert!(accepted.is_empty());
    }

    #[test]
    fn select_tie_accepts_equidistant_candidate() {
        // (0.5, 3) sits on the perpendicular bisector of the target and
        // (1, 0): exactly as close to the target as to the accepted
        // neighbor, so the <= rule admits it
        let (_, store, ids) = setup(&[[0.0, 0.0], [1.0, 0.0], [0.5, 3.0]]);
        let (accepted, _) = select_neighbors(
            &store,
            &[0.0, 0.0],
            &[ids[1], ids[2]],
            2,
            &IdSet::default(),
        )
        .unwrap();
        assert_eq!(accepted, vec![ids[1], ids[2]]);
    }

    proptest! {
        // beam search with k >= n on a complete graph is exhaustive and must
        // agree with the brute-force oracle exactly
        #[test]
        fn complete_graph_equivalence(
            points in proptest::collection::vec(
                proptest::collection::vec(-50f32..50.0, 3), 1..12),
            seed in 0u64..1000,
            q in proptest::collection::vec(-50f32..50.0, 3),
        ) {
            let mut store = VectorStore::new(3, Metric::Euclidean);
            let mut graph = ProximityGraph::new(points.len().max(2));
            let mut ids = Vec::new();
            for p in &points {
                let id = store.insert(p.clone()).unwrap();
                graph.add_vertex(id).unwrap();
                ids.push(id);
            }
            for &u in &ids {
                for &v in &ids {
                    if u != v { graph.add_edge(u, v).unwrap(); }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let res = greedy_search(&graph, &store, &q, points.len(), &IdSet::default(), &mut rng).unwrap();
            let oracle = store.brute_force_topk(&q, points.len(), store.ids()).unwrap();
            prop_assert_eq!(res.ids(), oracle.iter().map(|(id, _)| *id).collect::<Vec<_>>());
        }

        // accepted neighbors are pairwise diverse: each is at least as close
        // to the target as to every earlier-accepted neighbor
        #[test]
        fn select_neighbors_diversity_recheck(
            points in proptest::collection::vec(
                proptest::collection::vec(-10f32..10.0, 2), 2..20),
            d in 1usize..6,
        ) {
            let mut store = VectorStore::new(2, Metric::Euclidean);
            let mut ids = Vec::new();
            for p in &points {
                ids.push(store.insert(p.clone()).unwrap());
            }
            let target = points[0].clone();
            let candidates = &ids[1..];
            let (accepted, _) =
                select_neighbors(&store, &target, candidates, d, &IdSet::default()).unwrap();
            prop_assert!(accepted.len() <= d);
            for (i, &y) in accepted.iter().enumerate() {
                let to_target = Metric::Euclidean
                    .similarity(store.get(y).unwrap(), &target).unwrap();
                for &z in &accepted[..i] {
                    let to_accepted = store.similarity(z, y).unwrap();
                    prop_assert!(to_target >= to_accepted);
                }
            }
        }

        // the result is invariant under permutation of the candidate list
        #[test]
        fn select_neighbors_permutation_invariant(
            points in proptest::collection::vec(
                proptest::collection::vec(-10f32..10.0, 2), 3..15),
            d in 1usize..5,
            rotation in 0usize..14,
        ) {
            let mut store = VectorStore::new(2, Metric::Euclidean);
            let mut ids = Vec::new();
            for p in &points {
                ids.push(store.insert(p.clone()).unwrap());
            }
            let target = points[0].clone();
            let mut candidates: Vec<VectorId> = ids[1..].to_vec();
            let (a, _) = select_neighbors(&store, &target, &candidates, d, &IdSet::default()).unwrap();
            let r = rotation % candidates.len();
            candidates.rotate_left(r);
            let (b, _) = select_neighbors(&store, &target, &candidates, d, &IdSet::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
