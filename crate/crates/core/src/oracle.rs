//! Independent ground-truth machinery: exact recall accounting, brute-force
//! top-k lists, and a brute-force 2-D Delaunay construction used to check
//! the greedy-search exactness and deletion-locality guarantees on instances
//! where the Delaunay graph is computable.

use std::collections::{BTreeSet, HashSet};
use crate::store::IdSet;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::ProximityGraph;
use crate::search;
use crate::store::{Metric, StoreError, VectorId, VectorStore};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("degenerate position: {0}")]
    DegeneratePosition(String),
    #[error("id {0} does not fit the ivecs int32 payload")]
    IdOverflow(u64),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Fraction of the exact top-K present in the retrieved top-K.
pub fn recall_at_k(retrieved: &[VectorId], truth: &[VectorId], k: usize) -> f64 {
    assert!(k >= 1, "K must be positive");
    assert!(!truth.is_empty(), "truth list must not be empty");
    let truth_top: HashSet<VectorId> = truth.iter().take(k).copied().collect();
    let hits = retrieved
        .iter()
        .take(k)
        .filter(|id| truth_top.contains(id))
        .count();
    hits as f64 / truth_top.len() as f64
}

/// Exact top-K id lists for a query pool over a fixed live set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub lists: Vec<Vec<VectorId>>,
}

impl GroundTruth {
    /// Brute-force top-K per query, in pool order.
    pub fn compute(
        store: &VectorStore,
        queries: &[Vec<f32>],
        k: usize,
        live: &[VectorId],
    ) -> Result<Self, StoreError> {
        let lists = queries
            .par_iter()
            .map(|q| {
                store
                    .brute_force_topk(q, k, live.iter().copied())
                    .map(|top| top.into_iter().map(|(id, _)| id).collect())
            })
            .collect::<Result<Vec<Vec<VectorId>>, StoreError>>()?;
        Ok(GroundTruth { lists })
    }

    /// Persists as ivecs: one record of K int32 ids per query.
    pub fn write_ivecs<P: AsRef<std::path::Path>>(&self, path: P) -> Result<(), OracleError> {
        let rows = self
            .lists
            .iter()
            .map(|list| {
                list.iter()
                    .map(|id| i32::try_from(id.0).map_err(|_| OracleError::IdOverflow(id.0)))
                    .collect::<Result<Vec<i32>, OracleError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        crate::io::write_ivecs(path, &rows)?;
        Ok(())
    }

    pub fn read_ivecs<P: AsRef<std::path::Path>>(path: P) -> Result<Self, OracleError> {
        let (rows, _dim) = crate::io::read_ivecs(path)?;
        Ok(GroundTruth {
            lists: rows
                .into_iter()
                .map(|row| row.into_iter().map(|id| VectorId(id as u64)).collect())
                .collect(),
        })
    }
}

/// Exact Delaunay graph of a 2-D point set in general position, built by
/// brute-force empty-circumcircle enumeration (O(n^4), fine at oracle
/// scale). Edges are unordered index pairs stored as (min, max).
#[derive(Debug, Clone)]
pub struct DelaunayGraph2D {
    pub points: Vec<[f64; 2]>,
    pub edges: BTreeSet<(usize, usize)>,
}

const COLLINEAR_TOL: f64 = 1e-9;
const COCIRCULAR_TOL: f64 = 1e-9;
const STRICT_INSIDE_TOL: f64 = 1e-12;

fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `p` lies strictly inside the circumcircle of (a, b, c),
/// after adjusting for the triangle's orientation.
fn incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]) -> f64 {
    let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
    let (bx, by) = (b[0] - p[0], b[1] - p[1]);
    let (cx, cy) = (c[0] - p[0], c[1] - p[1]);
    let (a2, b2, c2) = (ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy);
    let det = ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
    let orient = orient2d(a, b, c);
    if orient >= 0.0 {
        det
    } else {
        -det
    }
}

/// Brute-force Delaunay: edge {i,j} exists iff some circumcircle through
/// points i and j is empty of all other points. Fewer than 3 points fall
/// back to the complete graph.
pub fn delaunay_2d(points: &[[f64; 2]]) -> Result<DelaunayGraph2D, OracleError> {
    let n = points.len();
    let mut edges = BTreeSet::new();
    if n < 3 {
        for i in 0..n {
            for j in (i + 1)..n {
                edges.insert((i, j));
            }
        }
        return Ok(DelaunayGraph2D {
            points: points.to_vec(),
            edges,
        });
    }

    for i in 0..n {
        for j in (i + 1)..n {
            'witness: for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let orient = orient2d(points[i], points[j], points[k]);
                if orient.abs() < COLLINEAR_TOL {
                    return Err(OracleError::DegeneratePosition(format!(
                        "points {i}, {j}, {k} are collinear within {COLLINEAR_TOL}"
                    )));
                }
                for p in 0..n {
                    if p == i || p == j || p == k {
                        continue;
                    }
                    let det = incircle(points[i], points[j], points[k], points[p]);
                    if det.abs() < COCIRCULAR_TOL {
                        return Err(OracleError::DegeneratePosition(format!(
                            "points {i}, {j}, {k}, {p} are cocircular within {COCIRCULAR_TOL}"
                        )));
                    }
                    if det > STRICT_INSIDE_TOL {
                        // a point strictly inside: this witness fails
                        continue 'witness;
                    }
                }
                edges.insert((i, j));
                break;
            }
        }
    }
    Ok(DelaunayGraph2D {
        points: points.to_vec(),
        edges,
    })
}

impl DelaunayGraph2D {
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Whether every vertex can reach every other along Delaunay edges.
    pub fn is_connected(&self) -> bool {
        let n = self.points.len();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Materializes the oracle graph as a searchable index: every undirected
    /// edge becomes two directed edges, with an out-degree limit large
    /// enough to never bind.
    pub fn to_index(&self) -> (ProximityGraph, VectorStore) {
        let n = self.points.len();
        let mut store = VectorStore::new(2, Metric::Euclidean);
        let mut graph = ProximityGraph::new(n.max(1));
        for p in &self.points {
            let id = store.insert(vec![p[0] as f32, p[1] as f32]).unwrap();
            graph.add_vertex(id).unwrap();
        }
        for &(i, j) in &self.edges {
            graph
                .add_edge(VectorId(i as u64), VectorId(j as u64))
                .unwrap();
            graph
                .add_edge(VectorId(j as u64), VectorId(i as u64))
                .unwrap();
        }
        (graph, store)
    }
}

/// Uniform points in the unit square, perturbed by +-1e-6 so structured
/// inputs land in general position. Components are f32-quantized to match
/// what a vector store would hold.
pub fn random_points_2d(n: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let x = rng.gen_range(0.0f64..1.0) + rng.gen_range(-1e-6..1e-6);
            let y = rng.gen_range(0.0f64..1.0) + rng.gen_range(-1e-6..1e-6);
            [x as f32 as f64, y as f32 as f64]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TheoremReport {
    pub trials: usize,
    pub failures: usize,
    pub detail: Option<String>,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Checks that greedy search with a queue of 1 on the exact Delaunay graph
/// finds the true nearest neighbor, for `trials` random queries, starting
/// from every vertex.
pub fn verify_theorem1(
    points: &[[f64; 2]],
    trials: usize,
    rng: &mut impl Rng,
) -> Result<TheoremReport, OracleError> {
    let delaunay = delaunay_2d(points)?;
    let (graph, store) = delaunay.to_index();
    let ids = store.ids();
    let mut failures = 0usize;
    let mut detail = None;
    let empty = IdSet::default();

    for _ in 0..trials {
        let q = [
            rng.gen_range(-0.25f32..1.25),
            rng.gen_range(-0.25f32..1.25),
        ];
        let truth = store
            .brute_force_topk(&q, 1, ids.iter().copied())
            .expect("non-empty store")[0]
            .0;
        for &start in &ids {
            let got = search::greedy_search_from(&graph, &store, &q, 1, &empty, start)
                .expect("searchable graph");
            if got.topk[0].id != truth {
                failures += 1;
                detail.get_or_insert_with(|| {
                    format!(
                        "query ({}, {}) from start {start}: got {}, nearest is {truth}",
                        q[0], q[1], got.topk[0].id
                    )
                });
            }
        }
    }
    Ok(TheoremReport {
        trials,
        failures,
        detail,
    })
}

/// Checks the two locality claims for removing vertex `x0` from a Delaunay
/// graph: (a) vertices that were not neighbors of `x0` keep exactly the
/// same neighbor set, and (b) dropping `x0` and its incident edges leaves a
/// subgraph of the Delaunay graph of the remaining points.
pub fn verify_theorem2(points: &[[f64; 2]], x0: usize) -> Result<TheoremReport, OracleError> {
    assert!(x0 < points.len());
    let full = delaunay_2d(points)?;

    // survivors keep their original labels
    let labels: Vec<usize> = (0..points.len()).filter(|&i| i != x0).collect();
    let reduced_points: Vec<[f64; 2]> = labels.iter().map(|&i| points[i]).collect();
    let reduced = delaunay_2d(&reduced_points)?;
    let reduced_edges: BTreeSet<(usize, usize)> = reduced
        .edges
        .iter()
        .map(|&(a, b)| {
            let (a, b) = (labels[a], labels[b]);
            (a.min(b), a.max(b))
        })
        .collect();

    let mut failures = 0usize;
    let mut detail = None;

    // (b) subgraph containment
    for &(a, b) in &full.edges {
        if a == x0 || b == x0 {
            continue;
        }
        if !reduced_edges.contains(&(a, b)) {
            failures += 1;
            detail.get_or_insert_with(|| format!("edge ({a}, {b}) vanished after removing {x0}"));
        }
    }

    // (a) non-neighbors of x0 are untouched
    let x0_neighbors: HashSet<usize> = full.neighbors(x0).into_iter().collect();
    for i in 0..points.len() {
        if i == x0 || x0_neighbors.contains(&i) {
            continue;
        }
        let before: BTreeSet<usize> = full.neighbors(i).into_iter().collect();
        let after: BTreeSet<usize> = reduced_edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        if before != after {
            failures += 1;
            detail.get_or_insert_with(|| {
                format!("non-neighbor {i} of {x0} changed: {before:?} -> {after:?}")
            });
        }
    }

    Ok(TheoremReport {
        trials: 1,
        failures,
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vid(values: &[u64]) -> Vec<VectorId> {
        values.iter().map(|&v| VectorId(v)).collect()
    }

    #[test]
    fn recall_identity_is_one() {
        let t = vid(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(recall_at_k(&t, &t, 10), 1.0);
    }

    #[test]
    fn recall_disjoint_is_zero() {
        assert_eq!(recall_at_k(&vid(&[1, 2]), &vid(&[3, 4]), 2), 0.0);
    }

    #[test]
    fn recall_eight_of_ten() {
        let truth = vid(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let retrieved = vid(&[0, 1, 2, 3, 4, 5, 6, 7, 90, 91]);
        assert_eq!(recall_at_k(&retrieved, &truth, 10), 0.8);
    }

    #[test]
    fn recall_handles_truth_shorter_than_k() {
        let truth = vid(&[5, 6]);
        let retrieved = vid(&[5, 6, 7]);
        assert_eq!(recall_at_k(&retrieved, &truth, 10), 1.0);
    }

    #[test]
    fn triangle_is_complete() {
        let pts = [[0.0, 0.0], [1.0, 0.1], [0.4, 0.9]];
        let g = delaunay_2d(&pts).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert!(g.is_connected());
    }

    #[test]
    fn convex_quadrilateral_has_five_edges() {
        // the four hull edges plus exactly one diagonal
        let pts = [[0.0, 0.0], [1.0, 0.05], [1.05, 1.0], [-0.02, 0.95]];
        let g = delaunay_2d(&pts).unwrap();
        assert_eq!(g.edges.len(), 5);
        assert!(!(g.has_edge(0, 2) && g.has_edge(1, 3)));
        assert!(g.has_edge(0, 2) || g.has_edge(1, 3));
    }

    #[test]
    fn square_with_center_connects_center_to_all_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        // perturb the cocircular corners into general position
        let mut pts = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
        ];
        for p in &mut pts {
            p[0] += rng.gen_range(-1e-6..1e-6);
            p[1] += rng.gen_range(-1e-6..1e-6);
        }
        let g = delaunay_2d(&pts).unwrap();
        for corner in 0..4 {
            assert!(g.has_edge(corner, 4), "center must reach corner {corner}");
        }
    }

    #[test]
    fn exact_square_is_degenerate() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(matches!(
            delaunay_2d(&pts),
            Err(OracleError::DegeneratePosition(_))
        ));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.3, 0.9]];
        assert!(matches!(
            delaunay_2d(&pts),
            Err(OracleError::DegeneratePosition(_))
        ));
    }

    #[test]
    fn two_points_fall_back_to_complete_graph() {
        let g = delaunay_2d(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn random_delaunay_is_connected_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let pts = random_points_2d(20, &mut rng);
            let g = match delaunay_2d(&pts) {
                Ok(g) => g,
                Err(OracleError::DegeneratePosition(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(g.is_connected());
            for &(a, b) in &g.edges {
                assert!(a < b);
            }
        }
    }

    #[test]
    fn theorem1_small_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts = random_points_2d(10, &mut rng);
        let report = verify_theorem1(&pts, 50, &mut rng).unwrap();
        assert!(report.passed(), "{:?}", report.detail);
    }

    #[test]
    fn theorem1_trivial_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = vec![[0.1, 0.1], [0.9, 0.2], [0.4, 0.8]];
        let report = verify_theorem1(&pts, 20, &mut rng).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn theorem1_negative_control_is_reported_not_asserted() {
        // deleting a Delaunay edge may break exactness; the report carries
        // the outcome either way
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = random_points_2d(12, &mut rng);
        let delaunay = delaunay_2d(&pts).unwrap();
        let (mut graph, store) = delaunay.to_index();
        let &(a, b) = delaunay.edges.iter().next().unwrap();
        graph
            .remove_edge(VectorId(a as u64), VectorId(b as u64))
            .unwrap();
        graph
            .remove_edge(VectorId(b as u64), VectorId(a as u64))
            .unwrap();

        let ids = store.ids();
        let empty = IdSet::default();
        let mut failures = 0;
        for _ in 0..30 {
            let q = [rng.gen_range(0.0f32..1.0), rng.gen_range(0.0f32..1.0)];
            let truth = store.brute_force_topk(&q, 1, ids.iter().copied()).unwrap()[0].0;
            for &start in &ids {
                let got =
                    search::greedy_search_from(&graph, &store, &q, 1, &empty, start).unwrap();
                if got.topk[0].id != truth {
                    failures += 1;
                }
            }
        }
        // no assertion on failures: the control documents that the guarantee
        // is specific to the intact Delaunay graph
        let _ = failures;
    }

    #[test]
    fn theorem2_small_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 25 {
            let n = rng.gen_range(4usize..=12);
            let pts = random_points_2d(n, &mut rng);
            let x0 = rng.gen_range(0..n);
            match verify_theorem2(&pts, x0) {
                Ok(report) => {
                    assert!(report.passed(), "{:?}", report.detail);
                    checked += 1;
                }
                Err(OracleError::DegeneratePosition(_)) => continue,
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn theorem2_triangle_is_trivial() {
        let pts = vec![[0.1, 0.1], [0.9, 0.2], [0.4, 0.8]];
        let report = verify_theorem2(&pts, 0).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn ground_truth_ivecs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.ivecs");
        let gt = GroundTruth {
            lists: vec![vid(&[3, 1, 4]), vid(&[1, 5, 9])],
        };
        gt.write_ivecs(&path).unwrap();
        let loaded = GroundTruth::read_ivecs(&path).unwrap();
        assert_eq!(gt, loaded);
    }

    #[test]
    fn ground_truth_matches_brute_force() {
        let mut store = VectorStore::new(2, Metric::Euclidean);
        for i in 0..20 {
            store
                .insert(vec![i as f32 * 0.1, (i % 5) as f32 * 0.2])
                .unwrap();
        }
        let queries = vec![vec![0.0f32, 0.0], vec![1.5, 0.5]];
        let live = store.ids();
        let gt = GroundTruth::compute(&store, &queries, 5, &live).unwrap();
        for (q, list) in queries.iter().zip(&gt.lists) {
            let direct = store.brute_force_topk(q, 5, live.iter().copied()).unwrap();
            let want: Vec<VectorId> = direct.into_iter().map(|(id, _)| id).collect();
            assert_eq!(list, &want);
        }
    }
}
