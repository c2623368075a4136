//! Vector storage, identities, and distance metrics.
//!
//! Scores follow the convention "higher is better": Euclidean similarity is
//! the negated distance, cosine is the normalized dot product. All score
//! arithmetic and comparison happens in f64 even though components are
//! stored as f32, so candidate orderings are stable across strategies and
//! platforms.

use std::path::Path;

use thiserror::Error;

/// Id-keyed hash set used on the search hot path (FxHash; ids are already
/// well distributed).
pub type IdSet = rustc_hash::FxHashSet<VectorId>;
/// Id-keyed hash map used on the search hot path.
pub type IdMap<V> = rustc_hash::FxHashMap<VectorId, V>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero-norm vector is not valid under the cosine metric")]
    ZeroNormVector,
    #[error("vector component is not finite")]
    NonFiniteComponent,
    #[error("unknown vector id {0}")]
    UnknownId(VectorId),
    #[error("duplicate vector id {0}")]
    DuplicateId(VectorId),
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("empty file")]
    EmptyFile,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identity of a stored vector. Never reused within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct VectorId(pub u64);

impl std::fmt::Display for VectorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl Metric {
    /// Full similarity formula on raw vectors; higher is better.
    pub fn similarity(&self, a: &[f32], b: &[f32]) -> Result<f64, StoreError> {
        if a.len() != b.len() {
            return Err(StoreError::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        match self {
            Metric::Euclidean => Ok(-euclidean_distance(a, b)),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
                for (&x, &y) in a.iter().zip(b) {
                    let (x, y) = (x as f64, y as f64);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    return Err(StoreError::ZeroNormVector);
                }
                Ok(dot / (na.sqrt() * nb.sqrt()))
            }
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        match s {
            "l2" | "euclidean" => Some(Metric::Euclidean),
            "cosine" => Some(Metric::Cosine),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "l2",
            Metric::Cosine => "cosine",
        }
    }
}

pub fn euclidean_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc.sqrt()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        acc += x as f64 * y as f64;
    }
    acc
}

/// Owns the vectors currently known to the index.
///
/// Under the cosine metric, vectors are normalized once at ingestion and
/// scored by plain dot product afterwards; the zero-norm check happens here
/// rather than per query.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dimension: usize,
    metric: Metric,
    entries: IdMap<Vec<f32>>,
    next_id: u64,
}

impl VectorStore {
    pub fn new(dimension: usize, metric: Metric) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        VectorStore {
            dimension,
            metric,
            entries: IdMap::default(),
            next_id: 0,
        }
    }

    /// Builds a store from rows, assigning ids `0..n-1` in order.
    pub fn from_rows(metric: Metric, rows: Vec<Vec<f32>>) -> Result<Self, StoreError> {
        let dimension = rows.first().map(|r| r.len()).unwrap_or(0);
        if dimension == 0 {
            return Err(StoreError::MalformedFile("no rows or empty rows".into()));
        }
        let mut store = VectorStore::new(dimension, metric);
        for row in rows {
            store.insert(row)?;
        }
        Ok(store)
    }

    /// Loads an fvecs file into a fresh store; ids are assigned `0..n-1`
    /// in file order.
    pub fn load_fvecs<P: AsRef<Path>>(path: P, metric: Metric) -> Result<Self, StoreError> {
        let (rows, _dim) = crate::io::read_fvecs(path)?;
        VectorStore::from_rows(metric, rows)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: VectorId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn get(&self, id: VectorId) -> Result<&[f32], StoreError> {
        self.entries
            .get(&id)
            .map(|v| v.as_slice())
            .ok_or(StoreError::UnknownId(id))
    }

    /// All ids in ascending order.
    pub fn ids(&self) -> Vec<VectorId> {
        let mut ids: Vec<VectorId> = self.entries.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    fn validate(&self, vector: &[f32]) -> Result<(), StoreError> {
        if vector.len() != self.dimension {
            return Err(StoreError::DimensionMismatch {
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|c| !c.is_finite()) {
            return Err(StoreError::NonFiniteComponent);
        }
        Ok(())
    }

    fn ingest(&self, mut vector: Vec<f32>) -> Result<Vec<f32>, StoreError> {
        self.validate(&vector)?;
        if self.metric == Metric::Cosine {
            let norm = dot(&vector, &vector).sqrt();
            if norm == 0.0 {
                return Err(StoreError::ZeroNormVector);
            }
            for c in &mut vector {
                *c = (*c as f64 / norm) as f32;
            }
        }
        Ok(vector)
    }

    /// Inserts a vector under a fresh id.
    pub fn insert(&mut self, vector: Vec<f32>) -> Result<VectorId, StoreError> {
        let id = VectorId(self.next_id);
        self.insert_with_id(id, vector)?;
        Ok(id)
    }

    /// Inserts under an explicit id (workload replay assigns ids up front).
    pub fn insert_with_id(&mut self, id: VectorId, vector: Vec<f32>) -> Result<(), StoreError> {
        if self.entries.contains_key(&id) {
            return Err(StoreError::DuplicateId(id));
        }
        let vector = self.ingest(vector)?;
        self.entries.insert(id, vector);
        self.next_id = self.next_id.max(id.0 + 1);
        Ok(())
    }

    pub fn remove(&mut self, id: VectorId) -> Result<Vec<f32>, StoreError> {
        self.entries.remove(&id).ok_or(StoreError::UnknownId(id))
    }

    /// Normalizes a query once so per-candidate scoring is norm-free.
    pub fn prepare_query(&self, q: &[f32]) -> Result<Vec<f32>, StoreError> {
        self.validate(q)?;
        let mut q = q.to_vec();
        if self.metric == Metric::Cosine {
            let norm = dot(&q, &q).sqrt();
            if norm == 0.0 {
                return Err(StoreError::ZeroNormVector);
            }
            for c in &mut q {
                *c = (*c as f64 / norm) as f32;
            }
        }
        Ok(q)
    }

    /// Hot-path score of a stored vector against a prepared query.
    /// Panics on an unknown id; graph vertices always have store entries.
    pub fn score(&self, id: VectorId, prepared_query: &[f32]) -> f64 {
        let v = self
            .entries
            .get(&id)
            .unwrap_or_else(|| panic!("store entry missing for vertex {id}"));
        match self.metric {
            Metric::Euclidean => -euclidean_distance(v, prepared_query),
            Metric::Cosine => dot(v, prepared_query),
        }
    }

    /// Score between two stored vectors.
    pub fn score_between(&self, a: VectorId, b: VectorId) -> f64 {
        let va = self.entries.get(&a).expect("store entry missing");
        self.score(b, va)
    }

    /// Similarity of two vectors-or-ids under the store's metric, full
    /// formula on the stored values.
    pub fn similarity(&self, a: VectorId, b: VectorId) -> Result<f64, StoreError> {
        let va = self.get(a)?;
        let vb = self.get(b)?;
        self.metric.similarity(va, vb)
    }

    /// Exact top-k over a live subset: the `k` ids with largest similarity,
    /// descending, ties broken by ascending id. Returns fewer than `k` only
    /// when the live set is smaller.
    pub fn brute_force_topk(
        &self,
        q: &[f32],
        k: usize,
        live: impl IntoIterator<Item = VectorId>,
    ) -> Result<Vec<(VectorId, f64)>, StoreError> {
        assert!(k >= 1, "k must be positive");
        let prepared = self.prepare_query(q)?;
        let mut scored = Vec::new();
        for id in live {
            if !self.entries.contains_key(&id) {
                return Err(StoreError::UnknownId(id));
            }
            scored.push((id, self.score(id, &prepared)));
        }
        scored.sort_unstable_by(|(ia, sa), (ib, sb)| {
            sb.total_cmp(sa).then_with(|| ia.cmp(ib))
        });
        scored.truncate(k);
        Ok(scored)
    }
}
