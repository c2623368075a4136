//! The directed proximity graph G, its maintained reverse graph G', and the
//! tombstone set Y.
//!
//! Both adjacency maps are kept reverse-consistent at every operation
//! boundary: `(u,v)` is in the out-map iff `(v,u)` is in the in-map. Only
//! out-degree is bounded; in-degree is unbounded. Adjacency is stored as
//! ordered lists (insertion order) so iteration, and therefore search, is
//! reproducible.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::store::{IdMap, IdSet, Metric, VectorId};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VectorId),
    #[error("duplicate vertex {0}")]
    DuplicateVertex(VectorId),
    #[error("self-loop on vertex {0}")]
    SelfLoop(VectorId),
    #[error("out-degree overflow on vertex {vertex} (limit {limit})")]
    DegreeOverflow { vertex: VectorId, limit: usize },
    #[error("vertex {0} is already masked")]
    AlreadyMasked(VectorId),
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single structural violation found by [`ProximityGraph::check_invariants`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    ReverseInconsistency { from: VectorId, to: VectorId },
    DegreeOverflow { vertex: VectorId, degree: usize },
    SelfLoop { vertex: VectorId },
    DuplicateEdge { from: VectorId, to: VectorId },
    UnknownEndpoint { from: VectorId, to: VectorId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    pub live_vertex_count: usize,
    pub tombstone_count: usize,
    pub edge_count: usize,
    pub mean_out_degree: f64,
    pub reachable_fraction_from_random_start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityGraph {
    out: IdMap<Vec<VectorId>>,
    inn: IdMap<Vec<VectorId>>,
    degree_limit: usize,
    tombstones: IdSet,
    // insertion-ordered vertex list for O(1) uniform sampling
    vertices: Vec<VectorId>,
    pos: IdMap<usize>,
}

impl ProximityGraph {
    pub fn new(degree_limit: usize) -> Self {
        assert!(degree_limit >= 1, "degree limit must be positive");
        ProximityGraph {
            out: IdMap::default(),
            inn: IdMap::default(),
            degree_limit,
            tombstones: IdSet::default(),
            vertices: Vec::new(),
            pos: IdMap::default(),
        }
    }

    pub fn degree_limit(&self) -> usize {
        self.degree_limit
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices not in the tombstone set.
    pub fn live_count(&self) -> usize {
        self.vertices.len() - self.tombstones.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(Vec::len).sum()
    }

    pub fn contains(&self, id: VectorId) -> bool {
        self.pos.contains_key(&id)
    }

    pub fn is_masked(&self, id: VectorId) -> bool {
        self.tombstones.contains(&id)
    }

    pub fn tombstones(&self) -> &IdSet {
        &self.tombstones
    }

    /// All vertices in insertion order (tombstoned ones included).
    pub fn vertices(&self) -> &[VectorId] {
        &self.vertices
    }

    pub fn add_vertex(&mut self, id: VectorId) -> Result<(), GraphError> {
        if self.pos.contains_key(&id) {
            return Err(GraphError::DuplicateVertex(id));
        }
        self.pos.insert(id, self.vertices.len());
        self.vertices.push(id);
        self.out.insert(id, Vec::new());
        self.inn.insert(id, Vec::new());
        Ok(())
    }

    /// Removes a vertex and every incident edge in both directions.
    pub fn remove_vertex(&mut self, id: VectorId) -> Result<(), GraphError> {
        if !self.pos.contains_key(&id) {
            return Err(GraphError::UnknownVertex(id));
        }
        let outgoing = self.out.get(&id).cloned().unwrap_or_default();
        for v in outgoing {
            remove_from(self.inn.get_mut(&v).expect("reverse entry"), id);
        }
        let incoming = self.inn.get(&id).cloned().unwrap_or_default();
        for u in incoming {
            remove_from(self.out.get_mut(&u).expect("forward entry"), id);
        }
        self.out.remove(&id);
        self.inn.remove(&id);
        self.tombstones.remove(&id);
        let idx = self.pos.remove(&id).unwrap();
        self.vertices.swap_remove(idx);
        if let Some(&moved) = self.vertices.get(idx) {
            self.pos.insert(moved, idx);
        }
        Ok(())
    }

    pub fn out_neighbors(&self, u: VectorId) -> Result<&[VectorId], GraphError> {
        self.out
            .get(&u)
            .map(Vec::as_slice)
            .ok_or(GraphError::UnknownVertex(u))
    }

    pub fn in_neighbors(&self, u: VectorId) -> Result<&[VectorId], GraphError> {
        self.inn
            .get(&u)
            .map(Vec::as_slice)
            .ok_or(GraphError::UnknownVertex(u))
    }

    /// Adds the directed edge `(u,v)` and its reverse record. Returns false
    /// when the edge already exists (the graph is unchanged).
    pub fn add_edge(&mut self, u: VectorId, v: VectorId) -> Result<bool, GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if !self.pos.contains_key(&v) {
            return Err(GraphError::UnknownVertex(v));
        }
        let out_u = self.out.get_mut(&u).ok_or(GraphError::UnknownVertex(u))?;
        if out_u.contains(&v) {
            return Ok(false);
        }
        if out_u.len() >= self.degree_limit {
            return Err(GraphError::DegreeOverflow {
                vertex: u,
                limit: self.degree_limit,
            });
        }
        out_u.push(v);
        self.inn.get_mut(&v).expect("vertex present").push(u);
        Ok(true)
    }

    /// Removes the directed edge `(u,v)`. Removing an absent edge is a
    /// no-op; the return value says whether an edge was actually removed.
    pub fn remove_edge(&mut self, u: VectorId, v: VectorId) -> Result<bool, GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if !self.pos.contains_key(&v) {
            return Err(GraphError::UnknownVertex(v));
        }
        let out_u = self.out.get_mut(&u).ok_or(GraphError::UnknownVertex(u))?;
        if !remove_from(out_u, v) {
            return Ok(false);
        }
        remove_from(self.inn.get_mut(&v).expect("vertex present"), u);
        Ok(true)
    }

    /// Drops every out-edge of `u`, returning the former neighbor list.
    pub fn clear_out_edges(&mut self, u: VectorId) -> Result<Vec<VectorId>, GraphError> {
        let out_u = self.out.get_mut(&u).ok_or(GraphError::UnknownVertex(u))?;
        let removed = std::mem::take(out_u);
        for &v in &removed {
            remove_from(self.inn.get_mut(&v).expect("reverse entry"), u);
        }
        Ok(removed)
    }

    /// Marks a vertex deleted without touching its edges.
    pub fn mask(&mut self, id: VectorId) -> Result<(), GraphError> {
        if !self.pos.contains_key(&id) {
            return Err(GraphError::UnknownVertex(id));
        }
        if !self.tombstones.insert(id) {
            return Err(GraphError::AlreadyMasked(id));
        }
        Ok(())
    }

    /// Uniform sample over vertices not in `excluded`.
    pub fn sample_vertex_excluding(
        &self,
        rng: &mut impl Rng,
        excluded: &IdSet,
    ) -> Option<VectorId> {
        if self.vertices.is_empty() {
            return None;
        }
        if excluded.is_empty() {
            return Some(self.vertices[rng.gen_range(0..self.vertices.len())]);
        }
        for _ in 0..32 {
            let id = self.vertices[rng.gen_range(0..self.vertices.len())];
            if !excluded.contains(&id) {
                return Some(id);
            }
        }
        // dense exclusion: fall back to an explicit pass
        let eligible: Vec<VectorId> = self
            .vertices
            .iter()
            .copied()
            .filter(|id| !excluded.contains(id))
            .collect();
        if eligible.is_empty() {
            None
        } else {
            Some(eligible[rng.gen_range(0..eligible.len())])
        }
    }

    /// True if any adjacency list in either direction references `id`.
    pub fn references_vertex(&self, id: VectorId) -> bool {
        self.out.values().any(|l| l.contains(&id)) || self.inn.values().any(|l| l.contains(&id))
    }

    /// Verifies reverse consistency, the degree bound, and absence of
    /// self-loops / duplicates / dangling endpoints. Returns all violations,
    /// sorted; an empty list means the graph is structurally sound.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        // neighbor lists are at most degree_limit long, so scans beat sets
        let has = |list: &[VectorId], id: VectorId| list.iter().any(|&x| x == id);

        for (&u, neighbors) in &self.out {
            if neighbors.len() > self.degree_limit {
                violations.push(Violation::DegreeOverflow {
                    vertex: u,
                    degree: neighbors.len(),
                });
            }
            for (i, &v) in neighbors.iter().enumerate() {
                if v == u {
                    violations.push(Violation::SelfLoop { vertex: u });
                    continue;
                }
                if has(&neighbors[..i], v) {
                    violations.push(Violation::DuplicateEdge { from: u, to: v });
                    continue;
                }
                match self.inn.get(&v) {
                    None => violations.push(Violation::UnknownEndpoint { from: u, to: v }),
                    Some(rev) if !has(rev, u) => {
                        violations.push(Violation::ReverseInconsistency { from: u, to: v })
                    }
                    _ => {}
                }
            }
        }
        for (&v, sources) in &self.inn {
            for (i, &u) in sources.iter().enumerate() {
                if u == v {
                    violations.push(Violation::SelfLoop { vertex: u });
                    continue;
                }
                if has(&sources[..i], u) {
                    violations.push(Violation::DuplicateEdge { from: u, to: v });
                    continue;
                }
                match self.out.get(&u) {
                    None => violations.push(Violation::UnknownEndpoint { from: u, to: v }),
                    Some(fwd) if !has(fwd, v) => {
                        violations.push(Violation::ReverseInconsistency { from: u, to: v })
                    }
                    _ => {}
                }
            }
        }

        violations.sort();
        violations.dedup();
        violations
    }

    /// Structure diagnostics; the reachability probe starts from a seeded
    /// random live vertex and may traverse tombstoned vertices, so masking
    /// alone never lowers the fraction.
    pub fn stats(&self, seed: u64) -> GraphStats {
        let live = self.live_count();
        let edge_count = self.edge_count();
        let mean_out_degree = if self.vertices.is_empty() {
            0.0
        } else {
            edge_count as f64 / self.vertices.len() as f64
        };
        let reachable = if live == 0 {
            0.0
        } else {
            let mut rng = crate::rng::op_rng(seed, crate::rng::stream::BUILD, 0x57a7);
            let start = self
                .sample_vertex_excluding(&mut rng, &self.tombstones)
                .expect("live vertex exists");
            let mut seen = IdSet::from_iter([start]);
            let mut queue = VecDeque::from([start]);
            let mut live_reached = 0usize;
            while let Some(u) = queue.pop_front() {
                if !self.tombstones.contains(&u) {
                    live_reached += 1;
                }
                for &v in &self.out[&u] {
                    if seen.insert(v) {
                        queue.push_back(v);
                    }
                }
            }
            live_reached as f64 / live as f64
        };
        GraphStats {
            live_vertex_count: live,
            tombstone_count: self.tombstones.len(),
            edge_count,
            mean_out_degree,
            reachable_fraction_from_random_start: reachable,
        }
    }

    /// Writes the snapshot format: little-endian header
    /// (magic, version, dimension, degree limit, metric, vertex count)
    /// followed by per-vertex records in ascending id order. The reverse
    /// graph is reconstructed on load; the tombstone set is not part of
    /// the format.
    pub fn write_snapshot<P: AsRef<Path>>(
        &self,
        path: P,
        dimension: usize,
        metric: Metric,
    ) -> Result<(), GraphError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(dimension as u32).to_le_bytes())?;
        w.write_all(&(self.degree_limit as u32).to_le_bytes())?;
        let metric_code: u32 = match metric {
            Metric::Euclidean => 0,
            Metric::Cosine => 1,
        };
        w.write_all(&metric_code.to_le_bytes())?;
        w.write_all(&(self.vertices.len() as u64).to_le_bytes())?;

        let mut ordered = self.vertices.clone();
        ordered.sort_unstable();
        for id in ordered {
            let neighbors = &self.out[&id];
            w.write_all(&id.0.to_le_bytes())?;
            w.write_all(&(neighbors.len() as u32).to_le_bytes())?;
            for v in neighbors {
                w.write_all(&v.0.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a snapshot, returning the graph and the (dimension, metric)
    /// recorded in its header.
    pub fn load_snapshot<P: AsRef<Path>>(
        path: P,
    ) -> Result<(ProximityGraph, usize, Metric), GraphError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(GraphError::MalformedSnapshot("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(GraphError::MalformedSnapshot(format!(
                "unsupported version {version}"
            )));
        }
        let dimension = read_u32(&mut r)? as usize;
        let degree_limit = read_u32(&mut r)? as usize;
        let metric = match read_u32(&mut r)? {
            0 => Metric::Euclidean,
            1 => Metric::Cosine,
            other => {
                return Err(GraphError::MalformedSnapshot(format!(
                    "unknown metric code {other}"
                )))
            }
        };
        let vertex_count = read_u64(&mut r)?;

        let mut graph = ProximityGraph::new(degree_limit.max(1));
        let mut adjacency: Vec<(VectorId, Vec<VectorId>)> =
            Vec::with_capacity(vertex_count as usize);
        for _ in 0..vertex_count {
            let id = VectorId(read_u64(&mut r)?);
            let degree = read_u32(&mut r)? as usize;
            if degree > degree_limit {
                return Err(GraphError::MalformedSnapshot(format!(
                    "vertex {id} exceeds degree limit"
                )));
            }
            let mut neighbors = Vec::with_capacity(degree);
            for _ in 0..degree {
                neighbors.push(VectorId(read_u64(&mut r)?));
            }
            graph
                .add_vertex(id)
                .map_err(|_| GraphError::MalformedSnapshot(format!("duplicate vertex {id}")))?;
            adjacency.push((id, neighbors));
        }
        for (id, neighbors) in adjacency {
            for v in neighbors {
                graph.add_edge(id, v).map_err(|e| {
                    GraphError::MalformedSnapshot(format!("edge ({id},{v}): {e}"))
                })?;
            }
        }
        Ok((graph, dimension, metric))
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"PXGS";
const SNAPSHOT_VERSION: u32 = 1;

fn read_u32(r: &mut impl Read) -> Result<u32, GraphError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64, GraphError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Removes the first occurrence, preserving list order.
fn remove_from(list: &mut Vec<VectorId>, id: VectorId) -> bool {
    match list.iter().position(|&x| x == id) {
        Some(idx) => {
            list.remove(idx);
            true
        }
        None => false,
    }
}
