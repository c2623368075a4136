//! Benchmark workload construction and serialization.
//!
//! A workload is a base set followed by update batches; each batch deletes,
//! then inserts, then queries. Deletes reference ids assigned earlier in
//! the stream. The random pattern permutes the dataset before partitioning;
//! the clustered pattern orders the dataset by k-means cluster so each
//! batch removes and inserts contiguous cluster regions. The query pool is
//! fixed and replayed every batch, optionally with repeats.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::rng::{op_rng, stream};
use crate::store::{StoreError, VectorId, VectorStore};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("insufficient data: need {needed} vectors, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("malformed workload log at line {line}: {message}")]
    MalformedLog { line: usize, message: String },
    #[error("delete at line {line} references id {id} that is not live")]
    DanglingDeleteReference { line: usize, id: VectorId },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum UpdatePattern {
    Random,
    Clustered,
}

impl UpdatePattern {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(UpdatePattern::Random),
            "clustered" => Some(UpdatePattern::Clustered),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub base_size: usize,
    pub delete_per_batch: usize,
    pub insert_per_batch: usize,
    pub query_per_batch: usize,
    pub num_batches: usize,
    pub pattern: UpdatePattern,
    pub kmeans_k: usize,
    pub seed: u64,
    pub query_repeat: usize,
}

impl WorkloadSpec {
    /// Desk-scale default: 5k base, 500 deletes/inserts/queries over 10
    /// batches.
    pub fn desk_scale(pattern: UpdatePattern, seed: u64) -> Self {
        WorkloadSpec {
            base_size: 5_000,
            delete_per_batch: 500,
            insert_per_batch: 500,
            query_per_batch: 500,
            num_batches: 10,
            pattern,
            kmeans_k: 10,
            seed,
            query_repeat: 1,
        }
    }

    /// Full benchmark shape: 10 batches of 10k deletes/inserts/queries, the
    /// base being whatever the dataset leaves over (e.g. 900k of SIFT-1M,
    /// 180k of the 280k NYTimes set). Queries come from the dataset's
    /// separate query file. Excluded from CI for runtime.
    pub fn paper_scale(dataset_len: usize, pattern: UpdatePattern, seed: u64) -> Self {
        let churn = 10 * 10_000;
        WorkloadSpec {
            base_size: dataset_len.saturating_sub(churn),
            delete_per_batch: 10_000,
            insert_per_batch: 10_000,
            query_per_batch: 10_000,
            num_batches: 10,
            pattern,
            kmeans_k: 10,
            seed,
            query_repeat: 1,
        }
    }
}

/// One update batch: deletes, then inserts, then queries (qids into the
/// pool, with repeats materialized).
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadBatch {
    pub deletes: Vec<VectorId>,
    pub inserts: Vec<(VectorId, Vec<f32>)>,
    pub queries: Vec<usize>,
}

impl WorkloadBatch {
    pub fn op_count(&self) -> usize {
        self.deletes.len() + self.inserts.len() + self.queries.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub dimension: usize,
    /// Base set, replayed as batch 0 of the log.
    pub base: Vec<(VectorId, Vec<f32>)>,
    pub query_pool: Vec<Vec<f32>>,
    pub batches: Vec<WorkloadBatch>,
}

impl Workload {
    /// Total update-batch operations (the base set is setup, not counted).
    pub fn op_count(&self) -> usize {
        self.batches.iter().map(WorkloadBatch::op_count).sum()
    }
}

/// Builds a workload with the query pool held out of the dataset.
pub fn build_workload(
    dataset: &VectorStore,
    spec: &WorkloadSpec,
) -> Result<Workload, WorkloadError> {
    build(dataset, spec, None)
}

/// Builds a workload with an externally supplied query pool (standard
/// benchmark datasets ship a separate query file).
pub fn build_workload_with_queries(
    dataset: &VectorStore,
    spec: &WorkloadSpec,
    queries: Vec<Vec<f32>>,
) -> Result<Workload, WorkloadError> {
    build(dataset, spec, Some(queries))
}

fn build(
    dataset: &VectorStore,
    spec: &WorkloadSpec,
    external_queries: Option<Vec<Vec<f32>>>,
) -> Result<Workload, WorkloadError> {
    assert!(spec.query_repeat >= 1, "query_repeat must be at least 1");
    let held_out = if external_queries.is_some() {
        0
    } else {
        spec.query_per_batch
    };
    let needed = spec.base_size + spec.num_batches * spec.insert_per_batch + held_out;
    if dataset.len() < needed {
        return Err(WorkloadError::InsufficientData {
            needed,
            available: dataset.len(),
        });
    }

    let dataset_ids = dataset.ids();
    let mut rng = op_rng(spec.seed, stream::WORKLOAD, 0);

    // order the dataset: plain permutation, or query holdout + cluster
    // sequence for the clustered pattern
    let (sequence, query_pool) = match spec.pattern {
        UpdatePattern::Random => {
            let mut perm: Vec<usize> = (0..dataset_ids.len()).collect();
            shuffle(&mut perm, &mut rng);
            let pool = match external_queries {
                Some(q) => q,
                None => {
                    let start = spec.base_size + spec.num_batches * spec.insert_per_batch;
                    perm[start..start + spec.query_per_batch]
                        .iter()
                        .map(|&i| dataset.get(dataset_ids[i]).unwrap().to_vec())
                        .collect()
                }
            };
            (perm, pool)
        }
        UpdatePattern::Clustered => {
            assert!(spec.kmeans_k >= 1, "kmeans_k must be at least 1");
            let mut indices: Vec<usize> = (0..dataset_ids.len()).collect();
            let pool = match external_queries {
                Some(q) => q,
                None => {
                    // uniform holdout, disjoint from base/insert pools
                    shuffle(&mut indices, &mut rng);
                    let held: Vec<usize> = indices.split_off(indices.len() - spec.query_per_batch);
                    indices.sort_unstable();
                    held.iter()
                        .map(|&i| dataset.get(dataset_ids[i]).unwrap().to_vec())
                        .collect()
                }
            };
            let rows: Vec<&[f32]> = indices
                .iter()
                .map(|&i| dataset.get(dataset_ids[i]).unwrap())
                .collect();
            let assignment = kmeans(&rows, spec.kmeans_k, &mut rng);
            let mut cluster_order: Vec<usize> = (0..spec.kmeans_k).collect();
            shuffle(&mut cluster_order, &mut rng);
            let mut sequence = Vec::with_capacity(indices.len());
            for &c in &cluster_order {
                for (pos, &a) in assignment.iter().enumerate() {
                    if a == c {
                        sequence.push(indices[pos]);
                    }
                }
            }
            (sequence, pool)
        }
    };

    let vector_at =
        |seq_pos: usize| -> Vec<f32> { dataset.get(dataset_ids[sequence[seq_pos]]).unwrap().to_vec() };

    // workload ids are assigned in stream order, starting at 0
    let mut next_id = 0u64;
    let mut fresh_id = || {
        let id = VectorId(next_id);
        next_id += 1;
        id
    };

    let base: Vec<(VectorId, Vec<f32>)> =
        (0..spec.base_size).map(|i| (fresh_id(), vector_at(i))).collect();

    // live set with O(1) removal for uniform delete sampling
    let mut live: Vec<VectorId> = base.iter().map(|(id, _)| *id).collect();
    // in the clustered pattern the oldest positions are deleted first, so
    // live is consumed from the front as a sliding window
    let mut window_front = 0usize;

    let queries: Vec<usize> = (0..spec.query_repeat)
        .flat_map(|_| 0..query_pool.len())
        .collect();

    let mut batches = Vec::with_capacity(spec.num_batches);
    let mut insert_cursor = spec.base_size;
    for b in 0..spec.num_batches {
        if spec.delete_per_batch > live.len() - window_front {
            return Err(WorkloadError::InsufficientData {
                needed: spec.delete_per_batch,
                available: live.len() - window_front,
            });
        }
        let mut batch_rng = op_rng(spec.seed, stream::WORKLOAD, 1 + b as u64);
        let deletes: Vec<VectorId> = match spec.pattern {
            UpdatePattern::Random => {
                let mut picked = Vec::with_capacity(spec.delete_per_batch);
                for _ in 0..spec.delete_per_batch {
                    let idx = batch_rng.gen_range(0..live.len());
                    picked.push(live.swap_remove(idx));
                }
                picked
            }
            UpdatePattern::Clustered => {
                let picked: Vec<VectorId> =
                    live[window_front..window_front + spec.delete_per_batch].to_vec();
                window_front += spec.delete_per_batch;
                picked
            }
        };
        let inserts: Vec<(VectorId, Vec<f32>)> = (0..spec.insert_per_batch)
            .map(|i| (fresh_id(), vector_at(insert_cursor + i)))
            .collect();
        insert_cursor += spec.insert_per_batch;
        live.extend(inserts.iter().map(|(id, _)| *id));
        batches.push(WorkloadBatch {
            deletes,
            inserts,
            queries: queries.clone(),
        });
    }

    Ok(Workload {
        dimension: dataset.dimension(),
        base,
        query_pool,
        batches,
    })
}

// Fisher-Yates with the caller's rng; std has no seeded shuffle.
fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Lloyd's k-means with k-means++-style seeded initialization. Runs at most
/// 50 iterations or until the largest centroid movement drops below 1e-4.
/// An emptied cluster is re-seeded at a random point. Returns the final
/// assignment.
pub fn kmeans(rows: &[&[f32]], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(k >= 1 && !rows.is_empty());
    let k = k.min(rows.len());
    let dim = rows[0].len();

    let dist2 = |a: &[f64], b: &[f32]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x - y as f64) * (x - y as f64))
            .sum()
    };

    // k-means++ seeding: each next center drawn with probability
    // proportional to squared distance from the nearest chosen center
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..rows.len());
    centers.push(rows[first].iter().map(|&c| c as f64).collect());
    let mut nearest: Vec<f64> = rows.iter().map(|r| dist2(&centers[0], r)).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let chosen = if total <= 0.0 {
            rng.gen_range(0..rows.len())
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = rows.len() - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centers.push(rows[chosen].iter().map(|&c| c as f64).collect());
        let latest = centers.last().unwrap().clone();
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(&latest, r));
        }
    }

    let mut assignment = vec![0usize; rows.len()];
    for _ in 0..50 {
        for (i, row) in rows.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = dist2(&centers[0], row);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = dist2(center, row);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignment[i] = best;
        }

        let mut sums = vec![vec![0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, row) in rows.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (j, &c) in row.iter().enumerate() {
                sums[assignment[i]][j] += c as f64;
            }
        }
        let mut movement = 0f64;
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed the emptied centroid
                let pick = rng.gen_range(0..rows.len());
                centers[c] = rows[pick].iter().map(|&x| x as f64).collect();
                movement = f64::INFINITY;
                continue;
            }
            let mut shift = 0f64;
            for j in 0..dim {
                let next = sums[c][j] / counts[c] as f64;
                shift += (next - centers[c][j]) * (next - centers[c][j]);
                centers[c][j] = next;
            }
            movement = movement.max(shift.sqrt());
        }
        if movement < 1e-4 {
            break;
        }
    }
    assignment
}

fn push_vector(line: &mut String, v: &[f32]) {
    for c in v {
        write!(line, " {c}").unwrap();
    }
}

/// Serializes the workload log: one op per line, `B <batch>` markers, the
/// base set as batch 0. Floats use the shortest round-trip decimal form.
pub fn write_workload<P: AsRef<Path>>(path: P, w: &Workload) -> Result<(), WorkloadError> {
    let mut text = String::new();
    let mut line = String::new();
    text.push_str("B 0\n");
    for (id, v) in &w.base {
        line.clear();
        write!(line, "I {id}").unwrap();
        push_vector(&mut line, v);
        text.push_str(&line);
        text.push('\n');
    }
    for (b, batch) in w.batches.iter().enumerate() {
        writeln!(text, "B {}", b + 1).unwrap();
        for id in &batch.deletes {
            writeln!(text, "D {id}").unwrap();
        }
        for (id, v) in &batch.inserts {
            line.clear();
            write!(line, "I {id}").unwrap();
            push_vector(&mut line, v);
            text.push_str(&line);
            text.push('\n');
        }
        for &qid in &batch.queries {
            line.clear();
            write!(line, "Q {qid}").unwrap();
            push_vector(&mut line, &w.query_pool[qid]);
            text.push_str(&line);
            text.push('\n');
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses a workload log, validating batch monotonicity, per-batch phase
/// order, delete-reference liveness, and query-pool consistency.
pub fn read_workload<P: AsRef<Path>>(path: P) -> Result<Workload, WorkloadError> {
    let text = std::fs::read_to_string(path)?;
    let malformed = |line: usize, message: String| WorkloadError::MalformedLog { line, message };

    let mut base: Vec<(VectorId, Vec<f32>)> = Vec::new();
    let mut query_pool: Vec<Vec<f32>> = Vec::new();
    let mut batches: Vec<WorkloadBatch> = Vec::new();
    let mut current: Option<(usize, WorkloadBatch)> = None;
    let mut last_batch: Option<usize> = None;
    let mut dimension = 0usize;

    // phase tracking: 0 = deletes, 1 = inserts, 2 = queries
    let mut phase = 0u8;
    let mut live: HashMap<VectorId, bool> = HashMap::new();

    let finish =
        |current: &mut Option<(usize, WorkloadBatch)>, batches: &mut Vec<WorkloadBatch>| {
            if let Some((index, batch)) = current.take() {
                if index > 0 {
                    batches.push(batch);
                }
            }
        };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let mut parts = raw.split_whitespace();
        let tag = parts.next().unwrap();
        match tag {
            "B" => {
                let index: usize = parts
                    .next()
                    .ok_or_else(|| malformed(line, "missing batch index".into()))?
                    .parse()
                    .map_err(|e| malformed(line, format!("bad batch index: {e}")))?;
                if let Some(prev) = last_batch {
                    if index <= prev {
                        return Err(malformed(
                            line,
                            format!("batch {index} does not increase past {prev}"),
                        ));
                    }
                }
                if last_batch.is_none() && index != 0 && !base.is_empty() {
                    return Err(malformed(line, "base section must be batch 0".into()));
                }
                finish(&mut current, &mut batches);
                last_batch = Some(index);
                phase = 0;
                current = Some((
                    index,
                    WorkloadBatch {
                        deletes: Vec::new(),
                        inserts: Vec::new(),
                        queries: Vec::new(),
                    },
                ));
            }
            "I" => {
                let (index, batch) = current
                    .as_mut()
                    .ok_or_else(|| malformed(line, "op before any batch marker".into()))?;
                let id: u64 = parts
                    .next()
                    .ok_or_else(|| malformed(line, "missing id".into()))?
                    .parse()
                    .map_err(|e| malformed(line, format!("bad id: {e}")))?;
                let v = parse_components(&mut parts, line)?;
                if dimension == 0 {
                    dimension = v.len();
                } else if v.len() != dimension {
                    return Err(malformed(
                        line,
                        format!("dimension {} != {}", v.len(), dimension),
                    ));
                }
                if live.insert(VectorId(id), true).is_some() {
                    return Err(malformed(line, format!("id {id} inserted twice")));
                }
                if *index == 0 {
                    base.push((VectorId(id), v));
                } else {
                    if phase > 1 {
                        return Err(malformed(line, "insert after queries in batch".into()));
                    }
                    phase = 1;
                    batch.inserts.push((VectorId(id), v));
                }
            }
            "D" => {
                let (index, batch) = current
                    .as_mut()
                    .ok_or_else(|| malformed(line, "op before any batch marker".into()))?;
                if *index == 0 {
                    return Err(malformed(line, "delete in base section".into()));
                }
                if phase > 0 {
                    return Err(malformed(line, "delete after inserts/queries".into()));
                }
                let id: u64 = parts
                    .next()
                    .ok_or_else(|| malformed(line, "missing id".into()))?
                    .parse()
                    .map_err(|e| malformed(line, format!("bad id: {e}")))?;
                let id = VectorId(id);
                match live.get_mut(&id) {
                    Some(alive @ true) => *alive = false,
                    _ => return Err(WorkloadError::DanglingDeleteReference { line, id }),
                }
                batch.deletes.push(id);
            }
            "Q" => {
                let (index, batch) = current
                    .as_mut()
                    .ok_or_else(|| malformed(line, "op before any batch marker".into()))?;
                if *index == 0 {
                    return Err(malformed(line, "query in base section".into()));
                }
                phase = 2;
                let qid: usize = parts
                    .next()
                    .ok_or_else(|| malformed(line, "missing qid".into()))?
                    .parse()
                    .map_err(|e| malformed(line, format!("bad qid: {e}")))?;
                let v = parse_components(&mut parts, line)?;
                if qid == query_pool.len() {
                    query_pool.push(v);
                } else if qid < query_pool.len() {
                    if query_pool[qid] != v {
                        return Err(malformed(
                            line,
                            format!("qid {qid} repeated with a different vector"),
                        ));
                    }
                } else {
                    return Err(malformed(line, format!("qid {qid} skips ahead")));
                }
                batch.queries.push(qid);
            }
            other => return Err(malformed(line, format!("unknown op tag {other:?}"))),
        }
    }
    finish(&mut current, &mut batches);

    Ok(Workload {
        dimension,
        base,
        query_pool,
        batches,
    })
}

fn parse_components<'a>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<Vec<f32>, WorkloadError> {
    let v: Result<Vec<f32>, _> = parts.map(str::parse).collect();
    v.map_err(|e| WorkloadError::MalformedLog {
        line,
        message: format!("bad component: {e}"),
    })
}
