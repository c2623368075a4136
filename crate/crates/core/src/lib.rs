//! Incremental proximity-graph maintenance for online approximate nearest
//! neighbor search.
//!
//! The index is a directed proximity graph over a mutable vector store.
//! Queries walk the graph with a bounded best-first beam; insertions attach
//! new vertices via a diversity-pruned neighbor selection; deletions are
//! handled by one of four strategies (pure removal, tombstone masking,
//! local reconnect, global reconnect) plus a rebuild-from-scratch baseline.
//! The `workload` and `bench` modules replay delete/insert/query streams
//! against a brute-force oracle and collect recall / cost metrics.

pub mod bench;
pub mod graph;
pub mod io;
pub mod maintenance;
pub mod oracle;
pub mod rng;
pub mod search;
pub mod store;
pub mod synthetic;
pub mod workload;

pub use graph::{GraphError, GraphStats, ProximityGraph};
pub use maintenance::{DeleteStrategy, MaintainError, MaintenanceConfig};
pub use search::{Candidate, SearchError, SearchResult};
pub use store::{Metric, StoreError, VectorId, VectorStore};
