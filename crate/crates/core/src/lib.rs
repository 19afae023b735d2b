//! Proximity measures on attributed networks and kernel-based community detection.
//!
//! The crate combines three ingredients:
//!
//! 1. **Attribute fusion** — pairwise attribute similarities (matching
//!    coefficient, cosine, extended Jaccard, Manhattan, Euclidean) blended
//!    into the adjacency matrix as `a' = beta * a + (1 - beta) * s`.
//! 2. **Proximity measures** — Communicability, Heat, PageRank, Free Energy
//!    and Sigmoid Corrected Commute-Time kernels computed from any (plain or
//!    fused) adjacency matrix.
//! 3. **Spectral community detection** — Shi–Malik normalized spectral
//!    partitioning of a kernel matrix, scored against ground truth with the
//!    Adjusted Rand Index, plus rank aggregation across experiment grids.
//!
//! Matrices are dense `ndarray` arrays; factorizations go through LAPACK.
//! Everything is deterministic for a fixed seed and build configuration.

// Link the system BLAS used by `ndarray::dot` and `ndarray-linalg`.
use blas_src as _;

pub mod clustering;
pub mod datasets;
pub mod evaluation;
pub mod graph;
pub mod kernels;
pub mod numerics;
pub mod similarity;

pub use clustering::{kmeans, spectral_partition, Partition};
pub use evaluation::{adjusted_rand_index, rand_index, rank_options, RankSummary, ScoreTable};
pub use graph::Graph;
pub use kernels::{PreparedKernel, ProximityMeasure};
pub use similarity::{fuse, similarity_matrix, SimilarityMeasure};
