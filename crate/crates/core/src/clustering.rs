//! Community detection: k-means on point rows and Shi–Malik spectral
//! partitioning of a kernel/affinity matrix.
//!
//! Both entry points are deterministic given their seed. k-means restarts
//! run concurrently with seeds derived from (seed, restart index), and the
//! reduction picks the lowest inertia with the lowest restart index breaking
//! ties, so the result does not depend on scheduling.

use crate::numerics::{self, NumericsError};
use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("cluster count must be at least {min}, got {k}")]
    TooFewClusters { k: usize, min: usize },
    #[error("input contains no points")]
    EmptyInput,
    #[error("at least one restart is required")]
    NoRestarts,
    #[error("affinity matrix is not symmetric (max |k_ij - k_ji| = {deviation:.3e})")]
    AsymmetricAffinity { deviation: f64 },
    #[error("node {0} has zero affinity to the rest of the graph")]
    ZeroAffinityRow(usize),
    #[error("total affinity is zero")]
    ZeroTotalAffinity,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Assignment of each node to one of `k` clusters.
///
/// Cluster ids live in `0..k`; in degenerate outcomes some ids may be unused,
/// but `k` always records the requested count. Agreement between partitions
/// is label-permutation-insensitive and lives in [`crate::evaluation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Self {
        debug_assert!(assignment.iter().all(|&c| c < k));
        Self { assignment, k }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 of the combined value disperses nearby seeds.
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn squared_distance(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, the rest sampled proportionally
/// to squared distance from the nearest chosen center.
fn kmeans_pp_centers(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, p) = points.dim();
    let mut centers = Array2::<f64>::zeros((k, p));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));

    let mut nearest_sq: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), centers.row(0)))
        .collect();

    for c in 1..k {
        let total: f64 = nearest_sq.iter().sum();
        let choice = if total > 0.0 {
            let weighted =
                WeightedIndex::new(nearest_sq.iter().copied()).expect("positive total weight");
            weighted.sample(rng)
        } else {
            // All points coincide with some center; any pick is as good.
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(choice));
        for (i, nearest) in nearest_sq.iter_mut().enumerate() {
            let d = squared_distance(points.row(i), centers.row(c));
            if d < *nearest {
                *nearest = d;
            }
        }
    }
    centers
}

/// Assign each point to its nearest center; ties go to the lowest cluster id.
fn assign_points(points: &Array2<f64>, centers: &Array2<f64>, out: &mut [usize]) {
    let k = centers.nrows();
    for (i, slot) in out.iter_mut().enumerate() {
        let mut best = 0usize;
        let mut best_d = squared_distance(points.row(i), centers.row(0));
        for c in 1..k {
            let d = squared_distance(points.row(i), centers.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *slot = best;
    }
}

fn inertia(points: &Array2<f64>, centers: &Array2<f64>, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(points.row(i), centers.row(c)))
        .sum()
}

fn lloyd(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let (n, p) = points.dim();
    let mut centers = kmeans_pp_centers(points, k, rng);
    let mut assignment = vec![0usize; n];
    assign_points(points, &centers, &mut assignment);

    #[cfg(debug_assertions)]
    let mut previous_inertia = f64::INFINITY;

    for _ in 0..MAX_LLOYD_ITERATIONS {
        // Update step: centroids of the current assignment; empty clusters
        // keep their previous center.
        let mut sums = Array2::<f64>::zeros((k, p));
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            let mut row = sums.row_mut(c);
            row += &points.row(i);
            counts[c] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                centers.row_mut(c).assign(&sums.row(c).mapv(|v| v * inv));
            }
        }

        let mut next = vec![0usize; n];
        assign_points(points, &centers, &mut next);

        #[cfg(debug_assertions)]
        {
            let current = inertia(points, &centers, &next);
            debug_assert!(
                current <= previous_inertia + 1e-9 * previous_inertia.max(1.0),
                "k-means inertia increased: {previous_inertia} -> {current}"
            );
            previous_inertia = current;
        }

        if next == assignment {
            break;
        }
        assignment = next;
    }

    let score = inertia(points, &centers, &assignment);
    (assignment, score)
}

/// Lloyd's k-means with k-means++ seeding, best of `restarts` runs.
///
/// Deterministic for fixed `(seed, restarts)`: each restart derives its own
/// RNG from the pair, and the best inertia (lowest restart index on ties)
/// wins regardless of execution order.
pub fn kmeans(
    points: &Array2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Partition, ClusteringError> {
    let n = points.nrows();
    if n == 0 {
        return Err(ClusteringError::EmptyInput);
    }
    if k == 0 {
        return Err(ClusteringError::TooFewClusters { k, min: 1 });
    }
    if k > n {
        return Err(ClusteringError::TooManyClusters { k, n });
    }
    if restarts == 0 {
        return Err(ClusteringError::NoRestarts);
    }

    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            let (assignment, score) = lloyd(points, k, &mut rng);
            (score, r, assignment)
        })
        .reduce_with(|a, b| if (b.0, b.1) < (a.0, a.1) { b } else { a })
        .expect("at least one restart");

    Ok(Partition::new(best.2, k))
}

/// Shi–Malik spectral partitioning of a symmetric kernel matrix.
///
/// The affinity is the kernel with any negative entries lifted by a global
/// shift of the minimum (a shift preserves the eigenstructure of a centered
/// kernel better than clipping) and the diagonal zeroed. The generalized
/// problem `L_W v = lambda D_W v` supplies the `k` smallest eigenvectors;
/// their rows, one point per node, are clustered with k-means. Eigenvectors
/// are normalized to unit length with a fixed sign convention, which makes
/// the outcome invariant to positive scaling of the kernel.
pub fn spectral_partition(
    kernel: &Array2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Partition, ClusteringError> {
    let n = kernel.nrows();
    if n == 0 {
        return Err(ClusteringError::EmptyInput);
    }
    if k < 2 {
        return Err(ClusteringError::TooFewClusters { k, min: 2 });
    }
    if k > n {
        return Err(ClusteringError::TooManyClusters { k, n });
    }
    let deviation = numerics::max_asymmetry(kernel);
    if deviation > 1e-9 {
        return Err(ClusteringError::AsymmetricAffinity { deviation });
    }

    let affinity = build_affinity(kernel);
    let degrees = affinity.sum_axis(ndarray::Axis(1));
    for (i, &d) in degrees.iter().enumerate() {
        if d <= 0.0 {
            return Err(ClusteringError::ZeroAffinityRow(i));
        }
    }
    if degrees.sum() <= 0.0 {
        return Err(ClusteringError::ZeroTotalAffinity);
    }

    let mut lap = -affinity;
    for (i, &d) in degrees.iter().enumerate() {
        lap[[i, i]] += d;
    }

    let (_, mut vectors) = numerics::smallest_eigenpairs(&lap, k, Some(&degrees))?;
    normalize_columns(&mut vectors);

    kmeans(&vectors, k, seed, restarts)
}

/// Negative-entry shift of the global minimum, applied only when needed.
/// Returns the amount by which entries were lifted.
pub fn affinity_shift(kernel: &Array2<f64>) -> f64 {
    let min = kernel.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        -min
    } else {
        0.0
    }
}

fn build_affinity(kernel: &Array2<f64>) -> Array2<f64> {
    let shift = affinity_shift(kernel);
    let mut w = if shift > 0.0 {
        kernel.mapv(|v| v + shift)
    } else {
        kernel.clone()
    };
    for i in 0..w.nrows() {
        w[[i, i]] = 0.0;
    }
    w
}

/// Unit 2-norm per column plus a sign convention (the entry of largest
/// magnitude is made positive, lowest index breaking ties). Fixes the scale
/// and sign ambiguity of eigenvectors so downstream k-means sees the same
/// embedding no matter how the kernel was scaled.
fn normalize_columns(vectors: &mut Array2<f64>) {
    let (n, k) = vectors.dim();
    for j in 0..k {
        let mut col = vectors.column_mut(j);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|v| v / norm);
        }
        let mut pivot = 0usize;
        let mut pivot_abs = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > pivot_abs {
                pivot_abs = v.abs();
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
        let _ = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs() -> Array2<f64> {
        // Two tight 2-D blobs far apart.
        array![
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [10.0, 10.0],
            [10.1, 10.0],
            [10.0, 10.1]
        ]
    }

    fn same_split(assignment: &[usize], groups: &[&[usize]]) -> bool {
        groups.iter().all(|group| {
            let first = assignment[group[0]];
            group.iter().all(|&i| assignment[i] == first)
        }) && assignment[groups[0][0]] != assignment[groups[1][0]]
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let points = blobs();
        let partition = kmeans(&points, 2, 42, 10).unwrap();
        assert!(same_split(
            partition.assignment(),
            &[&[0, 1, 2], &[3, 4, 5]]
        ));
    }

    #[test]
    fn kmeans_k_equals_n_gives_zero_inertia() {
        let points = array![[0.0], [1.0], [2.0], [3.0]];
        let partition = kmeans(&points, 4, 7, 5).unwrap();
        let mut ids: Vec<usize> = partition.assignment().to_vec();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 4, "each point should sit alone");
    }

    #[test]
    fn kmeans_identical_points_do_not_crash() {
        let points = Array2::<f64>::ones((5, 3));
        let partition = kmeans(&points, 2, 1, 3).unwrap();
        assert_eq!(partition.len(), 5);
    }

    #[test]
    fn kmeans_error_paths() {
        let points = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            kmeans(&points, 4, 0, 1),
            Err(ClusteringError::TooManyClusters { k: 4, n: 3 })
        ));
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            kmeans(&empty, 1, 0, 1),
            Err(ClusteringError::EmptyInput)
        ));
        assert!(matches!(
            kmeans(&points, 2, 0, 0),
            Err(ClusteringError::NoRestarts)
        ));
    }

    #[test]
    fn kmeans_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut points = Array2::<f64>::zeros((40, 3));
        for v in points.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let a = kmeans(&points, 4, 123, 8).unwrap();
        let b = kmeans(&points, 4, 123, 8).unwrap();
        assert_eq!(a.assignment(), b.assignment());
    }

    #[test]
    fn spectral_recovers_block_diagonal_affinity() {
        let mut kernel = Array2::<f64>::zeros((6, 6));
        for i in 0..3 {
            for j in 0..3 {
                kernel[[i, j]] = 1.0;
                kernel[[i + 3, j + 3]] = 1.0;
            }
        }
        let partition = spectral_partition(&kernel, 2, 5, 10).unwrap();
        assert!(same_split(
            partition.assignment(),
            &[&[0, 1, 2], &[3, 4, 5]]
        ));
    }

    #[test]
    fn spectral_is_invariant_to_positive_scaling() {
        // Near-block-diagonal affinity with weak cross links.
        let mut kernel = Array2::<f64>::zeros((8, 8));
        for i in 0..8 {
            for j in 0..8 {
                let same = (i < 4) == (j < 4);
                kernel[[i, j]] = if same { 1.0 } else { 0.05 };
            }
        }
        let base = spectral_partition(&kernel, 2, 11, 10).unwrap();
        let scaled_kernel = kernel.mapv(|v| 10.0 * v);
        let scaled = spectral_partition(&scaled_kernel, 2, 11, 10).unwrap();
        assert_eq!(base.assignment(), scaled.assignment());
    }

    #[test]
    fn spectral_handles_negative_entries_via_shift() {
        // A centered kernel (rows sum to zero) has negative entries.
        let kernel = array![
            [0.5, 0.3, -0.4, -0.4],
            [0.3, 0.5, -0.4, -0.4],
            [-0.4, -0.4, 0.5, 0.3],
            [-0.4, -0.4, 0.3, 0.5]
        ];
        assert!(affinity_shift(&kernel) > 0.0);
        let partition = spectral_partition(&kernel, 2, 3, 10).unwrap();
        assert!(same_split(partition.assignment(), &[&[0, 1], &[2, 3]]));
    }

    #[test]
    fn spectral_uniform_cycle_returns_valid_partition() {
        // 4-cycle with uniform affinity: any balanced cut is as good as any
        // other; the contract is a valid partition, not a particular one.
        let kernel = array![
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0]
        ];
        let partition = spectral_partition(&kernel, 2, 17, 10).unwrap();
        assert_eq!(partition.len(), 4);
        assert!(partition.assignment().iter().all(|&c| c < 2));
    }

    #[test]
    fn spectral_error_paths() {
        let kernel = array![[1.0, 0.2], [0.3, 1.0]];
        assert!(matches!(
            spectral_partition(&kernel, 2, 0, 1),
            Err(ClusteringError::AsymmetricAffinity { .. })
        ));
        let identity = Array2::<f64>::eye(3);
        // Diagonal zeroing leaves no affinity at all.
        assert!(matches!(
            spectral_partition(&identity, 2, 0, 1),
            Err(ClusteringError::ZeroAffinityRow(_))
        ));
        let ok = Array2::<f64>::ones((3, 3));
        assert!(matches!(
            spectral_partition(&ok, 1, 0, 1),
            Err(ClusteringError::TooFewClusters { .. })
        ));
    }

    #[test]
    fn spectral_is_deterministic() {
        let mut kernel = Array2::<f64>::zeros((10, 10));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for i in 0..10 {
            for j in i..10 {
                let v = rng.random_range(0.0..1.0);
                kernel[[i, j]] = v;
                kernel[[j, i]] = v;
            }
        }
        let a = spectral_partition(&kernel, 3, 55, 10).unwrap();
        let b = spectral_partition(&kernel, 3, 55, 10).unwrap();
        assert_eq!(a.assignment(), b.assignment());
    }
}
