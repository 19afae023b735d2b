//! Attribute similarity measures and the fusion of attribute similarity into
//! the adjacency structure.
//!
//! Five pairwise measures are implemented: matching coefficient, cosine,
//! extended Jaccard, Manhattan and Euclidean. `similarity_matrix` evaluates
//! one of them over all node pairs; `fuse` blends the result into the
//! adjacency as `a'_ij = beta * a_ij + (1 - beta) * s_ij`.

use ndarray::{Array2, ArrayView1};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("attribute vectors must have at least one coordinate")]
    EmptyVectors,
    #[error("attribute vectors have mismatched lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("beta must lie in [0, 1], got {0}")]
    BetaOutOfRange(f64),
    #[error("adjacency is {a_rows}x{a_cols} but similarity matrix is {s_rows}x{s_cols}")]
    ShapeMismatch {
        a_rows: usize,
        a_cols: usize,
        s_rows: usize,
        s_cols: usize,
    },
    #[error("unknown similarity measure: {0:?}")]
    UnknownMeasure(String),
}

/// The attribute similarity measures.
///
/// Enum order follows the conventional table layout (MC, CS, JS, MS, ES).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SimilarityMeasure {
    MatchingCoefficient,
    Cosine,
    ExtendedJaccard,
    Manhattan,
    Euclidean,
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 5] = [
        SimilarityMeasure::MatchingCoefficient,
        SimilarityMeasure::Cosine,
        SimilarityMeasure::ExtendedJaccard,
        SimilarityMeasure::Manhattan,
        SimilarityMeasure::Euclidean,
    ];

    /// Two-letter code used in tables and CSV output.
    pub fn code(&self) -> &'static str {
        match self {
            SimilarityMeasure::MatchingCoefficient => "MC",
            SimilarityMeasure::Cosine => "CS",
            SimilarityMeasure::ExtendedJaccard => "JS",
            SimilarityMeasure::Manhattan => "MS",
            SimilarityMeasure::Euclidean => "ES",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SimilarityMeasure::MatchingCoefficient => "matching",
            SimilarityMeasure::Cosine => "cosine",
            SimilarityMeasure::ExtendedJaccard => "jaccard",
            SimilarityMeasure::Manhattan => "manhattan",
            SimilarityMeasure::Euclidean => "euclidean",
        }
    }

    /// Evaluate this measure on a pair of attribute vectors.
    pub fn apply(
        &self,
        a: ArrayView1<'_, f64>,
        b: ArrayView1<'_, f64>,
    ) -> Result<f64, SimilarityError> {
        match self {
            SimilarityMeasure::MatchingCoefficient => matching_coefficient(a, b),
            SimilarityMeasure::Cosine => cosine_similarity(a, b),
            SimilarityMeasure::ExtendedJaccard => extended_jaccard(a, b),
            SimilarityMeasure::Manhattan => manhattan_similarity(a, b),
            SimilarityMeasure::Euclidean => euclidean_similarity(a, b),
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SimilarityMeasure {
    type Err = SimilarityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mc" | "matching" | "matching-coefficient" => {
                Ok(SimilarityMeasure::MatchingCoefficient)
            }
            "cs" | "cosine" => Ok(SimilarityMeasure::Cosine),
            "js" | "jaccard" | "extended-jaccard" => Ok(SimilarityMeasure::ExtendedJaccard),
            "ms" | "manhattan" => Ok(SimilarityMeasure::Manhattan),
            "es" | "euclidean" => Ok(SimilarityMeasure::Euclidean),
            _ => Err(SimilarityError::UnknownMeasure(s.to_string())),
        }
    }
}

fn check_pair(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<usize, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(SimilarityError::EmptyVectors);
    }
    Ok(a.len())
}

/// Fraction of coordinates on which the two vectors agree exactly.
pub fn matching_coefficient(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<f64, SimilarityError> {
    let d = check_pair(a, b)?;
    let agreements = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count();
    Ok(agreements as f64 / d as f64)
}

/// Cosine similarity `a . b / (||a|| ||b||)`.
///
/// An all-zero vector makes the ratio 0/0; by convention such a vector has
/// similarity 0 against everything (an empty document shares nothing).
pub fn cosine_similarity(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<f64, SimilarityError> {
    check_pair(a, b)?;
    let dot = a.dot(&b);
    let na2 = a.dot(&a);
    let nb2 = b.dot(&b);
    if na2 == 0.0 || nb2 == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na2 * nb2).sqrt())
}

/// Extended Jaccard similarity `a . b / (||a||^2 + ||b||^2 - a . b)`.
///
/// Coincides with the set Jaccard index on binary vectors. Zero vectors
/// follow the same convention as cosine similarity.
pub fn extended_jaccard(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<f64, SimilarityError> {
    check_pair(a, b)?;
    let dot = a.dot(&b);
    let denom = a.dot(&a) + b.dot(&b) - dot;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / denom)
}

/// Manhattan similarity `1 / (1 + ||a - b||_1)`.
pub fn manhattan_similarity(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<f64, SimilarityError> {
    check_pair(a, b)?;
    let l1: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
    Ok(1.0 / (1.0 + l1))
}

/// Euclidean similarity `1 / (1 + ||a - b||_2)`.
pub fn euclidean_similarity(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<f64, SimilarityError> {
    check_pair(a, b)?;
    let l2sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(1.0 / (1.0 + l2sq.sqrt()))
}

/// Pairwise similarity matrix `S[i][j] = measure(f_i, f_j)`.
///
/// Binary attribute matrices (every entry 0.0 or 1.0) take a sparse path:
/// per-node index sets reduce each pair to an intersection count, which cuts
/// the cost by roughly the attribute sparsity squared. The output is
/// identical to the naive pairwise evaluation because every quantity involved
/// (dot products, norms, L1 distances) is an exactly representable integer on
/// binary data.
pub fn similarity_matrix(
    attributes: &Array2<f64>,
    measure: SimilarityMeasure,
) -> Result<Array2<f64>, SimilarityError> {
    let (n, d) = attributes.dim();
    if d == 0 {
        return Err(SimilarityError::EmptyVectors);
    }
    let is_binary = attributes.iter().all(|&v| v == 0.0 || v == 1.0);
    let mut s = Array2::<f64>::zeros((n, n));
    if is_binary {
        let supports: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                attributes
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v == 1.0)
                    .map(|(idx, _)| idx as u32)
                    .collect()
            })
            .collect();
        for i in 0..n {
            for j in i..n {
                let inter = sorted_intersection_count(&supports[i], &supports[j]);
                let value =
                    binary_pair_similarity(measure, d, supports[i].len(), supports[j].len(), inter);
                s[[i, j]] = value;
                s[[j, i]] = value;
            }
        }
    } else {
        for i in 0..n {
            for j in i..n {
                let value = measure.apply(attributes.row(i), attributes.row(j))?;
                s[[i, j]] = value;
                s[[j, i]] = value;
            }
        }
    }
    Ok(s)
}

fn sorted_intersection_count(a: &[u32], b: &[u32]) -> usize {
    let mut count = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Similarity of a binary pair from its sufficient statistics: dimension,
/// support sizes and intersection size. Mirrors the dense formulas exactly.
fn binary_pair_similarity(
    measure: SimilarityMeasure,
    d: usize,
    support_a: usize,
    support_b: usize,
    inter: usize,
) -> f64 {
    let dot = inter as f64;
    let na2 = support_a as f64;
    let nb2 = support_b as f64;
    match measure {
        SimilarityMeasure::MatchingCoefficient => {
            // Agreements: shared ones plus shared zeros. Sum before
            // subtracting; the symmetric difference never exceeds d.
            let agreements = (d + 2 * inter) - support_a - support_b;
            agreements as f64 / d as f64
        }
        SimilarityMeasure::Cosine => {
            if na2 == 0.0 || nb2 == 0.0 {
                0.0
            } else {
                dot / (na2 * nb2).sqrt()
            }
        }
        SimilarityMeasure::ExtendedJaccard => {
            let denom = na2 + nb2 - dot;
            if denom == 0.0 {
                0.0
            } else {
                dot / denom
            }
        }
        SimilarityMeasure::Manhattan => {
            let l1 = (support_a + support_b - 2 * inter) as f64;
            1.0 / (1.0 + l1)
        }
        SimilarityMeasure::Euclidean => {
            let l2sq = (support_a + support_b - 2 * inter) as f64;
            1.0 / (1.0 + l2sq.sqrt())
        }
    }
}

/// Blend adjacency and attribute similarity: `a'_ij = beta * a_ij +
/// (1 - beta) * s_ij` over all pairs `i != j`, diagonal forced to zero.
///
/// The fusion is dense: at `beta = 0` the result describes nodes purely by
/// attribute similarity, which requires entries on non-edges too.
pub fn fuse(
    adjacency: &Array2<f64>,
    similarity: &Array2<f64>,
    beta: f64,
) -> Result<Array2<f64>, SimilarityError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(SimilarityError::BetaOutOfRange(beta));
    }
    if adjacency.dim() != similarity.dim() || adjacency.nrows() != adjacency.ncols() {
        return Err(SimilarityError::ShapeMismatch {
            a_rows: adjacency.nrows(),
            a_cols: adjacency.ncols(),
            s_rows: similarity.nrows(),
            s_cols: similarity.ncols(),
        });
    }
    let n = adjacency.nrows();
    let mut fused = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                fused[[i, j]] = beta * adjacency[[i, j]] + (1.0 - beta) * similarity[[i, j]];
            }
        }
    }
    Ok(fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matching_examples() {
        let a = array![1.0, 0.0, 1.0, 1.0];
        let b = array![1.0, 1.0, 1.0, 0.0];
        assert_eq!(matching_coefficient(a.view(), a.view()).unwrap(), 1.0);
        assert_eq!(matching_coefficient(a.view(), b.view()).unwrap(), 0.5);
        let zeros = array![0.0, 0.0];
        let ones = array![1.0, 1.0];
        assert_eq!(
            matching_coefficient(zeros.view(), ones.view()).unwrap(),
            0.0
        );
    }

    #[test]
    fn cosine_examples() {
        let a = array![1.0, 0.0];
        let b = array![0.0, 1.0];
        assert_eq!(cosine_similarity(a.view(), b.view()).unwrap(), 0.0);
        let c = array![1.0, 0.0, 1.0];
        let d = array![1.0, 1.0, 0.0];
        assert_abs_diff_eq!(
            cosine_similarity(c.view(), d.view()).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(cosine_similarity(c.view(), c.view()).unwrap(), 1.0);
    }

    #[test]
    fn jaccard_examples() {
        let a = array![1.0, 1.0, 0.0];
        let b = array![1.0, 0.0, 1.0];
        assert_abs_diff_eq!(
            extended_jaccard(a.view(), b.view()).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(extended_jaccard(a.view(), a.view()).unwrap(), 1.0);
        let c = array![1.0, 0.0, 0.0];
        let d = array![0.0, 1.0, 1.0];
        assert_eq!(extended_jaccard(c.view(), d.view()).unwrap(), 0.0);
    }

    #[test]
    fn manhattan_and_euclidean_examples() {
        let zeros = array![0.0, 0.0];
        let ones = array![1.0, 1.0];
        assert_abs_diff_eq!(
            manhattan_similarity(zeros.view(), ones.view()).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            euclidean_similarity(zeros.view(), ones.view()).unwrap(),
            1.0 / (1.0 + 2.0f64.sqrt()),
            epsilon = 1e-15
        );
        assert_eq!(manhattan_similarity(ones.view(), ones.view()).unwrap(), 1.0);
        assert_eq!(euclidean_similarity(ones.view(), ones.view()).unwrap(), 1.0);
    }

    #[test]
    fn zero_vector_policy() {
        let zero = array![0.0, 0.0];
        let other = array![1.0, 0.0];
        assert_eq!(cosine_similarity(zero.view(), other.view()).unwrap(), 0.0);
        assert_eq!(cosine_similarity(zero.view(), zero.view()).unwrap(), 0.0);
        assert_eq!(extended_jaccard(zero.view(), zero.view()).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_and_empty_are_errors() {
        let a = array![1.0];
        let b = array![1.0, 0.0];
        assert!(matching_coefficient(a.view(), b.view()).is_err());
        let e1: ndarray::Array1<f64> = array![];
        let e2: ndarray::Array1<f64> = array![];
        assert!(matches!(
            cosine_similarity(e1.view(), e2.view()),
            Err(SimilarityError::EmptyVectors)
        ));
    }

    #[test]
    fn similarity_matrix_single_nonzero_node() {
        let f = array![[1.0, 0.0]];
        let s = similarity_matrix(&f, SimilarityMeasure::Cosine).unwrap();
        assert_eq!(s, array![[1.0]]);
    }

    #[test]
    fn identical_rows_give_all_ones() {
        let f = array![[1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 0.0, 1.0]];
        for measure in SimilarityMeasure::ALL {
            let s = similarity_matrix(&f, measure).unwrap();
            for v in s.iter() {
                assert_eq!(*v, 1.0, "{measure} should be 1 on identical rows");
            }
        }
    }

    #[test]
    fn measure_codes_parse_back() {
        for measure in SimilarityMeasure::ALL {
            assert_eq!(
                measure.code().parse::<SimilarityMeasure>().unwrap(),
                measure
            );
            assert_eq!(
                measure.name().parse::<SimilarityMeasure>().unwrap(),
                measure
            );
        }
        assert!("bogus".parse::<SimilarityMeasure>().is_err());
    }

    #[test]
    fn fuse_endpoints_and_midpoint() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let s = array![[1.0, 0.5], [0.5, 1.0]];
        let at_one = fuse(&a, &s, 1.0).unwrap();
        assert_eq!(at_one, a);
        let at_zero = fuse(&a, &s, 0.0).unwrap();
        assert_eq!(at_zero[[0, 1]], 0.5);
        assert_eq!(at_zero[[0, 0]], 0.0);
        let mid = fuse(&a, &s, 0.5).unwrap();
        assert_abs_diff_eq!(mid[[0, 1]], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn fuse_rejects_bad_beta_and_shapes() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let s = array![[1.0, 0.5], [0.5, 1.0]];
        assert!(matches!(
            fuse(&a, &s, 1.5),
            Err(SimilarityError::BetaOutOfRange(_))
        ));
        let bad = Array2::<f64>::zeros((3, 3));
        assert!(matches!(
            fuse(&a, &bad, 0.5),
            Err(SimilarityError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn fuse_monotone_in_beta() {
        // a_ij > s_ij: increasing beta increases the fused weight.
        let a = array![[0.0, 2.0], [2.0, 0.0]];
        let s = array![[1.0, 0.5], [0.5, 1.0]];
        let lo = fuse(&a, &s, 0.2).unwrap()[[0, 1]];
        let hi = fuse(&a, &s, 0.8).unwrap()[[0, 1]];
        assert!(hi > lo);
        // a_ij < s_ij: the trend reverses.
        let lo = fuse(&s, &a, 0.2).unwrap()[[0, 1]];
        let hi = fuse(&s, &a, 0.8).unwrap()[[0, 1]];
        assert!(hi < lo);
    }

    fn random_binary_matrix(n: usize, d: usize, rng: &mut impl Rng) -> Array2<f64> {
        let mut f = Array2::<f64>::zeros((n, d));
        for v in f.iter_mut() {
            if rng.random_bool(0.4) {
                *v = 1.0;
            }
        }
        f
    }

    #[test]
    fn sparse_path_matches_naive_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_binary_matrix(20, 15, &mut rng);
        for measure in SimilarityMeasure::ALL {
            let s = similarity_matrix(&f, measure).unwrap();
            for i in 0..20 {
                for j in 0..20 {
                    let oracle = measure.apply(f.row(i), f.row(j)).unwrap();
                    assert_eq!(s[[i, j]], oracle, "{measure} mismatch at ({i}, {j})");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn measures_are_symmetric_and_bounded(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.random_range(1..12usize);
            let f = random_binary_matrix(2, d, &mut rng);
            for measure in SimilarityMeasure::ALL {
                let ab = measure.apply(f.row(0), f.row(1)).unwrap();
                let ba = measure.apply(f.row(1), f.row(0)).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!((0.0..=1.0).contains(&ab));
            }
        }

        #[test]
        fn fused_matrix_is_symmetric_with_zero_diagonal(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..8usize);
            let f = random_binary_matrix(n, 6, &mut rng);
            let mut a = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random_bool(0.5) {
                        a[[i, j]] = 1.0;
                        a[[j, i]] = 1.0;
                    }
                }
            }
            let beta = rng.random_range(0.0..=1.0);
            for measure in SimilarityMeasure::ALL {
                let s = similarity_matrix(&f, measure).unwrap();
                let fused = fuse(&a, &s, beta).unwrap();
                for i in 0..n {
                    prop_assert_eq!(fused[[i, i]], 0.0);
                    for j in 0..n {
                        prop_assert_eq!(fused[[i, j]], fused[[j, i]]);
                    }
                }
            }
        }
    }
}
