//! Undirected weighted graphs with optional node attributes and labels,
//! plus the matrices derived from the adjacency: degree, Laplacian,
//! Markov (random-walk) and edge-cost matrices.
//!
//! Graphs are stored as dense symmetric adjacency matrices. All target
//! datasets are desk scale (n up to a few thousand), so dense storage keeps
//! the numerics simple and predictable.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("edge ({i}, {j}) has nonpositive weight {weight}")]
    NonPositiveWeight { i: usize, j: usize, weight: f64 },
    #[error("attribute matrix has {rows} rows, expected {n}")]
    AttributeRowMismatch { rows: usize, n: usize },
    #[error("label vector has length {len}, expected {n}")]
    LabelLengthMismatch { len: usize, n: usize },
    #[error("graph must have at least one node")]
    Empty,
    #[error("node {0} has zero degree and the isolated-node fallback is disabled")]
    ZeroDegree(usize),
}

/// How `markov` treats nodes with zero degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolatedNodePolicy {
    /// Give the node a uniform transition row (1/n each) so that the Markov
    /// matrix stays row-stochastic. This is the default: real web graphs
    /// contain isolated pages after symmetrization.
    #[default]
    UniformRow,
    /// Fail with [`GraphError::ZeroDegree`].
    Fail,
}

/// Undirected weighted graph with optional per-node attribute vectors and
/// ground-truth class labels.
///
/// Invariants maintained by construction:
/// - the adjacency matrix is symmetric with a zero diagonal,
/// - every stored weight is strictly positive (absence of edge == 0.0),
/// - attribute and label lengths match the node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<f64>,
    attributes: Option<Array2<f64>>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Build a graph from an edge list over nodes `0..n`.
    ///
    /// Directed or duplicate input edges collapse to a single undirected edge
    /// carrying the maximum of the supplied weights; self-loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut adjacency = Array2::<f64>::zeros((n, n));
        for &(i, j, w) in edges {
            if i >= n {
                return Err(GraphError::NodeOutOfRange { index: i, n });
            }
            if j >= n {
                return Err(GraphError::NodeOutOfRange { index: j, n });
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight { i, j, weight: w });
            }
            if i == j {
                continue;
            }
            let cur = adjacency[[i, j]];
            if w > cur {
                adjacency[[i, j]] = w;
                adjacency[[j, i]] = w;
            }
        }
        Ok(Self {
            adjacency,
            attributes: None,
            labels: None,
        })
    }

    /// Attach an `n x d` attribute matrix.
    pub fn with_attributes(mut self, attributes: Array2<f64>) -> Result<Self, GraphError> {
        let n = self.node_count();
        if attributes.nrows() != n {
            return Err(GraphError::AttributeRowMismatch {
                rows: attributes.nrows(),
                n,
            });
        }
        self.attributes = Some(attributes);
        Ok(self)
    }

    /// Attach ground-truth class labels, one per node.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, GraphError> {
        let n = self.node_count();
        if labels.len() != n {
            return Err(GraphError::LabelLengthMismatch {
                len: labels.len(),
                n,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Number of undirected edges (unordered pairs with positive weight).
    pub fn edge_count(&self) -> usize {
        let n = self.node_count();
        let mut m = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[[i, j]] > 0.0 {
                    m += 1;
                }
            }
        }
        m
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn attributes(&self) -> Option<&Array2<f64>> {
        self.attributes.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct ground-truth classes, if labels are present.
    pub fn class_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|labels| {
            let mut seen: Vec<usize> = labels.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        })
    }

    pub fn degrees(&self) -> Array1<f64> {
        degree_vector(&self.adjacency)
    }
}

/// Node degrees: row sums of the adjacency matrix.
pub fn degree_vector(adjacency: &Array2<f64>) -> Array1<f64> {
    adjacency.sum_axis(ndarray::Axis(1))
}

/// Diagonal degree matrix `D = diag(A * 1)`.
pub fn degree_matrix(adjacency: &Array2<f64>) -> Array2<f64> {
    Array2::from_diag(&degree_vector(adjacency))
}

/// Unnormalized Laplacian `L = D - A`.
pub fn laplacian(adjacency: &Array2<f64>) -> Array2<f64> {
    let mut l = -adjacency.clone();
    let degrees = degree_vector(adjacency);
    for (i, d) in degrees.iter().enumerate() {
        l[[i, i]] += d;
    }
    l
}

/// Markov (random-walk) matrix `P = D^{-1} A`.
///
/// Every row of the result sums to one. Zero-degree rows are handled
/// according to `policy`.
pub fn markov(
    adjacency: &Array2<f64>,
    policy: IsolatedNodePolicy,
) -> Result<Array2<f64>, GraphError> {
    let n = adjacency.nrows();
    let degrees = degree_vector(adjacency);
    let mut p = adjacency.clone();
    for (i, &d) in degrees.iter().enumerate() {
        if d > 0.0 {
            let mut row = p.row_mut(i);
            row.mapv_inplace(|a| a / d);
        } else {
            match policy {
                IsolatedNodePolicy::UniformRow => {
                    p.row_mut(i).fill(1.0 / n as f64);
                }
                IsolatedNodePolicy::Fail => return Err(GraphError::ZeroDegree(i)),
            }
        }
    }
    Ok(p)
}

/// Edge-cost matrix with `c_ij = 1 / a_ij` on edges.
///
/// Non-edge entries (including the diagonal) carry `f64::INFINITY` as a
/// "no cost" sentinel. Downstream consumers only read costs where an edge
/// exists, so the sentinel never enters any computation.
pub fn cost_matrix(adjacency: &Array2<f64>) -> Array2<f64> {
    adjacency.mapv(|a| if a > 0.0 { 1.0 / a } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn single_undirected_edge() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.adjacency(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn symmetrization_is_idempotent() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(g.adjacency(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn reciprocal_edges_take_max_weight() {
        let g = Graph::from_edges(3, &[(0, 1, 2.0), (1, 0, 5.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(g.adjacency()[[0, 1]], 5.0);
        assert_eq!(g.adjacency()[[1, 0]], 5.0);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn self_loops_are_dropped() {
        let g = Graph::from_edges(2, &[(0, 0, 3.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(g.adjacency()[[0, 0]], 0.0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = Graph::from_edges(2, &[(0, 2, 1.0)]).unwrap_err();
        assert!(matches!(err, GraphError::NodeOutOfRange { index: 2, n: 2 }));
    }

    #[test]
    fn nonpositive_weight_rejected() {
        assert!(Graph::from_edges(2, &[(0, 1, 0.0)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 1, -1.0)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 1, f64::NAN)]).is_err());
    }

    #[test]
    fn attribute_row_count_must_match() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let err = g.with_attributes(Array2::zeros((3, 4))).unwrap_err();
        assert!(matches!(
            err,
            GraphError::AttributeRowMismatch { rows: 3, n: 2 }
        ));
    }

    #[test]
    fn empty_graph_rejected() {
        assert!(matches!(Graph::from_edges(0, &[]), Err(GraphError::Empty)));
    }

    #[test]
    fn derived_matrices_on_single_edge() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        assert_eq!(degree_matrix(&a), array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(laplacian(&a), array![[1.0, -1.0], [-1.0, 1.0]]);
        assert_eq!(
            markov(&a, IsolatedNodePolicy::Fail).unwrap(),
            array![[0.0, 1.0], [1.0, 0.0]]
        );
    }

    #[test]
    fn cost_matrix_inverts_weights() {
        let a = array![[0.0, 2.0], [2.0, 0.0]];
        let c = cost_matrix(&a);
        assert_eq!(c[[0, 1]], 0.5);
        assert_eq!(c[[1, 0]], 0.5);
        assert!(c[[0, 0]].is_infinite());
    }

    #[test]
    fn path_graph_degrees_and_markov_rows() {
        // 0 - 1 - 2 with unit weights.
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let d = g.degrees();
        assert_eq!(d, array![1.0, 2.0, 1.0]);
        let p = markov(g.adjacency(), IsolatedNodePolicy::Fail).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(p.row(i).sum(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(p[[1, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[[1, 2]], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn markov_isolated_node_policies() {
        // Node 2 is isolated.
        let g = Graph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let p = markov(g.adjacency(), IsolatedNodePolicy::UniformRow).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(p[[2, j]], 1.0 / 3.0, epsilon = 1e-15);
        }
        let err = markov(g.adjacency(), IsolatedNodePolicy::Fail).unwrap_err();
        assert!(matches!(err, GraphError::ZeroDegree(2)));
    }

    #[test]
    fn class_count_from_labels() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0)])
            .unwrap()
            .with_labels(vec![2, 0, 2, 7])
            .unwrap();
        assert_eq!(g.class_count(), Some(3));
    }

    fn arbitrary_edges(n: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
        proptest::collection::vec((0..n, 0..n, 0.1f64..10.0), 0..(n * 2))
    }

    proptest! {
        #[test]
        fn construction_invariants(edges in arbitrary_edges(8)) {
            let g = Graph::from_edges(8, &edges).unwrap();
            let a = g.adjacency();
            for i in 0..8 {
                prop_assert_eq!(a[[i, i]], 0.0);
                for j in 0..8 {
                    prop_assert_eq!(a[[i, j]], a[[j, i]]);
                    prop_assert!(a[[i, j]] >= 0.0);
                }
            }
        }

        #[test]
        fn laplacian_annihilates_constants(edges in arbitrary_edges(8)) {
            let g = Graph::from_edges(8, &edges).unwrap();
            let l = laplacian(g.adjacency());
            let ones = Array1::ones(8);
            let r = l.dot(&ones);
            for v in r.iter() {
                prop_assert!(v.abs() <= 1e-12);
            }
        }

        #[test]
        fn markov_rows_are_stochastic(edges in arbitrary_edges(8)) {
            let g = Graph::from_edges(8, &edges).unwrap();
            let p = markov(g.adjacency(), IsolatedNodePolicy::UniformRow).unwrap();
            for i in 0..8 {
                prop_assert!((p.row(i).sum() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn degree_matrix_matches_row_sums(edges in arbitrary_edges(8)) {
            let g = Graph::from_edges(8, &edges).unwrap();
            let d = degree_matrix(g.adjacency());
            for i in 0..8 {
                let row_sum: f64 = g.adjacency().row(i).sum();
                prop_assert!((d[[i, i]] - row_sum).abs() <= 1e-12);
            }
        }
    }
}
