//! Proximity measures (kernels) on graphs: Communicability, Heat, PageRank,
//! Free Energy and Sigmoid Corrected Commute-Time, plus the classical
//! distance-to-kernel transform `K = -1/2 H Delta H`.
//!
//! Every measure accepts any symmetric nonnegative adjacency matrix, plain or
//! attribute-fused. [`PreparedKernel`] factors out the parameter-independent
//! work (eigendecompositions, the CCT base matrix) so that parameter grids
//! can be swept cheaply.

use crate::graph::{self, GraphError, IsolatedNodePolicy};
use crate::numerics::{self, NumericsError, SymEigen};
use ndarray::{Array1, Array2};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Entries smaller than this in absolute value are flushed to zero in kernel
/// outputs, suppressing sign noise in downstream positivity checks.
pub const NOISE_FLOOR: f64 = 1e-14;

/// Overflow guard for the communicability kernel: `alpha * ||A||_2` must stay
/// below this before exponentiation.
pub const COMM_EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("{measure} requires alpha > 0, got {alpha}")]
    AlphaNotPositive {
        measure: ProximityMeasure,
        alpha: f64,
    },
    #[error("PageRank requires 0 < alpha < 1, got {alpha}")]
    AlphaOutOfUnitInterval { alpha: f64 },
    #[error("communicability overflow: alpha * ||A||_2 = {product:.3e} exceeds {COMM_EXP_LIMIT}")]
    CommunicabilityOverflow { product: f64 },
    #[error("nodes {i} and {j} are not connected (z_ij = {value:.3e} <= 0)")]
    DisconnectedPair { i: usize, j: usize, value: f64 },
    #[error("(I - M) is singular; the graph is likely disconnected: {0}")]
    SingularStructure(String),
    #[error("corrected commute-time matrix is constant (sigma = 0)")]
    ConstantCct,
    #[error("distance matrix is not symmetric (max |d_ij - d_ji| = {deviation:.3e})")]
    AsymmetricDistance { deviation: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The five proximity measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProximityMeasure {
    Communicability,
    Heat,
    PageRank,
    FreeEnergy,
    Scct,
}

impl ProximityMeasure {
    pub const ALL: [ProximityMeasure; 5] = [
        ProximityMeasure::Communicability,
        ProximityMeasure::Heat,
        ProximityMeasure::PageRank,
        ProximityMeasure::FreeEnergy,
        ProximityMeasure::Scct,
    ];

    /// Short label used in tables (matches the conventional abbreviations).
    pub fn code(&self) -> &'static str {
        match self {
            ProximityMeasure::Communicability => "Communicability",
            ProximityMeasure::Heat => "Heat",
            ProximityMeasure::PageRank => "PR",
            ProximityMeasure::FreeEnergy => "FE",
            ProximityMeasure::Scct => "SCCT",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProximityMeasure::Communicability => "communicability",
            ProximityMeasure::Heat => "heat",
            ProximityMeasure::PageRank => "pagerank",
            ProximityMeasure::FreeEnergy => "free-energy",
            ProximityMeasure::Scct => "scct",
        }
    }

    fn require_positive_alpha(&self, alpha: f64) -> Result<(), KernelError> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(())
        } else {
            Err(KernelError::AlphaNotPositive {
                measure: *self,
                alpha,
            })
        }
    }
}

impl fmt::Display for ProximityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ProximityMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "communicability" | "comm" => Ok(ProximityMeasure::Communicability),
            "heat" => Ok(ProximityMeasure::Heat),
            "pagerank" | "pr" => Ok(ProximityMeasure::PageRank),
            "free-energy" | "fe" | "freeenergy" | "free_energy" => Ok(ProximityMeasure::FreeEnergy),
            "scct" => Ok(ProximityMeasure::Scct),
            other => Err(format!("unknown proximity measure: {other:?}")),
        }
    }
}

fn flush_noise(m: &mut Array2<f64>) {
    m.mapv_inplace(|v| if v.abs() < NOISE_FLOOR { 0.0 } else { v });
}

/// Communicability kernel `exp(alpha * A)`, `alpha > 0`.
pub fn communicability(adjacency: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, KernelError> {
    ProximityMeasure::Communicability.require_positive_alpha(alpha)?;
    let eigen = SymEigen::new(adjacency)?;
    communicability_from_eigen(&eigen, alpha)
}

fn communicability_from_eigen(eigen: &SymEigen, alpha: f64) -> Result<Array2<f64>, KernelError> {
    ProximityMeasure::Communicability.require_positive_alpha(alpha)?;
    let product = alpha * eigen.spectral_norm();
    if product > COMM_EXP_LIMIT {
        return Err(KernelError::CommunicabilityOverflow { product });
    }
    let mut k = eigen.exp_scaled(alpha)?;
    flush_noise(&mut k);
    Ok(k)
}

/// Heat kernel `exp(-alpha * L)`, `alpha > 0`. Rows sum to one because the
/// Laplacian annihilates constants.
pub fn heat(adjacency: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, KernelError> {
    ProximityMeasure::Heat.require_positive_alpha(alpha)?;
    let eigen = SymEigen::new(&graph::laplacian(adjacency))?;
    heat_from_eigen(&eigen, alpha)
}

fn heat_from_eigen(eigen: &SymEigen, alpha: f64) -> Result<Array2<f64>, KernelError> {
    ProximityMeasure::Heat.require_positive_alpha(alpha)?;
    let mut k = eigen.exp_scaled(-alpha)?;
    flush_noise(&mut k);
    Ok(k)
}

/// PageRank kernel `(I - alpha * P)^{-1}`, `0 < alpha < 1`, symmetrized as
/// `(K + K^T) / 2`.
///
/// `P = D^{-1} A` is not symmetric, so the raw resolvent is not either;
/// spectral clustering consumes symmetric affinities, and averaging with the
/// transpose preserves the measure's values on average.
pub fn pagerank_kernel(adjacency: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, KernelError> {
    let raw = pagerank_raw(adjacency, alpha)?;
    let mut k = 0.5 * (&raw + &raw.t());
    flush_noise(&mut k);
    Ok(k)
}

/// The unsymmetrized PageRank resolvent. Exposed for oracle tests; most
/// callers want [`pagerank_kernel`].
pub fn pagerank_raw(adjacency: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, KernelError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(KernelError::AlphaOutOfUnitInterval { alpha });
    }
    let p = graph::markov(adjacency, IsolatedNodePolicy::UniformRow)?;
    pagerank_raw_from_markov(&p, alpha)
}

fn pagerank_raw_from_markov(p: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, KernelError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(KernelError::AlphaOutOfUnitInterval { alpha });
    }
    let n = p.nrows();
    let mut system = p.mapv(|v| -alpha * v);
    for i in 0..n {
        system[[i, i]] += 1.0;
    }
    let mut raw = numerics::inverse(&system)?;
    flush_noise(&mut raw);
    debug_assert!(
        raw.iter().all(|&v| v >= -1e-10),
        "PageRank resolvent should be entrywise nonnegative"
    );
    Ok(raw)
}

/// Output of the free-energy chain: the distance matrix, the kernel obtained
/// from it through the distance-to-kernel transform, and the expected-cost
/// matrix `S = (Z (C o W)) / Z` that the randomized-shortest-path framework
/// defines along the way (computed for inspection; not consumed by the
/// distance).
#[derive(Debug, Clone)]
pub struct FreeEnergy {
    pub distance: Array2<f64>,
    pub kernel: Array2<f64>,
    pub expected_cost: Array2<f64>,
}

/// Free-energy distance and kernel at inverse temperature `alpha > 0`.
///
/// Chain: `W = exp(-alpha * C) o P` on edges, `Z = (I - W)^{-1}`, then with
/// `diagonal_correction` on (the default) `Phi_ij = -(1/alpha) *
/// log(z_ij / z_jj)`, which zeroes the diagonal and makes the symmetrized
/// `Delta = (Phi + Phi^T) / 2` a proper distance. With the correction off,
/// `Phi = log(Z) / alpha` verbatim.
///
/// Requires every pair to be connected: a nonpositive `z_ij` aborts with the
/// offending pair.
pub fn free_energy(
    adjacency: &Array2<f64>,
    cost: &Array2<f64>,
    alpha: f64,
    diagonal_correction: bool,
) -> Result<FreeEnergy, KernelError> {
    ProximityMeasure::FreeEnergy.require_positive_alpha(alpha)?;
    let p = graph::markov(adjacency, IsolatedNodePolicy::UniformRow)?;
    free_energy_from_parts(adjacency, cost, &p, alpha, diagonal_correction)
}

fn free_energy_from_parts(
    adjacency: &Array2<f64>,
    cost: &Array2<f64>,
    markov: &Array2<f64>,
    alpha: f64,
    diagonal_correction: bool,
) -> Result<FreeEnergy, KernelError> {
    ProximityMeasure::FreeEnergy.require_positive_alpha(alpha)?;
    let n = adjacency.nrows();

    // W and C o W live on edges only: P vanishes off-edges, so the cost
    // sentinel for absent edges is never read.
    let mut w = Array2::<f64>::zeros((n, n));
    let mut cw = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if adjacency[[i, j]] > 0.0 {
                let wij = (-alpha * cost[[i, j]]).exp() * markov[[i, j]];
                w[[i, j]] = wij;
                cw[[i, j]] = cost[[i, j]] * wij;
            }
        }
    }

    let mut system = w.mapv(|v| -v);
    for i in 0..n {
        system[[i, i]] += 1.0;
    }
    let z = numerics::inverse(&system)?;

    for i in 0..n {
        for j in 0..n {
            let value = z[[i, j]];
            if value <= 0.0 {
                return Err(KernelError::DisconnectedPair { i, j, value });
            }
        }
    }

    let expected_cost = {
        let zcw = z.dot(&cw);
        let mut s = zcw;
        s.zip_mut_with(&z, |num, &den| *num /= den);
        s
    };

    let mut phi = Array2::<f64>::zeros((n, n));
    if diagonal_correction {
        let log_diag: Vec<f64> = (0..n).map(|j| z[[j, j]].ln()).collect();
        for i in 0..n {
            for j in 0..n {
                phi[[i, j]] = (log_diag[j] - z[[i, j]].ln()) / alpha;
            }
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                phi[[i, j]] = z[[i, j]].ln() / alpha;
            }
        }
    }

    let mut distance = 0.5 * (&phi + &phi.t());
    flush_noise(&mut distance);
    let mut kernel = numerics::double_center(&distance)?;
    flush_noise(&mut kernel);
    Ok(FreeEnergy {
        distance,
        kernel,
        expected_cost,
    })
}

/// Sigmoid Corrected Commute-Time kernel.
///
/// The corrected commute-time base `K_cct = H D^{-1/2} M (I - M)^{-1} M
/// D^{-1/2} H` with `M = D^{-1/2} (A - d d^T / vol) D^{-1/2}` does not depend
/// on `alpha`; the sigmoid `1 / (1 + exp(-alpha * k / sigma))` is applied
/// elementwise with `sigma` the population standard deviation of the base
/// entries.
pub fn scct(adjacency: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, KernelError> {
    ProximityMeasure::Scct.require_positive_alpha(alpha)?;
    let base = cct_base(adjacency)?;
    sigmoid_with_std(&base, alpha)
}

/// The corrected commute-time matrix `K_cct` before the sigmoid step.
pub fn cct_base(adjacency: &Array2<f64>) -> Result<Array2<f64>, KernelError> {
    let n = adjacency.nrows();
    let degrees = graph::degree_vector(adjacency);
    for (i, &d) in degrees.iter().enumerate() {
        if d <= 0.0 {
            return Err(KernelError::Graph(GraphError::ZeroDegree(i)));
        }
    }
    let volume: f64 = degrees.sum();
    let inv_sqrt: Array1<f64> = degrees.mapv(|d| 1.0 / d.sqrt());

    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] =
                (adjacency[[i, j]] - degrees[i] * degrees[j] / volume) * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    numerics::symmetrize(&mut m);

    let mut system = m.mapv(|v| -v);
    for i in 0..n {
        system[[i, i]] += 1.0;
    }
    let resolvent =
        numerics::inverse(&system).map_err(|e| KernelError::SingularStructure(e.to_string()))?;
    let inner = m.dot(&resolvent).dot(&m);

    let mut scaled = inner;
    for i in 0..n {
        for j in 0..n {
            scaled[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let mut base = numerics::center_rows_cols(&scaled)?;
    numerics::symmetrize(&mut base);
    Ok(base)
}

/// Elementwise sigmoid scaled by the population standard deviation of the
/// input entries. Fails if the input is constant (sigma = 0).
pub fn sigmoid_with_std(base: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, KernelError> {
    ProximityMeasure::Scct.require_positive_alpha(alpha)?;
    let count = base.len() as f64;
    let mean = base.sum() / count;
    let variance = base.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let sigma = variance.sqrt();
    if sigma == 0.0 {
        return Err(KernelError::ConstantCct);
    }
    Ok(base.mapv(|v| stable_sigmoid(alpha * v / sigma)))
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Distance-to-kernel transform `K = -1/2 H Delta H` (Eq-style classical
/// MDS). The input must be symmetric with a zero diagonal.
pub fn distance_to_kernel(distance: &Array2<f64>) -> Result<Array2<f64>, KernelError> {
    let deviation = numerics::max_asymmetry(distance);
    if deviation > 1e-9 {
        return Err(KernelError::AsymmetricDistance { deviation });
    }
    debug_assert!(
        distance.diag().iter().all(|&v| v.abs() <= 1e-12),
        "distance matrix should have a zero diagonal"
    );
    let mut k = numerics::double_center(distance)?;
    flush_noise(&mut k);
    Ok(k)
}

/// A proximity measure with its parameter-independent state precomputed for
/// one adjacency matrix, ready to be evaluated across a parameter grid.
#[derive(Debug)]
pub enum PreparedKernel {
    Communicability {
        eigen: SymEigen,
    },
    Heat {
        eigen: SymEigen,
    },
    PageRank {
        markov: Array2<f64>,
    },
    FreeEnergy {
        adjacency: Array2<f64>,
        cost: Array2<f64>,
        markov: Array2<f64>,
        diagonal_correction: bool,
    },
    Scct {
        base: Array2<f64>,
    },
}

impl PreparedKernel {
    /// Precompute with default options (free energy uses the diagonal
    /// correction).
    pub fn new(measure: ProximityMeasure, adjacency: &Array2<f64>) -> Result<Self, KernelError> {
        Self::with_options(measure, adjacency, true)
    }

    pub fn with_options(
        measure: ProximityMeasure,
        adjacency: &Array2<f64>,
        fe_diagonal_correction: bool,
    ) -> Result<Self, KernelError> {
        match measure {
            ProximityMeasure::Communicability => Ok(PreparedKernel::Communicability {
                eigen: SymEigen::new(adjacency)?,
            }),
            ProximityMeasure::Heat => Ok(PreparedKernel::Heat {
                eigen: SymEigen::new(&graph::laplacian(adjacency))?,
            }),
            ProximityMeasure::PageRank => Ok(PreparedKernel::PageRank {
                markov: graph::markov(adjacency, IsolatedNodePolicy::UniformRow)?,
            }),
            ProximityMeasure::FreeEnergy => Ok(PreparedKernel::FreeEnergy {
                adjacency: adjacency.clone(),
                cost: graph::cost_matrix(adjacency),
                markov: graph::markov(adjacency, IsolatedNodePolicy::UniformRow)?,
                diagonal_correction: fe_diagonal_correction,
            }),
            ProximityMeasure::Scct => Ok(PreparedKernel::Scct {
                base: cct_base(adjacency)?,
            }),
        }
    }

    pub fn measure(&self) -> ProximityMeasure {
        match self {
            PreparedKernel::Communicability { .. } => ProximityMeasure::Communicability,
            PreparedKernel::Heat { .. } => ProximityMeasure::Heat,
            PreparedKernel::PageRank { .. } => ProximityMeasure::PageRank,
            PreparedKernel::FreeEnergy { .. } => ProximityMeasure::FreeEnergy,
            PreparedKernel::Scct { .. } => ProximityMeasure::Scct,
        }
    }

    /// Largest alpha the communicability overflow guard admits for this
    /// matrix; `None` for measures without an upper alpha bound.
    pub fn alpha_ceiling(&self) -> Option<f64> {
        match self {
            PreparedKernel::Communicability { eigen } => {
                let norm = eigen.spectral_norm();
                if norm > 0.0 {
                    Some(COMM_EXP_LIMIT / norm)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// Evaluate the kernel matrix at the given parameter.
    pub fn compute(&self, alpha: f64) -> Result<Array2<f64>, KernelError> {
        match self {
            PreparedKernel::Communicability { eigen } => communicability_from_eigen(eigen, alpha),
            PreparedKernel::Heat { eigen } => heat_from_eigen(eigen, alpha),
            PreparedKernel::PageRank { markov } => {
                let raw = pagerank_raw_from_markov(markov, alpha)?;
                let mut k = 0.5 * (&raw + &raw.t());
                flush_noise(&mut k);
                Ok(k)
            }
            PreparedKernel::FreeEnergy {
                adjacency,
                cost,
                markov,
                diagonal_correction,
            } => {
                let fe =
                    free_energy_from_parts(adjacency, cost, markov, alpha, *diagonal_correction)?;
                Ok(fe.kernel)
            }
            PreparedKernel::Scct { base } => sigmoid_with_std(base, alpha),
        }
    }
}
