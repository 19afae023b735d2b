//! Dense linear-algebra backbone: symmetric matrix exponential, inverse with
//! a condition-number guard, smallest eigenpairs (plain and with a diagonal
//! metric), and double centering.
//!
//! All factorizations go through LAPACK (via `ndarray-linalg`). Public
//! operations never let NaN or infinity escape: non-finite results are
//! reported as errors.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, Inverse, ReciprocalConditionNum};
use thiserror::Error;

/// Symmetry tolerance for inputs that must be symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Reciprocal-condition floor for `inverse` (condition numbers beyond 1e12
/// are rejected rather than silently producing noise).
pub const RCOND_MIN: f64 = 1e-12;

// exp(x) overflows f64 just above 709.78.
const EXP_ARG_LIMIT: f64 = 709.0;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max |m_ij - m_ji| = {deviation:.3e})")]
    NotSymmetric { deviation: f64 },
    #[error("matrix is singular or ill-conditioned (rcond = {rcond:.3e})")]
    IllConditioned { rcond: f64 },
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("linear solver failed: {0}")]
    Solve(String),
    #[error("result contains non-finite entries")]
    NonFinite,
    #[error("requested {k} eigenpairs from a {n} x {n} matrix")]
    TooManyEigenpairs { k: usize, n: usize },
    #[error("metric entry {index} is not strictly positive")]
    NonPositiveMetric { index: usize },
    #[error("matrix exponential argument too large (max scaled eigenvalue {0:.3e})")]
    ExpOverflow(f64),
}

fn check_square(m: &Array2<f64>) -> Result<usize, NumericsError> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(NumericsError::NotSquare { rows, cols });
    }
    Ok(rows)
}

/// Direct LAPACK calls for the symmetric eigensolvers.
///
/// The `eigh` provided by the wrapper crates routes through `dsyev` (QR
/// iteration), which is several times slower than divide-and-conquer at the
/// matrix sizes the kernel grids sweep. `dsyevd` handles the full
/// decompositions here and `dsyevr` the k-smallest queries.
mod lapack_backend {
    use super::NumericsError;
    use ndarray::{Array1, Array2, ShapeBuilder};
    use std::ffi::{c_char, c_int};

    /// A symmetric matrix is its own transpose, so its row-major data can be
    /// handed to column-major LAPACK unchanged.
    fn symmetric_buffer(matrix: &Array2<f64>) -> Vec<f64> {
        matrix.iter().copied().collect()
    }

    fn lapack_error(routine: &str, info: c_int) -> NumericsError {
        NumericsError::Eigen(format!("{routine} failed with info = {info}"))
    }

    /// Full symmetric eigendecomposition (divide and conquer): eigenvalues
    /// ascending, eigenvectors as orthonormal columns.
    pub fn syevd(matrix: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), NumericsError> {
        let n = matrix.nrows();
        let n_int = n as c_int;
        let mut a = symmetric_buffer(matrix);
        let mut values = vec![0.0f64; n];
        let jobz = b'V' as c_char;
        let uplo = b'L' as c_char;
        let mut info: c_int = 0;

        let query: c_int = -1;
        let mut work_size = [0.0f64];
        let mut iwork_size = [0 as c_int];
        unsafe {
            lapack_sys::dsyevd_(
                &jobz,
                &uplo,
                &n_int,
                a.as_mut_ptr(),
                &n_int,
                values.as_mut_ptr(),
                work_size.as_mut_ptr(),
                &query,
                iwork_size.as_mut_ptr(),
                &query,
                &mut info,
            );
        }
        if info != 0 {
            return Err(lapack_error("dsyevd workspace query", info));
        }
        let lwork = work_size[0] as c_int;
        let liwork = iwork_size[0];
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
        unsafe {
            lapack_sys::dsyevd_(
                &jobz,
                &uplo,
                &n_int,
                a.as_mut_ptr(),
                &n_int,
                values.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(lapack_error("dsyevd", info));
        }
        let vectors =
            Array2::from_shape_vec((n, n).f(), a).expect("dsyevd output has n*n entries");
        Ok((Array1::from(values), vectors))
    }

    /// The `k` algebraically smallest eigenpairs via the RRR solver.
    pub fn syevr_smallest(
        matrix: &Array2<f64>,
        k: usize,
    ) -> Result<(Array1<f64>, Array2<f64>), NumericsError> {
        let n = matrix.nrows();
        debug_assert!(k >= 1 && k <= n);
        let n_int = n as c_int;
        let mut a = symmetric_buffer(matrix);
        let jobz = b'V' as c_char;
        let range = b'I' as c_char;
        let uplo = b'L' as c_char;
        let (vl, vu) = (0.0f64, 0.0f64);
        let il: c_int = 1;
        let iu: c_int = k as c_int;
        let abstol = 0.0f64;
        let mut found: c_int = 0;
        let mut values = vec![0.0f64; n];
        let mut vectors = vec![0.0f64; n * k];
        let mut isuppz = vec![0 as c_int; 2 * k.max(1)];
        let mut info: c_int = 0;

        let query: c_int = -1;
        let mut work_size = [0.0f64];
        let mut iwork_size = [0 as c_int];
        unsafe {
            lapack_sys::dsyevr_(
                &jobz,
                &range,
                &uplo,
                &n_int,
                a.as_mut_ptr(),
                &n_int,
                &vl,
                &vu,
                &il,
                &iu,
                &abstol,
                &mut found,
                values.as_mut_ptr(),
                vectors.as_mut_ptr(),
                &n_int,
                isuppz.as_mut_ptr(),
                work_size.as_mut_ptr(),
                &query,
                iwork_size.as_mut_ptr(),
                &query,
                &mut info,
            );
        }
        if info != 0 {
            return Err(lapack_error("dsyevr workspace query", info));
        }
        let lwork = work_size[0] as c_int;
        let liwork = iwork_size[0];
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
        unsafe {
            lapack_sys::dsyevr_(
                &jobz,
                &range,
                &uplo,
                &n_int,
                a.as_mut_ptr(),
                &n_int,
                &vl,
                &vu,
                &il,
                &iu,
                &abstol,
                &mut found,
                values.as_mut_ptr(),
                vectors.as_mut_ptr(),
                &n_int,
                isuppz.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(lapack_error("dsyevr", info));
        }
        if found != iu {
            return Err(NumericsError::Eigen(format!(
                "dsyevr found {found} of {iu} requested eigenpairs"
            )));
        }
        values.truncate(k);
        let vectors =
            Array2::from_shape_vec((n, k).f(), vectors).expect("dsyevr output has n*k entries");
        Ok((Array1::from(values), vectors))
    }
}

/// Largest absolute difference between a matrix and its transpose.
pub fn max_asymmetry(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

fn check_symmetric(m: &Array2<f64>, tol: f64) -> Result<(), NumericsError> {
    let deviation = max_asymmetry(m);
    if deviation > tol {
        return Err(NumericsError::NotSymmetric { deviation });
    }
    Ok(())
}

fn check_finite(m: &Array2<f64>) -> Result<(), NumericsError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// Average a matrix with its transpose in place, pinning exact symmetry.
pub fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues ascending,
/// eigenvectors as orthonormal columns.
///
/// Holding the factored form lets callers evaluate `exp(t * M)` for many `t`
/// without re-decomposing.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl SymEigen {
    pub fn new(m: &Array2<f64>) -> Result<Self, NumericsError> {
        check_square(m)?;
        check_finite(m)?;
        check_symmetric(m, SYMMETRY_TOL)?;
        let (values, vectors) = lapack_backend::syevd(m)?;
        Ok(Self { values, vectors })
    }

    /// Spectral norm of the decomposed matrix (largest |eigenvalue|).
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// Reconstruct `exp(t * M) = V exp(t * Lambda) V^T`.
    ///
    /// Fails before overflowing if any `t * lambda` exceeds the f64
    /// exponential range.
    pub fn exp_scaled(&self, t: f64) -> Result<Array2<f64>, NumericsError> {
        let max_arg = self
            .values
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &v| acc.max(t * v));
        if max_arg > EXP_ARG_LIMIT {
            return Err(NumericsError::ExpOverflow(max_arg));
        }
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let e = (t * lambda).exp();
            scaled.column_mut(j).mapv_inplace(|v| v * e);
        }
        let mut result = scaled.dot(&self.vectors.t());
        symmetrize(&mut result);
        check_finite(&result)?;
        Ok(result)
    }
}

/// Matrix exponential of a symmetric matrix via eigendecomposition.
pub fn sym_expm(m: &Array2<f64>) -> Result<Array2<f64>, NumericsError> {
    SymEigen::new(m)?.exp_scaled(1.0)
}

/// Matrix inverse through LU factorization.
///
/// Rejects inputs whose estimated reciprocal condition number falls below
/// [`RCOND_MIN`]: far better to fail loudly than to return noise.
pub fn inverse(m: &Array2<f64>) -> Result<Array2<f64>, NumericsError> {
    let n = check_square(m)?;
    check_finite(m)?;
    let factorized = m
        .factorize()
        .map_err(|e| NumericsError::Solve(e.to_string()))?;
    let rcond = factorized
        .rcond()
        .map_err(|e| NumericsError::Solve(e.to_string()))?;
    if rcond.is_nan() || rcond < RCOND_MIN {
        return Err(NumericsError::IllConditioned { rcond });
    }
    let inv = factorized
        .inv()
        .map_err(|e| NumericsError::Solve(e.to_string()))?;
    check_finite(&inv)?;
    #[cfg(debug_assertions)]
    {
        let mut residual = m.dot(&inv);
        for i in 0..n {
            residual[[i, i]] -= 1.0;
        }
        let worst = residual.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let bound = (100.0 * n as f64 * f64::EPSILON / rcond).max(1e-10);
        debug_assert!(
            worst <= bound,
            "inverse residual {worst:.3e} exceeds bound {bound:.3e}"
        );
    }
    let _ = n;
    Ok(inv)
}

/// The `k` algebraically smallest eigenpairs of a symmetric matrix, optionally
/// for the generalized problem `M v = lambda B v` with a positive diagonal
/// metric `B`.
///
/// Eigenvalues come back ascending; eigenvectors are the columns of the
/// returned matrix, orthonormal in the `B` inner product (plain orthonormal
/// when no metric is given).
pub fn smallest_eigenpairs(
    m: &Array2<f64>,
    k: usize,
    metric: Option<&Array1<f64>>,
) -> Result<(Array1<f64>, Array2<f64>), NumericsError> {
    let n = check_square(m)?;
    if k > n {
        return Err(NumericsError::TooManyEigenpairs { k, n });
    }
    check_finite(m)?;
    check_symmetric(m, SYMMETRY_TOL.max(1e-9 * frob_scale(m)))?;

    if k == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((n, 0))));
    }
    match metric {
        None => lapack_backend::syevr_smallest(m, k),
        Some(b) => {
            for (i, &v) in b.iter().enumerate() {
                if v <= 0.0 || !v.is_finite() {
                    return Err(NumericsError::NonPositiveMetric { index: i });
                }
            }
            // B is positive diagonal, so the generalized problem reduces to
            // the standard one for B^{-1/2} M B^{-1/2}; eigenvectors map back
            // through the same scaling and stay B-orthonormal.
            let inv_sqrt: Array1<f64> = b.mapv(|v| 1.0 / v.sqrt());
            let mut scaled = m.clone();
            for i in 0..n {
                for j in 0..n {
                    scaled[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
                }
            }
            symmetrize(&mut scaled);
            let (values, mut vectors) = lapack_backend::syevr_smallest(&scaled, k)?;
            for i in 0..n {
                let s = inv_sqrt[i];
                vectors.row_mut(i).mapv_inplace(|v| v * s);
            }
            Ok((values, vectors))
        }
    }
}

fn frob_scale(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Double centering `-1/2 * H * Delta * H` with `H = I - (1/n) 1 1^T`.
///
/// This is the classical transform that turns a squared-distance matrix into
/// a Gram (kernel) matrix; the result has zero row and column sums.
pub fn double_center(delta: &Array2<f64>) -> Result<Array2<f64>, NumericsError> {
    let centered = center_rows_cols(delta)?;
    Ok(centered.mapv(|v| -0.5 * v))
}

/// Two-sided centering `H * M * H` without the MDS `-1/2` factor.
pub fn center_rows_cols(m: &Array2<f64>) -> Result<Array2<f64>, NumericsError> {
    let n = check_square(m)?;
    check_finite(m)?;
    let nf = n as f64;
    let row_means = m.sum_axis(ndarray::Axis(1)).mapv(|v| v / nf);
    let col_means = m.sum_axis(ndarray::Axis(0)).mapv(|v| v / nf);
    let grand_mean = row_means.sum() / nf;
    let mut out = m.clone();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = m[[i, j]] - row_means[i] - col_means[j] + grand_mean;
        }
    }
    Ok(out)
}
