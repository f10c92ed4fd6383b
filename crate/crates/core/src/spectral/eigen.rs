//! Symmetric eigensolvers.
//!
//! Small problems, and requests for the full spectrum, go to the dense
//! solver. Top-k requests on larger operators use Lanczos with full
//! reorthogonalization, which only needs matrix-vector products and so also
//! serves sparse adjacency matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Operators up to this size are always decomposed densely.
pub const DENSE_LIMIT: usize = 512;

/// Relative asymmetry tolerated in a dense input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative residual at which a Ritz pair counts as converged.
pub const LANCZOS_TOL: f64 = 1e-10;

/// Relative residual every returned pair must meet.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Which kind of matrix a decomposition came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    Adjacency,
    KernelMatrix,
    General,
}

/// A real symmetric linear operator.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    /// y ← M x
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn to_dense(&self) -> DMatrix<f64>;

    /// An upper bound on ‖M‖, used to scale tolerances.
    fn norm_bound(&self) -> f64;

    fn source(&self) -> MatrixSource {
        MatrixSource::General
    }

    /// max |M_ij − M_ji| relative to max |M_ij|; zero for operators that are
    /// symmetric by construction.
    fn asymmetry(&self) -> f64 {
        0.0
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        // Column-major storage: accumulate column by column.
        for (j, col) in self.column_iter().enumerate() {
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..n {
                    y[i] += col[i] * xj;
                }
            }
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }

    fn norm_bound(&self) -> f64 {
        self.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn asymmetry(&self) -> f64 {
        if self.nrows() != self.ncols() {
            return f64::INFINITY;
        }
        let scale = self.amax().max(f64::MIN_POSITIVE);
        let n = self.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }
}

/// `−M`, for extracting the bottom of a spectrum with a top-k solver.
pub struct Negated<'a, M: SymmetricOperator + ?Sized>(pub &'a M);

impl<M: SymmetricOperator + ?Sized> SymmetricOperator for Negated<'_, M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }
    fn to_dense(&self) -> DMatrix<f64> {
        -self.0.to_dense()
    }
    fn norm_bound(&self) -> f64 {
        self.0.norm_bound()
    }
    fn asymmetry(&self) -> f64 {
        self.0.asymmetry()
    }
}

/// How many eigenpairs to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenCount {
    All,
    /// The `k` algebraically largest.
    Top(usize),
}

/// Leading eigenpairs of a symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// n × k, one orthonormal column per eigenvalue.
    eigenvectors: DMatrix<f64>,
    source: MatrixSource,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn source(&self) -> MatrixSource {
        self.source
    }

    /// Dimension of the underlying space.
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Number of eigenpairs held.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// True when every eigenvalue of the matrix is present.
    pub fn is_complete(&self) -> bool {
        self.len() == self.n()
    }

    /// λ_j with 1-based `j`.
    pub fn eigenvalue(&self, j: usize) -> Option<f64> {
        j.checked_sub(1).and_then(|i| self.eigenvalues.get(i).copied())
    }

    /// The first `d` eigenvectors as an n × d matrix.
    pub fn leading_vectors(&self, d: usize) -> Result<DMatrix<f64>> {
        if d > self.len() {
            return Err(Error::arg(format!(
                "requested {d} eigenvectors but only {} are available",
                self.len()
            )));
        }
        Ok(self.eigenvectors.columns(0, d).into_owned())
    }
}

/// The top-k (or all) eigenpairs of `op`.
///
/// Each eigenvector's sign is fixed so that its largest-magnitude coordinate
/// is positive; equal eigenvalues keep the solver's order.
pub fn eigendecompose<M: SymmetricOperator + ?Sized>(
    op: &M,
    count: EigenCount,
) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::arg("cannot decompose an empty matrix"));
    }
    let k = match count {
        EigenCount::All => n,
        EigenCount::Top(k) => k,
    };
    if k == 0 || k > n {
        return Err(Error::arg(format!(
            "requested {k} eigenpairs of a {n} x {n} matrix"
        )));
    }
    let asym = op.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::arg(format!(
            "matrix is not symmetric (relative asymmetry {asym:e})"
        )));
    }

    let (values, mut vectors) = if n <= DENSE_LIMIT || 4 * k > n {
        dense_top(&op.to_dense(), k)
    } else {
        lanczos_top(op, k)?
    };
    fix_signs(&mut vectors);
    Ok(SpectralDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
        source: op.source(),
    })
}

/// ‖M‖ = max |λ|.
pub fn spectral_norm<M: SymmetricOperator + ?Sized>(op: &M) -> Result<f64> {
    if op.dim() <= DENSE_LIMIT {
        let all = eigendecompose(op, EigenCount::All)?;
        return Ok(all
            .eigenvalues()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs())));
    }
    let top = eigendecompose(op, EigenCount::Top(1))?.eigenvalues[0];
    let bottom = eigendecompose(&Negated(op), EigenCount::Top(1))?.eigenvalues[0];
    Ok(top.abs().max(bottom.abs()))
}

fn dense_top(m: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let order = descending_order(eig.eigenvalues.as_slice());
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order[..k]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Indices sorting `values` non-increasingly; stable, so ties keep index order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Lanczos iteration with full (two-pass Gram–Schmidt) reorthogonalization.
///
/// Runs until the k largest Ritz pairs have estimated residuals below
/// `LANCZOS_TOL · ‖T‖` and verified residuals below `RESIDUAL_TOL · ‖M‖`, or
/// the Krylov space fills ℝ^n, in which case the decomposition is exact.
fn lanczos_top<M: SymmetricOperator + ?Sized>(op: &M, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = op.dim();
    let norm = op.norm_bound().max(f64::MIN_POSITIVE);
    let breakdown = 1e-12 * norm;

    let mut start_rng = rng::stream(0x5EED_1A2C, 0);
    let mut basis: Vec<f64> = Vec::with_capacity(n * (2 * k + 32).min(n));
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mut v = random_unit(n, &mut start_rng, &basis);
    let mut w = vec![0.0; n];
    let mut next_check = (2 * k + 10).min(n);

    loop {
        let m = alpha.len();
        op.apply(&v, &mut w);
        let a = dot(&v, &w);
        axpy(-a, &v, &mut w);
        if let Some(&b) = beta.last() {
            if m > 0 {
                let prev = &basis[(m - 1) * n..m * n];
                axpy(-b, prev, &mut w);
            }
        }
        basis.extend_from_slice(&v);
        alpha.push(a);
        reorthogonalize(&basis, n, &mut w);
        reorthogonalize(&basis, n, &mut w);
        let b = norm2(&w);
        let size = alpha.len();

        let full = size == n;
        if full || size >= next_check || (b < breakdown && size >= k) {
            let (theta, s) = tridiagonal_eigen(&alpha, &beta);
            let order = descending_order(theta.as_slice());
            let t_norm = theta.amax().max(f64::MIN_POSITIVE);
            let converged = size >= k
                && order[..k]
                    .iter()
                    .all(|&i| (b * s[(size - 1, i)]).abs() <= LANCZOS_TOL * t_norm);
            if converged || full {
                let values: Vec<f64> = order[..k].iter().map(|&i| theta[i]).collect();
                let v_mat = DMatrix::from_column_slice(n, size, &basis);
                let s_top = DMatrix::from_columns(
                    &order[..k]
                        .iter()
                        .map(|&i| s.column(i).into_owned())
                        .collect::<Vec<_>>(),
                );
                let mut vectors = v_mat * s_top;
                for mut col in vectors.column_iter_mut() {
                    let len = col.norm();
                    col /= len;
                }
                if full || residuals_ok(op, &values, &vectors, norm) {
                    return Ok((values, vectors));
                }
            }
            next_check = (size + (size / 8).max(10)).min(n);
        }

        if b < breakdown {
            // Invariant subspace found; continue in its orthogonal complement.
            beta.push(0.0);
            v = random_unit(n, &mut start_rng, &basis);
        } else {
            beta.push(b);
            v = w.iter().map(|x| x / b).collect();
        }
    }
}

fn residuals_ok<M: SymmetricOperator + ?Sized>(
    op: &M,
    values: &[f64],
    vectors: &DMatrix<f64>,
    norm: f64,
) -> bool {
    let n = op.dim();
    let mut y = vec![0.0; n];
    values.iter().zip(vectors.column_iter()).all(|(&lambda, col)| {
        op.apply(col.as_slice(), &mut y);
        let r: f64 = y
            .iter()
            .zip(col.iter())
            .map(|(yi, xi)| (yi - lambda * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        r <= RESIDUAL_TOL * norm
    })
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues, eig.eigenvectors)
}

fn random_unit(n: usize, rng: &mut impl Rng, basis: &[f64]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        reorthogonalize(basis, n, &mut v);
        reorthogonalize(basis, n, &mut v);
        let len = norm2(&v);
        if len > 1e-8 {
            v.iter_mut().for_each(|x| *x /= len);
            return v;
        }
    }
}

fn reorthogonalize(basis: &[f64], n: usize, w: &mut [f64]) {
    let coeffs: Vec<f64> = basis.chunks_exact(n).map(|q| dot(q, w)).collect();
    for (q, c) in basis.chunks_exact(n).zip(coeffs) {
        axpy(-c, q, w);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
