use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::eigen::{
    eigendecompose, EigenCount, Negated, SpectralDecomposition, SymmetricOperator, DENSE_LIMIT,
};
use crate::classify::{surrogate_loss_constant, SurrogateLoss};
use crate::error::{Error, Result};
use crate::graphgen::AdjacencyMatrix;

/// Default multiplier in the dimension-selection threshold.
pub const DEFAULT_DIM_CONSTANT: f64 = 32.0;

/// Leading eigenvalues at or below this fraction of max(|λ_1|, 1) count as
/// non-positive.
const RANK_TOL: f64 = 1e-12;

/// Rows ζ(X_i) of `scale · U_A S_A^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    rows: DMatrix<f64>,
    scale: f64,
    eigenvalues_used: Vec<f64>,
}

impl Embedding {
    /// Wrap precomputed rows, e.g. read back from a file.
    pub fn from_rows(rows: DMatrix<f64>, scale: f64, eigenvalues_used: Vec<f64>) -> Self {
        Self {
            rows,
            scale,
            eigenvalues_used,
        }
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    /// n × d matrix of embedded vertices.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    /// The multiplier applied to `U_A S_A^{1/2}`: 1 for dense graphs, ρ^{-1/2}
    /// for sparse ones.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eigenvalues_used(&self) -> &[f64] {
        &self.eigenvalues_used
    }

    /// The rows at `idx`, in order.
    pub fn select_rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.rows.select_rows(idx)
    }

    /// Write `vertex,z1,...,zd` CSV with round-trip exact values.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["vertex".to_string()];
        header.extend((1..=self.d()).map(|j| format!("z{j}")));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.rows.row(i).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read an embedding CSV. Scale and eigenvalues are not stored in the
    /// file and come back as 1 and empty.
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let expected: Vec<String> = std::iter::once("vertex".to_string())
            .chain((1..=d).map(|j| format!("z{j}")))
            .collect();
        if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Parse("expected header `vertex,z1,...,zd`".into()));
        }
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec[0].trim().parse::<usize>().ok() != Some(i) {
                return Err(Error::Parse(format!("expected vertex {i}, found `{}`", &rec[0])));
            }
            for field in rec.iter().skip(1) {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("invalid number `{field}`")))?,
                );
            }
        }
        let n = values.len() / d;
        Ok(Self::from_rows(DMatrix::from_row_slice(n, d, &values), 1.0, Vec::new()))
    }
}

/// The adjacency spectral embedding in dimension `d`.
///
/// Graphs sampled with ρ < 1 are rescaled by ρ^{-1/2}.
pub fn spectral_embed(a: &AdjacencyMatrix, d: usize) -> Result<Embedding> {
    if d == 0 || d > a.n() {
        return Err(Error::arg(format!(
            "embedding dimension must lie in 1..={}, got {d}",
            a.n()
        )));
    }
    let decomp = eigendecompose(a, EigenCount::Top(d))?;
    embed_decomposition(&decomp, d, a.rho())
}

/// Embed from an existing decomposition holding at least `d` eigenpairs.
pub fn embed_decomposition(
    decomp: &SpectralDecomposition,
    d: usize,
    rho: f64,
) -> Result<Embedding> {
    if d == 0 || d > decomp.len() {
        return Err(Error::arg(format!(
            "embedding dimension {d} needs that many eigenpairs, have {}",
            decomp.len()
        )));
    }
    let values = decomp.eigenvalues();
    let floor = RANK_TOL * values[0].abs().max(1.0);
    let admissible = values.iter().take_while(|&&l| l > floor).count();
    if admissible < d {
        return Err(Error::RankDeficient {
            requested: d,
            largest_admissible: admissible,
            value: values[d - 1],
        });
    }
    let scale = if rho < 1.0 { rho.powf(-0.5) } else { 1.0 };
    let mut rows = decomp.leading_vectors(d)?;
    for (j, mut col) in rows.column_iter_mut().enumerate() {
        col *= values[j].sqrt() * scale;
    }
    Ok(Embedding {
        rows,
        scale,
        eigenvalues_used: values[..d].to_vec(),
    })
}

/// (λ_d − λ_{d+1}) / n for the adjacency spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub d: usize,
    pub value: f64,
}

pub fn gap_estimate(decomp: &SpectralDecomposition, d: usize) -> Result<GapEstimate> {
    if d == 0 || d + 1 > decomp.len() {
        return Err(Error::arg(format!(
            "gap at d = {d} needs {} eigenvalues, have {}",
            d + 1,
            decomp.len()
        )));
    }
    let l = decomp.eigenvalues();
    Ok(GapEstimate {
        d,
        value: (l[d - 1] - l[d]) / decomp.n() as f64,
    })
}

/// Outcome of the gap-based dimension rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionSelection {
    pub d: usize,
    /// True when no dimension met the rule and `d = 1` was used instead.
    pub fallback: bool,
}

fn threshold(d: usize, n: usize, loss: SurrogateLoss, epsilon: f64, constant: f64) -> f64 {
    let n = n as f64;
    let df = d as f64;
    constant
        * (df * surrogate_loss_constant(loss, d)).sqrt()
        * (df * n.ln() / n).powf(0.25 - epsilon)
}

/// One past the largest `d` that can possibly satisfy the rule for an
/// `n`-vertex graph, i.e. how many eigenvalues [`select_dimension_with`]
/// reads (capped at `n`).
///
/// Uses that every gap is below `2n` and that the threshold grows with `d`.
pub fn dimension_search_limit(n: usize, loss: SurrogateLoss, epsilon: f64, constant: f64) -> usize {
    if n < 2 {
        return n;
    }
    let mut d = 1;
    while d < n - 1 && threshold(d, n, loss, epsilon, constant) < 2.0 {
        d += 1;
    }
    d + 1
}

/// Largest `d ≤ n − 1` with
/// `(λ_d − λ_{d+1})/n ≥ c·√(d·C_d)·(d log n / n)^{1/4 − ε}`, for `c = 32`.
pub fn select_dimension(
    decomp: &SpectralDecomposition,
    loss: SurrogateLoss,
    epsilon: f64,
) -> Result<DimensionSelection> {
    select_dimension_with(decomp, loss, epsilon, DEFAULT_DIM_CONSTANT)
}

/// [`select_dimension`] with the multiplier `c` supplied.
///
/// When no `d` qualifies, returns `d = 1` flagged as a fallback and logs a
/// warning.
pub fn select_dimension_with(
    decomp: &SpectralDecomposition,
    loss: SurrogateLoss,
    epsilon: f64,
    constant: f64,
) -> Result<DimensionSelection> {
    let n = decomp.n();
    check_rule(n, epsilon, constant)?;
    let needed = dimension_search_limit(n, loss, epsilon, constant);
    if decomp.len() < needed {
        return Err(Error::arg(format!(
            "dimension rule needs the top {needed} eigenvalues, have {}",
            decomp.len()
        )));
    }
    Ok(pick(decomp, needed - 1, loss, epsilon, constant))
}

fn check_rule(n: usize, epsilon: f64, constant: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::arg(format!("epsilon must lie in (0, 1/4), got {epsilon}")));
    }
    if !(constant.is_finite() && constant > 0.0) {
        return Err(Error::arg(format!("rule constant must be positive, got {constant}")));
    }
    if n < 2 {
        return Err(Error::arg("dimension selection needs n >= 2"));
    }
    Ok(())
}

/// Largest `d ≤ max_d` meeting the rule, or the flagged `d = 1` fallback.
fn pick(
    decomp: &SpectralDecomposition,
    max_d: usize,
    loss: SurrogateLoss,
    epsilon: f64,
    constant: f64,
) -> DimensionSelection {
    let n = decomp.n();
    let best = (1..=max_d)
        .rev()
        .find(|&d| gap_estimate(decomp, d).unwrap().value >= threshold(d, n, loss, epsilon, constant));
    match best {
        Some(d) => DimensionSelection { d, fallback: false },
        None => {
            log::warn!("no dimension satisfies the gap rule at n = {n}; using d = 1");
            DimensionSelection {
                d: 1,
                fallback: true,
            }
        }
    }
}

/// Eigendecompose `op` and apply the gap rule, computing only as many
/// eigenpairs as the rule needs.
///
/// Starts from the top `k` eigenpairs. For `d ≥ k` every gap is at most
/// `(λ_k − λ_min)/n`, so once the threshold exceeds that bound the
/// remaining candidates are ruled out; otherwise `k` doubles. Selects the
/// same `d` as [`select_dimension_with`] on a full decomposition.
pub fn decompose_and_select<M: SymmetricOperator + ?Sized>(
    op: &M,
    loss: SurrogateLoss,
    epsilon: f64,
    constant: f64,
) -> Result<(SpectralDecomposition, DimensionSelection)> {
    let n = op.dim();
    check_rule(n, epsilon, constant)?;
    let limit = dimension_search_limit(n, loss, epsilon, constant);
    if n <= DENSE_LIMIT || limit <= 16 {
        let decomp = eigendecompose(op, EigenCount::Top(limit))?;
        let sel = select_dimension_with(&decomp, loss, epsilon, constant)?;
        return Ok((decomp, sel));
    }
    let lambda_min = -eigendecompose(&Negated(op), EigenCount::Top(1))?.eigenvalues()[0];
    let mut k = 16;
    loop {
        let decomp = eigendecompose(op, EigenCount::Top(k))?;
        if k >= limit {
            let sel = select_dimension_with(&decomp, loss, epsilon, constant)?;
            return Ok((decomp, sel));
        }
        let bound = (decomp.eigenvalues()[k - 1] - lambda_min) / n as f64;
        if threshold(k, n, loss, epsilon, constant) > bound {
            let sel = pick(&decomp, k - 1, loss, epsilon, constant);
            return Ok((decomp, sel));
        }
        k = (2 * k).min(limit);
    }
}

/// ‖U_A U_Aᵀ − U_B U_Bᵀ‖ for the top-`d` eigenvectors of each decomposition.
pub fn projection_distance(
    a: &SpectralDecomposition,
    b: &SpectralDecomposition,
    d: usize,
) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::arg(format!(
            "decompositions live in dimensions {} and {}",
            a.n(),
            b.n()
        )));
    }
    subspace_distance(&a.leading_vectors(d)?, &b.leading_vectors(d)?)
}

/// ‖P_U − P_V‖ for orthonormal n × d bases `u` and `v`.
///
/// Equals the sine of the largest principal angle, computed as the top
/// singular value of `(I − U Uᵀ) V` to avoid cancellation near zero.
pub fn subspace_distance(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::arg("subspace bases have different shapes"));
    }
    if u.ncols() == 0 {
        return Ok(0.0);
    }
    let residual = v - u * (u.transpose() * v);
    let s = residual.singular_values();
    Ok(s.max().clamp(0.0, 1.0))
}
