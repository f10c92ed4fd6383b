//! Quadrature discretization of the integral operator and the truncated
//! Mercer feature map built from it.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Kernel, KernelSpec, LatentDomain, Quadrature};
use crate::error::{Error, Result};
use crate::graphgen::DistributionSpec;
use crate::points::PointSet;
use crate::spectral::{eigendecompose, EigenCount};

/// Eigenvalues below this fraction of λ_1 are treated as zero.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Approximate eigenpairs (λ_j, ψ_j) of `f ↦ ∫ κ(·, x′) f(x′) dF(x′)`.
///
/// With `W = diag(weights)` and `K` the kernel at the nodes, the discrete
/// problem is the eigen-decomposition of `W^{1/2} K W^{1/2}`. The
/// eigenfunctions are tabulated at the nodes and normalized in `L²(F)`.
#[derive(Clone)]
pub struct OperatorSpectrum {
    kernel: Arc<dyn Kernel>,
    domain: Option<LatentDomain>,
    nodes: PointSet,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// m × d_max; entry (k, j) is ψ_j(x_k).
    psi: DMatrix<f64>,
    trace: f64,
    node_index: HashMap<Vec<u64>, usize>,
}

impl std::fmt::Debug for OperatorSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorSpectrum")
            .field("nodes", &self.nodes.len())
            .field("eigenvalues", &self.eigenvalues)
            .field("trace", &self.trace)
            .finish()
    }
}

impl OperatorSpectrum {
    /// Solve the discretized problem for the top `d_max` eigenpairs.
    pub fn from_quadrature(
        kernel: Arc<dyn Kernel>,
        quadrature: Quadrature,
        d_max: usize,
    ) -> Result<Self> {
        let m = quadrature.len();
        if d_max == 0 || d_max > m {
            return Err(Error::arg(format!(
                "need 1 <= d_max <= m, got d_max = {d_max}, m = {m}"
            )));
        }
        let Quadrature { nodes, weights } = quadrature;
        let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut b = DMatrix::zeros(m, m);
        let mut trace = 0.0;
        for i in 0..m {
            let xi = nodes.row(i);
            for j in i..m {
                let v = sqrt_w[i] * kernel.eval(xi, nodes.row(j)) * sqrt_w[j];
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
            trace += b[(i, i)];
        }

        let decomp = eigendecompose(&b, EigenCount::Top(d_max))?;
        let lambda_1 = decomp.eigenvalues()[0].max(0.0);
        let eigenvalues: Vec<f64> = decomp
            .eigenvalues()
            .iter()
            .map(|&l| if l > POSITIVITY_TOL * lambda_1 { l } else { 0.0 })
            .collect();

        let mut psi = decomp.eigenvectors().clone();
        for (k, mut row) in psi.row_iter_mut().enumerate() {
            row /= sqrt_w[k];
        }
        for mut col in psi.column_iter_mut() {
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

        let mut node_index = HashMap::with_capacity(m);
        for (k, x) in nodes.iter().enumerate() {
            node_index.entry(bits(x)).or_insert(k);
        }
        Ok(Self {
            kernel,
            domain: None,
            nodes,
            weights,
            eigenvalues,
            psi,
            trace,
            node_index,
        })
    }

    pub fn nodes(&self) -> &PointSet {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// λ_1 ≥ … ≥ λ_{d_max} ≥ 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of retained eigenpairs.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// ψ_j at the nodes, 1-based `j`.
    pub fn eigenfunction_values(&self, j: usize) -> Result<Vec<f64>> {
        if j == 0 || j > self.len() {
            return Err(Error::arg(format!("eigenfunction {j} is not retained")));
        }
        Ok(self.psi.column(j - 1).iter().copied().collect())
    }

    /// Σ_k w_k κ(x_k, x_k), the trace of the full discrete operator.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Trace mass not captured by the retained eigenvalues.
    pub fn tail_trace(&self) -> f64 {
        (self.trace - self.eigenvalues.iter().sum::<f64>()).max(0.0)
    }

    /// δ_d = λ_d − λ_{d+1}, 1-based `d`.
    pub fn gap(&self, d: usize) -> Result<f64> {
        if d == 0 || d + 1 > self.len() {
            return Err(Error::arg(format!(
                "gap at d = {d} needs {} retained eigenvalues, have {}",
                d + 1,
                self.len()
            )));
        }
        Ok(self.eigenvalues[d - 1] - self.eigenvalues[d])
    }

    pub fn kernel(&self) -> &dyn Kernel {
        self.kernel.as_ref()
    }

    /// Row `k` of the node table, if `x` is bitwise equal to a node.
    fn node_of(&self, x: &[f64]) -> Option<usize> {
        self.node_index.get(&bits(x)).copied()
    }
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// The quadrature oracle for `spec` under `dist`, `m` nodes per axis.
pub fn operator_spectrum(
    spec: &KernelSpec,
    dist: &DistributionSpec,
    m: usize,
    d_max: usize,
) -> Result<OperatorSpectrum> {
    if d_max == 0 || m < d_max {
        return Err(Error::arg(format!(
            "need m >= d_max >= 1, got m = {m}, d_max = {d_max}"
        )));
    }
    let q = super::quadrature_for(dist, m)?;
    for x in q.nodes.iter() {
        spec.domain().check(x)?;
    }
    let mut s = OperatorSpectrum::from_quadrature(Arc::new(spec.clone()), q, d_max)?;
    s.domain = Some(spec.domain().clone());
    Ok(s)
}

/// Φ_d(x) = (√λ_j ψ_j(x))_{j ≤ d}.
#[derive(Debug, Clone, Copy)]
pub struct FeatureMap<'a> {
    spectrum: &'a OperatorSpectrum,
    d: usize,
}

impl<'a> FeatureMap<'a> {
    /// Fails if λ_d is not strictly positive.
    pub fn new(spectrum: &'a OperatorSpectrum, d: usize) -> Result<Self> {
        if d == 0 || d > spectrum.len() {
            return Err(Error::arg(format!(
                "truncation d = {d} needs 1 <= d <= {}",
                spectrum.len()
            )));
        }
        let lambda_d = spectrum.eigenvalues[d - 1];
        if !(lambda_d > 0.0) {
            return Err(Error::DegenerateSpectrum {
                index: d,
                value: lambda_d,
            });
        }
        Ok(Self { spectrum, d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn spectrum(&self) -> &'a OperatorSpectrum {
        self.spectrum
    }

    /// Φ_d(x). Nodes are read from the table; other points go through the
    /// Nyström extension `(1/√λ_j) Σ_k w_k κ(x, x_k) ψ_j(x_k)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(domain) = &self.spectrum.domain {
            domain.check(x)?;
        }
        match self.spectrum.node_of(x) {
            Some(k) => Ok((0..self.d)
                .map(|j| self.spectrum.eigenvalues[j].sqrt() * self.spectrum.psi[(k, j)])
                .collect()),
            None => Ok(self.extend(x)),
        }
    }

    /// The Nyström extension at `x`, even when `x` is a node.
    pub fn extend(&self, x: &[f64]) -> Vec<f64> {
        let s = self.spectrum;
        let mut out = vec![0.0; self.d];
        for (k, node) in s.nodes.iter().enumerate() {
            let c = s.weights[k] * s.kernel.eval(x, node);
            for (j, o) in out.iter_mut().enumerate() {
                *o += c * s.psi[(k, j)];
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o /= s.eigenvalues[j].sqrt();
        }
        out
    }

    /// Φ_d at each point, as an n × d matrix.
    pub fn eval_many(&self, points: &PointSet) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(points.len(), self.d);
        for (i, x) in points.iter().enumerate() {
            for (j, v) in self.eval(x)?.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::{LabelModel, LatentLaw};
    use approx::assert_relative_eq;

    fn uniform01() -> DistributionSpec {
        DistributionSpec::new(
            LatentDomain::unit_interval(),
            LatentLaw::Uniform,
            LabelModel::ConstantNoise { level: 0.5 },
        )
        .unwrap()
    }

    fn spectrum_of(kernel: impl Kernel + 'static, m: usize, d: usize) -> OperatorSpectrum {
        let q = super::super::quadrature_for(&uniform01(), m).unwrap();
        OperatorSpectrum::from_quadrature(Arc::new(kernel), q, d).unwrap()
    }

    #[test]
    fn constant_kernel() {
        let s = spectrum_of(|_: &[f64], _: &[f64]| 1.0, 32, 3);
        assert_relative_eq!(s.eigenvalues()[0], 1.0, epsilon = 1e-12);
        assert_eq!(&s.eigenvalues()[1..], &[0.0, 0.0]);
        for v in s.eigenfunction_values(1).unwrap() {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
        let fm = FeatureMap::new(&s, 1).unwrap();
        assert_relative_eq!(fm.eval(&[0.37]).unwrap()[0], 1.0, epsilon = 1e-12);
        assert!(matches!(
            FeatureMap::new(&s, 2),
            Err(Error::DegenerateSpectrum { index: 2, .. })
        ));
    }

    #[test]
    fn rank_one_kernel() {
        let s = spectrum_of(|x: &[f64], y: &[f64]| x[0] * y[0], 64, 2);
        assert_relative_eq!(s.eigenvalues()[0], 1.0 / 3.0, epsilon = 1e-13);
        assert_eq!(s.eigenvalues()[1], 0.0);
        let fm = FeatureMap::new(&s, 1).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert_relative_eq!(fm.eval(&[x]).unwrap()[0].abs(), x, epsilon = 1e-6);
        }
    }

    #[test]
    fn orthonormal_and_trace() {
        let spec = KernelSpec::gaussian(0.5, LatentDomain::unit_interval()).unwrap();
        let s = operator_spectrum(&spec, &uniform01(), 128, 6).unwrap();
        for a in 1..=6 {
            let pa = s.eigenfunction_values(a).unwrap();
            for b in 1..=6 {
                let pb = s.eigenfunction_values(b).unwrap();
                let ip: f64 = s.weights().iter().zip(&pa).zip(&pb).map(|((w, x), y)| w * x * y).sum();
                assert_relative_eq!(ip, if a == b { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
        assert_relative_eq!(s.trace(), 1.0, epsilon = 1e-12);
        assert!(s.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(s.tail_trace() >= 0.0 && s.tail_trace() < 1e-3);
    }

    #[test]
    fn nodes_bypass_extension() {
        let spec = KernelSpec::gaussian(0.5, LatentDomain::unit_interval()).unwrap();
        let s = operator_spectrum(&spec, &uniform01(), 64, 4).unwrap();
        let fm = FeatureMap::new(&s, 4).unwrap();
        let node = s.nodes().row(10).to_vec();
        let direct = fm.eval(&node).unwrap();
        for j in 0..4 {
            assert_eq!(direct[j], s.eigenvalues()[j].sqrt() * s.psi[(10, j)]);
        }
        let extended = fm.extend(&node);
        for j in 0..4 {
            assert_relative_eq!(direct[j], extended[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn argument_checks() {
        let spec = KernelSpec::gaussian(0.5, LatentDomain::unit_interval()).unwrap();
        assert!(operator_spectrum(&spec, &uniform01(), 4, 5).is_err());
        assert!(operator_spectrum(&spec, &uniform01(), 4, 0).is_err());
        let s = operator_spectrum(&spec, &uniform01(), 16, 3).unwrap();
        assert!(s.gap(3).is_err());
        assert!(FeatureMap::new(&s, 2).unwrap().eval(&[1.5]).is_err());
    }
}
