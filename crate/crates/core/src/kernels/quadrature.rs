//! Quadrature rules for a latent distribution F.
//!
//! Rectangular domains use tensorized Gauss–Legendre rules; the circle uses
//! the equispaced rule (spectrally accurate for periodic integrands); point
//! masses are represented exactly.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::LatentDomain;
use crate::error::{Error, Result};
use crate::graphgen::{DistributionSpec, LatentLaw, MixtureComponent};
use crate::points::PointSet;

/// Tolerance on Σ weights = 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Nodes and probability weights approximating integrals against F.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: PointSet,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(nodes: PointSet, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::arg("quadrature needs one weight per node"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::config("quadrature weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::config(format!(
                "quadrature weights sum to {total}, not 1"
            )));
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// ∫ f dF.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

/// A quadrature rule for `dist` with `m` nodes per axis.
pub fn quadrature_for(dist: &DistributionSpec, m: usize) -> Result<Quadrature> {
    if m == 0 {
        return Err(Error::arg("quadrature size must be positive"));
    }
    let domain = dist.domain();
    match dist.latent() {
        LatentLaw::Uniform => match domain {
            LatentDomain::Sphere { dim: 2 } => {
                let mut coords = Vec::with_capacity(2 * m);
                for k in 0..m {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    coords.extend_from_slice(&[t.cos(), t.sin()]);
                }
                Quadrature::new(PointSet::new(2, coords)?, vec![1.0 / m as f64; m])
            }
            LatentDomain::Sphere { .. } => Err(Error::config(
                "quadrature on spheres is only available in dimension 2",
            )),
            _ => {
                let volume = domain.volume().unwrap();
                let (nodes, weights) = tensor_gauss_legendre(domain, m)?;
                Quadrature::new(nodes, weights.into_iter().map(|w| w / volume).collect())
            }
        },
        LatentLaw::GaussianMixture {
            components,
            weights: mix,
        } => {
            let axes = domain.axes().ok_or_else(|| {
                Error::config("truncated mixtures need a rectangular domain")
            })?;
            let (nodes, base) = tensor_gauss_legendre(domain, m)?;
            let masses: Vec<f64> = components.iter().map(|c| truncated_mass(c, &axes)).collect();
            let weights = nodes
                .iter()
                .zip(base)
                .map(|(x, w)| {
                    let density: f64 = components
                        .iter()
                        .zip(mix)
                        .zip(&masses)
                        .map(|((c, pi), z)| pi * gaussian_density(c, x) / z)
                        .sum();
                    w * density
                })
                .collect();
            drop_empty(nodes, weights)
        }
        LatentLaw::TwoPoint { x1, x2, p } => {
            if x1 == x2 {
                return Quadrature::new(PointSet::from_rows(&[x1])?, vec![1.0]);
            }
            let (rows, weights): (Vec<&Vec<f64>>, Vec<f64>) = [(x1, *p), (x2, 1.0 - p)]
                .into_iter()
                .filter(|(_, w)| *w > 0.0)
                .unzip();
            Quadrature::new(PointSet::from_rows(&rows)?, weights)
        }
    }
}

/// Remove nodes whose weight underflowed to zero; ψ cannot be tabulated there.
fn drop_empty(nodes: PointSet, weights: Vec<f64>) -> Result<Quadrature> {
    let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if keep.is_empty() {
        return Err(Error::config(
            "quadrature misses the distribution entirely; increase the node count",
        ));
    }
    if keep.len() == weights.len() {
        return Quadrature::new(nodes, weights);
    }
    let weights = keep.iter().map(|&k| weights[k]).collect();
    Quadrature::new(nodes.select(&keep), weights)
}

/// Tensor-product Gauss–Legendre nodes and Lebesgue weights on a box.
fn tensor_gauss_legendre(domain: &LatentDomain, m: usize) -> Result<(PointSet, Vec<f64>)> {
    let axes = domain.axes().unwrap();
    let dim = axes.len();
    let total = m
        .checked_pow(dim as u32)
        .filter(|t| *t <= 1 << 24)
        .ok_or_else(|| Error::config(format!("{m}^{dim} quadrature nodes is too many")))?;
    let rule = GaussLegendre::new(NonZeroUsize::new(m).unwrap());
    let per_axis: Vec<Vec<(f64, f64)>> = axes
        .iter()
        .map(|[lo, hi]| {
            let half = 0.5 * (hi - lo);
            rule.iter()
                .map(|(x, w)| (lo + half * (x + 1.0), half * w))
                .collect()
        })
        .collect();

    let mut coords = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let mut w = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            let (x, wa) = per_axis[a][i];
            coords.push(x);
            w *= wa;
        }
        weights.push(w);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    Ok((PointSet::new(dim, coords)?, weights))
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn gaussian_density(c: &MixtureComponent, x: &[f64]) -> f64 {
    let n = standard_normal();
    c.mean
        .iter()
        .zip(x)
        .map(|(mu, v)| n.pdf((v - mu) / c.std) / c.std)
        .product()
}

/// Probability mass of an isotropic Gaussian inside the box.
pub(crate) fn truncated_mass(c: &MixtureComponent, axes: &[[f64; 2]]) -> f64 {
    let n = standard_normal();
    c.mean
        .iter()
        .zip(axes)
        .map(|(mu, [lo, hi])| n.cdf((hi - mu) / c.std) - n.cdf((lo - mu) / c.std))
        .product()
}
