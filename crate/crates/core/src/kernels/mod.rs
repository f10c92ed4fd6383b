//! Link functions, kernel matrices, and the quadrature oracle for the
//! integral operator `f ↦ ∫ κ(·, x′) f(x′) dF(x′)`.
//!
//! Every [`KernelSpec`] is scaled by `1 / sup κ` over its domain so that its
//! values are valid edge probabilities. Positive scaling preserves both
//! positive definiteness and universality.

mod domain;
mod operator;
mod quadrature;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use domain::LatentDomain;
pub use operator::{operator_spectrum, FeatureMap, OperatorSpectrum, POSITIVITY_TOL};
pub use quadrature::{quadrature_for, Quadrature};
pub(crate) use quadrature::truncated_mass;

use crate::error::{Error, Result};
use crate::points::{dot, sq_dist, PointSet};

/// Largest exponent for which `exp` stays finite.
const MAX_EXP: f64 = 709.0;

/// A symmetric, positive-definite link function.
pub trait Kernel: Send + Sync {
    /// κ(x, y) without domain checks.
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
}

impl<F> Kernel for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self(x, y)
    }
}

/// The closed-form kernel families. All but `DotProduct` are universal on
/// compact subsets of ℝ^d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// exp(−‖x − y‖² / σ²)
    Gaussian { bandwidth: f64 },
    /// exp(⟨x, y⟩)
    Exponential,
    /// (1 − ⟨x, y⟩)^(−α), defined when sup ‖x‖² < 1.
    Binomial { alpha: f64 },
    /// (c² + ‖x − y‖²)^(−β)
    InverseMultiquadric { c: f64, beta: f64 },
    /// ⟨x, y⟩, for domains with non-negative inner products.
    DotProduct,
}

#[derive(Deserialize)]
struct KernelSpecRepr {
    #[serde(flatten)]
    family: KernelFamily,
    domain: LatentDomain,
}

/// A kernel family on a domain, normalized into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRepr")]
pub struct KernelSpec {
    #[serde(flatten)]
    family: KernelFamily,
    domain: LatentDomain,
    #[serde(skip_serializing)]
    scale: f64,
    /// sup ‖x‖² over the domain, cached for the inner-product families.
    #[serde(skip_serializing)]
    radius_sq: f64,
}

impl TryFrom<KernelSpecRepr> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelSpecRepr) -> Result<Self> {
        KernelSpec::new(r.family, r.domain)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, domain: LatentDomain) -> Result<Self> {
        domain.validate()?;
        let radius_sq = domain.max_norm_sq();
        let scale = match family {
            KernelFamily::Gaussian { bandwidth } => {
                positive("bandwidth", bandwidth)?;
                1.0
            }
            KernelFamily::Exponential => {
                if radius_sq > MAX_EXP {
                    return Err(Error::config(format!(
                        "exponential kernel is not normalizable on {domain}: \
                         sup exp<x,y> = exp({radius_sq}) overflows"
                    )));
                }
                // Stored as an exponent offset; see `eval`.
                1.0
            }
            KernelFamily::Binomial { alpha } => {
                positive("alpha", alpha)?;
                if radius_sq >= 1.0 {
                    return Err(Error::config(format!(
                        "binomial kernel needs sup |x|^2 < 1, got {radius_sq} on {domain}"
                    )));
                }
                (1.0 - radius_sq).powf(alpha)
            }
            KernelFamily::InverseMultiquadric { c, beta } => {
                positive("c", c)?;
                positive("beta", beta)?;
                (c * c).powf(beta)
            }
            KernelFamily::DotProduct => {
                if domain.min_inner_product() < 0.0 {
                    return Err(Error::config(format!(
                        "dot product kernel takes negative values on {domain}"
                    )));
                }
                if radius_sq <= 0.0 {
                    return Err(Error::config("dot product kernel is identically zero"));
                }
                1.0 / radius_sq
            }
        };
        Ok(Self {
            family,
            domain,
            scale,
            radius_sq,
        })
    }

    pub fn gaussian(bandwidth: f64, domain: LatentDomain) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { bandwidth }, domain)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn domain(&self) -> &LatentDomain {
        &self.domain
    }

    /// The factor `1 / sup κ` applied to the raw family.
    pub fn normalization(&self) -> f64 {
        match self.family {
            KernelFamily::Exponential => (-self.radius_sq).exp(),
            _ => self.scale,
        }
    }

    /// Domain-checked κ(x, y).
    pub fn kernel_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.check(x)?;
        self.domain.check(y)?;
        Ok(self.eval(x, y))
    }
}

impl Kernel for KernelSpec {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let v = match self.family {
            KernelFamily::Gaussian { bandwidth } => {
                (-sq_dist(x, y) / (bandwidth * bandwidth)).exp()
            }
            KernelFamily::Exponential => (dot(x, y) - self.radius_sq).exp(),
            KernelFamily::Binomial { alpha } => {
                ((1.0 - self.radius_sq) / (1.0 - dot(x, y))).powf(alpha)
            }
            KernelFamily::InverseMultiquadric { c, beta } => {
                let c2 = c * c;
                (c2 / (c2 + sq_dist(x, y))).powf(beta)
            }
            KernelFamily::DotProduct => dot(x, y) * self.scale,
        };
        v.clamp(0.0, 1.0)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

/// The Gram matrix `K_ij = κ(X_i, X_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wrap a matrix after checking symmetry and the `[0, 1]` range.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::arg("kernel matrix must be square and non-empty"));
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::arg(format!("K[{i},{j}] = {v} is outside [0, 1]")));
                }
                if v != entries[(j, i)] {
                    return Err(Error::arg("kernel matrix is not symmetric"));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn mean(&self) -> f64 {
        self.entries.mean()
    }
}

/// Build `K` for a point list. Only the upper triangle is evaluated, so the
/// result is exactly symmetric.
pub fn kernel_matrix(kernel: &dyn Kernel, points: &PointSet) -> Result<KernelMatrix> {
    let n = points.len();
    if n == 0 {
        return Err(Error::arg("kernel matrix of an empty point list"));
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = points.row(i);
        for j in i..n {
            let v = kernel.eval(xi, points.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(KernelMatrix { entries: k })
}

/// Domain-checked variant of [`kernel_matrix`] for a [`KernelSpec`].
pub fn spec_kernel_matrix(spec: &KernelSpec, points: &PointSet) -> Result<KernelMatrix> {
    for p in points.iter() {
        spec.domain().check(p)?;
    }
    kernel_matrix(spec, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> LatentDomain {
        LatentDomain::unit_interval()
    }

    #[test]
    fn gaussian_closed_form() {
        let k = KernelSpec::gaussian(0.5, unit()).unwrap();
        assert_eq!(k.kernel_eval(&[0.3], &[0.3]).unwrap(), 1.0);
        assert_relative_eq!(
            k.kernel_eval(&[0.0], &[0.5]).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn imq_normalized_at_diagonal() {
        let k = KernelSpec::new(
            KernelFamily::InverseMultiquadric { c: 1.0, beta: 1.0 },
            unit(),
        )
        .unwrap();
        assert_eq!(k.kernel_eval(&[0.7], &[0.7]).unwrap(), 1.0);
        assert_relative_eq!(k.kernel_eval(&[0.0], &[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn exponential_and_binomial_normalization() {
        let k = KernelSpec::new(KernelFamily::Exponential, unit()).unwrap();
        assert_relative_eq!(k.normalization(), (-1.0f64).exp());
        assert_relative_eq!(k.eval(&[1.0], &[1.0]), 1.0);
        assert_relative_eq!(k.eval(&[0.5], &[0.2]), (0.1f64 - 1.0).exp());

        let half = LatentDomain::Interval { lo: -0.5, hi: 0.5 };
        let b = KernelSpec::new(KernelFamily::Binomial { alpha: 2.0 }, half).unwrap();
        assert_relative_eq!(b.normalization(), 0.75f64.powi(2));
        assert_relative_eq!(b.eval(&[0.5], &[0.5]), 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.eval(&[0.5], &[-0.5]), (0.75f64 / 1.25).powi(2));
    }

    #[test]
    fn non_normalizable_configurations() {
        assert!(KernelSpec::new(KernelFamily::Binomial { alpha: 1.0 }, unit()).is_err());
        let wide = LatentDomain::Interval {
            lo: -30.0,
            hi: 30.0,
        };
        assert!(matches!(
            KernelSpec::new(KernelFamily::Exponential, wide),
            Err(Error::Config(_))
        ));
        let signed = LatentDomain::Interval { lo: -1.0, hi: 1.0 };
        assert!(KernelSpec::new(KernelFamily::DotProduct, signed).is_err());
        assert!(KernelSpec::gaussian(0.0, unit()).is_err());
    }

    #[test]
    fn domain_errors() {
        let k = KernelSpec::gaussian(0.5, unit()).unwrap();
        assert!(matches!(
            k.kernel_eval(&[1.5], &[0.0]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn single_point_matrix() {
        let k = KernelSpec::gaussian(0.3, unit()).unwrap();
        let m = spec_kernel_matrix(&k, &PointSet::from_scalars(&[0.4])).unwrap();
        assert_eq!(m.entries(), &DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn two_point_matrix() {
        let k = KernelSpec::gaussian(1.0, unit()).unwrap();
        let m = spec_kernel_matrix(&k, &PointSet::from_scalars(&[0.0, 1.0])).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(m.entries(), &DMatrix::from_row_slice(2, 2, &[1.0, e, e, 1.0]));
    }

    #[test]
    fn empty_points_rejected() {
        let k = KernelSpec::gaussian(1.0, unit()).unwrap();
        let empty = PointSet::new(1, vec![]).unwrap();
        assert!(matches!(kernel_matrix(&k, &empty), Err(Error::Argument(_))));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let text = r#"
            family = "gaussian"
            bandwidth = 0.5
            domain = { kind = "interval", lo = 0.0, hi = 1.0 }
        "#;
        let k: KernelSpec = toml::from_str(text).unwrap();
        assert_eq!(k, KernelSpec::gaussian(0.5, unit()).unwrap());
        let bad = text.replace("0.5", "-0.5");
        assert!(toml::from_str::<KernelSpec>(&bad).is_err());
    }
}
