use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on ‖x‖ = 1 for points on a sphere.
const SPHERE_TOL: f64 = 1e-9;

/// A compact latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentDomain {
    /// The closed interval `[lo, hi]` ⊂ ℝ.
    Interval { lo: f64, hi: f64 },
    /// An axis-aligned box; one `[lo, hi]` pair per axis.
    Box { bounds: Vec<[f64; 2]> },
    /// The unit sphere in ℝ^dim.
    Sphere { dim: usize },
}

impl LatentDomain {
    pub fn unit_interval() -> Self {
        LatentDomain::Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |lo: f64, hi: f64| {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                Err(Error::config(format!(
                    "domain bounds must be finite with lo < hi, got [{lo}, {hi}]"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            LatentDomain::Interval { lo, hi } => check(*lo, *hi),
            LatentDomain::Box { bounds } => {
                if bounds.is_empty() {
                    return Err(Error::config("box domain needs at least one axis"));
                }
                bounds.iter().try_for_each(|[lo, hi]| check(*lo, *hi))
            }
            LatentDomain::Sphere { dim } => {
                if *dim < 2 {
                    Err(Error::config("sphere dimension must be at least 2"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LatentDomain::Interval { .. } => 1,
            LatentDomain::Box { bounds } => bounds.len(),
            LatentDomain::Sphere { dim } => *dim,
        }
    }

    /// Per-axis bounds for rectangular domains.
    pub fn axes(&self) -> Option<Vec<[f64; 2]>> {
        match self {
            LatentDomain::Interval { lo, hi } => Some(vec![[*lo, *hi]]),
            LatentDomain::Box { bounds } => Some(bounds.clone()),
            LatentDomain::Sphere { .. } => None,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            LatentDomain::Sphere { .. } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm - 1.0).abs() <= SPHERE_TOL
            }
            _ => self
                .axes()
                .unwrap()
                .iter()
                .zip(x)
                .all(|([lo, hi], v)| lo <= v && v <= hi),
        }
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                point: x.to_vec(),
                domain: self.to_string(),
            })
        }
    }

    /// sup ‖x‖² over the domain.
    pub fn max_norm_sq(&self) -> f64 {
        match self {
            LatentDomain::Sphere { .. } => 1.0,
            _ => self
                .axes()
                .unwrap()
                .iter()
                .map(|[lo, hi]| (lo * lo).max(hi * hi))
                .sum(),
        }
    }

    /// inf ⟨x, y⟩ over pairs of domain points.
    pub fn min_inner_product(&self) -> f64 {
        match self {
            LatentDomain::Sphere { .. } => -1.0,
            _ => self
                .axes()
                .unwrap()
                .iter()
                .map(|[lo, hi]| (lo * hi).min(lo * lo).min(hi * hi))
                .sum(),
        }
    }

    /// Lebesgue volume of a rectangular domain.
    pub fn volume(&self) -> Option<f64> {
        self.axes()
            .map(|axes| axes.iter().map(|[lo, hi]| hi - lo).product())
    }
}

impl fmt::Display for LatentDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatentDomain::Interval { lo, hi } => write!(f, "[{lo}, {hi}]"),
            LatentDomain::Box { bounds } => {
                let parts: Vec<String> = bounds
                    .iter()
                    .map(|[lo, hi]| format!("[{lo}, {hi}]"))
                    .collect();
                write!(f, "{}", parts.join(" x "))
            }
            LatentDomain::Sphere { dim } => write!(f, "S^{}", dim - 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_membership() {
        let d = LatentDomain::unit_interval();
        assert!(d.contains(&[0.0]));
        assert!(d.contains(&[1.0]));
        assert!(!d.contains(&[1.0 + 1e-12]));
        assert!(!d.contains(&[0.5, 0.5]));
        assert!(d.check(&[-0.1]).is_err());
    }

    #[test]
    fn sphere_membership() {
        let d = LatentDomain::Sphere { dim: 2 };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(d.contains(&[s, s]));
        assert!(!d.contains(&[0.5, 0.5]));
    }

    #[test]
    fn box_extremes() {
        let d = LatentDomain::Box {
            bounds: vec![[-1.0, 0.5], [0.0, 2.0]],
        };
        assert_eq!(d.max_norm_sq(), 5.0);
        assert_eq!(d.min_inner_product(), -0.5);
        assert_eq!(d.volume(), Some(3.0));
    }

    #[test]
    fn rejects_unbounded() {
        let d = LatentDomain::Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        };
        assert!(d.validate().is_err());
        assert!(LatentDomain::Interval { lo: 1.0, hi: 1.0 }
            .validate()
            .is_err());
    }
}
