//! Vertex classification on latent position graphs.
//!
//! A graph is drawn by sampling latent positions X_i from a distribution F,
//! then adding each edge {i, j} independently with probability ρ·κ(X_i, X_j).
//! The crate embeds the graph with the scaled leading eigenvectors of its
//! adjacency matrix, trains a linear classifier on the embedding by
//! minimizing a convex surrogate risk, and compares everything against the
//! population quantities defined by κ and F.
//!
//! Modules, bottom up:
//!
//! - [`kernels`]: kernel families, kernel matrices, and the integral
//!   operator's spectrum and feature map.
//! - [`graphgen`]: latent distributions, label models, and graph sampling.
//! - [`spectral`]: eigendecomposition, the adjacency spectral embedding,
//!   and dimension selection.
//! - [`align`]: Procrustes alignment and checks of the concentration bounds.
//! - [`classify`]: surrogate losses, constrained risk minimization, and the
//!   Bayes reference.
//! - [`harness`]: configuration, seeding, and experiment orchestration.

pub mod align;
pub mod classify;
pub mod error;
pub mod graphgen;
pub mod harness;
pub mod kernels;
pub mod points;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use points::PointSet;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/embedding.md")]
    mod embedding {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
