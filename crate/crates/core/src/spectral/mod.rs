//! Eigen-decompositions, the adjacency spectral embedding, spectral gaps and
//! dimension selection.

mod eigen;
mod embed;

pub use eigen::{
    eigendecompose, spectral_norm, EigenCount, MatrixSource, Negated, SpectralDecomposition,
    SymmetricOperator, DENSE_LIMIT, LANCZOS_TOL, RESIDUAL_TOL, SYMMETRY_TOL,
};
pub use embed::{
    decompose_and_select, dimension_search_limit, embed_decomposition, gap_estimate, projection_distance,
    select_dimension, select_dimension_with, spectral_embed, subspace_distance,
    DimensionSelection, Embedding, GapEstimate, DEFAULT_DIM_CONSTANT,
};
