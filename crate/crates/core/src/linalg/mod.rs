//! Dense complex linear algebra and the state/cut data model.

pub mod cut;
pub mod dump;
pub mod matrix;
pub mod schmidt;
pub mod state;

pub use cut::{marginal_of_factor, partial_trace, reshape_vector, BipartiteCut, Keep};
pub use matrix::{
    c64, eigh, eigvalsh, kron_vec, lambda_max, lambda_min, max_ambient_dim, orthonormal_span, set_max_ambient_dim,
    singular_values, spectral_norm, svd, tensor, trace_norm, unvec, unvec_shape, vec_map, ComplexMatrix, Eigen,
    Eigenvectors, ONE, ZERO,
};
pub use schmidt::{operator_schmidt, OperatorSchmidtDecomposition, SchmidtSummary, SchmidtTerm};
pub use state::{
    cap_eigenvalues, domination_margin, gentle_measure, is_flat, leaked_mass, product_domination_margin, trace_distance, support_projector, DensityOperator,
    HermitianOperator, SubState, PSD_TOL, SUPPORT_CUTOFF, SUPPORT_LEAK_TOL, TRACE_TOL,
};
