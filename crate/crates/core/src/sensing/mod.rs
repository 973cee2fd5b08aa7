//! Binary measurement matrices and the empirical verifiers of their
//! compressed-sensing properties.

mod estimators;
mod hadamard;
mod matrix;
mod operator;

pub use estimators::{
    estimate_expander_theta, estimate_rip_constant, for_each_neighborhood, Combinations,
    SUBSET_BUDGET,
};
pub use hadamard::{dense_hadamard, hadamard_apply, hadamard_in_place};
pub use matrix::{
    apply_measurement, build_bernoulli, build_expander, build_identity, build_identity_subset,
    build_subsampled_hadamard, rescale_to_unit_norm, unit_norm_scale, CsData, Entries, MatrixKind,
    MatrixMeta, MeasurementMatrix,
};
pub use operator::{power_iteration, DenseMatrix, LinearOperator};
