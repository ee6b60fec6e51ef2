//! Catalog of shrinkage operators: scalar thresholding rules, disjoint-group
//! block shrinkage, and social (overlapping-neighborhood) shrinkage, each with
//! evaluation, analytic Jacobian where it exists, and a nonsmooth-locus
//! descriptor.

pub mod group;
pub mod operator;
pub mod scalar;
pub mod social;

pub use group::{
    eval_group_ew, eval_group_lasso, group_ew_jacobian, group_ew_operator, group_lasso_jacobian,
    group_lasso_operator, group_margin, GroupStructure,
};
pub use operator::{constant_operator, identity_operator, rotation_operator, BoxDomain, OperatorSpec};
pub use scalar::{eval_scalar, scalar_margin, scalar_operator, scalar_slope, ScalarRule};
pub use social::{
    analytic_social_jacobian, derive_partition, derive_partition_with_tol, eval_social,
    social_nonsmooth_margin, social_operator, NeighborhoodSystem, PartitionOutcome, ShrinkProfile,
    SocialShrinkageSpec,
};
