//! proxatlas: a library for deciding whether vector fields are proximity
//! operators.
//!
//! A continuous map is a proximity operator of some (possibly nonconvex)
//! penalty exactly when it is the gradient of a convex potential. For C^1
//! fields this is testable: the Jacobian must be symmetric positive
//! semi-definite wherever it exists. The crate provides
//!
//! - a catalog of shrinkage operators (scalar thresholding rules, group
//!   shrinkage, and overlapping-neighborhood "social" shrinkage), each with
//!   evaluation, analytic Jacobians, and nonsmooth-locus descriptors;
//! - finite-difference machinery for Jacobians, symmetry defects, eigenvalue
//!   bounds, and Lipschitz estimation;
//! - a verdict engine that certifies refutations with re-validated witnesses,
//!   including the constructive asymmetry witness for social shrinkage with
//!   overlapping neighborhoods;
//! - reconstruction of the convex potential by line integration and of the
//!   penalty on the operator's image, plus convexity audits;
//! - Bregman-divergence variants of the checks and the linear-inverse
//!   data-fidelity check.

#![forbid(unsafe_code)]

pub mod bregman;
pub mod catalog;
pub mod error;
pub mod numdiff;
pub mod proxcheck;
pub mod reconstruct;
pub mod sample;
pub mod shrinkage;

pub use error::{Error, Result};
pub use shrinkage::operator::{BoxDomain, OperatorSpec};
