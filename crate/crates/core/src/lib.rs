//! Numerical spectral analysis of sheared quantum waveguides with parallel
//! cross-sections: cross-section meshes, fiber operators, effective 1D
//! models, truncated-tube solves and variational certificates.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certificates;
pub mod effective1d;
pub mod expr;
pub mod fiber;
pub mod full3d;
pub mod linalg;
pub mod mesh;
pub mod profile;
pub mod quad;
pub mod scenarios;
