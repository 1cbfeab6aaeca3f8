//! Solver and verification harness for the one-dimensional nonlocal
//! diffusion equation `∂ₜu = D[u]` with heavy-tailed symmetric jump kernels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod quadrature;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use kernel::{AcceptedKernel, HypothesisCertificate, KernelFamily, KernelSpec, NearProfile};
pub use operator::{discretize, ApplyMethod, BoundaryModel, OperatorDiscretization, RightBoundary};
pub mod integrate;
pub mod report;

pub use integrate::{
    discrete_comparison_check, evolve, evolve_with, stable_dt, step, EvolveOptions, Trajectory,
};
pub use report::{MetaValue, VerificationReport};
pub mod reference;
pub mod subsolution;
pub mod verification;
