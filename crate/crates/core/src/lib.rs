//! Bayesian group-sparse regression: spike-and-slab Gibbs samplers
//! (BGL-SS, BSGL, BSGS-SS), closed-form thresholding estimators for
//! orthogonal designs, frequentist group-lasso baselines and a simulation
//! harness.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod bgl_ss;
pub mod bsgl;
pub mod bsgs_ss;
pub mod chain;
pub mod dists;
pub mod error;
pub mod freq;
pub mod geweke;
pub mod io;
pub mod linalg;
pub mod model;
pub mod report;
pub mod sim;
pub mod thresholding;

pub use error::{Error, Result};
pub use model::{
    make_design, selection_of, GroupedCoefficients, GroupedDesign, SamplerConfig,
    SelectionPattern,
};
