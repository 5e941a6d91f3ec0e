//! Dictionary learning by simultaneous codeword optimization (SimCO), with
//! MOD and K-SVD baselines, OMP sparse coding, experiment pipelines and a
//! numerical checker for the rank-one convergence analysis.
//!
//! Data-parallel loops go through [`par`]; disabling the default `parallel`
//! feature runs them sequentially with identical results.

pub mod baselines;
pub mod dict_update;
mod dictionary;
pub mod error;
pub mod experiments;
pub mod learner;
pub mod numerics;
pub mod par;
pub mod rankone;
pub mod sparse_coding;

pub use dict_update::Dictionary;
pub use error::{Result, SimcoError};
pub use numerics::{DenseMatrix, RngState};
pub use sparse_coding::{SparseCoeffs, SparsityPattern};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
mod oracle;
