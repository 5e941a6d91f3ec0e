//! Dense linear algebra and seeded randomness shared by every other module.

mod lstsq;
mod matrix;
mod rng;
mod svd;

pub use lstsq::{cgls, solve_col_major, solve_least_squares, solve_ridge, LsBackend, PivotedQr};
pub use matrix::{axpy, dot, norm, DenseMatrix};
pub use rng::{stiefel_sample_uniform, RngState};
pub use svd::{rank_one_svd, singular_values, svd, RankOneSvd, SingularTriplet, SvdResult};

pub(crate) use svd::{condition_col_major, rank_one_svd_col_major};
