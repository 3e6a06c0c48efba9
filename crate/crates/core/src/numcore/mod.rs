//! Self-contained numerical primitives used by the estimators.

mod linalg;
mod logistic;
mod matrix;
mod nelder_mead;
mod ols;
mod rng;
mod special;

pub use linalg::{cholesky_solve, invert_spd, symmetric_sqrt};
pub use logistic::{fit_logistic, LogisticFit, RIDGE_FALLBACK};
pub use matrix::Matrix;
pub use nelder_mead::{minimize_nd, NelderMeadSettings};
pub use ols::{fit_ols, LinearFit};
pub use rng::{mvn_draw, RngStream};
pub use special::{expit, log1p_exp, logit, std_normal_density};
