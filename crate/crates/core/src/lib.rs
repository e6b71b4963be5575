//! Kernel learnability bounds for analytic functions, the power-series
//! kernels they require, and an empirical harness for learning the k-body
//! gravitational force.
//!
//! * [`calculus`]: auxiliary series and the bound calculus (univariate,
//!   multivariate, product, chain, two-argument chain), plus the
//!   inverse-cube Taylor approximation behind the gravity bound.
//! * [`kernels`]: modified-ReLU, Gaussian, and slow-decay dot-product
//!   kernels with closed forms and coefficient prefixes; Monte-Carlo
//!   estimates of single-hidden-layer kernels.
//! * [`gravity`]: Newtonian forces and the synthetic k-body dataset.
//! * [`regression`]: Gram systems, kernel interpolation, random-feature
//!   networks with a minimum-norm top layer, error metrics.
//! * [`harness`]: reproducible experiment commands used by the CLI.

pub mod calculus;
pub mod error;
pub mod gravity;
pub mod harness;
pub mod kernels;
pub mod par;
pub mod regression;

pub use error::{Error, Result};
pub use par::Exec;
