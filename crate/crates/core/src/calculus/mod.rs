//! Learnability bounds for analytic functions.
//!
//! Every bound is expressed through an auxiliary power series `g̃` whose
//! coefficients are the absolute values of the target's Taylor coefficients
//! (after absorbing the norms of the input projections). The rules compose
//! the way ordinary derivatives do: sums add, products follow the product
//! rule, compositions follow the chain rule. All `O(1)` constants are set
//! to 1.

mod bivariate;
mod bounds;
mod report;
mod series;
mod taylor;

pub use bivariate::{BivariateSeries, DEFAULT_MAX_DEGREE};
pub use bounds::{
    bivariate_chain_bound, chain_bound, induced_series, kernel_weighted_bound, monomial_bound,
    multivariate_bound, product_bound, product_family_bound, series_bound, univariate_bound,
    MonomialTerm, Schedule,
};
pub use report::{BoundDocument, BoundReport, Magnitude, Rule, DEFAULT_DELTA};
pub use series::{AuxSeries, SeriesSum};
pub use taylor::{
    gravity_bound_log, gravity_cross_check, gravity_degree, gravity_penalty_log,
    inverse_cube_taylor, inverse_three_halves_coeffs, real_gravity_degree, GravityCrossCheck,
    TaylorApprox,
};
