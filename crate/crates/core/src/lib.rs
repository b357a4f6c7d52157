//! Indetermination couplings of two densities on `[0, 1]`.
//!
//! Given margins `f` and `g` with `min f + min g >= 1`, the density
//! `π⁺(x, y) = f(x) + g(y) - 1` is the margin-preserving coupling with the
//! smallest `∫∫ π²`. This crate evaluates it, extracts its copula, samples it
//! exactly, and runs the test that separates it from independence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod coupling;
pub mod discrete;
pub mod error;
pub mod fixtures;
pub mod indettest;
pub mod likelihood;
pub mod margins;
pub mod numerics;
pub mod sampling;

pub use copula::{
    extremal_margin, extremal_pair, lambda_share_test, shared_family, spread_delta1,
    LambdaReport, SpecificIndetCopula,
};
pub use coupling::{
    couple_custom, couple_fgm, couple_independence, couple_indetermination, couple_perturbation,
    margins_of, BivariateLaw, CouplingKind, ZeroMeanProfile,
};
pub use discrete::{
    discrete_independence, discrete_indetermination, matching_probability,
    verify_discrete_minimality, DiscreteCoupling,
};
pub use error::{IndetError, Result};
pub use indettest::{
    bahadur_slope, log_mgf, rate_function, run_test, setup, statistic, tail_probability_mc,
    Decision, TailEstimate, TestReport, TestSetup, ThresholdPolicy,
};
pub use likelihood::{
    avg_likelihood, avg_likelihood_vs_indet, kl_divergence, rho_distance, rho_distance_empirical,
    LikelihoodValue,
};
pub use margins::{
    check_compatibility, constructive_compose, constructive_decompose, CompatibilityReport,
    Margin, MarginSpec,
};
pub use numerics::{QuadratureSpec, RngStream};
pub use sampling::{
    empirical_measure, sample_indetermination, sample_law, sample_margin, sample_square_density,
    EmpiricalSample,
};
