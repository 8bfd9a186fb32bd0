//! Maximum-entropy models over finite alphabets, with exact and approximate
//! normalized maximum likelihood (NML) codelengths.
//!
//! The crate covers four layers:
//!
//! * [`alphabet`] / [`features`] — finite sample spaces, feature tables
//!   (moment features `x^k` or custom columns) and empirical moments;
//! * [`maxent`] — the convex-dual Newton solver that produces the
//!   maximum-entropy distribution matching a moment vector, together with
//!   entropy and log-likelihood evaluation;
//! * [`codelength`] / [`discriminative`] — ERR, COMP and NML codelengths for
//!   generative and conditional models, via exhaustive enumeration (oracle),
//!   type-class summation, label-count grouping, or seeded Monte Carlo;
//! * [`selection`] — model selection across candidate feature sets by NML
//!   codelength, and the minimax-entropy criterion as the equal-complexity
//!   special case.
//!
//! All codelengths are in nats. The crate is `no_std` compatible (with
//! `alloc`); disable the default `std` feature for embedded use.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// indexed loops over small dense kernels read better than iterator chains here
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod alphabet;
pub mod codelength;
pub mod discriminative;
pub mod error;
pub mod features;
pub mod maxent;
pub mod numeric;
pub mod selection;

mod basis;
mod solver;

pub use alphabet::{Alphabet, Sample};
pub use codelength::{
    comp_by_types, comp_exact_enum, comp_monte_carlo, err_codelength, nml_codelength, type_classes,
    Caps, CodelengthReport, CompMethod, MethodTag, TypeClass,
};
pub use discriminative::{
    build_cond_moment_features, build_cond_moment_features_opts, cond_comp_exact,
    cond_comp_grouped, cond_comp_monte_carlo, cond_err_codelength, cond_nml,
    cond_value_and_gradient, fit_conditional, ClassSet, CondFeatureTable, ConditionalModel,
};
pub use error::{Error, Result};
pub use features::{
    build_moment_features, empirical_moments, FeatureKind, FeatureTable, MomentVector,
};
pub use maxent::{dual_value_and_gradient, fit_maxent, log_likelihood, MaxEntDistribution};
pub use selection::{
    select_by_minimax, select_by_nml, CandidateReport, CandidateSet, SelectionCriterion,
    SelectionResult,
};
