//! Tests of conditional stochastic dominance at target covariate points.
//!
//! The test compares two outcome distributions conditional on a covariate
//! sitting at chosen target values. It keeps, on each side, the outcomes
//! whose covariates are nearest the target (induced order statistics),
//! computes a one-sided two-sample KS statistic on the pooled effective
//! sample, and compares it with a data-independent critical value derived
//! from the exact finite-sample distribution of the uniform ECDF-difference
//! supremum. Variants cover multiple targets, sharp regression
//! discontinuity splits, a refined critical value for discrete outcomes,
//! and a permutation oracle.

pub mod cli;
pub mod error;
pub mod induced;
pub mod io;
pub mod nulldist;
pub mod stats;
pub mod runner;
pub mod simbench;
pub mod tuning;

pub use error::{Error, Result};
pub use induced::{
    build_effective_sample, g_order_select, rdd_split, EffectiveSample, ObservationPair,
    TargetPoint,
};
pub use nulldist::{
    exact_null_cdf, limiting_critical_value, mc_null_cdf, permutation_critical_value,
    refined_critical_value, support_of_delta, tuple_cdf, ExactNull, NullDistribution,
    NullMethod, RefinedCv, RefinedSpec,
};
pub use simbench::{
    draw_design, limit_experiment_check, run_monte_carlo, DesignCase, DesignSpec, DiscreteDist,
    DrawnData, SimOptions, SimResult,
};
pub use runner::{
    per_target_level, run_multi_target, run_rdd, run_single_target, CvCache, CvMethod, QMode,
    TargetResult, TestConfig, TestOutcome, Tester,
};
pub use stats::{ad_statistic, cvm_statistic, ks_statistic, Ecdf, StatisticKind};
pub use tuning::{estimate_moments, estimate_moments_with_clamp, rule_of_thumb_q, TuningInputs};
