//! Differentially private hypothesis tests and model selection for the
//! normal linear model.
//!
//! Two routes are provided. Subsample-and-aggregate releases a single Bayes
//! factor or information criterion for a nested test, with simulated null
//! distributions for calibrated fixed-level tests. The Gram route releases a
//! noisy D'D once and enumerates every submodel from it, with Monte Carlo
//! confidence regions over the noise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gram;
pub mod linmodel;
pub mod mechanisms;
pub mod model_space;
pub mod null_calibration;
pub mod quadrature;
pub mod regions;
pub mod rng;
pub mod split_aggregate;

pub use error::{DpError, Result};
pub use gram::{
    build_gram, gram_noise_for, pd_repair, privatize_gram, run_chain, synthetic_dataset, threshold_offdiagonal,
    unit_box_sensitivity, GramChain, GramMatrix, RepairPolicy,
};
pub use linmodel::{
    log_bayes_factor, log_info_criterion, r_squared, reparametrize, CenteredData, GPriorSpec, InfoCriterionSpec,
    RegressionData, Statistic,
};
pub use mechanisms::{
    analytic_gaussian_sigma, laplace_noise, subsample_noise_scale, GramNoise, Mechanism, NoiseDraw, NoiseScale,
    PrivacyBudget, Sensitivity,
};
pub use model_space::{
    enumerate_posterior, model_averaged_beta, model_prior_log, mse_of_fit, r2_gamma, EnumerationSettings,
    ModelIndex, ModelPosterior, ModelPriorKind,
};
pub use null_calibration::{
    beta_tail_bound, critical_value, p_value, simulate_null_bf, simulate_null_lrt, simulate_null_pvalue,
    EmpiricalNull, NullSimConfig,
};
pub use regions::{
    histogram_mean_estimate, map_functional, sample_region, Functional, FunctionalHistogram, RegionConfig,
    RegionSample,
};
pub use split_aggregate::{
    aggregate_private, make_split, per_subset_log_stats, posterior_probability, CensorBounds, DPTestResult,
    SplitPlan,
};
