//! Survey-aware propensity-score weighting for population causal effects.
//!
//! This crate estimates population average treatment effects from
//! observational data collected through a complex survey. A tilting function
//! over the propensity score selects the target population — everyone, the
//! treated, the controls, the overlap population, or a truncated range — and
//! survey design weights carry each estimate from the sample to the
//! population scale. Estimation offers a plain weighting estimator with a
//! closed-form sandwich variance and three outcome-model-augmented
//! estimators (moment, clever-covariate, and weighted-regression) whose
//! variances come from stacked estimating equations, so every confidence
//! interval accounts for the estimated propensity model and, where present,
//! outcome models.
//!
//! The crate also ships covariate-balance and weight diagnostics, and a
//! Monte-Carlo harness that generates a multi-stage survey population and
//! scores estimator configurations by bias, efficiency, and coverage.
//!
//! # A complete run
//!
//! ```
//! use svycausal::{
//!     build_unit_weights, estimate_psw, fit_propensity, DesignMatrix, DesignMode,
//!     EstimandSpec, PsMode, PsSpec, SurveySample,
//! };
//!
//! // Six units, one covariate, with survey weights.
//! let x = DesignMatrix::from_rows(
//!     &[vec![-1.2], vec![-0.4], vec![0.3], vec![0.9], vec![1.4], vec![-0.1]],
//!     vec!["x1".into()],
//! )?;
//! let sample = SurveySample::new(
//!     x,
//!     vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
//!     vec![1.0, 2.4, 1.7, 3.1, 3.9, 1.2],
//!     vec![1.5, 2.0, 1.0, 2.5, 1.2, 1.8],
//!     DesignMode::Retrospective,
//! )?;
//!
//! let ps = fit_propensity(
//!     &sample,
//!     &PsSpec {
//!         mode: PsMode::WPs,
//!         covariate_columns: vec![0],
//!         add_intercept: true,
//!         trunc_alpha: 0.0,
//!     },
//! )?;
//! let weights = build_unit_weights(&sample, &ps, &EstimandSpec::combined())?;
//! let estimate = estimate_psw(&sample, &ps, &weights)?;
//! assert!(estimate.se > 0.0);
//! println!("effect {:.3} ± {:.3}", estimate.tau, estimate.se);
//! # Ok::<(), svycausal::Error>(())
//! ```

pub mod balancing;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod mestimation;
pub mod propensity;
pub mod sample;
pub mod simulation;

pub use balancing::{
    build_unit_weights, tilting_value, unit_weight_pair, EstimandSpec, Tilt, UnitWeights,
};
pub use design::DesignMatrix;
pub use diagnostics::{
    arm_stats, balance_to_csv, balance_to_json, format_full, psmd_table, weight_summary,
    ArmWeightStats, BalanceRow, WeightSummary,
};
pub use error::{Error, Result};
pub use estimators::{
    augmented_components, estimate_augmented, estimate_psw, fit_outcome_models, Components,
    EstimateResult, EstimatorKind, OutcomeFit, RegressionWeightsKind, CI_MULTIPLIER,
};
pub use glm::{fit_weighted_linear, fit_weighted_logistic, GlmFit};
pub use mestimation::{
    assemble_augmented_stack, assemble_sandwich, evaluate_psi, psw_stacked_se, tau_variance,
    EeStack, StackConfig, ThetaStack,
};
pub use propensity::{
    compute_ratio_rz, fit_propensity, marginal_selection_probability, PsFit, PsMode, PsSpec,
};
pub use sample::{DesignMode, SurveySample};
pub use simulation::{
    draw_multistage_sample, draw_treatment_dependent_sample, generate_superpopulation,
    parse_scenario, run_scenario, scenario_rows_to_csv, summarize_estimates, EstimatorConfig,
    Population, SamplingDesign, ScenarioMetrics, ScenarioRow, ScenarioSpec, SimConfig,
};

// Compile and run every fenced Rust snippet in the guide as a doc-test, so
// the book can never drift from the crate it documents.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/variance.md")]
    mod variance {}
    #[doc = include_str!("../../../book/src/balance.md")]
    mod balance {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
