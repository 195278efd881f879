//! Scenario runner: replicate sample draws from one generated population,
//! apply a menu of estimator configurations to every replication, and score
//! each configuration against the population truth.

use rayon::prelude::*;

use super::{
    derived_seed, draw_multistage_sample, draw_treatment_dependent_sample,
    generate_superpopulation, Population, SamplingDesign, SimConfig, N_BASE_COVARIATES,
};
use crate::balancing::{build_unit_weights, EstimandSpec};
use crate::diagnostics::format_full;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_augmented, estimate_psw, fit_outcome_models, EstimatorKind, CI_MULTIPLIER,
};
use crate::propensity::{fit_propensity, PsFit, PsMode, PsSpec};
use crate::sample::SurveySample;

/// One entry in a scenario's estimator menu: which estimator to run, how
/// survey weights enter the propensity model, the target estimand, whether
/// either model omits the X₁X₂ interaction, and any propensity truncation
/// applied to the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub estimator: EstimatorKind,
    pub ps_mode: PsMode,
    pub estimand: EstimandSpec,
    /// Fit the propensity model without the interaction column.
    pub ps_misspecified: bool,
    /// Fit the outcome models without the interaction column (ignored by the
    /// plain weighting estimator, which has no outcome models).
    pub outcome_misspecified: bool,
    /// Propensity truncation level applied to the weights (0 disables).
    pub trunc_alpha: f64,
}

impl EstimatorConfig {
    /// Human-readable identifier, e.g. `psw/W_PS/combined/Cor|Cor`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.estimator.label(),
            self.ps_mode.label(),
            self.estimand.label(),
            misspec_label(self.ps_misspecified, self.outcome_misspecified),
        )
    }

    /// Key identifying the propensity fit this configuration needs, so
    /// configurations sharing a fit compute it once per replication.
    fn ps_key(&self) -> (PsMode, bool, u64) {
        (self.ps_mode, self.ps_misspecified, self.trunc_alpha.to_bits())
    }
}

pub(crate) fn misspec_label(ps_misspecified: bool, outcome_misspecified: bool) -> String {
    let tag = |m: bool| if m { "Mis" } else { "Cor" };
    format!("{}|{}", tag(ps_misspecified), tag(outcome_misspecified))
}

/// Monte-Carlo performance of one estimator configuration.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioMetrics {
    /// 100 · (mean estimate − truth) / truth.
    pub relative_bias_pct: f64,
    /// Monte-Carlo variance of the reference configuration divided by this
    /// configuration's Monte-Carlo variance (reference = 1).
    pub relative_efficiency: f64,
    /// Fraction of replications whose ±1.96·se interval covers the truth.
    pub coverage: f64,
    /// Sample variance (n−1 denominator) of the estimates across
    /// replications.
    pub mc_variance: f64,
    /// Population value of the configuration's estimand.
    pub truth: f64,
}

/// One output row of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioRow {
    pub config: EstimatorConfig,
    pub metrics: ScenarioMetrics,
    pub mean_estimate: f64,
    /// Replications that produced an estimate.
    pub replications_used: usize,
    /// Replications where this configuration failed (estimation error).
    pub failures: usize,
}

/// Covariate column indices for a correctly specified model (includes the
/// interaction) or a misspecified one (omits it).
fn model_columns(misspecified: bool) -> Vec<usize> {
    if misspecified {
        (0..N_BASE_COVARIATES).collect()
    } else {
        (0..=N_BASE_COVARIATES).collect()
    }
}

/// Point estimate and standard error for one configuration on one sample,
/// reusing a propensity fit shared across configurations.
fn estimate_one(
    sample: &SurveySample,
    ps: &PsFit,
    config: &EstimatorConfig,
) -> Result<(f64, f64)> {
    let uw = build_unit_weights(sample, ps, &config.estimand)?;
    let result = match config.estimator {
        EstimatorKind::Psw => estimate_psw(sample, ps, &uw)?,
        kind => {
            let of = fit_outcome_models(
                sample,
                &uw,
                kind,
                &model_columns(config.outcome_misspecified),
            )?;
            estimate_augmented(sample, ps, &uw, &of, kind)?
        }
    };
    Ok((result.tau, result.se))
}

/// Run every menu configuration on one drawn sample. Failures become `None`.
fn run_replication(
    cfg: &SimConfig,
    population: &Population,
    menu: &[EstimatorConfig],
    seed: u64,
) -> Vec<Option<(f64, f64)>> {
    let sample = match &cfg.sampling {
        SamplingDesign::Multistage { allocations } => {
            draw_multistage_sample(population, allocations, seed)
        }
        SamplingDesign::TreatmentDependent { .. } => {
            draw_treatment_dependent_sample(population, cfg, seed)
        }
    };
    let Ok(sample) = sample else {
        return vec![None; menu.len()];
    };

    // One propensity fit per distinct (mode, specification, truncation).
    let mut fit_keys: Vec<(PsMode, bool, u64)> = Vec::new();
    let mut fits: Vec<Result<PsFit>> = Vec::new();
    let mut fit_of: Vec<usize> = Vec::with_capacity(menu.len());
    for config in menu {
        let key = config.ps_key();
        let idx = match fit_keys.iter().position(|k| *k == key) {
            Some(idx) => idx,
            None => {
                let spec = PsSpec {
                    mode: config.ps_mode,
                    covariate_columns: model_columns(config.ps_misspecified),
                    add_intercept: true,
                    trunc_alpha: config.trunc_alpha,
                };
                fit_keys.push(key);
                fits.push(fit_propensity(&sample, &spec));
                fits.len() - 1
            }
        };
        fit_of.push(idx);
    }

    menu.iter()
        .zip(fit_of)
        .map(|(config, idx)| match &fits[idx] {
            Ok(ps) => estimate_one(&sample, ps, config).ok(),
            Err(_) => None,
        })
        .collect()
}

/// Generate the population for `cfg`, replicate its sampling design
/// `cfg.replications` times, run every `menu` configuration on each
/// replication, and score the results. `reference` indexes the menu entry
/// whose Monte-Carlo variance anchors relative efficiency.
///
/// Per-replication estimation failures are counted in the output rows, not
/// fatal; the run errors only if the configuration is invalid or the
/// reference configuration succeeds fewer than twice (leaving no variance
/// anchor). Replications run in parallel and are reduced in replication
/// order, so results do not depend on the number of worker threads.
pub fn run_scenario(
    cfg: &SimConfig,
    menu: &[EstimatorConfig],
    reference: usize,
) -> Result<Vec<ScenarioRow>> {
    cfg.validate()?;
    if menu.is_empty() {
        return Err(Error::Invalid("estimator menu is empty".into()));
    }
    if reference >= menu.len() {
        return Err(Error::Invalid(format!(
            "reference index {reference} out of range for a menu of {}",
            menu.len()
        )));
    }
    for config in menu {
        let spec = PsSpec {
            mode: config.ps_mode,
            covariate_columns: model_columns(config.ps_misspecified),
            add_intercept: true,
            trunc_alpha: config.trunc_alpha,
        };
        spec.validate()?;
    }

    let population = generate_superpopulation(cfg, cfg.seed)?;
    let truths: Vec<f64> = menu
        .iter()
        .map(|config| population.estimand_truth(&config.estimand))
        .collect();

    let per_replication: Vec<Vec<Option<(f64, f64)>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            run_replication(
                cfg,
                &population,
                menu,
                derived_seed(cfg.seed, r as u64 + 1),
            )
        })
        .collect();

    let mut rows = Vec::with_capacity(menu.len());
    for (j, config) in menu.iter().enumerate() {
        let truth = truths[j];
        let estimates: Vec<(f64, f64)> = per_replication
            .iter()
            .filter_map(|replication| replication[j])
            .collect();
        let used = estimates.len();
        let failures = cfg.replications - used;
        let (metrics, mean) = summarize_estimates(&estimates, truth);

        rows.push(ScenarioRow {
            config: config.clone(),
            metrics,
            mean_estimate: mean,
            replications_used: used,
            failures,
        });
    }

    let reference_variance = rows[reference].metrics.mc_variance;
    if !reference_variance.is_finite() {
        return Err(Error::Invalid(format!(
            "reference configuration {} succeeded in fewer than 2 replications; \
             relative efficiency is undefined",
            menu[reference].label()
        )));
    }
    for row in rows.iter_mut() {
        row.metrics.relative_efficiency = reference_variance / row.metrics.mc_variance;
    }

    Ok(rows)
}

/// Collapse one configuration's per-replication `(estimate, se)` pairs into
/// scoring metrics against the known truth. Relative efficiency is left NaN;
/// it is a cross-configuration quantity filled in by the caller. Returns the
/// metrics together with the Monte-Carlo mean estimate. Fewer than two
/// successful replications leave every metric NaN.
pub fn summarize_estimates(estimates: &[(f64, f64)], truth: f64) -> (ScenarioMetrics, f64) {
    let used = estimates.len();
    let (mean, mc_variance, coverage) = if used >= 2 {
        let mean = estimates.iter().map(|(tau, _)| tau).sum::<f64>() / used as f64;
        let variance = estimates
            .iter()
            .map(|(tau, _)| (tau - mean).powi(2))
            .sum::<f64>()
            / (used - 1) as f64;
        let covered = estimates
            .iter()
            .filter(|(tau, se)| (tau - truth).abs() <= CI_MULTIPLIER * se)
            .count();
        (mean, variance, covered as f64 / used as f64)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    (
        ScenarioMetrics {
            relative_bias_pct: 100.0 * (mean - truth) / truth,
            relative_efficiency: f64::NAN,
            coverage,
            mc_variance,
            truth,
        },
        mean,
    )
}

/// Render scenario rows as CSV: one row per configuration with the estimand,
/// model-specification flags, and the bias/efficiency/coverage metrics.
/// Floats carry 17 significant digits so output is reproducible bit-for-bit.
pub fn scenario_rows_to_csv(rows: &[ScenarioRow]) -> String {
    let mut out = String::from(
        "estimator,ps_mode,estimand,ps_spec,outcome_spec,truth,mean_estimate,\
         relative_bias_pct,mc_variance,relative_efficiency,coverage,\
         replications_used,failures\n",
    );
    for row in rows {
        let spec_tag = |m: bool| if m { "Mis" } else { "Cor" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.config.estimator.label(),
            row.config.ps_mode.label(),
            row.config.estimand.label(),
            spec_tag(row.config.ps_misspecified),
            spec_tag(row.config.outcome_misspecified),
            format_full(row.metrics.truth),
            format_full(row.mean_estimate),
            format_full(row.metrics.relative_bias_pct),
            format_full(row.metrics.mc_variance),
            format_full(row.metrics.relative_efficiency),
            format_full(row.metrics.coverage),
            row.replications_used,
            row.failures,
        ));
    }
    out
}
