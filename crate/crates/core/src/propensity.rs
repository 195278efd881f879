//! Propensity-score fitting under the four survey-weight incorporation modes,
//! the sample/population discrepancy ratio, and the marginal selection
//! probability that converts tilted contrasts to population scale.

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::glm::{clip_probability, fit_weighted_logistic, GlmFit};
use crate::sample::{DesignMode, SurveySample};

/// How survey weights enter the propensity model:
/// ignored ([`UPs`](PsMode::UPs)), as regression weights ([`WPs`](PsMode::WPs)),
/// as an extra covariate ([`CPs`](PsMode::CPs)), or both ([`CwPs`](PsMode::CwPs)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsMode {
    UPs,
    WPs,
    CPs,
    CwPs,
}

impl PsMode {
    pub fn label(&self) -> &'static str {
        match self {
            PsMode::UPs => "U_PS",
            PsMode::WPs => "W_PS",
            PsMode::CPs => "C_PS",
            PsMode::CwPs => "CW_PS",
        }
    }
}

/// Propensity-model specification.
#[derive(Debug, Clone)]
pub struct PsSpec {
    pub mode: PsMode,
    /// Indices into the sample's covariate matrix to include in the model.
    pub covariate_columns: Vec<usize>,
    pub add_intercept: bool,
    /// Symmetric truncation level: tilting is zeroed outside (α, 1−α).
    /// Zero disables truncation. Valid range [0, 0.1].
    pub trunc_alpha: f64,
}

impl PsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.covariate_columns.is_empty() {
            return Err(Error::Invalid("propensity model needs at least one covariate".into()));
        }
        if !(0.0..=0.1).contains(&self.trunc_alpha) {
            return Err(Error::Invalid(format!(
                "trunc_alpha {} outside [0, 0.1]",
                self.trunc_alpha
            )));
        }
        Ok(())
    }
}

/// Fitted propensity scores and everything the downstream variance machinery
/// needs to re-evaluate them: the exact design each coefficient vector was fit
/// on and the regression weights used.
#[derive(Debug, Clone)]
pub struct PsFit {
    pub beta_sp: Vec<f64>,
    /// Within-sample fit, present in retrospective mode only.
    pub beta_fp: Option<Vec<f64>>,
    /// Population-level score e_sp, clipped inside (0,1).
    pub e_sp: Vec<f64>,
    pub e_fp: Option<Vec<f64>>,
    /// Discrepancy ratio r_z (retrospective mode only).
    pub r_z: Option<Vec<f64>>,
    /// Fit diagnostics: (e_sp fit, e_fp fit when present).
    pub diagnostics: (GlmFit, Option<GlmFit>),
    /// Design the e_sp coefficients refer to (intercept/weight column included
    /// as configured).
    pub sp_design: DesignMatrix,
    /// Design the e_fp coefficients refer to.
    pub fp_design: Option<DesignMatrix>,
    /// Regression weight aᵢ used in the e_sp score equation (survey weight in
    /// the weighted modes, 1 otherwise).
    pub sp_reg_weights: Vec<f64>,
    pub mode: PsMode,
    pub trunc_alpha: f64,
    /// True when the appended weight covariate was constant and therefore
    /// dropped to keep the design full-rank.
    pub weight_column_dropped: bool,
}

fn is_numerically_constant(values: &[f64]) -> bool {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() <= 1e-10 * (1.0 + mean.abs())
}

/// Fit the population-level score e_sp (and, retrospectively, the
/// within-sample score e_fp plus the ratio r_z) under the requested mode.
pub fn fit_propensity(sample: &SurveySample, spec: &PsSpec) -> Result<PsFit> {
    spec.validate()?;
    let base = sample.covariates().select_columns(&spec.covariate_columns)?;
    let base = if spec.add_intercept { base.with_intercept()? } else { base };

    let uses_weight_covariate = matches!(spec.mode, PsMode::CPs | PsMode::CwPs);
    let mut weight_column_dropped = false;
    let sp_design = if uses_weight_covariate {
        if is_numerically_constant(sample.survey_weight()) {
            // A constant extra covariate is exactly collinear with the
            // intercept; drop it (coefficient 0) instead of failing the fit.
            weight_column_dropped = true;
            base.clone()
        } else {
            base.with_appended(sample.survey_weight(), "(survey weight)")?
        }
    } else {
        base.clone()
    };

    let ones = vec![1.0; sample.n()];
    let sp_reg_weights: Vec<f64> = match spec.mode {
        PsMode::WPs | PsMode::CwPs => sample.survey_weight().to_vec(),
        PsMode::UPs | PsMode::CPs => ones.clone(),
    };

    let sp_fit = match fit_weighted_logistic(&sp_design, sample.z(), &sp_reg_weights) {
        Ok(f) => f,
        Err(Error::NonConvergence { max_iter, .. }) => {
            return Err(Error::NonConvergence { context: "population-level propensity fit", max_iter })
        }
        Err(Error::Separation { bound, .. }) => {
            return Err(Error::Separation { context: "population-level propensity fit", bound })
        }
        Err(Error::DegenerateDesign { rcond, .. }) => {
            return Err(Error::DegenerateDesign { context: "population-level propensity design", rcond })
        }
        Err(e) => return Err(e),
    };
    let e_sp: Vec<f64> = sp_fit.fitted.iter().copied().collect();

    let (beta_fp, e_fp, r_z, fp_fit, fp_design) = match sample.design_mode() {
        DesignMode::Retrospective => {
            let fit = match fit_weighted_logistic(&base, sample.z(), &ones) {
                Ok(f) => f,
                Err(Error::NonConvergence { max_iter, .. }) => {
                    return Err(Error::NonConvergence { context: "within-sample propensity fit", max_iter })
                }
                Err(Error::Separation { bound, .. }) => {
                    return Err(Error::Separation { context: "within-sample propensity fit", bound })
                }
                Err(Error::DegenerateDesign { rcond, .. }) => {
                    return Err(Error::DegenerateDesign { context: "within-sample propensity design", rcond })
                }
                Err(e) => return Err(e),
            };
            let e_fp: Vec<f64> = fit.fitted.iter().copied().collect();
            let r = compute_ratio_rz(&e_sp, &e_fp, sample.z())?;
            (
                Some(fit.coefficients.iter().copied().collect::<Vec<f64>>()),
                Some(e_fp),
                Some(r),
                Some(fit),
                Some(base),
            )
        }
        DesignMode::Prospective => (None, None, None, None, None),
    };

    Ok(PsFit {
        beta_sp: sp_fit.coefficients.iter().copied().collect(),
        beta_fp,
        e_sp,
        e_fp,
        r_z,
        diagnostics: (sp_fit, fp_fit),
        sp_design,
        fp_design,
        sp_reg_weights,
        mode: spec.mode,
        trunc_alpha: spec.trunc_alpha,
        weight_column_dropped,
    })
}

/// The discrepancy ratio between the population-level and within-sample
/// scores: rᵢ = e_sp/e_fp for treated units and (1−e_sp)/(1−e_fp) for controls.
pub fn compute_ratio_rz(e_sp: &[f64], e_fp: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if e_sp.len() != e_fp.len() || e_sp.len() != z.len() {
        return Err(Error::Invalid("score vectors must have equal length".into()));
    }
    for &e in e_sp.iter().chain(e_fp) {
        if !(e.is_finite() && e > 0.0 && e < 1.0) {
            return Err(Error::Invalid(format!("propensity score {e} outside (0,1)")));
        }
    }
    Ok(z.iter()
        .zip(e_sp.iter().zip(e_fp))
        .map(|(&zi, (&sp, &fp))| if zi == 1.0 { sp / fp } else { (1.0 - sp) / (1.0 - fp) })
        .collect())
}

/// Per-unit marginal selection probability P(S=1|X), capped at 1.
///
/// Retrospective mode approximates it by r_z·p_z with p_z the inverse survey
/// weight; prospective mode passes the inverse weight through directly.
pub fn marginal_selection_probability(sample: &SurveySample, ps: &PsFit) -> Result<Vec<f64>> {
    match sample.design_mode() {
        DesignMode::Retrospective => {
            let r = ps
                .r_z
                .as_ref()
                .ok_or(Error::MissingSampleLevelFit("retrospective selection probability needs e_fp"))?;
            Ok(r.iter()
                .zip(sample.survey_weight())
                .map(|(&ri, &wi)| (ri / wi).min(1.0))
                .collect())
        }
        DesignMode::Prospective => {
            Ok(sample.survey_weight().iter().map(|&wi| (1.0 / wi).min(1.0)).collect())
        }
    }
}

/// Evaluate a fitted linear predictor and return the clipped probability.
pub(crate) fn predict_probability(design: &DesignMatrix, beta: &[f64], i: usize) -> f64 {
    let mut eta = 0.0;
    for j in 0..design.p() {
        eta += design.get(i, j) * beta[j];
    }
    clip_probability(crate::glm::expit(eta))
}
