//! The four treatment-effect estimators: the plain weighting estimator with its
//! closed-form sandwich variance, and three augmented (outcome-model-assisted)
//! estimators whose variances come from the stacked-equation engine.

use crate::balancing::{Tilt, UnitWeights};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::glm::{fit_weighted_linear, reciprocal_condition, RCOND_THRESHOLD};
use crate::mestimation;
use crate::propensity::{predict_probability, PsFit};
use crate::sample::SurveySample;
use nalgebra::{DMatrix, DVector};

/// Normal-limit confidence multiplier for the reported intervals.
pub const CI_MULTIPLIER: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Plain weighting (Hájek ratio of balancing-weighted outcomes).
    Psw,
    /// Augmented with per-arm unweighted outcome regressions.
    Mom,
    /// Augmented with the balancing weight as an extra outcome covariate.
    Cvr,
    /// Augmented with balancing-weighted outcome regressions.
    Wet,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Psw => "psw",
            EstimatorKind::Mom => "mom",
            EstimatorKind::Cvr => "cvr",
            EstimatorKind::Wet => "wet",
        }
    }
}

/// Estimator-specific decomposition of the point estimate.
#[derive(Debug, Clone, Copy)]
pub enum Components {
    /// Arm means: tau = tau1 − tau0.
    Psw { tau1: f64, tau0: f64 },
    /// Three-term decomposition: tau = v1 + v2 − v3.
    Augmented { v1: f64, v2: f64, v3: f64 },
}

/// A point estimate with its sandwich standard error.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub estimator: EstimatorKind,
    pub estimand: crate::balancing::EstimandSpec,
    pub tau: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub components: Components,
    /// Units with positive tilting mass (everything inside any truncation window).
    pub n_used: usize,
}

/// Which regression weights an outcome fit used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionWeightsKind {
    None,
    Balancing,
}

/// Per-arm outcome models with predictions for every unit under each arm.
#[derive(Debug, Clone)]
pub struct OutcomeFit {
    pub kind: EstimatorKind,
    pub alpha1: Vec<f64>,
    pub alpha0: Vec<f64>,
    /// Predicted outcome under treatment for every unit.
    pub m1: Vec<f64>,
    /// Predicted outcome under control for every unit.
    pub m0: Vec<f64>,
    pub regression_weights_kind: RegressionWeightsKind,
    /// Per-unit clever-covariate values (w1, w0) when the fit used them.
    pub clever_terms: Option<(Vec<f64>, Vec<f64>)>,
    /// Whether the clever column was dropped per arm because it was constant
    /// (exactly collinear with the intercept).
    pub clever_dropped: (bool, bool),
    /// Covariate-matrix columns the outcome design used.
    pub outcome_columns: Vec<usize>,
}

fn hajek_arm_means(
    sample: &SurveySample,
    uw: &UnitWeights,
    residual1: Option<&[f64]>,
    residual0: Option<&[f64]>,
) -> Result<(f64, f64)> {
    let z = sample.z();
    let y = sample.y();
    let (mut n1, mut d1, mut n0, mut d0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..sample.n() {
        let y1 = residual1.map_or(y[i], |m| y[i] - m[i]);
        let y0 = residual0.map_or(y[i], |m| y[i] - m[i]);
        n1 += uw.w1[i] * z[i] * y1;
        d1 += uw.w1[i] * z[i];
        n0 += uw.w0[i] * (1.0 - z[i]) * y0;
        d0 += uw.w0[i] * (1.0 - z[i]);
    }
    if d1 <= 0.0 {
        return Err(Error::EmptyArmWeight { context: "treated arm carries no balancing weight" });
    }
    if d0 <= 0.0 {
        return Err(Error::EmptyArmWeight { context: "control arm carries no balancing weight" });
    }
    Ok((n1 / d1, n0 / d0))
}

/// Per-unit gradients of the arm weights with respect to the population-level
/// propensity coefficients, as multiples of (weight × design row):
/// dω₁/dβ = f₁·ω₁·x*, dω₀/dβ = f₀·ω₀·x*. The factors follow from
/// differentiating h(e)/e and h(e)/(1−e) through the logistic link.
fn smooth_gradient_factors(tilt: Tilt, e: f64) -> (f64, f64) {
    match tilt {
        Tilt::Combined => (-(1.0 - e), e),
        Tilt::Treated => (0.0, 1.0),
        Tilt::Control => (-1.0, 0.0),
        Tilt::Overlap => (-e, 1.0 - e),
        Tilt::Truncated => unreachable!("truncated tilt uses numeric gradients"),
    }
}

/// The plain weighting estimator with its closed-form sandwich standard error.
///
/// The influence function corrects the arm-mean contrast for the estimation of
/// the propensity coefficients; the correction needs the gradient of each arm
/// weight (closed-form for smooth tilts, central differences for the
/// truncated indicator with the window held fixed) and the propensity-score
/// information matrix.
pub fn estimate_psw(sample: &SurveySample, ps: &PsFit, uw: &UnitWeights) -> Result<EstimateResult> {
    let n = sample.n();
    let nf = n as f64;
    let z = sample.z();
    let y = sample.y();
    let (tau1, tau0) = hajek_arm_means(sample, uw, None, None)?;
    let tau = tau1 - tau0;

    let nu = uw.h_over_ps.iter().sum::<f64>() / nf;
    let design = &ps.sp_design;
    let p = design.p();

    // Information matrix of the propensity score equation.
    let mut info = DMatrix::zeros(p, p);
    for i in 0..n {
        let e = ps.e_sp[i];
        let s = ps.sp_reg_weights[i] * e * (1.0 - e);
        for j in 0..p {
            for k in 0..p {
                info[(j, k)] += s * design.get(i, j) * design.get(i, k) / nf;
            }
        }
    }
    let rcond = reciprocal_condition(&info);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularA { rcond });
    }

    // Gradient of the weighted arm-mean contrast with respect to the
    // propensity coefficients.
    let mut hvec = DVector::zeros(p);
    match uw.spec.tilt() {
        Tilt::Truncated => {
            // Differentiate the smooth 1/e and 1/(1−e) parts numerically,
            // holding the window indicator fixed.
            let eps = f64::EPSILON.powf(1.0 / 3.0);
            let w = sample.survey_weight();
            for j in 0..p {
                let hj = eps * ps.beta_sp[j].abs().max(1.0);
                let mut bp = ps.beta_sp.clone();
                bp[j] += hj;
                let mut bm = ps.beta_sp.clone();
                bm[j] -= hj;
                let mut acc = 0.0;
                for i in 0..n {
                    if uw.h[i] == 0.0 {
                        continue;
                    }
                    let ep = predict_probability(design, &bp, i);
                    let em = predict_probability(design, &bm, i);
                    let g1 = (w[i] / ep - w[i] / em) / (2.0 * hj);
                    let g0 = (w[i] / (1.0 - ep) - w[i] / (1.0 - em)) / (2.0 * hj);
                    acc += z[i] * (y[i] - tau1) * g1 - (1.0 - z[i]) * (y[i] - tau0) * g0;
                }
                hvec[j] = acc / nf;
            }
        }
        tilt => {
            for i in 0..n {
                if uw.h[i] == 0.0 {
                    continue;
                }
                let (f1, f0) = smooth_gradient_factors(tilt, ps.e_sp[i]);
                let scale = z[i] * (y[i] - tau1) * f1 * uw.w1[i]
                    - (1.0 - z[i]) * (y[i] - tau0) * f0 * uw.w0[i];
                for j in 0..p {
                    hvec[j] += scale * design.get(i, j) / nf;
                }
            }
        }
    }

    let ht_einv = info
        .clone()
        .lu()
        .solve(&hvec)
        .ok_or(Error::SingularA { rcond })?;

    let mut var = 0.0;
    for i in 0..n {
        let mut score_term = 0.0;
        for j in 0..p {
            score_term +=
                ht_einv[j] * ps.sp_reg_weights[i] * (z[i] - ps.e_sp[i]) * design.get(i, j);
        }
        let infl = z[i] * uw.w1[i] * (y[i] - tau1) - (1.0 - z[i]) * uw.w0[i] * (y[i] - tau0)
            + score_term;
        var += (infl / nu) * (infl / nu) / (nf * nf);
    }
    let se = var.sqrt();

    Ok(EstimateResult {
        estimator: EstimatorKind::Psw,
        estimand: uw.spec,
        tau,
        se,
        ci_low: tau - CI_MULTIPLIER * se,
        ci_high: tau + CI_MULTIPLIER * se,
        components: Components::Psw { tau1, tau0 },
        n_used: uw.h.iter().filter(|&&h| h > 0.0).count(),
    })
}

fn is_numerically_constant(values: &[f64]) -> bool {
    if values.is_empty() {
        return true;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() <= 1e-10 * (1.0 + mean.abs())
}

struct ArmFit {
    alpha: Vec<f64>,
    clever_dropped: bool,
}

/// Fit one arm's outcome regression and return coefficients aligned with
/// [base columns..., clever]; a dropped clever column gets coefficient 0 and
/// is flagged.
fn fit_arm(
    sample: &SurveySample,
    uw: &UnitWeights,
    kind: EstimatorKind,
    outcome_columns: &[usize],
    arm: f64,
) -> Result<ArmFit> {
    let z = sample.z();
    let y = sample.y();
    let x = sample.covariates();
    let arm_weight = if arm == 1.0 { &uw.w1 } else { &uw.w0 };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    let mut clever: Vec<f64> = Vec::new();
    for i in 0..sample.n() {
        if z[i] != arm {
            continue;
        }
        if kind == EstimatorKind::Wet && arm_weight[i] <= 0.0 {
            // Zero regression weight contributes nothing to the fit.
            continue;
        }
        let mut row = Vec::with_capacity(outcome_columns.len() + 2);
        row.push(1.0);
        for &c in outcome_columns {
            row.push(x.get(i, c));
        }
        rows.push(row);
        ys.push(y[i]);
        ws.push(if kind == EstimatorKind::Wet { arm_weight[i] } else { 1.0 });
        clever.push(arm_weight[i]);
    }
    if rows.is_empty() {
        return Err(Error::EmptyArmWeight {
            context: if arm == 1.0 {
                "no treated units available for the outcome fit"
            } else {
                "no control units available for the outcome fit"
            },
        });
    }

    let mut clever_dropped = false;
    if kind == EstimatorKind::Cvr {
        if is_numerically_constant(&clever) {
            clever_dropped = true;
        } else {
            for (row, &cv) in rows.iter_mut().zip(&clever) {
                row.push(cv);
            }
        }
    }

    let mut names: Vec<String> = vec!["(intercept)".into()];
    names.extend(outcome_columns.iter().map(|c| format!("x{c}")));
    if kind == EstimatorKind::Cvr && !clever_dropped {
        names.push("(clever)".into());
    }
    let design = DesignMatrix::from_rows(&rows, names)?;
    let fit = match fit_weighted_linear(&design, &ys, &ws) {
        Ok(f) => f,
        Err(Error::DegenerateDesign { rcond, .. }) => {
            return Err(Error::DegenerateDesign {
                context: if arm == 1.0 {
                    "treated-arm outcome design"
                } else {
                    "control-arm outcome design"
                },
                rcond,
            })
        }
        Err(e) => return Err(e),
    };

    let mut alpha: Vec<f64> = fit.coefficients.iter().copied().collect();
    if kind == EstimatorKind::Cvr && clever_dropped {
        alpha.push(0.0);
    }
    Ok(ArmFit { alpha, clever_dropped })
}

/// Fit the per-arm outcome regressions for one augmented estimator and
/// predict both potential outcomes for every unit.
///
/// `outcome_columns` selects which covariate-matrix columns enter the outcome
/// design (an intercept is always included). The clever-covariate estimator
/// appends each arm's balancing weight as one extra regressor and predicts
/// with each unit's own weight value; the weighted estimator reuses the plain
/// design but weights each arm's rows by its balancing weights.
pub fn fit_outcome_models(
    sample: &SurveySample,
    uw: &UnitWeights,
    kind: EstimatorKind,
    outcome_columns: &[usize],
) -> Result<OutcomeFit> {
    if kind == EstimatorKind::Psw {
        return Err(Error::Invalid("the plain weighting estimator has no outcome models".into()));
    }
    let fit1 = fit_arm(sample, uw, kind, outcome_columns, 1.0)?;
    let fit0 = fit_arm(sample, uw, kind, outcome_columns, 0.0)?;

    let x = sample.covariates();
    let n = sample.n();
    let predict = |alpha: &[f64], clever: Option<&[f64]>, i: usize| -> f64 {
        let mut v = alpha[0];
        for (j, &c) in outcome_columns.iter().enumerate() {
            v += alpha[j + 1] * x.get(i, c);
        }
        if let Some(cl) = clever {
            v += alpha[outcome_columns.len() + 1] * cl[i];
        }
        v
    };

    let (m1, m0, clever_terms) = if kind == EstimatorKind::Cvr {
        let m1 = (0..n).map(|i| predict(&fit1.alpha, Some(&uw.w1), i)).collect();
        let m0 = (0..n).map(|i| predict(&fit0.alpha, Some(&uw.w0), i)).collect();
        (m1, m0, Some((uw.w1.clone(), uw.w0.clone())))
    } else {
        let m1 = (0..n).map(|i| predict(&fit1.alpha, None, i)).collect();
        let m0 = (0..n).map(|i| predict(&fit0.alpha, None, i)).collect();
        (m1, m0, None)
    };

    Ok(OutcomeFit {
        kind,
        alpha1: fit1.alpha,
        alpha0: fit0.alpha,
        m1,
        m0,
        regression_weights_kind: if kind == EstimatorKind::Wet {
            RegressionWeightsKind::Balancing
        } else {
            RegressionWeightsKind::None
        },
        clever_terms,
        clever_dropped: (fit1.clever_dropped, fit0.clever_dropped),
        outcome_columns: outcome_columns.to_vec(),
    })
}

/// Point estimate of one augmented estimator: the tilted model contrast plus
/// the two weighted residual corrections. Returns (v1, v2, v3).
pub fn augmented_components(
    sample: &SurveySample,
    uw: &UnitWeights,
    of: &OutcomeFit,
) -> Result<(f64, f64, f64)> {
    let (mut num1, mut den1) = (0.0, 0.0);
    for i in 0..sample.n() {
        num1 += uw.h_over_ps[i] * (of.m1[i] - of.m0[i]);
        den1 += uw.h_over_ps[i];
    }
    if den1 <= 0.0 {
        return Err(Error::EmptyArmWeight { context: "tilting mass is zero" });
    }
    let (v2, v3) = hajek_arm_means(sample, uw, Some(&of.m1), Some(&of.m0))?;
    Ok((num1 / den1, v2, v3))
}

/// One augmented estimator: point estimate from the three-term decomposition
/// and standard error from the stacked estimating equations.
pub fn estimate_augmented(
    sample: &SurveySample,
    ps: &PsFit,
    uw: &UnitWeights,
    of: &OutcomeFit,
    kind: EstimatorKind,
) -> Result<EstimateResult> {
    if of.kind != kind {
        return Err(Error::Invalid(format!(
            "outcome models were fit for {} but {} was requested",
            of.kind.label(),
            kind.label()
        )));
    }
    let (v1, v2, v3) = augmented_components(sample, uw, of)?;
    let tau = v1 + v2 - v3;

    let stack = mestimation::assemble_augmented_stack(sample, ps, uw, of, (v1, v2, v3))?;
    let se = mestimation::tau_variance(&stack).sqrt();

    Ok(EstimateResult {
        estimator: kind,
        estimand: uw.spec,
        tau,
        se,
        ci_low: tau - CI_MULTIPLIER * se,
        ci_high: tau + CI_MULTIPLIER * se,
        components: Components::Augmented { v1, v2, v3 },
        n_used: uw.h.iter().filter(|&&h| h > 0.0).count(),
    })
}
