//! Stacked estimating-equation engine.
//!
//! Every estimator here is the solution of a stack of per-unit estimating
//! equations ψ(θ) whose empirical mean vanishes at the plug-in estimate θ̂.
//! The sandwich variance Â⁻¹B̂(Â⁻¹)ᵀ needs the Jacobian Â = −n⁻¹Σ ∂ψ/∂θ and
//! the outer-product average B̂ = n⁻¹Σ ψψᵀ. Â is assembled by central
//! differences so one numeric scheme covers every estimator configuration; the
//! scheme is cross-validated against the closed-form plain-weighting variance.

use crate::balancing::{Tilt, UnitWeights};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, OutcomeFit};
use crate::glm::{clip_probability, expit, reciprocal_condition, RCOND_THRESHOLD};
use crate::propensity::PsFit;
use crate::sample::{DesignMode, SurveySample};
use nalgebra::{DMatrix, DVector};

/// Structured view of the stacked parameter vector.
#[derive(Debug, Clone)]
pub struct ThetaStack {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub alpha0: Vec<f64>,
    pub alpha1: Vec<f64>,
    /// Within-sample propensity coefficients (retrospective designs only).
    pub beta_fp: Option<Vec<f64>>,
    pub beta_sp: Vec<f64>,
}

impl ThetaStack {
    /// Flatten in the stack's canonical order:
    /// [v1, v2, v3, α₀…, α₁…, β_fp…, β_sp…].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![self.v1, self.v2, self.v3];
        out.extend(&self.alpha0);
        out.extend(&self.alpha1);
        if let Some(b) = &self.beta_fp {
            out.extend(b);
        }
        out.extend(&self.beta_sp);
        out
    }
}

/// Assembled sandwich pieces for one stack configuration.
#[derive(Debug, Clone)]
pub struct EeStack {
    /// Flattened parameter vector the stack was assembled at.
    pub theta: Vec<f64>,
    pub psi_dim: usize,
    pub n: usize,
    /// Bread: −n⁻¹ Σ ∂ψ/∂θ by central differences.
    pub a: DMatrix<f64>,
    /// Meat: n⁻¹ Σ ψψᵀ.
    pub b: DMatrix<f64>,
    /// Sandwich: A⁻¹ B (A⁻¹)ᵀ.
    pub v: DMatrix<f64>,
}

/// Which estimator the stack describes.
enum StackShape {
    /// Rows: [ψ_fp…, ψ_sp…, ψ_or1…, ψ_or0…, ψ_v1, ψ_v2, ψ_v3];
    /// θ: [v1, v2, v3, α₀, α₁, β_fp?, β_sp].
    Augmented { kind: EstimatorKind, q1: usize, q0: usize },
    /// Rows: [ψ_τ1, ψ_τ0, ψ_sp…]; θ: [τ1, τ0, β_sp].
    ArmMeans,
}

/// Everything needed to evaluate the per-unit stacked residual at any θ.
pub struct StackConfig<'a> {
    sample: &'a SurveySample,
    ps: &'a PsFit,
    tilt: Tilt,
    /// Truncation-window indicator per unit, frozen at the plug-in fit.
    frozen_window: Vec<f64>,
    outcome_columns: Vec<usize>,
    clever_in_stack: (bool, bool),
    shape: StackShape,
    p_fp: usize,
    p_sp: usize,
}

impl<'a> StackConfig<'a> {
    /// Configuration for an augmented estimator's full stack.
    pub fn augmented(
        sample: &'a SurveySample,
        ps: &'a PsFit,
        uw: &UnitWeights,
        of: &OutcomeFit,
    ) -> Result<Self> {
        let clever_in_stack = (
            of.kind == EstimatorKind::Cvr && !of.clever_dropped.0,
            of.kind == EstimatorKind::Cvr && !of.clever_dropped.1,
        );
        let base_q = of.outcome_columns.len() + 1;
        let q1 = base_q + usize::from(clever_in_stack.0);
        let q0 = base_q + usize::from(clever_in_stack.1);
        Ok(Self {
            sample,
            ps,
            tilt: uw.spec.tilt(),
            frozen_window: uw.h.iter().map(|&h| if h > 0.0 { 1.0 } else { 0.0 }).collect(),
            outcome_columns: of.outcome_columns.clone(),
            clever_in_stack,
            shape: StackShape::Augmented { kind: of.kind, q1, q0 },
            p_fp: match sample.design_mode() {
                DesignMode::Retrospective => {
                    ps.fp_design.as_ref().map(|d| d.p()).ok_or(Error::MissingSampleLevelFit(
                        "retrospective stack needs the within-sample fit",
                    ))?
                }
                DesignMode::Prospective => 0,
            },
            p_sp: ps.sp_design.p(),
        })
    }

    /// Configuration for the plain weighting estimator's arm-mean stack
    /// (used to cross-validate the closed-form variance).
    pub fn arm_means(sample: &'a SurveySample, ps: &'a PsFit, uw: &UnitWeights) -> Self {
        Self {
            sample,
            ps,
            tilt: uw.spec.tilt(),
            frozen_window: uw.h.iter().map(|&h| if h > 0.0 { 1.0 } else { 0.0 }).collect(),
            outcome_columns: Vec::new(),
            clever_in_stack: (false, false),
            shape: StackShape::ArmMeans,
            p_fp: 0,
            p_sp: ps.sp_design.p(),
        }
    }

    /// Total parameter dimension.
    pub fn theta_dim(&self) -> usize {
        match &self.shape {
            StackShape::Augmented { q1, q0, .. } => 3 + q0 + q1 + self.p_fp + self.p_sp,
            StackShape::ArmMeans => 2 + self.p_sp,
        }
    }

    /// Residual-vector dimension (equal to the parameter dimension: the stack
    /// is exactly identified).
    pub fn psi_dim(&self) -> usize {
        self.theta_dim()
    }

    /// Arm weights (w1, w0) and tilting mass h for unit `i` at propensity
    /// coefficients `beta_sp`, using the same arithmetic as the weight builder
    /// and holding any truncation indicator fixed.
    fn weights_at(&self, i: usize, beta_sp: &[f64]) -> (f64, f64, f64, f64) {
        let w = self.sample.survey_weight()[i];
        let mut eta = 0.0;
        for j in 0..self.p_sp {
            eta += self.ps.sp_design.get(i, j) * beta_sp[j];
        }
        let e = clip_probability(expit(eta));
        let window = self.frozen_window[i];
        let smooth_h = match self.tilt {
            Tilt::Combined => 1.0,
            Tilt::Treated => e,
            Tilt::Control => 1.0 - e,
            Tilt::Overlap => e * (1.0 - e),
            // The indicator is the whole tilt; its value is frozen.
            Tilt::Truncated => 1.0,
        };
        let h = smooth_h * window;
        let (w1, w0) = match self.tilt {
            Tilt::Overlap => (window * (1.0 - e) * w, window * e * w),
            _ => (h * w / e, h * w / (1.0 - e)),
        };
        (e, h, w1, w0)
    }
}

/// Evaluate the stacked residual vector for one unit at an arbitrary θ.
pub fn evaluate_psi(cfg: &StackConfig, i: usize, theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cfg.psi_dim()];
    evaluate_psi_into(cfg, i, theta, &mut out);
    out
}

fn evaluate_psi_into(cfg: &StackConfig, i: usize, theta: &[f64], out: &mut [f64]) {
    debug_assert_eq!(theta.len(), cfg.theta_dim());
    let sample = cfg.sample;
    let z = sample.z()[i];
    let y = sample.y()[i];
    let w = sample.survey_weight()[i];

    match &cfg.shape {
        StackShape::ArmMeans => {
            let tau1 = theta[0];
            let tau0 = theta[1];
            let beta_sp = &theta[2..];
            let (e, _h, w1, w0) = cfg.weights_at(i, beta_sp);
            out[0] = z * w1 * (y - tau1);
            out[1] = (1.0 - z) * w0 * (y - tau0);
            for j in 0..cfg.p_sp {
                out[2 + j] = cfg.ps.sp_reg_weights[i] * (z - e) * cfg.ps.sp_design.get(i, j);
            }
        }
        StackShape::Augmented { kind, q1, q0 } => {
            let v1 = theta[0];
            let v2 = theta[1];
            let v3 = theta[2];
            let alpha0 = &theta[3..3 + q0];
            let alpha1 = &theta[3 + q0..3 + q0 + q1];
            let beta_fp = &theta[3 + q0 + q1..3 + q0 + q1 + cfg.p_fp];
            let beta_sp = &theta[3 + q0 + q1 + cfg.p_fp..];

            let (e_sp, h, w1, w0) = cfg.weights_at(i, beta_sp);

            // Selection probability: the discrepancy ratio moves with both
            // coefficient blocks in retrospective designs.
            let p_s = match sample.design_mode() {
                DesignMode::Retrospective => {
                    let fp_design = cfg.ps.fp_design.as_ref().expect("validated at construction");
                    let mut eta = 0.0;
                    for j in 0..cfg.p_fp {
                        eta += fp_design.get(i, j) * beta_fp[j];
                    }
                    let e_fp = clip_probability(expit(eta));
                    let r = if z == 1.0 { e_sp / e_fp } else { (1.0 - e_sp) / (1.0 - e_fp) };
                    (r / w).min(1.0)
                }
                DesignMode::Prospective => (1.0 / w).min(1.0),
            };
            let h_over_ps = h / p_s;

            // Outcome designs; the clever column is re-derived from β.
            let x = sample.covariates();
            let base_q = cfg.outcome_columns.len() + 1;
            let mut m1 = alpha1[0];
            let mut m0 = alpha0[0];
            for (j, &c) in cfg.outcome_columns.iter().enumerate() {
                m1 += alpha1[j + 1] * x.get(i, c);
                m0 += alpha0[j + 1] * x.get(i, c);
            }
            if cfg.clever_in_stack.0 {
                m1 += alpha1[base_q] * w1;
            }
            if cfg.clever_in_stack.1 {
                m0 += alpha0[base_q] * w0;
            }

            let (wor1, wor0) = if *kind == EstimatorKind::Wet { (w1, w0) } else { (1.0, 1.0) };

            let mut k = 0;
            // Within-sample propensity score equation.
            if cfg.p_fp > 0 {
                let fp_design = cfg.ps.fp_design.as_ref().expect("validated at construction");
                let mut eta = 0.0;
                for j in 0..cfg.p_fp {
                    eta += fp_design.get(i, j) * beta_fp[j];
                }
                let e_fp = clip_probability(expit(eta));
                for j in 0..cfg.p_fp {
                    out[k + j] = fp_design.get(i, j) * (z - e_fp);
                }
                k += cfg.p_fp;
            }
            // Population-level propensity score equation.
            for j in 0..cfg.p_sp {
                out[k + j] = cfg.ps.sp_reg_weights[i] * (z - e_sp) * cfg.ps.sp_design.get(i, j);
            }
            k += cfg.p_sp;
            // Treated-arm outcome score.
            let r1 = wor1 * z * (y - m1);
            out[k] = r1;
            for (j, &c) in cfg.outcome_columns.iter().enumerate() {
                out[k + j + 1] = r1 * x.get(i, c);
            }
            if cfg.clever_in_stack.0 {
                out[k + base_q] = r1 * w1;
            }
            k += q1;
            // Control-arm outcome score.
            let r0 = wor0 * (1.0 - z) * (y - m0);
            out[k] = r0;
            for (j, &c) in cfg.outcome_columns.iter().enumerate() {
                out[k + j + 1] = r0 * x.get(i, c);
            }
            if cfg.clever_in_stack.1 {
                out[k + base_q] = r0 * w0;
            }
            k += q0;
            // The three effect components.
            out[k] = h_over_ps * (m1 - m0 - v1);
            out[k + 1] = w1 * z * (y - m1 - v2);
            out[k + 2] = w0 * (1.0 - z) * (y - m0 - v3);
        }
    }
}

/// Assemble bread, meat, and sandwich at θ.
///
/// The bread uses central differences with per-coordinate step
/// (machine ε)^⅓·max(1, |θⱼ|); the truncation indicator stays at its plug-in
/// value throughout, so the differentiated map is smooth.
pub fn assemble_sandwich(cfg: &StackConfig, theta: &[f64]) -> Result<EeStack> {
    let n = cfg.sample.n();
    let nf = n as f64;
    let dim = cfg.theta_dim();
    if theta.len() != dim {
        return Err(Error::Invalid(format!(
            "stack expects {dim} parameters, got {}",
            theta.len()
        )));
    }
    let eps = f64::EPSILON.powf(1.0 / 3.0);

    let mut a = DMatrix::zeros(dim, dim);
    let mut tp = theta.to_vec();
    let mut tm = theta.to_vec();
    let mut psi_p = vec![0.0; dim];
    let mut psi_m = vec![0.0; dim];
    for j in 0..dim {
        let hj = eps * theta[j].abs().max(1.0);
        tp[j] = theta[j] + hj;
        tm[j] = theta[j] - hj;
        let mut col = vec![0.0; dim];
        for i in 0..n {
            evaluate_psi_into(cfg, i, &tp, &mut psi_p);
            evaluate_psi_into(cfg, i, &tm, &mut psi_m);
            for r in 0..dim {
                col[r] += (psi_p[r] - psi_m[r]) / (2.0 * hj);
            }
        }
        for r in 0..dim {
            a[(r, j)] = -col[r] / nf;
        }
        tp[j] = theta[j];
        tm[j] = theta[j];
    }

    let mut b = DMatrix::zeros(dim, dim);
    let mut psi = vec![0.0; dim];
    for i in 0..n {
        evaluate_psi_into(cfg, i, theta, &mut psi);
        for r in 0..dim {
            for c in r..dim {
                b[(r, c)] += psi[r] * psi[c] / nf;
            }
        }
    }
    // Mirror the upper triangle.
    for r in 0..dim {
        for c in 0..r {
            b[(r, c)] = b[(c, r)];
        }
    }

    let rcond = reciprocal_condition(&a);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularA { rcond });
    }
    let a_inv = a.clone().lu().try_inverse().ok_or(Error::SingularA { rcond })?;
    let v = &a_inv * &b * a_inv.transpose();

    Ok(EeStack { theta: theta.to_vec(), psi_dim: dim, n, a, b, v })
}

/// Variance of τ̂ = v₁ + v₂ − v₃ read off an augmented stack: gᵀVg/n with the
/// (+1, +1, −1, 0, …) contrast.
pub fn tau_variance(stack: &EeStack) -> f64 {
    let dim = stack.psi_dim;
    let mut g = DVector::zeros(dim);
    g[0] = 1.0;
    g[1] = 1.0;
    g[2] = -1.0;
    let quad = (g.transpose() * &stack.v * &g)[(0, 0)];
    quad / stack.n as f64
}

/// Build and assemble the full stack for one augmented estimator at its
/// plug-in solution.
pub fn assemble_augmented_stack(
    sample: &SurveySample,
    ps: &PsFit,
    uw: &UnitWeights,
    of: &OutcomeFit,
    v: (f64, f64, f64),
) -> Result<EeStack> {
    let cfg = StackConfig::augmented(sample, ps, uw, of)?;
    let strip = |alpha: &[f64], in_stack: bool| -> Vec<f64> {
        if of.kind == EstimatorKind::Cvr && !in_stack {
            // The dropped clever coefficient is pinned at zero and carries no
            // estimating equation.
            alpha[..alpha.len() - 1].to_vec()
        } else {
            alpha.to_vec()
        }
    };
    let theta = ThetaStack {
        v1: v.0,
        v2: v.1,
        v3: v.2,
        alpha0: strip(&of.alpha0, cfg.clever_in_stack.1),
        alpha1: strip(&of.alpha1, cfg.clever_in_stack.0),
        beta_fp: ps.beta_fp.clone(),
        beta_sp: ps.beta_sp.clone(),
    };
    assemble_sandwich(&cfg, &theta.flatten())
}

/// Standard error of the plain weighting estimator assembled through the
/// numeric stack rather than the closed-form gradients.
///
/// The arm-mean stack's finite-difference Jacobian contains the same gradient
/// and information blocks the closed form uses; extracting them and applying
/// the pinned population-scale normalization cross-validates the derivative
/// assembly end to end. Agreement is limited only by the differencing error.
pub fn psw_stacked_se(
    sample: &SurveySample,
    ps: &PsFit,
    uw: &UnitWeights,
    tau1: f64,
    tau0: f64,
) -> Result<f64> {
    let cfg = StackConfig::arm_means(sample, ps, uw);
    let mut theta = vec![tau1, tau0];
    theta.extend(&ps.beta_sp);
    let stack = assemble_sandwich(&cfg, &theta)?;

    let n = sample.n();
    let nf = n as f64;
    let p = ps.sp_design.p();
    let e_block = stack.a.view((2, 2), (p, p)).into_owned();
    let mut h_vec = DVector::zeros(p);
    for j in 0..p {
        h_vec[j] = -stack.a[(0, 2 + j)] + stack.a[(1, 2 + j)];
    }
    let rcond = reciprocal_condition(&e_block);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularA { rcond });
    }
    let ht_einv = e_block.lu().solve(&h_vec).ok_or(Error::SingularA { rcond })?;

    let nu = uw.h_over_ps.iter().sum::<f64>() / nf;
    let mut var = 0.0;
    let mut psi = vec![0.0; cfg.psi_dim()];
    for i in 0..n {
        evaluate_psi_into(&cfg, i, &theta, &mut psi);
        let mut score_term = 0.0;
        for j in 0..p {
            score_term += ht_einv[j] * psi[2 + j];
        }
        let infl = psi[0] - psi[1] + score_term;
        var += (infl / nu) * (infl / nu) / (nf * nf);
    }
    Ok(var.sqrt())
}
