//! Weighted logistic and linear model fits.
//!
//! The logistic solver is a damped Newton iteration on the weighted log-likelihood,
//! run to a score tolerance far tighter than estimation noise so that the fitted
//! coefficients are a pure function of the data, not of solver internals. On
//! quasi-separated data the likelihood has no finite maximizer and the iteration
//! walks a plateau; the separation bound converts a walk past ±30 into an error.

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Iteration cap for the logistic solver.
pub const MAX_ITERATIONS: usize = 100;
/// A coefficient beyond this magnitude means the likelihood is drifting to a
/// boundary; the logit is saturated far before ±30.
pub const SEPARATION_BOUND: f64 = 30.0;
/// Convergence: max-norm of the weighted score relative to the total weight.
pub const SCORE_TOLERANCE: f64 = 1e-12;
/// Reciprocal-condition threshold below which a Gram/information matrix is
/// treated as rank-deficient.
pub const RCOND_THRESHOLD: f64 = 1e-12;
/// Fitted probabilities are clipped into [CLIP, 1 − CLIP] after convergence so
/// that downstream weight formulas never divide by zero.
pub const CLIP: f64 = 1e-6;

/// Result of a converged model fit.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: DVector<f64>,
    /// Fitted values: probabilities (clipped inside `(0,1)`) for the logistic
    /// fit, linear predictions for the linear fit.
    pub fitted: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
}

pub(crate) fn expit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub(crate) fn clip_probability(p: f64) -> f64 {
    p.clamp(CLIP, 1.0 - CLIP)
}

/// Reciprocal condition number from the singular values of a small matrix.
pub(crate) fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if max <= 0.0 {
        0.0
    } else {
        min / max
    }
}

fn validate_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Invalid("weight vector length does not match design".into()));
    }
    if w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::Invalid("weights must be strictly positive and finite".into()));
    }
    Ok(())
}

fn deviance_logistic(x: &DMatrix<f64>, z: &[f64], w: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let mut dev = 0.0;
    for i in 0..z.len() {
        let mu = expit(eta[i]).clamp(1e-300, 1.0 - 1e-16);
        dev += -2.0 * w[i] * (z[i] * mu.ln() + (1.0 - z[i]) * (1.0 - mu).ln());
    }
    dev
}

/// Weighted logistic maximum likelihood.
///
/// Solves the weighted score equation Σᵢ wᵢ(zᵢ − expit(xᵢᵀβ))xᵢ = 0 by damped
/// Newton: full steps while the deviance does not increase, halved otherwise.
/// Converges when ‖score‖∞ ≤ 1e-12·Σw. The returned fitted probabilities are
/// clipped into [1e-6, 1−1e-6].
pub fn fit_weighted_logistic(x: &DesignMatrix, z: &[f64], w: &[f64]) -> Result<GlmFit> {
    let n = x.n();
    let p = x.p();
    if z.len() != n {
        return Err(Error::Invalid("response vector length does not match design".into()));
    }
    if z.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Invalid("treatment indicator must be 0/1".into()));
    }
    if !z.iter().any(|&v| v == 1.0) || !z.iter().any(|&v| v == 0.0) {
        return Err(Error::Invalid("both classes must be present".into()));
    }
    validate_weights(w, n)?;

    let xm = x.matrix();
    let total_weight: f64 = w.iter().sum();
    let tol = SCORE_TOLERANCE * total_weight;

    let mut beta = DVector::zeros(p);
    let mut dev = deviance_logistic(xm, z, w, &beta);

    for iter in 0..MAX_ITERATIONS {
        let eta = xm * &beta;
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for i in 0..n {
            let mu = expit(eta[i]);
            let r = w[i] * (z[i] - mu);
            let s = w[i] * mu * (1.0 - mu);
            for j in 0..p {
                grad[j] += r * xm[(i, j)];
                for k in 0..p {
                    hess[(j, k)] += s * xm[(i, j)] * xm[(i, k)];
                }
            }
        }

        if grad.amax() <= tol {
            let fitted =
                DVector::from_iterator(n, eta.iter().map(|&e| clip_probability(expit(e))));
            return Ok(GlmFit { coefficients: beta, fitted, converged: true, iterations: iter, deviance: dev });
        }

        let rcond = reciprocal_condition(&hess);
        if rcond < RCOND_THRESHOLD {
            return Err(Error::DegenerateDesign { context: "weighted logistic information", rcond });
        }
        let step = hess
            .lu()
            .solve(&grad)
            .ok_or(Error::DegenerateDesign { context: "weighted logistic information", rcond })?;

        // The acceptance slack is relative to the deviance scale: deviance is
        // proportional to Σw, so an absolute slack would stall in rounding
        // noise for large total weights.
        let slack = 1e-10 * (1.0 + dev.abs());
        let mut t = 1.0;
        loop {
            let candidate = &beta + t * &step;
            let cand_dev = deviance_logistic(xm, z, w, &candidate);
            if cand_dev <= dev + slack || t < 1e-10 {
                beta = candidate;
                dev = cand_dev;
                break;
            }
            t *= 0.5;
        }

        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(Error::Separation { context: "weighted logistic", bound: SEPARATION_BOUND });
        }
    }

    Err(Error::NonConvergence { context: "weighted logistic", max_iter: MAX_ITERATIONS })
}

/// Weighted least squares via the normal equations XᵀWX α = XᵀWy.
pub fn fit_weighted_linear(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<GlmFit> {
    let n = x.n();
    let p = x.p();
    if y.len() != n {
        return Err(Error::Invalid("response vector length does not match design".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("response contains non-finite values".into()));
    }
    validate_weights(w, n)?;

    let xm = x.matrix();
    let mut gram = DMatrix::zeros(p, p);
    let mut moment = DVector::zeros(p);
    for i in 0..n {
        for j in 0..p {
            moment[j] += w[i] * xm[(i, j)] * y[i];
            for k in 0..p {
                gram[(j, k)] += w[i] * xm[(i, j)] * xm[(i, k)];
            }
        }
    }

    let rcond = reciprocal_condition(&gram);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::DegenerateDesign { context: "weighted linear Gram matrix", rcond });
    }
    let coefficients = gram
        .lu()
        .solve(&moment)
        .ok_or(Error::DegenerateDesign { context: "weighted linear Gram matrix", rcond })?;

    let fitted = xm * &coefficients;
    let deviance =
        (0..n).map(|i| w[i] * (y[i] - fitted[i]) * (y[i] - fitted[i])).sum();
    Ok(GlmFit { coefficients, fitted, converged: true, iterations: 1, deviance })
}
