//! Tilting functions and the per-unit balancing-weight pairs they induce.
//!
//! A tilting function h(e) picks the target population the treatment effect is
//! averaged over; the arm weights divide h by each arm's effective sampling
//! rate so that weighted sample averages estimate population quantities.

use crate::error::{Error, Result};
use crate::propensity::{marginal_selection_probability, PsFit};
use crate::sample::SurveySample;

/// The five supported target populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tilt {
    /// Everyone: h = 1 (population average effect).
    Combined,
    /// The treated population: h = e.
    Treated,
    /// The control population: h = 1 − e.
    Control,
    /// The clinical-equipoise population: h = e(1 − e).
    Overlap,
    /// The interior population: h = 1 inside (α, 1−α), else 0.
    Truncated,
}

/// A tilt plus its truncation level when the tilt requires one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimandSpec {
    tilt: Tilt,
    alpha: Option<f64>,
}

impl EstimandSpec {
    /// Build a spec; `alpha` is required (in (0, 0.1]) exactly when the tilt
    /// is [`Tilt::Truncated`].
    pub fn new(tilt: Tilt, alpha: Option<f64>) -> Result<Self> {
        match (tilt, alpha) {
            (Tilt::Truncated, Some(a)) if a > 0.0 && a <= 0.1 => Ok(Self { tilt, alpha }),
            (Tilt::Truncated, Some(a)) => {
                Err(Error::Invalid(format!("truncation level {a} outside (0, 0.1]")))
            }
            (Tilt::Truncated, None) => {
                Err(Error::Invalid("truncated estimand needs a truncation level".into()))
            }
            (_, Some(_)) => {
                Err(Error::Invalid("truncation level only applies to the truncated estimand".into()))
            }
            (tilt, None) => Ok(Self { tilt, alpha: None }),
        }
    }

    pub fn combined() -> Self {
        Self { tilt: Tilt::Combined, alpha: None }
    }

    pub fn treated() -> Self {
        Self { tilt: Tilt::Treated, alpha: None }
    }

    pub fn control() -> Self {
        Self { tilt: Tilt::Control, alpha: None }
    }

    pub fn overlap() -> Self {
        Self { tilt: Tilt::Overlap, alpha: None }
    }

    pub fn truncated(alpha: f64) -> Result<Self> {
        Self::new(Tilt::Truncated, Some(alpha))
    }

    pub fn tilt(&self) -> Tilt {
        self.tilt
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match self.tilt {
            Tilt::Combined => "combined",
            Tilt::Treated => "treated",
            Tilt::Control => "control",
            Tilt::Overlap => "overlap",
            Tilt::Truncated => "truncated",
        }
    }
}

/// Per-unit weights for one estimand on one fitted sample.
#[derive(Debug, Clone)]
pub struct UnitWeights {
    /// The estimand these weights target.
    pub spec: EstimandSpec,
    /// Tilting value h(e_sp,i), zeroed outside any truncation window.
    pub h: Vec<f64>,
    /// Treated-arm balancing weight ω₁ per unit.
    pub w1: Vec<f64>,
    /// Control-arm balancing weight ω₀ per unit.
    pub w0: Vec<f64>,
    /// h / P(S=1|X) per unit — the population-scale tilting mass.
    pub h_over_ps: Vec<f64>,
}

/// The tilting function h evaluated at a propensity score.
pub fn tilting_value(spec: &EstimandSpec, e: f64) -> f64 {
    match spec.tilt {
        Tilt::Combined => 1.0,
        Tilt::Treated => e,
        Tilt::Control => 1.0 - e,
        Tilt::Overlap => e * (1.0 - e),
        Tilt::Truncated => {
            let a = spec.alpha.expect("validated at construction");
            if e > a && e < 1.0 - a {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// The arm-weight pair (ω₁, ω₀) = (h/(p₁·e), h/(p₀·(1−e))) for one unit, given
/// arm-specific sampling probabilities. The overlap tilt cancels h's factors
/// analytically, avoiding needless underflow for extreme scores.
pub fn unit_weight_pair(spec: &EstimandSpec, e_sp: f64, p1: f64, p0: f64) -> (f64, f64) {
    match spec.tilt {
        Tilt::Overlap => ((1.0 - e_sp) / p1, e_sp / p0),
        _ => {
            let h = tilting_value(spec, e_sp);
            (h / (p1 * e_sp), h / (p0 * (1.0 - e_sp)))
        }
    }
}

fn truncation_window(alpha: f64, e: f64) -> f64 {
    if alpha > 0.0 && !(e > alpha && e < 1.0 - alpha) {
        0.0
    } else {
        1.0
    }
}

/// Per-unit weight vectors for a whole sample. The propensity fit supplies the
/// scores and (through the fitted selection probabilities) the population
/// scale; the fit's `trunc_alpha` additionally zeroes the window's exterior
/// for any tilt.
pub fn build_unit_weights(
    sample: &SurveySample,
    ps: &PsFit,
    spec: &EstimandSpec,
) -> Result<UnitWeights> {
    let n = sample.n();
    let p_s = marginal_selection_probability(sample, ps)?;
    let w = sample.survey_weight();
    let mut out = UnitWeights {
        spec: *spec,
        h: vec![0.0; n],
        w1: vec![0.0; n],
        w0: vec![0.0; n],
        h_over_ps: vec![0.0; n],
    };
    for i in 0..n {
        let e = ps.e_sp[i];
        let window = truncation_window(ps.trunc_alpha, e);
        let h = tilting_value(spec, e) * window;
        out.h[i] = h;
        if h == 0.0 {
            continue;
        }
        match spec.tilt {
            // Simplified overlap form: h/(p·e) with h = e(1−e) reduces exactly.
            Tilt::Overlap => {
                out.w1[i] = window * (1.0 - e) * w[i];
                out.w0[i] = window * e * w[i];
            }
            _ => {
                out.w1[i] = h * w[i] / e;
                out.w0[i] = h * w[i] / (1.0 - e);
            }
        }
        out.h_over_ps[i] = h / p_s[i];
    }
    Ok(out)
}
