//! The observed survey sample: covariates, treatment, outcome, survey weights,
//! and how the sample came to be (before or after exposure).

use crate::design::DesignMatrix;
use crate::error::{Error, Result};

/// Whether sampling happened after exposure (arm-specific sampling
/// probabilities, survey weight = 1/p_z) or before it (a single selection
/// probability, survey weight = 1/p(S=1|X)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    Retrospective,
    Prospective,
}

/// One observed complex-survey sample.
#[derive(Debug, Clone)]
pub struct SurveySample {
    x: DesignMatrix,
    z: Vec<f64>,
    y: Vec<f64>,
    survey_weight: Vec<f64>,
    design_mode: DesignMode,
}

impl SurveySample {
    /// Validate and assemble a sample. `x` holds the baseline covariates
    /// (no intercept column; intercepts are added by the model specs).
    pub fn new(
        x: DesignMatrix,
        z: Vec<f64>,
        y: Vec<f64>,
        survey_weight: Vec<f64>,
        design_mode: DesignMode,
    ) -> Result<Self> {
        let n = x.n();
        if n == 0 {
            return Err(Error::Invalid("sample must be non-empty".into()));
        }
        if z.len() != n || y.len() != n || survey_weight.len() != n {
            return Err(Error::Invalid("sample columns must all have the same length".into()));
        }
        if z.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Invalid("treatment indicator must be 0/1".into()));
        }
        if !z.iter().any(|&v| v == 1.0) || !z.iter().any(|&v| v == 0.0) {
            return Err(Error::Invalid("both treatment arms must be present".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("outcome contains non-finite values".into()));
        }
        if survey_weight.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Invalid("survey weights must be strictly positive and finite".into()));
        }
        Ok(Self { x, z, y, survey_weight, design_mode })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn covariates(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn survey_weight(&self) -> &[f64] {
        &self.survey_weight
    }

    pub fn design_mode(&self) -> DesignMode {
        self.design_mode
    }

    /// A copy with every survey weight multiplied by `c` (used by the
    /// scale-invariance checks).
    pub fn with_scaled_weights(&self, c: f64) -> Result<Self> {
        Self::new(
            self.x.clone(),
            self.z.clone(),
            self.y.clone(),
            self.survey_weight.iter().map(|w| w * c).collect(),
            self.design_mode,
        )
    }
}
