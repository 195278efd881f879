//! Monte-Carlo study harness: a synthetic multi-stage survey population with
//! confounded treatment assignment, two sampling mechanisms, and a scenario
//! runner that scores estimator configurations by relative bias, relative
//! efficiency, and confidence-interval coverage against population truths.
//!
//! The generated population has six correlated baseline covariates (plus their
//! leading interaction), a logistic treatment model whose slope scale controls
//! propensity overlap, and a linear outcome model with treatment-effect
//! heterogeneity. Samples are drawn either by stratified two-stage cluster
//! sampling with inverse-inclusion-probability weights, or by Bernoulli
//! selection whose probability depends on covariates and treatment.

mod parse;
mod population;
mod sampling;
mod scenario;

pub use parse::{parse_scenario, ScenarioSpec};
pub use population::{generate_superpopulation, Population};
pub use sampling::{draw_multistage_sample, draw_treatment_dependent_sample};
pub use scenario::{
    run_scenario, scenario_rows_to_csv, summarize_estimates, EstimatorConfig, ScenarioMetrics,
    ScenarioRow,
};

use crate::error::{Error, Result};

/// Number of baseline covariates in the generated population (excluding the
/// interaction column that is appended as covariate 7).
pub const N_BASE_COVARIATES: usize = 6;

/// Clusters selected per stratum by the multi-stage design.
pub const CLUSTERS_SELECTED: usize = 5;

/// RNG stream used for population generation.
const POPULATION_STREAM: u64 = 0;
/// RNG stream used for sample draws.
const SAMPLE_STREAM: u64 = 1;

/// How sample inclusion is decided.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingDesign {
    /// Stratified two-stage cluster sampling: within every stratum,
    /// [`CLUSTERS_SELECTED`] clusters are drawn by simple random sampling and
    /// an equal number of units is drawn from each selected cluster so the
    /// stratum contributes its allocation. Survey weight = inverse inclusion
    /// probability.
    Multistage {
        /// Units to draw per stratum; length must equal `n_strata` and each
        /// entry must split evenly across the selected clusters.
        allocations: Vec<usize>,
    },
    /// Independent Bernoulli selection with
    /// logit p = c0 + delta_s·Z + cᵀX; survey weight = 1/p. Selection depends
    /// on treatment, so downstream estimation should treat the sample as
    /// retrospective and (at the default coefficients) truncate fitted
    /// propensity scores at α = 0.001.
    TreatmentDependent {
        c0: f64,
        delta_s: f64,
        c: [f64; N_BASE_COVARIATES],
    },
}

impl SamplingDesign {
    /// The covariate-and-treatment-dependent Bernoulli design at its default
    /// calibration: baseline inclusion rate 0.5%, treated units slightly less
    /// likely to be sampled, mild covariate effects.
    pub fn covariate_treatment_dependent() -> Self {
        SamplingDesign::TreatmentDependent {
            c0: (0.005f64 / 0.995).ln(),
            delta_s: 0.9f64.ln(),
            c: [
                1.05f64.ln(),
                1.10f64.ln(),
                1.15f64.ln(),
                1.10f64.ln(),
                1.05f64.ln(),
                1.10f64.ln(),
            ],
        }
    }
}

/// Full description of one simulated world: population layout, covariate
/// correlation scales, treatment and outcome models, sampling design, and the
/// replication budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_strata: usize,
    pub clusters_per_stratum: usize,
    pub units_per_cluster: usize,
    /// Standard deviation of the per-covariate stratum-level mean shifts.
    pub sigma_stratum: f64,
    /// Standard deviation of the per-covariate cluster-level mean shifts.
    pub sigma_cluster: f64,
    /// Treatment-model intercept (controls prevalence).
    pub a0: f64,
    /// Treatment-model slope scale (controls propensity overlap).
    pub psi: f64,
    /// Treatment-model covariate coefficients.
    pub a: [f64; N_BASE_COVARIATES],
    /// Treatment-model coefficient on the X₁X₂ interaction.
    pub a7: f64,
    /// Outcome intercept.
    pub b0: f64,
    /// Outcome covariate coefficients (shared by both potential outcomes).
    pub b: [f64; N_BASE_COVARIATES],
    /// Interaction coefficient in the untreated outcome surface.
    pub b7: f64,
    /// Interaction coefficient in the treatment-effect surface.
    pub b8: f64,
    /// Scale of the untreated covariate signal.
    pub delta0: f64,
    /// Constant additive treatment effect.
    pub delta1: f64,
    /// Scale of treatment-effect heterogeneity.
    pub delta2: f64,
    pub sampling: SamplingDesign,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// Scaled-down good-overlap defaults: a 200,000-unit population
    /// (10 strata × 20 clusters × 1,000 units) sampled at 1,000 units per
    /// replication with unequal stratum allocations.
    fn default() -> Self {
        SimConfig {
            n_strata: 10,
            clusters_per_stratum: 20,
            units_per_cluster: 1_000,
            sigma_stratum: 0.35,
            sigma_cluster: 0.15,
            a0: (35.0f64 / 80.0).ln(),
            psi: 0.6,
            a: [
                1.1f64.ln(),
                1.25f64.ln(),
                1.5f64.ln(),
                1.75f64.ln(),
                2.0f64.ln(),
                2.5f64.ln(),
            ],
            a7: 1.1f64.ln(),
            b0: 0.0,
            b: [2.5, -2.0, 1.75, -1.25, 1.5, 1.1],
            b7: 2.5,
            b8: 1.5,
            delta0: 0.3,
            delta1: 1.0,
            delta2: 0.2,
            sampling: SamplingDesign::Multistage {
                allocations: vec![170, 150, 140, 130, 120, 80, 70, 60, 50, 30],
            },
            replications: 500,
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Default configuration with the treatment model rescaled so propensity
    /// scores concentrate near 0 and 1 (poor overlap) at ~30% prevalence.
    pub fn poor_overlap() -> Self {
        SimConfig {
            psi: 2.0,
            a0: (20.0f64 / 80.0).ln(),
            ..SimConfig::default()
        }
    }

    /// Total number of units in the generated population.
    pub fn population_size(&self) -> usize {
        self.n_strata * self.clusters_per_stratum * self.units_per_cluster
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_strata == 0 || self.clusters_per_stratum == 0 || self.units_per_cluster == 0 {
            return Err(Error::Invalid(
                "population layout requires n_strata, clusters_per_stratum, and \
                 units_per_cluster all positive"
                    .into(),
            ));
        }
        if !(self.sigma_stratum > 0.0) || !self.sigma_stratum.is_finite() {
            return Err(Error::Invalid(format!(
                "sigma_stratum must be positive and finite, got {}",
                self.sigma_stratum
            )));
        }
        if !(self.sigma_cluster > 0.0) || !self.sigma_cluster.is_finite() {
            return Err(Error::Invalid(format!(
                "sigma_cluster must be positive and finite, got {}",
                self.sigma_cluster
            )));
        }
        let scalars = [
            ("a0", self.a0),
            ("psi", self.psi),
            ("a7", self.a7),
            ("b0", self.b0),
            ("b7", self.b7),
            ("b8", self.b8),
            ("delta0", self.delta0),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
        ];
        for (name, value) in scalars {
            if !value.is_finite() {
                return Err(Error::Invalid(format!(
                    "model parameter {name} must be finite, got {value}"
                )));
            }
        }
        if self.a.iter().chain(self.b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid(
                "model coefficient vectors must be finite".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::Invalid("replications must be positive".into()));
        }
        match &self.sampling {
            SamplingDesign::Multistage { allocations } => {
                if allocations.len() != self.n_strata {
                    return Err(Error::Invalid(format!(
                        "allocations has {} entries but the population has {} strata",
                        allocations.len(),
                        self.n_strata
                    )));
                }
                if allocations.iter().any(|&a| a == 0) {
                    return Err(Error::Invalid(
                        "every stratum allocation must be positive".into(),
                    ));
                }
            }
            SamplingDesign::TreatmentDependent { c0, delta_s, c } => {
                if !c0.is_finite() || !delta_s.is_finite() || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid(
                        "treatment-dependent sampling coefficients must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Mix a base seed with a replication index into an independent stream seed
/// (standard splitmix64 finalizer), so replication results never depend on
/// worker scheduling.
pub(crate) fn derived_seed(seed: u64, index: u64) -> u64 {
    let mut s = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    s ^= s >> 30;
    s = s.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    s ^= s >> 27;
    s = s.wrapping_mul(0x94D0_49BB_1331_11EB);
    s ^= s >> 31;
    s
}
