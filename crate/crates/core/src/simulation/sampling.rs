//! Sample draws from a generated population: stratified two-stage cluster
//! sampling with design weights, and covariate/treatment-dependent Bernoulli
//! selection.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Population, SamplingDesign, SimConfig, CLUSTERS_SELECTED, SAMPLE_STREAM};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::sample::{DesignMode, SurveySample};

/// Assemble a [`SurveySample`] from population row indices and their weights.
/// Both sampling mechanisms may depend on covariates (and the Bernoulli one on
/// treatment), so the sample is marked retrospective: downstream estimation
/// recovers P(S=1|X) from the weights and the two propensity fits.
fn sample_from_indices(
    population: &Population,
    indices: &[usize],
    weights: Vec<f64>,
) -> Result<SurveySample> {
    let x = DMatrix::from_fn(indices.len(), population.x().ncols(), |r, c| {
        population.x()[(indices[r], c)]
    });
    let design = DesignMatrix::new(x, Population::covariate_names())?;
    let z = indices.iter().map(|&i| population.z()[i]).collect();
    let y = indices.iter().map(|&i| population.y()[i]).collect();
    SurveySample::new(design, z, y, weights, DesignMode::Retrospective)
}

/// Draw one stratified two-stage cluster sample.
///
/// Within each stratum, [`CLUSTERS_SELECTED`] clusters are chosen by simple
/// random sampling and `allocations[stratum] / CLUSTERS_SELECTED` units are
/// chosen (again by SRS) from each selected cluster. Every sampled unit's
/// survey weight is the inverse of its inclusion probability,
/// (clusters_per_stratum / CLUSTERS_SELECTED) · (cluster_size / units_drawn).
/// Deterministic given `seed`.
pub fn draw_multistage_sample(
    population: &Population,
    allocations: &[usize],
    seed: u64,
) -> Result<SurveySample> {
    if allocations.len() != population.n_strata() {
        return Err(Error::InfeasibleAllocation(format!(
            "{} allocations for {} strata",
            allocations.len(),
            population.n_strata()
        )));
    }
    let n_clusters = population.clusters_per_stratum();
    let cluster_size = population.units_per_cluster();
    if CLUSTERS_SELECTED > n_clusters {
        return Err(Error::InfeasibleAllocation(format!(
            "cannot select {CLUSTERS_SELECTED} of {n_clusters} clusters per stratum"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLE_STREAM);

    let total: usize = allocations.iter().sum();
    let mut indices = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);

    for (stratum, &allocation) in allocations.iter().enumerate() {
        if allocation == 0 || allocation % CLUSTERS_SELECTED != 0 {
            return Err(Error::InfeasibleAllocation(format!(
                "stratum {stratum} allocation {allocation} does not split evenly \
                 across {CLUSTERS_SELECTED} clusters"
            )));
        }
        let units_drawn = allocation / CLUSTERS_SELECTED;
        if units_drawn > cluster_size {
            return Err(Error::InfeasibleAllocation(format!(
                "stratum {stratum} needs {units_drawn} units per cluster but \
                 clusters hold {cluster_size}"
            )));
        }
        let weight = (n_clusters as f64 / CLUSTERS_SELECTED as f64)
            * (cluster_size as f64 / units_drawn as f64);

        let mut chosen_clusters =
            rand::seq::index::sample(&mut rng, n_clusters, CLUSTERS_SELECTED).into_vec();
        chosen_clusters.sort_unstable();
        for cluster in chosen_clusters {
            let base = (stratum * n_clusters + cluster) * cluster_size;
            let mut chosen_units =
                rand::seq::index::sample(&mut rng, cluster_size, units_drawn).into_vec();
            chosen_units.sort_unstable();
            for unit in chosen_units {
                indices.push(base + unit);
                weights.push(weight);
            }
        }
    }

    sample_from_indices(population, &indices, weights)
}

/// Draw one Bernoulli sample whose inclusion probability depends on both
/// covariates and treatment: logit p = c0 + delta_s·Z + cᵀX, survey weight
/// = 1/p. Deterministic given `seed`. Requires
/// [`SamplingDesign::TreatmentDependent`] in `cfg.sampling`.
pub fn draw_treatment_dependent_sample(
    population: &Population,
    cfg: &SimConfig,
    seed: u64,
) -> Result<SurveySample> {
    let SamplingDesign::TreatmentDependent { c0, delta_s, c } = &cfg.sampling else {
        return Err(Error::Invalid(
            "draw_treatment_dependent_sample requires a TreatmentDependent sampling design"
                .into(),
        ));
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLE_STREAM);

    let mut indices = Vec::new();
    let mut weights = Vec::new();
    for i in 0..population.n() {
        let mut logit = c0 + delta_s * population.z()[i];
        for (l, coef) in c.iter().enumerate() {
            logit += coef * population.x()[(i, l)];
        }
        let p = 1.0 / (1.0 + (-logit).exp());
        if rng.random::<f64>() < p {
            indices.push(i);
            weights.push(1.0 / p);
        }
    }

    sample_from_indices(population, &indices, weights)
}
