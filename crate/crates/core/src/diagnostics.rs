//! Population-level covariate balance (weighted standardized mean differences)
//! and balancing-weight health summaries.

use crate::balancing::UnitWeights;
use crate::error::{Error, Result};
use crate::sample::SurveySample;

/// One covariate's weighted balance comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub mean_treated: f64,
    pub mean_control: f64,
    pub pooled_sd: f64,
    pub psmd: f64,
}

/// Weighted covariate means and standardized differences, one row per
/// covariate of the sample.
///
/// Arm means use the balancing weights (treated arm under w1, control under
/// w0); the pooled standard deviation combines the two arms' weighted
/// variances in proportion to their weight masses.
pub fn psmd_table(sample: &SurveySample, uw: &UnitWeights) -> Result<Vec<BalanceRow>> {
    let n = sample.n();
    let z = sample.z();
    let x = sample.covariates();

    let mut mass1 = 0.0;
    let mut mass0 = 0.0;
    for i in 0..n {
        mass1 += uw.w1[i] * z[i];
        mass0 += uw.w0[i] * (1.0 - z[i]);
    }
    if mass1 <= 0.0 {
        return Err(Error::EmptyArmWeight { context: "treated arm carries no balancing weight" });
    }
    if mass0 <= 0.0 {
        return Err(Error::EmptyArmWeight { context: "control arm carries no balancing weight" });
    }

    let mut rows = Vec::with_capacity(x.p());
    for c in 0..x.p() {
        let mut s1 = 0.0;
        let mut s0 = 0.0;
        for i in 0..n {
            s1 += uw.w1[i] * z[i] * x.get(i, c);
            s0 += uw.w0[i] * (1.0 - z[i]) * x.get(i, c);
        }
        let mean_treated = s1 / mass1;
        let mean_control = s0 / mass0;

        let mut v1 = 0.0;
        let mut v0 = 0.0;
        for i in 0..n {
            let d1 = x.get(i, c) - mean_treated;
            let d0 = x.get(i, c) - mean_control;
            v1 += uw.w1[i] * z[i] * d1 * d1;
            v0 += uw.w0[i] * (1.0 - z[i]) * d0 * d0;
        }
        let pooled_sd = ((mass1 * (v1 / mass1) + mass0 * (v0 / mass0)) / (mass1 + mass0)).sqrt();

        let diff = (mean_treated - mean_control).abs();
        let psmd = if pooled_sd < 1e-12 {
            if diff <= 1e-12 * (1.0 + mean_treated.abs().max(mean_control.abs())) {
                0.0
            } else {
                return Err(Error::ZeroVariance(format!(
                    "covariate '{}' has zero pooled spread but unequal arm means",
                    x.names()[c]
                )));
            }
        } else {
            diff / pooled_sd
        };

        rows.push(BalanceRow {
            covariate: x.names()[c].clone(),
            mean_treated,
            mean_control,
            pooled_sd,
            psmd,
        });
    }
    Ok(rows)
}

/// Spread statistics for one arm's balancing weights.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ArmWeightStats {
    pub min: f64,
    pub max: f64,
    /// Coefficient of variation (population standard deviation over mean).
    pub cv: f64,
    /// Effective sample size (Σw)²/Σw².
    pub ess: f64,
}

/// Weight-health summary for both arms.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WeightSummary {
    pub treated: ArmWeightStats,
    pub control: ArmWeightStats,
}

/// Distribution summary of one arm's balancing weights.
pub fn arm_stats(values: &[f64]) -> ArmWeightStats {
    let m = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    let sumsq: f64 = values.iter().map(|v| v * v).sum();
    ArmWeightStats {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        cv: var.sqrt() / mean,
        ess: sum * sum / sumsq,
    }
}

/// Min, max, coefficient of variation, and effective sample size of each
/// arm's balancing weights. Units outside a truncation window carry no weight
/// and are excluded.
pub fn weight_summary(sample: &SurveySample, uw: &UnitWeights) -> Result<WeightSummary> {
    let z = sample.z();
    let w1: Vec<f64> = (0..sample.n())
        .filter(|&i| z[i] == 1.0 && uw.h[i] > 0.0)
        .map(|i| uw.w1[i])
        .collect();
    let w0: Vec<f64> = (0..sample.n())
        .filter(|&i| z[i] == 0.0 && uw.h[i] > 0.0)
        .map(|i| uw.w0[i])
        .collect();
    if w1.is_empty() {
        return Err(Error::EmptyArmWeight { context: "treated arm carries no balancing weight" });
    }
    if w0.is_empty() {
        return Err(Error::EmptyArmWeight { context: "control arm carries no balancing weight" });
    }
    Ok(WeightSummary { treated: arm_stats(&w1), control: arm_stats(&w0) })
}

/// Serialize a float with 17 significant digits so that parsing it back
/// reproduces the exact value.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Balance table as CSV with the fixed column order
/// `covariate,mean_treated,mean_control,pooled_sd,psmd`.
pub fn balance_to_csv(rows: &[BalanceRow]) -> String {
    let mut out = String::from("covariate,mean_treated,mean_control,pooled_sd,psmd\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.covariate,
            format_full(r.mean_treated),
            format_full(r.mean_control),
            format_full(r.pooled_sd),
            format_full(r.psmd),
        ));
    }
    out
}

/// Balance table as a JSON array with the same keys as the CSV columns.
pub fn balance_to_json(rows: &[BalanceRow]) -> serde_json::Value {
    serde_json::json!(rows
        .iter()
        .map(|r| {
            let mut map = serde_json::Map::new();
            map.insert("covariate".into(), r.covariate.clone().into());
            map.insert("mean_treated".into(), r.mean_treated.into());
            map.insert("mean_control".into(), r.mean_control.into());
            map.insert("pooled_sd".into(), r.pooled_sd.into());
            map.insert("psmd".into(), r.psmd.into());
            serde_json::Value::Object(map)
        })
        .collect::<Vec<_>>())
}
