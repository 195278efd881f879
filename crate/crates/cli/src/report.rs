//! Report assembly and atomic output.
//!
//! JSON numbers use the shortest representation that round-trips exactly; CSV
//! numbers carry 17 significant digits. Reports go to stdout or, with `--out`,
//! through a write-to-temporary-then-rename so no partial file survives an
//! error.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};
use svycausal::{
    balance_to_csv, balance_to_json, format_full, BalanceRow, Components, DesignMode,
    EstimateResult, PsFit, SurveySample, WeightSummary,
};

use crate::CliError;

fn design_label(mode: DesignMode) -> &'static str {
    match mode {
        DesignMode::Retrospective => "retrospective",
        DesignMode::Prospective => "prospective",
    }
}

/// Propensity-fit diagnostics for the report: convergence of each level's fit
/// and the named coefficient vectors.
fn propensity_json(ps: &PsFit) -> Value {
    let named = |names: &[String], beta: &[f64]| {
        let mut map = Map::new();
        for (name, b) in names.iter().zip(beta) {
            map.insert(name.clone(), (*b).into());
        }
        Value::Object(map)
    };
    let glm = |fit: &svycausal::GlmFit| {
        json!({
            "converged": fit.converged,
            "iterations": fit.iterations,
            "deviance": fit.deviance,
        })
    };
    let mut obj = Map::new();
    obj.insert("mode".into(), ps.mode.label().into());
    obj.insert("weight_column_dropped".into(), ps.weight_column_dropped.into());
    let mut population = glm(&ps.diagnostics.0);
    population["coefficients"] = named(ps.sp_design.names(), &ps.beta_sp);
    obj.insert("population_level".into(), population);
    let sample_level = match (&ps.beta_fp, &ps.fp_design, &ps.diagnostics.1) {
        (Some(beta), Some(design), Some(fit)) => {
            let mut v = glm(fit);
            v["coefficients"] = named(design.names(), beta);
            v
        }
        _ => Value::Null,
    };
    obj.insert("sample_level".into(), sample_level);
    Value::Object(obj)
}

fn components_json(components: &Components) -> Value {
    match components {
        Components::Psw { tau1, tau0 } => json!({ "tau1": tau1, "tau0": tau0 }),
        Components::Augmented { v1, v2, v3 } => json!({ "v1": v1, "v2": v2, "v3": v3 }),
    }
}

fn estimate_row_json(est: &EstimateResult) -> Value {
    json!({
        "estimator": est.estimator.label(),
        "estimand": est.estimand.label(),
        "alpha": est.estimand.alpha(),
        "tau": est.tau,
        "se": est.se,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "components": components_json(&est.components),
        "n_used": est.n_used,
    })
}

pub fn estimate_json(
    sample: &SurveySample,
    ps: &PsFit,
    estimates: &[EstimateResult],
) -> String {
    let value = json!({
        "command": "estimate",
        "n": sample.n(),
        "design": design_label(sample.design_mode()),
        "propensity": propensity_json(ps),
        "estimates": estimates.iter().map(estimate_row_json).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&value).expect("report serialization") + "\n"
}

pub fn estimate_csv(estimates: &[EstimateResult]) -> String {
    let mut out = String::from(
        "estimator,estimand,alpha,tau,se,ci_low,ci_high,tau1,tau0,v1,v2,v3,n_used\n",
    );
    for est in estimates {
        let (tau1, tau0, v1, v2, v3) = match est.components {
            Components::Psw { tau1, tau0 } => {
                (format_full(tau1), format_full(tau0), String::new(), String::new(), String::new())
            }
            Components::Augmented { v1, v2, v3 } => (
                String::new(),
                String::new(),
                format_full(v1),
                format_full(v2),
                format_full(v3),
            ),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            est.estimator.label(),
            est.estimand.label(),
            est.estimand.alpha().map(format_full).unwrap_or_default(),
            format_full(est.tau),
            format_full(est.se),
            format_full(est.ci_low),
            format_full(est.ci_high),
            tau1,
            tau0,
            v1,
            v2,
            v3,
            est.n_used,
        ));
    }
    out
}

pub fn balance_json(
    sample: &SurveySample,
    ps: &PsFit,
    estimand_label: &str,
    rows: &[BalanceRow],
    summary: &WeightSummary,
) -> String {
    let arm = |s: &svycausal::ArmWeightStats| {
        json!({
            "min": s.min,
            "max": s.max,
            "cv": s.cv,
            "ess": s.ess,
        })
    };
    let value = json!({
        "command": "balance",
        "n": sample.n(),
        "design": design_label(sample.design_mode()),
        "ps_mode": ps.mode.label(),
        "estimand": estimand_label,
        "rows": balance_to_json(rows),
        "weight_summary": { "treated": arm(&summary.treated), "control": arm(&summary.control) },
    });
    serde_json::to_string_pretty(&value).expect("report serialization") + "\n"
}

pub fn balance_csv(rows: &[BalanceRow]) -> String {
    balance_to_csv(rows)
}

/// Write the report to stdout, or atomically to `--out`: the text lands in a
/// temporary file in the destination directory and is renamed into place only
/// once fully written.
pub fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            tmp.write_all(text.as_bytes())
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            tmp.persist(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            Ok(())
        }
    }
}
