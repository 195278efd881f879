//! Plain-text scenario files: a line-oriented `key = value` format that
//! expands into a [`SimConfig`] plus a cross-product estimator menu.
//!
//! Lines are `key = value`; blank lines and `#` comments are ignored.
//! Recognized keys:
//!
//! | key                | value                                            |
//! |--------------------|--------------------------------------------------|
//! | `name`             | free-text label for the scenario                 |
//! | `overlap`          | `good` (slope scale 0.6) or `poor` (2.0)         |
//! | `psi`, `a0`        | explicit treatment-model overrides               |
//! | `population`       | total population size (divided evenly into the   |
//! |                    | 10 strata × 20 clusters layout)                  |
//! | `units_per_cluster`| direct cluster size (alternative to `population`)|
//! | `sample_size`      | multistage sample total; must be a multiple of   |
//! |                    | 500 so the stratum allocation ratios stay exact  |
//! | `replications`     | Monte-Carlo replications                         |
//! | `seed`             | RNG seed                                         |
//! | `sampling`         | `multistage` or `treatment_dependent`            |
//! | `trunc_alpha`      | propensity truncation applied to every entry     |
//! | `estimators`       | comma list of `psw`, `mom`, `cvr`, `wet`         |
//! | `ps_modes`         | comma list of `u`, `w`, `c`, `cw`                |
//! | `estimands`        | comma list of `ate`, `att`, `atc`, `ato`,        |
//! |                    | `trunc:ALPHA`                                    |
//! | `misspecs`         | comma list of `cor_cor`, `mis_cor`, `cor_mis`,   |
//! |                    | `mis_mis` (propensity spec before outcome spec)  |
//! | `reference`        | `estimator/mode/estimand/misspec`, e.g.          |
//! |                    | `psw/w/ate/cor_cor`; anchors relative efficiency |
//!
//! The menu is the cross product estimands × estimators × ps_modes ×
//! misspecs, in that nesting order (estimand outermost). When `reference` is
//! omitted, `psw/w/ate/cor_cor` is used if present, otherwise the first menu
//! entry.

use std::collections::BTreeMap;

use super::{EstimatorConfig, SamplingDesign, SimConfig, N_BASE_COVARIATES};
use crate::balancing::EstimandSpec;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::propensity::PsMode;

/// Stratum allocation ratios for a 500-unit multistage sample; larger samples
/// scale these proportionally.
const BASE_ALLOCATIONS: [usize; 10] = [85, 75, 70, 65, 60, 40, 35, 30, 25, 15];
const BASE_SAMPLE: usize = 500;

/// A parsed scenario: the simulation configuration, the expanded estimator
/// menu, and which menu entry anchors relative efficiency.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub config: SimConfig,
    pub menu: Vec<EstimatorConfig>,
    pub reference: usize,
}

fn invalid(key: &str, value: &str, expected: &str) -> Error {
    Error::Invalid(format!(
        "scenario key `{key}`: cannot parse `{value}` ({expected})"
    ))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| invalid(key, value, "expected a positive integer"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| invalid(key, value, "expected a number"))
}

fn parse_estimator(key: &str, token: &str) -> Result<EstimatorKind> {
    match token {
        "psw" => Ok(EstimatorKind::Psw),
        "mom" => Ok(EstimatorKind::Mom),
        "cvr" => Ok(EstimatorKind::Cvr),
        "wet" => Ok(EstimatorKind::Wet),
        _ => Err(invalid(key, token, "expected psw, mom, cvr, or wet")),
    }
}

fn parse_ps_mode(key: &str, token: &str) -> Result<PsMode> {
    match token {
        "u" => Ok(PsMode::UPs),
        "w" => Ok(PsMode::WPs),
        "c" => Ok(PsMode::CPs),
        "cw" => Ok(PsMode::CwPs),
        _ => Err(invalid(key, token, "expected u, w, c, or cw")),
    }
}

fn parse_estimand(key: &str, token: &str) -> Result<EstimandSpec> {
    match token {
        "ate" => Ok(EstimandSpec::combined()),
        "att" => Ok(EstimandSpec::treated()),
        "atc" => Ok(EstimandSpec::control()),
        "ato" => Ok(EstimandSpec::overlap()),
        _ => {
            if let Some(alpha) = token.strip_prefix("trunc:") {
                let alpha = parse_f64(key, alpha)?;
                EstimandSpec::truncated(alpha)
            } else {
                Err(invalid(
                    key,
                    token,
                    "expected ate, att, atc, ato, or trunc:ALPHA",
                ))
            }
        }
    }
}

fn parse_misspec(key: &str, token: &str) -> Result<(bool, bool)> {
    match token {
        "cor_cor" => Ok((false, false)),
        "mis_cor" => Ok((true, false)),
        "cor_mis" => Ok((false, true)),
        "mis_mis" => Ok((true, true)),
        _ => Err(invalid(
            key,
            token,
            "expected cor_cor, mis_cor, cor_mis, or mis_mis",
        )),
    }
}

fn split_list(key: &str, value: &str) -> Result<Vec<String>> {
    let tokens: Vec<String> = value
        .split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(invalid(key, value, "expected a non-empty comma list"));
    }
    for (i, token) in tokens.iter().enumerate() {
        if tokens[..i].contains(token) {
            return Err(Error::Invalid(format!(
                "scenario key `{key}`: duplicate token `{token}`"
            )));
        }
    }
    Ok(tokens)
}

/// Parse a scenario file's text into a ready-to-run [`ScenarioSpec`].
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    for (line_no, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Invalid(format!(
                "scenario line {}: expected `key = value`, got `{line}`",
                line_no + 1
            )));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if entries.insert(key.clone(), value).is_some() {
            return Err(Error::Invalid(format!(
                "scenario key `{key}` appears more than once"
            )));
        }
    }

    const KNOWN_KEYS: [&str; 16] = [
        "name",
        "overlap",
        "psi",
        "a0",
        "population",
        "units_per_cluster",
        "sample_size",
        "replications",
        "seed",
        "sampling",
        "trunc_alpha",
        "estimators",
        "ps_modes",
        "estimands",
        "misspecs",
        "reference",
    ];
    for key in entries.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Invalid(format!("unknown scenario key `{key}`")));
        }
    }

    let mut config = SimConfig::default();
    let name = entries
        .get("name")
        .cloned()
        .unwrap_or_else(|| "scenario".to_string());

    if let Some(value) = entries.get("overlap") {
        match value.as_str() {
            "good" => {}
            "poor" => {
                let poor = SimConfig::poor_overlap();
                config.psi = poor.psi;
                config.a0 = poor.a0;
            }
            _ => return Err(invalid("overlap", value, "expected good or poor")),
        }
    }
    if let Some(value) = entries.get("psi") {
        config.psi = parse_f64("psi", value)?;
    }
    if let Some(value) = entries.get("a0") {
        config.a0 = parse_f64("a0", value)?;
    }

    match (entries.get("population"), entries.get("units_per_cluster")) {
        (Some(_), Some(_)) => {
            return Err(Error::Invalid(
                "scenario keys `population` and `units_per_cluster` are mutually exclusive".into(),
            ))
        }
        (Some(value), None) => {
            let population = parse_usize("population", value)?;
            let cells = config.n_strata * config.clusters_per_stratum;
            if population == 0 || population % cells != 0 {
                return Err(Error::Invalid(format!(
                    "population {population} does not divide evenly into \
                     {cells} stratum×cluster cells"
                )));
            }
            config.units_per_cluster = population / cells;
        }
        (None, Some(value)) => {
            config.units_per_cluster = parse_usize("units_per_cluster", value)?;
        }
        (None, None) => {}
    }

    if let Some(value) = entries.get("replications") {
        config.replications = parse_usize("replications", value)?;
    }
    if let Some(value) = entries.get("seed") {
        config.seed = value
            .parse::<u64>()
            .map_err(|_| invalid("seed", value, "expected a non-negative integer"))?;
    }

    let sampling = entries.get("sampling").map(String::as_str);
    match sampling {
        None | Some("multistage") => {
            if let Some(value) = entries.get("sample_size") {
                let sample_size = parse_usize("sample_size", value)?;
                if sample_size == 0 || sample_size % BASE_SAMPLE != 0 {
                    return Err(Error::Invalid(format!(
                        "sample_size {sample_size} must be a positive multiple of \
                         {BASE_SAMPLE} so stratum allocations stay proportional"
                    )));
                }
                let scale = sample_size / BASE_SAMPLE;
                config.sampling = SamplingDesign::Multistage {
                    allocations: BASE_ALLOCATIONS.iter().map(|&a| a * scale).collect(),
                };
            }
        }
        Some("treatment_dependent") => {
            if entries.contains_key("sample_size") {
                return Err(Error::Invalid(
                    "sample_size applies only to multistage sampling; the \
                     treatment-dependent design draws a Bernoulli sample"
                        .into(),
                ));
            }
            config.sampling = SamplingDesign::covariate_treatment_dependent();
        }
        Some(other) => {
            return Err(invalid(
                "sampling",
                other,
                "expected multistage or treatment_dependent",
            ))
        }
    }

    let trunc_alpha = match entries.get("trunc_alpha") {
        Some(value) => parse_f64("trunc_alpha", value)?,
        None => 0.0,
    };

    let list_or =
        |key: &str, default: &str| -> Result<Vec<String>> {
            match entries.get(key) {
                Some(value) => split_list(key, value),
                None => Ok(vec![default.to_string()]),
            }
        };
    let estimators = list_or("estimators", "psw")?
        .iter()
        .map(|t| parse_estimator("estimators", t))
        .collect::<Result<Vec<_>>>()?;
    let ps_modes = list_or("ps_modes", "w")?
        .iter()
        .map(|t| parse_ps_mode("ps_modes", t))
        .collect::<Result<Vec<_>>>()?;
    let estimands = list_or("estimands", "ate")?
        .iter()
        .map(|t| parse_estimand("estimands", t))
        .collect::<Result<Vec<_>>>()?;
    let misspecs = list_or("misspecs", "cor_cor")?
        .iter()
        .map(|t| parse_misspec("misspecs", t))
        .collect::<Result<Vec<_>>>()?;

    let mut menu = Vec::new();
    for estimand in &estimands {
        for &estimator in &estimators {
            for &ps_mode in &ps_modes {
                for &(ps_misspecified, outcome_misspecified) in &misspecs {
                    menu.push(EstimatorConfig {
                        estimator,
                        ps_mode,
                        estimand: *estimand,
                        ps_misspecified,
                        outcome_misspecified,
                        trunc_alpha,
                    });
                }
            }
        }
    }

    let reference = match entries.get("reference") {
        Some(value) => {
            let parts: Vec<&str> = value.split('/').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(invalid(
                    "reference",
                    value,
                    "expected estimator/mode/estimand/misspec",
                ));
            }
            let estimator = parse_estimator("reference", parts[0])?;
            let ps_mode = parse_ps_mode("reference", parts[1])?;
            let estimand = parse_estimand("reference", parts[2])?;
            let (ps_misspecified, outcome_misspecified) = parse_misspec("reference", parts[3])?;
            menu.iter()
                .position(|c| {
                    c.estimator == estimator
                        && c.ps_mode == ps_mode
                        && c.estimand == estimand
                        && c.ps_misspecified == ps_misspecified
                        && c.outcome_misspecified == outcome_misspecified
                })
                .ok_or_else(|| {
                    Error::Invalid(format!(
                        "reference `{value}` does not match any menu entry"
                    ))
                })?
        }
        None => {
            let default = EstimatorConfig {
                estimator: EstimatorKind::Psw,
                ps_mode: PsMode::WPs,
                estimand: EstimandSpec::combined(),
                ps_misspecified: false,
                outcome_misspecified: false,
                trunc_alpha,
            };
            menu.iter().position(|c| *c == default).unwrap_or(0)
        }
    };

    // The menu always covers the six baseline covariates (plus interaction
    // when correctly specified); the generated population provides exactly
    // those columns, so no further column validation is needed here.
    debug_assert!(N_BASE_COVARIATES == 6);

    config.validate()?;
    Ok(ScenarioSpec {
        name,
        config,
        menu,
        reference,
    })
}
