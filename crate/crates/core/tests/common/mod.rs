//! Shared test-support: the frozen numeric fixture schema and its loader, plus the
//! 12-unit toy survey sample used across the integration suites.
//!
//! Only data definitions live in this file. The independent computations that
//! *generate* the fixture live in the `oracle` submodule and deliberately share no
//! code with the library.

#![allow(dead_code)]

pub mod oracle;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Serialize, Deserialize)]
pub struct OracleFixture {
    /// Coefficients for the 6-unit weighted-logistic reference problem.
    pub glm_logistic_6unit: GlmBeta,
    /// Coefficients for the 5-point unequal-weight linear reference problem.
    pub glm_linear_5point: GlmBeta,
    pub toy12: Toy12Fixture,
    /// One-unit stacked-residual evaluation at a hand-set parameter vector.
    pub psi_single_unit: PsiSingleUnit,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GlmBeta {
    pub beta: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Toy12Fixture {
    /// Survey-weighted logistic coefficients (intercept, x1, x2).
    pub beta_sp_w: Vec<f64>,
    /// Unweighted in-sample logistic coefficients.
    pub beta_fp: Vec<f64>,
    /// Unweighted fit used when survey weights are ignored entirely.
    pub beta_u: Vec<f64>,
    /// Unweighted fit with the survey weight appended as a covariate.
    pub beta_c: Vec<f64>,
    /// Survey-weighted fit with the survey weight appended as a covariate.
    pub beta_cw: Vec<f64>,
    pub e_sp: Vec<f64>,
    pub e_fp: Vec<f64>,
    pub r_z: Vec<f64>,
    pub p_s: Vec<f64>,
    /// Per-target-population weight tables, keyed by tilt name.
    pub weights: BTreeMap<String, WeightsFixture>,
    pub truncated_alpha: f64,
    /// Plain weighting estimates (point and closed-form sandwich SE) per tilt.
    pub psw: BTreeMap<String, PswFixture>,
    pub outcome: OutcomeFixtures,
    /// Augmented estimates keyed by "<kind>_<tilt>".
    pub augmented: BTreeMap<String, AugFixture>,
    pub psmd_combined: Vec<BalanceRowFixture>,
    pub psmd_overlap: Vec<BalanceRowFixture>,
    pub weight_summary_combined: WeightSummaryFixture,
    /// Point estimate after replacing all survey weights by 1 (classic IPW check).
    pub hajek_all_ones_tau: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WeightsFixture {
    pub h: Vec<f64>,
    pub w1: Vec<f64>,
    pub w0: Vec<f64>,
    pub h_over_ps: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PswFixture {
    pub tau1: f64,
    pub tau0: f64,
    pub tau: f64,
    pub se: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OutcomeFixtures {
    pub mom: ArmCoefs,
    pub cvr_combined: ArmCoefs,
    pub cvr_overlap: ArmCoefs,
    pub wet_combined: ArmCoefs,
    pub wet_overlap: ArmCoefs,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ArmCoefs {
    pub alpha0: Vec<f64>,
    pub alpha1: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AugFixture {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub tau: f64,
    pub se: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BalanceRowFixture {
    pub covariate: String,
    pub mean_treated: f64,
    pub mean_control: f64,
    pub pooled_sd: f64,
    pub psmd: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WeightSummaryFixture {
    pub treated: ArmStatsFixture,
    pub control: ArmStatsFixture,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ArmStatsFixture {
    pub min: f64,
    pub max: f64,
    pub cv: f64,
    pub ess: f64,
}

/// Stacked-residual evaluation for one unit at a hand-set parameter vector.
/// Parameter layout: [v1, v2, v3, alpha0 (3), alpha1 (3), beta_fp (3), beta_sp (3)];
/// residual rows in order: fp score (3), sp score (3), arm-1 outcome score (3),
/// arm-0 outcome score (3), v1 row, v2 row, v3 row.
#[derive(Debug, Serialize, Deserialize)]
pub struct PsiSingleUnit {
    pub unit_index: usize,
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/oracle_values.json")
}

pub fn toy12_csv_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy12.csv")
}

pub fn load_fixture() -> OracleFixture {
    let text = std::fs::read_to_string(fixture_path())
        .expect("oracle fixture missing; regenerate with UPDATE_FIXTURES=1 cargo test --test oracle_suite");
    serde_json::from_str(&text).expect("oracle fixture does not parse")
}

/// The 12-unit toy sample in column form, parsed from the committed CSV.
pub struct Toy12 {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn load_toy12() -> Toy12 {
    let text = std::fs::read_to_string(toy12_csv_path()).expect("toy12.csv missing");
    let mut t = Toy12 { x1: vec![], x2: vec![], z: vec![], y: vec![], w: vec![] };
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            assert_eq!(line, "x1,x2,z,y,w");
            continue;
        }
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(f.len(), 5);
        t.x1.push(f[0]);
        t.x2.push(f[1]);
        t.z.push(f[2]);
        t.y.push(f[3]);
        t.w.push(f[4]);
    }
    assert_eq!(t.x1.len(), 12);
    t
}
