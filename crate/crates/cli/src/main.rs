//! Batch front door: estimate population effects from a CSV, emit covariate
//! balance tables, and drive Monte-Carlo scenario files.
//!
//! Every failure exits nonzero after printing a single machine-readable JSON
//! line to stderr: `{"error":{"code":"E_...","message":"..."}}`. The stable
//! codes are `E_PARSE`, `E_CONFIG`, `E_NONCONVERGENCE`, `E_SEPARATION`,
//! `E_SINGULAR_A`, and `E_EMPTY_ARM`.

mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use svycausal::{
    build_unit_weights, estimate_augmented, estimate_psw, fit_outcome_models, fit_propensity,
    parse_scenario, psmd_table, run_scenario, scenario_rows_to_csv, weight_summary, DesignMode,
    EstimandSpec, EstimateResult, EstimatorKind, Error, PsMode, PsSpec,
};

/// A CLI failure: either a propagated library error (which carries its own
/// stable code) or an input-parsing problem.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Parse(String),
    Config(String),
}

impl CliError {
    fn parse(message: String) -> Self {
        CliError::Parse(message)
    }

    fn config(message: String) -> Self {
        CliError::Config(message)
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Lib(e) => e.code(),
            CliError::Parse(_) => "E_PARSE",
            CliError::Config(_) => "E_CONFIG",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Lib(e) => e.to_string(),
            CliError::Parse(m) | CliError::Config(m) => m.clone(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

#[derive(Parser)]
#[command(
    name = "svycausal",
    version,
    about = "Survey-aware weighting estimators of population causal effects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate treatment effects from a CSV dataset.
    Estimate(EstimateArgs),
    /// Report weighted covariate balance for one estimand.
    Balance(BalanceArgs),
    /// Run a Monte-Carlo scenario file and emit the metrics table as CSV.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    /// Units sampled after exposure (arm-specific selection probabilities).
    Retro,
    /// Units sampled before exposure.
    Pro,
}

impl DesignArg {
    fn mode(self) -> DesignMode {
        match self {
            DesignArg::Retro => DesignMode::Retrospective,
            DesignArg::Pro => DesignMode::Prospective,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PsModeArg {
    /// Unweighted logistic fit.
    U,
    /// Survey-weighted logistic fit.
    W,
    /// Unweighted fit with the survey weight as a covariate.
    C,
    /// Survey-weighted fit with the survey weight as a covariate.
    Cw,
}

impl PsModeArg {
    fn mode(self) -> PsMode {
        match self {
            PsModeArg::U => PsMode::UPs,
            PsModeArg::W => PsMode::WPs,
            PsModeArg::C => PsMode::CPs,
            PsModeArg::Cw => PsMode::CwPs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimandArg {
    /// Combined population.
    Ate,
    /// Treated population.
    Att,
    /// Control population.
    Atc,
    /// Overlap population.
    Ato,
    /// Combined population restricted to scores inside (alpha, 1 - alpha).
    Trunc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    /// Plain weighting.
    Psw,
    /// Augmented, unweighted outcome regressions.
    Mom,
    /// Augmented, balancing weight as an extra outcome covariate.
    Cvr,
    /// Augmented, balancing-weighted outcome regressions.
    Wet,
}

impl EstimatorArg {
    fn kind(self) -> EstimatorKind {
        match self {
            EstimatorArg::Psw => EstimatorKind::Psw,
            EstimatorArg::Mom => EstimatorKind::Mom,
            EstimatorArg::Cvr => EstimatorKind::Cvr,
            EstimatorArg::Wet => EstimatorKind::Wet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Flags shared by `estimate` and `balance`: the input table, the column
/// mapping, the design, and the weighting choices.
#[derive(Args)]
struct DataArgs {
    /// Input CSV; header row required, numeric cells only.
    #[arg(long)]
    input: PathBuf,

    /// Treatment column (values 0/1).
    #[arg(long)]
    treatment: String,

    /// Survey-weight column (positive values).
    #[arg(long)]
    weight: String,

    /// Covariate columns, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    covariates: Vec<String>,

    /// Sampling design the data came from.
    #[arg(long, value_enum)]
    design: DesignArg,

    /// How survey weights enter the propensity model.
    #[arg(long, value_enum, default_value = "w")]
    ps_mode: PsModeArg,

    /// Target population.
    #[arg(long, value_enum)]
    estimand: EstimandArg,

    /// Truncation level in (0, 0.1]; required by --estimand trunc.
    #[arg(long)]
    alpha: Option<f64>,

    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,

    /// Output file (written atomically); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl DataArgs {
    fn estimand_spec(&self) -> Result<EstimandSpec, CliError> {
        let spec = match (self.estimand, self.alpha) {
            (EstimandArg::Ate, None) => EstimandSpec::combined(),
            (EstimandArg::Att, None) => EstimandSpec::treated(),
            (EstimandArg::Atc, None) => EstimandSpec::control(),
            (EstimandArg::Ato, None) => EstimandSpec::overlap(),
            (EstimandArg::Trunc, Some(a)) => EstimandSpec::truncated(a)?,
            (EstimandArg::Trunc, None) => {
                return Err(CliError::config(
                    "--estimand trunc requires --alpha".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(CliError::config(
                    "--alpha only applies to --estimand trunc".into(),
                ))
            }
        };
        Ok(spec)
    }

    fn ps_spec(&self) -> PsSpec {
        PsSpec {
            mode: self.ps_mode.mode(),
            covariate_columns: (0..self.covariates.len()).collect(),
            add_intercept: true,
            trunc_alpha: 0.0,
        }
    }

    /// Enforce the size precondition n ≥ 2p, where p counts the intercept,
    /// the covariates, and the appended weight column of the c/cw modes.
    fn check_size(&self, n: usize) -> Result<(), CliError> {
        let extra = matches!(self.ps_mode, PsModeArg::C | PsModeArg::Cw) as usize;
        let p = 1 + self.covariates.len() + extra;
        if n < 2 * p {
            return Err(CliError::config(format!(
                "{n} rows is too few for a {p}-column propensity model (need at least {})",
                2 * p
            )));
        }
        Ok(())
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Outcome column.
    #[arg(long)]
    outcome: String,

    /// Estimators to run; repeatable or comma-separated.
    #[arg(long = "estimator", value_enum, value_delimiter = ',', required = true)]
    estimators: Vec<EstimatorArg>,
}

#[derive(Args)]
struct BalanceArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Outcome column (optional; balance needs no outcome).
    #[arg(long)]
    outcome: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file in the line-oriented `key = value` format.
    #[arg(long)]
    input: PathBuf,

    /// Override the scenario's RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output file (written atomically); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let ds = input::read_csv(&args.data.input)?;
    let sample = input::build_sample(
        &ds,
        &args.data.treatment,
        Some(&args.outcome),
        &args.data.weight,
        &args.data.covariates,
        args.data.design.mode(),
    )?;
    args.data.check_size(sample.n())?;
    let estimand = args.data.estimand_spec()?;

    let ps = fit_propensity(&sample, &args.data.ps_spec())?;
    let uw = build_unit_weights(&sample, &ps, &estimand)?;

    let mut kinds: Vec<EstimatorKind> = Vec::new();
    for arg in &args.estimators {
        if !kinds.contains(&arg.kind()) {
            kinds.push(arg.kind());
        }
    }
    let outcome_columns: Vec<usize> = (0..args.data.covariates.len()).collect();
    let mut estimates: Vec<EstimateResult> = Vec::new();
    for kind in kinds {
        let est = match kind {
            EstimatorKind::Psw => estimate_psw(&sample, &ps, &uw)?,
            kind => {
                let of = fit_outcome_models(&sample, &uw, kind, &outcome_columns)?;
                estimate_augmented(&sample, &ps, &uw, &of, kind)?
            }
        };
        estimates.push(est);
    }

    let text = match args.data.format {
        FormatArg::Json => report::estimate_json(&sample, &ps, &estimates),
        FormatArg::Csv => report::estimate_csv(&estimates),
    };
    report::write_output(args.data.out.as_deref(), &text)
}

fn cmd_balance(args: &BalanceArgs) -> Result<(), CliError> {
    let ds = input::read_csv(&args.data.input)?;
    let sample = input::build_sample(
        &ds,
        &args.data.treatment,
        args.outcome.as_deref(),
        &args.data.weight,
        &args.data.covariates,
        args.data.design.mode(),
    )?;
    args.data.check_size(sample.n())?;
    let estimand = args.data.estimand_spec()?;

    let ps = fit_propensity(&sample, &args.data.ps_spec())?;
    let uw = build_unit_weights(&sample, &ps, &estimand)?;
    let rows = psmd_table(&sample, &uw)?;
    let summary = weight_summary(&sample, &uw)?;

    let text = match args.data.format {
        FormatArg::Json => {
            report::balance_json(&sample, &ps, estimand.label(), &rows, &summary)
        }
        FormatArg::Csv => report::balance_csv(&rows),
    };
    report::write_output(args.data.out.as_deref(), &text)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::parse(format!("{}: {e}", args.input.display())))?;
    let mut spec = parse_scenario(&text)?;
    if let Some(seed) = args.seed {
        spec.config.seed = seed;
    }
    let rows = run_scenario(&spec.config, &spec.menu, spec.reference)?;
    report::write_output(args.out.as_deref(), &scenario_rows_to_csv(&rows))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Balance(args) => cmd_balance(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": { "code": e.code(), "message": e.message() }
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
