//! The `fairgate` command line: every pipeline stage as a CI-friendly
//! subcommand. Machine-readable JSON goes to stdout, the human log to
//! stderr, and the process exit code carries the verdict.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

mod commands;
mod error;

pub use error::CliError;

pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    /// Fairness gate blocked deployment.
    pub const BLOCK: i32 = 2;
    /// Drift gate requires retraining.
    pub const RETRAIN: i32 = 3;
    /// Bad input, configuration or arguments.
    pub const INPUT: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(
    name = "fairgate",
    version,
    about = "Fairness-gated training, auditing and registry for tabular risk models",
    after_help = "Exit codes: 0 pass/success, 2 fairness gate block, 3 drift retrain required, \
                  4 input or configuration error, 1 internal error."
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// CSV dataset with a header row
    #[arg(long, global = true, value_name = "CSV")]
    pub data: Option<PathBuf>,
    /// JSON column schema for the dataset
    #[arg(long, global = true, value_name = "JSON")]
    pub schema: Option<PathBuf>,
    /// YAML policy; defaults apply when omitted
    #[arg(long, global = true, value_name = "YAML")]
    pub policy: Option<PathBuf>,
    /// Registry root directory
    #[arg(long, global = true, env = "FAIRGATE_REGISTRY", value_name = "DIR")]
    pub registry: Option<PathBuf>,
    /// Seed for splitting and training (overrides the policy seed)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "model-family", global = true, value_enum)]
    pub model_family: Option<FamilyArg>,
    /// Directory for written artifacts
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Logistic,
    Gbt,
    Rf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Reweigh,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Candidate,
    Approved,
    Deployed,
    Retired,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a dataset against its schema
    Ingest,
    /// Stratified train/validation/test split
    Split,
    /// Fit the preprocessor and a model on the training partition
    Train,
    /// Fairness audit of a model on the validation partition
    Audit(ModelArgs),
    /// Retrain with a bias mitigation and compare audits
    Mitigate(MitigateArgs),
    /// SHAP, LIME and counterfactual explanations
    Explain(ExplainArgs),
    /// Apply the deployment gate to a fairness report or a drift series
    Gate(GateArgs),
    /// Decision-curve analysis on the validation partition
    Dca(ModelArgs),
    /// Drift check over simulated daily windows
    Drift(DriftArgs),
    /// Batch monitoring of the deployed model over simulated days
    Monitor(DriftArgs),
    /// Split, train, audit, mitigate once if blocked, gate and register
    Pipeline,
    /// Inspect and manage the model registry
    Registry {
        #[command(subcommand)]
        action: RegistryCommand,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Directory holding model.json and preprocessor.json; trains when omitted
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
    /// Also write CSV plot data into --out
    #[arg(long)]
    pub plot_data: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MitigateArgs {
    #[arg(long, value_enum, default_value = "reweigh")]
    pub method: MethodArg,
    /// Adversary penalty weight (adversarial only)
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
    /// Test-partition row to explain locally
    #[arg(long, default_value_t = 0)]
    pub row: usize,
    /// Feature for a counterfactual search, e.g. chol
    #[arg(long)]
    pub feature: Option<String>,
    /// Counterfactual grid step in the feature's units
    #[arg(long, default_value_t = 5.0)]
    pub step: f64,
    /// Search upward instead of downward
    #[arg(long)]
    pub increase: bool,
    #[arg(long, default_value_t = 1000)]
    pub lime_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GateArgs {
    /// Fairness report JSON
    #[arg(long, value_name = "JSON", conflicts_with = "drift", required_unless_present = "drift")]
    pub report: Option<PathBuf>,
    /// Drift series JSON as written by `drift`
    #[arg(long, value_name = "JSON")]
    pub drift: Option<PathBuf>,
    /// Registry version the decision refers to
    #[arg(long)]
    pub version: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct DriftArgs {
    #[arg(long, default_value_t = 30)]
    pub days: usize,
    #[arg(long, default_value_t = 200)]
    pub window: usize,
    /// First shifted day; no shift when omitted
    #[arg(long)]
    pub shift_day: Option<usize>,
    /// Shift size in standard deviations
    #[arg(long, default_value_t = 1.5)]
    pub shift_sd: f64,
    /// Shifted columns (repeatable); all numeric columns when omitted
    #[arg(long)]
    pub shift_feature: Vec<String>,
    #[arg(long)]
    pub plot_data: bool,
}

#[derive(Debug, Subcommand)]
pub enum RegistryCommand {
    List,
    Show { version: String },
    /// Re-hash a version (every version when omitted)
    Verify { version: Option<String> },
    /// Check every approved or deployed entry against the policy
    Scan,
    /// Move a version to another stage
    Promote {
        version: String,
        #[arg(long, value_enum)]
        stage: StageArg,
        /// Gate decision JSON, required for approval
        #[arg(long, value_name = "JSON")]
        decision: Option<PathBuf>,
    },
}

fn emit(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value"));
}

fn error_json(command: &str, code: i32, message: &str) -> Value {
    json!({ "command": command, "status": "error", "exit_code": code, "error": message })
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return exit::OK;
            }
            eprint!("{e}");
            emit(&error_json("", exit::INPUT, e.render().to_string().lines().next().unwrap_or("")));
            return exit::INPUT;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let name = commands::name(&cli.command);
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| commands::dispatch(&cli)));
    match outcome {
        Ok(Ok((code, mut value))) => {
            if let Value::Object(m) = &mut value {
                m.insert("command".into(), json!(name));
                m.insert("exit_code".into(), json!(code));
            }
            emit(&value);
            code
        }
        Ok(Err(e)) => {
            log::error!("{}", e.message);
            emit(&error_json(&name, e.code, &e.message));
            e.code
        }
        Err(_) => {
            emit(&error_json(&name, exit::INTERNAL, "internal error (panic)"));
            exit::INTERNAL
        }
    }
}
