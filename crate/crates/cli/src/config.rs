//! Command-line arguments and their JSON config file counterpart.
//!
//! Every option can come from `--config FILE` (a flat JSON object keyed by
//! the long flag name with `_` for `-`) or from the command line; the
//! command line wins.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use klc_opi::staghare::GridSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CommonArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    /// Worker threads for rollouts and episodes.
    #[arg(long, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Env {
    Staghare,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Built-in environment, used when no --model is given.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env: Option<Env>,

    /// Side length of the square Stag-Hare grid.
    #[arg(long, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,

    /// Full grid description; config file only.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,

    /// Serialized model (JSON).
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    #[arg(long, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Sampled,
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingArg {
    #[value(name = "joint")]
    Joint,
    #[value(name = "product_of_marginals", alias = "product-of-marginals")]
    ProductOfMarginals,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeArg>,

    /// Async batch size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,

    /// Rollout length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,

    /// Iteration budget.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling_rule: Option<SamplingArg>,

    /// Learning rate constant in c0 / (c0 + k).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_c0: Option<f64>,

    /// Use a constant step of 1.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub unit_step: bool,

    /// Initial value function CSV; defaults to the upper constant.
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<PathBuf>,

    /// Optimal values CSV (from `solve`) for the sup_err_vstar column.
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<PathBuf>,

    /// Also write trace.jsonl with the sampled states.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub jsonl: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Start states as sub-state tuples, e.g. `20:4`.
    #[arg(long, num_args = 1.., value_name = "TUPLE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_states: Option<Vec<String>>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,

    /// Weight step t by gamma^t.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub discounted: bool,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub eval: EvalArgs,

    /// Policy file (JSON) to evaluate.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["baseline", "uncontrolled"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,

    /// Evaluate the deterministic shortest-path baseline.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub baseline: bool,

    /// Evaluate the uncontrolled dynamics.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub uncontrolled: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub eval: EvalArgs,

    /// Trained policy file (JSON).
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,

    /// Second policy file; defaults to the deterministic baseline.
    #[arg(long, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub against: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

/// Overlays the command-line values on the config file and parses the
/// result back. Returns the merged arguments and the merged JSON object.
pub fn resolve<T>(cli: T, config: Option<&Path>) -> Result<(T, Map<String, Value>), CliError>
where
    T: Serialize + DeserializeOwned,
{
    let mut merged = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?
            {
                Value::Object(map) => map,
                _ => return Err(CliError::Config(format!("config {} is not a JSON object", path.display()))),
            }
        }
        None => Map::new(),
    };
    let Value::Object(flags) = serde_json::to_value(&cli).map_err(|e| CliError::Config(e.to_string()))? else {
        unreachable!("argument structs serialize to objects");
    };
    merged.extend(flags);
    let args = serde_json::from_value(Value::Object(merged.clone())).map_err(|e| CliError::Config(format!("config: {e}")))?;
    Ok((args, merged))
}
