use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::operators::apply_optimal_operator;
use crate::value::ValueFunction;

/// Slack allowed when checking `T V0 <= V0`.
pub const INIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One simulated trajectory per evaluated state.
    Sampled,
    /// The exact m-step target, no noise.
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingRule {
    /// Draw the next joint state from the joint policy row.
    Joint,
    /// Each agent draws its own sub-state from its marginal independently.
    ProductOfMarginals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scheme {
    /// Update every joint state each iteration.
    Sync,
    /// Update a uniform batch of `batch` distinct joint states.
    Async { batch: usize },
}

impl Scheme {
    pub fn batch_size(&self, n_states: usize) -> usize {
        match *self {
            Scheme::Sync => n_states,
            Scheme::Async { batch } => batch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepSchedule {
    /// `α_k = c0 / (c0 + k)`.
    Harmonic { c0: f64 },
    /// `α_k = 1`; turns the expected-mode scheme into plain value iteration
    /// when `m = 1`.
    Unit,
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Harmonic { c0 } => learning_rate(k, c0),
            StepSchedule::Unit => 1.0,
        }
    }
}

/// `α_k = c0 / (c0 + k)`, shared by every state and agent.
pub fn learning_rate(k: usize, c0: f64) -> f64 {
    c0 / (c0 + k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    /// `V0 ≡ max(0, max C) / (1 - γ)`.
    UpperConstant,
    Explicit(ValueFunction),
}

/// Initial estimate satisfying `T V0 <= V0` entrywise.
pub fn init_value(model: &Model, rule: &InitRule) -> Result<ValueFunction> {
    let v0 = match rule {
        InitRule::UpperConstant => {
            let top = model.cost().iter().copied().fold(0.0f64, f64::max);
            ValueFunction::constant(model.n_states(), top / (1.0 - model.gamma()))
        }
        InitRule::Explicit(v) => {
            v.check_len(model.n_states())?;
            if !v.is_finite() {
                return Err(Error::InvalidConfig("initial values must be finite".into()));
            }
            v.clone()
        }
    };
    let tv = apply_optimal_operator(model, &v0)?;
    if let Some((state, excess)) = tv
        .iter()
        .zip(v0.iter())
        .map(|(t, v)| t - v)
        .enumerate()
        .find(|&(_, e)| e > INIT_TOL)
    {
        return Err(Error::InitNotUpperBound { state, excess });
    }
    Ok(v0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Rollout length.
    pub m: usize,
    /// Iteration budget `K`.
    pub iterations: usize,
    pub scheme: Scheme,
    pub step: StepSchedule,
    pub seed: u64,
    pub mode: Mode,
    pub sampling_rule: SamplingRule,
    pub init: InitRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: 20,
            iterations: 3000,
            scheme: Scheme::Sync,
            step: StepSchedule::Harmonic { c0: 50.0 },
            seed: 0,
            mode: Mode::Sampled,
            sampling_rule: SamplingRule::Joint,
            init: InitRule::UpperConstant,
        }
    }
}

impl RunConfig {
    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("rollout length m must be at least 1".into()));
        }
        if let Scheme::Async { batch } = self.scheme {
            if batch == 0 || batch > model.n_states() {
                return Err(Error::InvalidConfig(format!(
                    "batch size {batch} not in [1, {}]",
                    model.n_states()
                )));
            }
        }
        if let StepSchedule::Harmonic { c0 } = self.step {
            if !(c0 > 0.0 && c0.is_finite()) {
                return Err(Error::InvalidConfig(format!("lr_c0 {c0} must be positive")));
            }
        }
        Ok(())
    }
}
