//! Monte-Carlo policy evaluation and policy comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{Purpose, RolloutContext, SamplingRule, SeedLineage};
use crate::model::Model;
use crate::policy::JointPolicy;

pub const DEFAULT_HORIZON: usize = 20;
pub const DEFAULT_EPISODES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean: f64,
    /// Population standard deviation over episodes.
    pub std: f64,
    pub n_episodes: usize,
}

impl ReturnStats {
    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std / (self.n_episodes as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub horizon: usize,
    pub n_episodes: usize,
    pub discounted: bool,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            n_episodes: DEFAULT_EPISODES,
            discounted: false,
            seed: 0,
        }
    }
}

/// Mean and spread of `Σ_{t<horizon} w_t q(s_t, π)` over simulated
/// episodes from `start`, with `w_t = γ^t` if discounted and 1 otherwise.
pub fn monte_carlo_return(model: &Model, policy: &JointPolicy, start: usize, settings: &EvalSettings) -> Result<ReturnStats> {
    let ctx = RolloutContext::new(model, policy, SamplingRule::Joint)?;
    episode_stats(model, &ctx, start, settings, 0)
}

fn episode_stats(model: &Model, ctx: &RolloutContext<'_>, start: usize, settings: &EvalSettings, slot: u8) -> Result<ReturnStats> {
    model.space().check(start)?;
    if settings.horizon == 0 || settings.n_episodes == 0 {
        return Err(Error::InvalidConfig("horizon and n_episodes must be at least 1".into()));
    }
    let weight = if settings.discounted { model.gamma() } else { 1.0 };
    let lineage = SeedLineage::new(settings.seed);
    let returns: Vec<f64> = (0..settings.n_episodes)
        .into_par_iter()
        .map(|episode| {
            let mut rng = lineage.stream(Purpose::Evaluation(slot), episode as u64, start as u64);
            let path = ctx.path(start, settings.horizon - 1, &mut rng);
            let mut w = 1.0;
            path.iter()
                .map(|&s| {
                    let term = w * ctx.costs()[s];
                    w *= weight;
                    term
                })
                .sum()
        })
        .collect();
    // Shifted by the first return so that equal returns give zero spread.
    let n = returns.len() as f64;
    let pivot = returns[0];
    let offset = returns.iter().map(|r| r - pivot).sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - pivot - offset).powi(2)).sum::<f64>() / n;
    Ok(ReturnStats {
        mean: pivot + offset,
        std: var.sqrt(),
        n_episodes: settings.n_episodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub start_state: Vec<usize>,
    pub policy: String,
    pub mean_return: f64,
    pub std_return: f64,
    pub n_episodes: usize,
    pub horizon: usize,
}

/// Evaluates two policies from each start state (given as sub-state
/// tuples). Rows come in pairs: `label_a` then `label_b` per start state.
pub fn compare_policies(
    model: &Model,
    (label_a, pi_a): (&str, &JointPolicy),
    (label_b, pi_b): (&str, &JointPolicy),
    start_states: &[Vec<usize>],
    settings: &EvalSettings,
) -> Result<Vec<ComparisonRow>> {
    let ctx_a = RolloutContext::new(model, pi_a, SamplingRule::Joint)?;
    let ctx_b = RolloutContext::new(model, pi_b, SamplingRule::Joint)?;
    let mut rows = Vec::with_capacity(2 * start_states.len());
    for tuple in start_states {
        let start = model.space().encode(tuple)?;
        for (slot, label, ctx) in [(0u8, label_a, &ctx_a), (1u8, label_b, &ctx_b)] {
            let stats = episode_stats(model, ctx, start, settings, slot)?;
            rows.push(ComparisonRow {
                start_state: tuple.clone(),
                policy: label.to_string(),
                mean_return: stats.mean,
                std_return: stats.std,
                n_episodes: stats.n_episodes,
                horizon: settings.horizon,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;

    #[test]
    fn zero_cost_is_zero() {
        let u = Distribution::uniform(4).unwrap();
        let model = Model::new(vec![4], vec![vec![u; 4]], vec![0.0; 4], 0.9).unwrap();
        let stats = monte_carlo_return(&model, &JointPolicy::uncontrolled(&model), 2, &EvalSettings::default()).unwrap();
        assert_eq!(stats.mean, 0.0);
        assert_eq!(stats.std, 0.0);
    }

    #[test]
    fn single_state_undiscounted() {
        let model = Model::new(vec![1], vec![vec![Distribution::point_mass(0)]], vec![-2.0], 0.5).unwrap();
        let pi = JointPolicy::uncontrolled(&model);
        let stats = monte_carlo_return(&model, &pi, 0, &EvalSettings { horizon: 20, n_episodes: 10, ..Default::default() }).unwrap();
        assert_eq!(stats.mean, -40.0);
        assert_eq!(stats.std, 0.0);

        let disc = monte_carlo_return(
            &model,
            &pi,
            0,
            &EvalSettings { horizon: 3, n_episodes: 1, discounted: true, seed: 0 },
        )
        .unwrap();
        assert_eq!(disc.mean, -2.0 - 1.0 - 0.5);
    }

    #[test]
    fn bad_settings() {
        let model = Model::new(vec![1], vec![vec![Distribution::point_mass(0)]], vec![-2.0], 0.5).unwrap();
        let pi = JointPolicy::uncontrolled(&model);
        assert!(monte_carlo_return(&model, &pi, 0, &EvalSettings { horizon: 0, ..Default::default() }).is_err());
        assert!(monte_carlo_return(&model, &pi, 0, &EvalSettings { n_episodes: 0, ..Default::default() }).is_err());
        assert!(monte_carlo_return(&model, &pi, 1, &EvalSettings::default()).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let u = Distribution::uniform(3).unwrap();
        let model = Model::new(vec![3], vec![vec![u; 3]], vec![1.0, -1.0, 5.0], 0.9).unwrap();
        let pi = JointPolicy::uncontrolled(&model);
        let settings = EvalSettings { seed: 5, n_episodes: 200, ..Default::default() };
        let a = monte_carlo_return(&model, &pi, 0, &settings).unwrap();
        let b = monte_carlo_return(&model, &pi, 0, &settings).unwrap();
        assert_eq!(a, b);
        assert!(a.std > 0.0);
    }
}
