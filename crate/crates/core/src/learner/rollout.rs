use rand::Rng;

use crate::distribution::Distribution;
use crate::error::Result;
use crate::model::Model;
use crate::operators::{apply_affine, step_costs};
use crate::policy::{marginal_policy, JointPolicy};
use crate::value::ValueFunction;

use super::config::SamplingRule;

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSample {
    pub start_state: usize,
    /// `s_0, …, s_m`.
    pub visited: Vec<usize>,
    pub return_estimate: f64,
}

/// Per-policy data shared by every rollout in an iteration: the analytic
/// one-step costs and, for marginal sampling, the per-agent marginals.
pub struct RolloutContext<'a> {
    model: &'a Model,
    policy: &'a JointPolicy,
    costs: Vec<f64>,
    marginals: Option<Vec<Vec<Distribution>>>,
}

impl<'a> RolloutContext<'a> {
    pub fn new(model: &'a Model, policy: &'a JointPolicy, rule: SamplingRule) -> Result<Self> {
        policy.validate(model)?;
        let costs = step_costs(model, policy)?;
        let marginals = match rule {
            SamplingRule::Joint => None,
            SamplingRule::ProductOfMarginals => Some(
                (0..model.n_agents())
                    .map(|agent| marginal_policy(model, policy, agent))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(Self {
            model,
            policy,
            costs,
            marginals,
        })
    }

    /// `q^π`, the one-step cost at each state.
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        match &self.marginals {
            None => self.policy.row(state).sample(rng),
            Some(marginals) => marginals
                .iter()
                .enumerate()
                .map(|(agent, rows)| rows[state].sample(rng) * self.model.space().stride(agent))
                .sum(),
        }
    }

    /// Simulates `m` transitions from `start` and returns
    /// `Σ_{t<m} γ^t q(s_t, π) + γ^m v(s_m)`.
    pub fn rollout<R: Rng + ?Sized>(&self, start: usize, m: usize, v: &[f64], rng: &mut R) -> RolloutSample {
        let gamma = self.model.gamma();
        let mut visited = Vec::with_capacity(m + 1);
        let mut state = start;
        let mut discount = 1.0;
        let mut total = 0.0;
        visited.push(state);
        for _ in 0..m {
            total += discount * self.costs[state];
            discount *= gamma;
            state = self.step(state, rng);
            visited.push(state);
        }
        total += discount * v[state];
        RolloutSample {
            start_state: start,
            visited,
            return_estimate: total,
        }
    }

    /// `s_0, …, s_steps` under the policy, starting at `start`.
    pub fn path<R: Rng + ?Sized>(&self, start: usize, steps: usize, rng: &mut R) -> Vec<usize> {
        let mut visited = Vec::with_capacity(steps + 1);
        let mut state = start;
        visited.push(state);
        for _ in 0..steps {
            state = self.step(state, rng);
            visited.push(state);
        }
        visited
    }

    /// Same as [`rollout`](Self::rollout) without recording the path.
    pub fn rollout_return<R: Rng + ?Sized>(&self, start: usize, m: usize, v: &[f64], rng: &mut R) -> f64 {
        let gamma = self.model.gamma();
        let mut state = start;
        let mut discount = 1.0;
        let mut total = 0.0;
        for _ in 0..m {
            total += discount * self.costs[state];
            discount *= gamma;
            state = self.step(state, rng);
        }
        total + discount * v[state]
    }
}

/// One m-step rollout; builds a fresh [`RolloutContext`] per call.
pub fn rollout<R: Rng + ?Sized>(
    model: &Model,
    policy: &JointPolicy,
    start: usize,
    m: usize,
    v: &ValueFunction,
    rule: SamplingRule,
    rng: &mut R,
) -> Result<RolloutSample> {
    model.space().check(start)?;
    v.check_len(model.n_states())?;
    Ok(RolloutContext::new(model, policy, rule)?.rollout(start, m, v, rng))
}

/// `(T^π)^m v`, the noise-free target of an m-step rollout.
pub fn expected_m_step(model: &Model, policy: &JointPolicy, v: &ValueFunction, m: usize) -> Result<ValueFunction> {
    let q = step_costs(model, policy)?;
    let mut out = v.clone();
    for _ in 0..m {
        out = apply_affine(model, policy, &q, &out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::apply_evaluation_operator;
    use crate::learner::rng::{Purpose, SeedLineage};
    use approx::assert_abs_diff_eq;

    fn two_state() -> Model {
        let u = Distribution::uniform(2).unwrap();
        Model::new(vec![2], vec![vec![u.clone(), u]], vec![0.0, 1.0], 0.5).unwrap()
    }

    #[test]
    fn deterministic_single_successor() {
        let rows = vec![Distribution::point_mass(1), Distribution::point_mass(0)];
        let model = Model::new(vec![2], vec![rows], vec![3.0, -1.0], 0.9).unwrap();
        let pi = JointPolicy::uncontrolled(&model);
        let v = ValueFunction::new(vec![10.0, 20.0]);
        let mut rng = SeedLineage::new(1).stream(Purpose::Rollout, 0, 0);
        let sample = rollout(&model, &pi, 0, 1, &v, SamplingRule::Joint, &mut rng).unwrap();
        assert_eq!(sample.visited, vec![0, 1]);
        assert_eq!(sample.return_estimate, 3.0 + 0.9 * 20.0);
    }

    #[test]
    fn zero_model_returns_zero() {
        let u = Distribution::uniform(3).unwrap();
        let model = Model::new(vec![3], vec![vec![u; 3]], vec![0.0; 3], 0.9).unwrap();
        let pi = JointPolicy::uncontrolled(&model);
        let ctx = RolloutContext::new(&model, &pi, SamplingRule::Joint).unwrap();
        let mut rng = SeedLineage::new(2).stream(Purpose::Rollout, 0, 0);
        for s in 0..3 {
            assert_eq!(ctx.rollout(s, 7, &[0.0; 3], &mut rng).return_estimate, 0.0);
        }
    }

    #[test]
    fn two_outcome_mean() {
        let model = two_state();
        let pi = JointPolicy::uncontrolled(&model);
        let ctx = RolloutContext::new(&model, &pi, SamplingRule::Joint).unwrap();
        let v = [0.0, 1.0];
        let mut rng = SeedLineage::new(3).stream(Purpose::Rollout, 0, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let r = ctx.rollout_return(0, 1, &v, &mut rng);
            assert!(r == 0.0 || r == 0.5);
            sum += r;
        }
        assert_abs_diff_eq!(sum / n as f64, 0.25, epsilon = 0.005);
    }

    #[test]
    fn visited_path_follows_support() {
        let model = two_state();
        let pi = JointPolicy::uncontrolled(&model);
        let mut rng = SeedLineage::new(4).stream(Purpose::Rollout, 0, 0);
        let sample = rollout(&model, &pi, 1, 6, &ValueFunction::zeros(2), SamplingRule::ProductOfMarginals, &mut rng).unwrap();
        assert_eq!(sample.visited.len(), 7);
        assert_eq!(sample.visited[0], 1);
        assert!(rollout(&model, &pi, 2, 1, &ValueFunction::zeros(2), SamplingRule::Joint, &mut rng).is_err());
    }

    #[test]
    fn expected_m_step_examples() {
        let model = two_state();
        let pi = JointPolicy::uncontrolled(&model);
        let v = ValueFunction::new(vec![0.0, 1.0]);
        assert_eq!(
            expected_m_step(&model, &pi, &v, 1).unwrap(),
            apply_evaluation_operator(&model, &pi, &v).unwrap()
        );
        let two = expected_m_step(&model, &pi, &v, 2).unwrap();
        assert_abs_diff_eq!(two[0], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(two[1], 1.375, epsilon = 1e-15);

        let u = Distribution::uniform(2).unwrap();
        let zero = Model::new(vec![2], vec![vec![u; 2]], vec![0.0; 2], 0.9).unwrap();
        let out = expected_m_step(&zero, &JointPolicy::uncontrolled(&zero), &ValueFunction::zeros(2), 9).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0]);
    }
}
