//! KL evaluation and optimal Bellman operators.
//!
//! For a policy `π` the evaluation operator is
//! `(T^π V)(s) = C(s) + KL(π(·|s) ‖ P_0(·|s)) + γ Σ π(s'|s) V(s')`.
//! Minimizing over `π` has the closed form `π(s'|s) ∝ P_0(s'|s) exp(-γ V(s'))`,
//! and the minimum is `(T V)(s) = C(s) - ln Σ P_0(s'|s) exp(-γ V(s'))`.
//! Both are evaluated with max-shifted log-sum-exp.

use crate::distribution::{kl_divergence, Distribution};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::policy::JointPolicy;
use crate::value::ValueFunction;

/// `q(s, π) = C(s) + KL(π(·|s) ‖ P_0(·|s))`.
pub fn one_step_cost(model: &Model, state: usize, row: &Distribution) -> Result<f64> {
    let reference = model.joint_kernel_row(state)?;
    Ok(model.cost()[state] + kl_divergence(row, reference)?)
}

/// The vector `q^π` of one-step costs under `policy`.
pub fn step_costs(model: &Model, policy: &JointPolicy) -> Result<Vec<f64>> {
    check_policy_len(model, policy)?;
    policy
        .rows()
        .iter()
        .enumerate()
        .map(|(s, row)| one_step_cost(model, s, row))
        .collect()
}

pub fn apply_evaluation_operator(model: &Model, policy: &JointPolicy, v: &ValueFunction) -> Result<ValueFunction> {
    let q = step_costs(model, policy)?;
    apply_affine(model, policy, &q, v)
}

/// `T^π V` given precomputed one-step costs.
pub(crate) fn apply_affine(model: &Model, policy: &JointPolicy, q: &[f64], v: &ValueFunction) -> Result<ValueFunction> {
    v.check_len(model.n_states())?;
    check_policy_len(model, policy)?;
    let gamma = model.gamma();
    Ok(policy
        .rows()
        .iter()
        .zip(q)
        .map(|(row, &q)| q + gamma * row.expectation(v))
        .collect::<Vec<_>>()
        .into())
}

/// `ln d(s; γ) = ln Σ_{s'} P_0(s'|s) exp(-γ V(s'))` for one state, along
/// with the per-successor log weights.
fn log_weights(model: &Model, state: usize, v: &[f64], buf: &mut Vec<f64>) {
    let gamma = model.gamma();
    buf.clear();
    buf.extend(
        model.joint_rows()[state]
            .iter()
            .map(|(next, p)| p.ln() - gamma * v[next]),
    );
}

pub fn apply_optimal_operator(model: &Model, v: &ValueFunction) -> Result<ValueFunction> {
    v.check_len(model.n_states())?;
    let mut buf = Vec::new();
    Ok((0..model.n_states())
        .map(|s| {
            log_weights(model, s, v, &mut buf);
            model.cost()[s] - crate::distribution::log_sum_exp(&buf)
        })
        .collect::<Vec<_>>()
        .into())
}

/// The Boltzmann policy `π(s'|s) = P_0(s'|s) exp(-γ V(s')) / d(s; γ)`.
pub fn greedy_policy(model: &Model, v: &ValueFunction) -> Result<JointPolicy> {
    Ok(greedy_with_backup(model, v)?.0)
}

/// The greedy policy together with `T V`, sharing one log-sum-exp per state.
pub fn greedy_with_backup(model: &Model, v: &ValueFunction) -> Result<(JointPolicy, ValueFunction)> {
    v.check_len(model.n_states())?;
    if !v.is_finite() {
        return Err(Error::InvalidConfig("value function has non-finite entries".into()));
    }
    let mut buf = Vec::new();
    let mut backup = Vec::with_capacity(model.n_states());
    let rows = (0..model.n_states())
        .map(|s| {
            log_weights(model, s, v, &mut buf);
            let support = model.joint_rows()[s].support().to_vec();
            let (row, lse) = Distribution::from_log_weights(support, &buf)?;
            backup.push(model.cost()[s] - lse);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((JointPolicy::new_unchecked(rows), backup.into()))
}

/// `‖T V - V‖_∞`.
pub fn bellman_residual(model: &Model, v: &ValueFunction) -> Result<f64> {
    let tv = apply_optimal_operator(model, v)?;
    crate::value::sup_norm_diff(&tv, v)
}

fn check_policy_len(model: &Model, policy: &JointPolicy) -> Result<()> {
    if policy.len() != model.n_states() {
        return Err(Error::DimensionMismatch {
            expected: model.n_states(),
            actual: policy.len(),
        });
    }
    Ok(())
}
