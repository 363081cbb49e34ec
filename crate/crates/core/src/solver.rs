//! Exact planning: value iteration, policy evaluation by linear solve, and
//! policy iteration. These are the ground truth the learners are checked
//! against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::operators::{apply_affine, apply_optimal_operator, bellman_residual, greedy_policy, step_costs};
use crate::policy::JointPolicy;
use crate::value::{sup_norm_diff, ValueFunction};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Residual target for [`exact_policy_evaluation`].
pub const EVALUATION_TOL: f64 = 1e-9;

/// Policy iteration stops once successive values move less than this.
pub const POLICY_ITERATION_TOL: f64 = 1e-10;

/// Above this many states the evaluation skips the dense factorization and
/// iterates `T^π` directly.
const DENSE_SOLVE_LIMIT: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub v_star: ValueFunction,
    pub pi_star: JointPolicy,
    pub iterations: usize,
    /// `‖T v_star - v_star‖_∞`.
    pub final_residual: f64,
    /// Residual `‖T V_k - V_k‖_∞` at each iterate, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<f64>,
}

/// Fixed-point iteration of the optimal operator from `V = 0`.
pub fn value_iteration(model: &Model, tol: f64, max_iters: usize) -> Result<SolveReport> {
    value_iteration_from(model, ValueFunction::zeros(model.n_states()), tol, max_iters)
}

pub fn value_iteration_from(model: &Model, v0: ValueFunction, tol: f64, max_iters: usize) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance {tol} must be positive")));
    }
    v0.check_len(model.n_states())?;
    let mut v = v0;
    let mut residuals = Vec::new();
    for iteration in 1..=max_iters {
        let tv = apply_optimal_operator(model, &v)?;
        let residual = sup_norm_diff(&tv, &v)?;
        residuals.push(residual);
        if residual <= tol {
            let pi_star = greedy_policy(model, &v)?;
            return Ok(SolveReport {
                v_star: v,
                pi_star,
                iterations: iteration,
                final_residual: residual,
                residuals,
            });
        }
        v = tv;
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Solves `V = q^π + γ Π V` for the policy's value.
///
/// Uses a dense LU factorization of `I - γΠ` on small models, then polishes
/// with `T^π` sweeps until `‖T^π V - V‖_∞ ≤ 1e-9`.
pub fn exact_policy_evaluation(model: &Model, policy: &JointPolicy) -> Result<ValueFunction> {
    policy.validate(model)?;
    let q = step_costs(model, policy)?;
    let n = model.n_states();
    let gamma = model.gamma();

    let mut v = if n <= DENSE_SOLVE_LIMIT {
        let mut a = DMatrix::<f64>::identity(n, n);
        for (s, row) in policy.rows().iter().enumerate() {
            for (next, p) in row.iter() {
                a[(s, next)] -= gamma * p;
            }
        }
        let b = DVector::from_column_slice(&q);
        match a.lu().solve(&b) {
            Some(x) => ValueFunction::new(x.as_slice().to_vec()),
            None => ValueFunction::zeros(n),
        }
    } else {
        ValueFunction::zeros(n)
    };

    loop {
        let next = apply_affine(model, policy, &q, &v)?;
        let residual = sup_norm_diff(&next, &v)?;
        if residual <= EVALUATION_TOL {
            return Ok(v);
        }
        v = next;
    }
}

/// Alternates greedy improvement with exact evaluation.
pub fn exact_policy_iteration(model: &Model, v0: ValueFunction, max_iters: usize) -> Result<SolveReport> {
    v0.check_len(model.n_states())?;
    let mut v = v0;
    let mut residuals = Vec::new();
    for iteration in 1..=max_iters {
        let policy = greedy_policy(model, &v)?;
        let next = exact_policy_evaluation(model, &policy)?;
        let step = sup_norm_diff(&next, &v)?;
        v = next;
        residuals.push(bellman_residual(model, &v)?);
        if step <= POLICY_ITERATION_TOL {
            let pi_star = greedy_policy(model, &v)?;
            return Ok(SolveReport {
                final_residual: *residuals.last().unwrap(),
                v_star: v,
                pi_star,
                iterations: iteration,
                residuals,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}
