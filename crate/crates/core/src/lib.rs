//! Tabular solvers and learners for multi-agent MDPs with KL control costs.
//!
//! A model is a factored MDP: each agent owns a sub-state and an
//! uncontrolled transition kernel, the joint kernel is their product, and
//! every step costs the intrinsic joint-state cost plus the KL divergence
//! between the chosen transition row and the uncontrolled one. The greedy
//! policy for such costs is a closed-form Boltzmann reweighting of the
//! uncontrolled kernel, which is what makes the optimistic policy
//! iteration schemes in [`learner`] cheap.
//!
//! * [`operators`]: evaluation/optimal Bellman operators and greedy policies
//! * [`solver`]: exact value iteration, policy evaluation, policy iteration
//! * [`learner`]: synchronous and asynchronous m-step TD policy iteration
//! * [`staghare`]: the Stag-Hare gridworld and its shortest-path baseline
//! * [`metrics`]: Monte-Carlo returns and policy comparisons
//! * [`io`]: JSON/CSV formats

pub mod distribution;
pub mod error;
pub mod io;
pub mod learner;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod policy;
pub mod solver;
pub mod staghare;
pub mod value;

pub use distribution::{kl_divergence, Distribution};
pub use error::{Error, Result};
pub use model::{JointSpace, Model, SubStateSpace};
pub use operators::{
    apply_evaluation_operator, apply_optimal_operator, bellman_residual, greedy_policy, one_step_cost,
};
pub use policy::{marginal_policy, JointPolicy};
pub use solver::{exact_policy_evaluation, exact_policy_iteration, value_iteration, SolveReport};
pub use value::{desirability, sup_norm_diff, Desirability, ValueFunction};
