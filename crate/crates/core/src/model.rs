//! Factored multi-agent MDPs with KL control costs.
//!
//! The joint state space is the Cartesian product of per-agent sub-state
//! spaces. Each agent contributes an uncontrolled kernel `P_{i,0}(·|s)` over
//! its own sub-states, conditioned on the full joint state, and the joint
//! uncontrolled kernel is their product.

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubStateSpace {
    pub agent_id: usize,
    pub size: usize,
}

/// Mixed-radix codec between joint state tuples and flat indices.
///
/// Agent 0 is the most significant digit, so for two agents on 25 cells the
/// joint state `(s1, s2)` has flat index `25 * s1 + s2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl JointSpace {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidModel("at least one agent is required".into()));
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidModel(format!("agent {i} has an empty sub-state space")));
        }
        let mut strides = vec![1usize; sizes.len()];
        for i in (0..sizes.len() - 1).rev() {
            strides[i] = strides[i + 1]
                .checked_mul(sizes[i + 1])
                .ok_or_else(|| Error::InvalidModel("joint state space too large".into()))?;
        }
        let len = strides[0]
            .checked_mul(sizes[0])
            .ok_or_else(|| Error::InvalidModel("joint state space too large".into()))?;
        Ok(Self { sizes, strides, len })
    }

    pub fn n_agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn spaces(&self) -> Vec<SubStateSpace> {
        self.sizes
            .iter()
            .enumerate()
            .map(|(agent_id, &size)| SubStateSpace { agent_id, size })
            .collect()
    }

    /// Number of joint states, `∏ |S_i|`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stride(&self, agent: usize) -> usize {
        self.strides[agent]
    }

    pub fn encode(&self, substates: &[usize]) -> Result<usize> {
        if substates.len() != self.sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sizes.len(),
                actual: substates.len(),
            });
        }
        substates
            .iter()
            .zip(&self.sizes)
            .zip(&self.strides)
            .try_fold(0, |acc, ((&s, &size), &stride)| {
                if s >= size {
                    Err(Error::IndexOutOfRange { index: s, size })
                } else {
                    Ok(acc + s * stride)
                }
            })
    }

    pub fn decode(&self, index: usize) -> Result<Vec<usize>> {
        self.check(index)?;
        Ok(self.decode_unchecked(index))
    }

    pub(crate) fn decode_unchecked(&self, index: usize) -> Vec<usize> {
        self.sizes
            .iter()
            .zip(&self.strides)
            .map(|(&size, &stride)| (index / stride) % size)
            .collect()
    }

    /// Sub-state of `agent` in joint state `index`.
    pub fn substate(&self, index: usize, agent: usize) -> usize {
        (index / self.strides[agent]) % self.sizes[agent]
    }

    pub fn check(&self, index: usize) -> Result<()> {
        if index < self.len {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index,
                size: self.len,
            })
        }
    }
}

/// A factored KL-control MDP.
///
/// The joint uncontrolled rows `P_0(·|s)` are materialized once at
/// construction; every operator and sampler reads them.
#[derive(Debug, Clone)]
pub struct Model {
    space: JointSpace,
    kernels: Vec<Vec<Distribution>>,
    cost: Vec<f64>,
    gamma: f64,
    joint_rows: Vec<Distribution>,
}

impl Model {
    /// `kernels[i][s]` is agent `i`'s uncontrolled row at joint state `s`,
    /// a distribution over `0..space_sizes[i]`.
    pub fn new(
        space_sizes: Vec<usize>,
        kernels: Vec<Vec<Distribution>>,
        cost: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let space = JointSpace::new(space_sizes)?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidModel(format!("gamma {gamma} not in [0, 1)")));
        }
        if cost.len() != space.len() {
            return Err(Error::InvalidModel(format!(
                "cost has {} entries, joint space has {}",
                cost.len(),
                space.len()
            )));
        }
        if let Some(s) = cost.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidModel(format!("cost at state {s} is not finite")));
        }
        if kernels.len() != space.n_agents() {
            return Err(Error::InvalidModel(format!(
                "{} kernels for {} agents",
                kernels.len(),
                space.n_agents()
            )));
        }
        for (agent, rows) in kernels.iter().enumerate() {
            if rows.len() != space.len() {
                return Err(Error::InvalidModel(format!(
                    "agent {agent} kernel has {} rows, joint space has {}",
                    rows.len(),
                    space.len()
                )));
            }
            let size = space.sizes()[agent];
            if let Some(s) = rows.iter().position(|row| row.max_index() >= size) {
                return Err(Error::InvalidModel(format!(
                    "agent {agent} kernel row at state {s} leaves the sub-state space"
                )));
            }
        }
        let joint_rows = (0..space.len())
            .map(|s| product_row(&space, &kernels, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space,
            kernels,
            cost,
            gamma,
            joint_rows,
        })
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn n_agents(&self) -> usize {
        self.space.n_agents()
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn kernel_row(&self, agent: usize, state: usize) -> &Distribution {
        &self.kernels[agent][state]
    }

    pub fn kernels(&self) -> &[Vec<Distribution>] {
        &self.kernels
    }

    /// `P_0(·|s)`, the product of the per-agent uncontrolled rows.
    pub fn joint_kernel_row(&self, state: usize) -> Result<&Distribution> {
        self.space.check(state)?;
        Ok(&self.joint_rows[state])
    }

    pub fn joint_rows(&self) -> &[Distribution] {
        &self.joint_rows
    }

    /// Same model with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidModel(format!("gamma {gamma} not in [0, 1)")));
        }
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    /// Bound on the magnitude of any one-step cost under a support-respecting
    /// policy: `max |C| + max_s max_{s'} ln(1 / P_0(s'|s))`.
    pub fn q_max(&self) -> f64 {
        let c = self.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let kl = self
            .joint_rows
            .iter()
            .flat_map(|row| row.probs().iter())
            .fold(0.0f64, |m, &p| m.max(-p.ln()));
        c + kl
    }

    /// Checks whether all agents share the same uncontrolled sub-state
    /// probabilities at every joint state.
    pub fn homogeneity(&self) -> HomogeneityReport {
        let n = self.n_agents();
        let same_sizes = self.space.sizes().windows(2).all(|w| w[0] == w[1]);
        let mut violations = Vec::new();
        if same_sizes && n > 1 {
            for s in 0..self.n_states() {
                let first = &self.kernels[0][s];
                if (1..n).any(|j| !first.approx_eq(&self.kernels[j][s], 1e-12)) {
                    violations.push(s);
                }
            }
        }
        HomogeneityReport {
            comparable: same_sizes,
            n_states: self.n_states(),
            violating_states: violations,
        }
    }
}

/// Outcome of [`Model::homogeneity`].
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport {
    /// False when agents have differently sized sub-state spaces, in which
    /// case the condition is not defined.
    pub comparable: bool,
    pub n_states: usize,
    pub violating_states: Vec<usize>,
}

impl HomogeneityReport {
    pub fn holds(&self) -> bool {
        self.comparable && self.violating_states.is_empty()
    }
}

fn product_row(space: &JointSpace, kernels: &[Vec<Distribution>], state: usize) -> Result<Distribution> {
    let mut support = vec![0usize];
    let mut probs = vec![1.0f64];
    for (agent, rows) in kernels.iter().enumerate() {
        let row = &rows[state];
        let stride = space.stride(agent);
        let mut next_support = Vec::with_capacity(support.len() * row.len());
        let mut next_probs = Vec::with_capacity(support.len() * row.len());
        for (&idx, &p) in support.iter().zip(&probs) {
            for (sub, q) in row.iter() {
                next_support.push(idx + sub * stride);
                next_probs.push(p * q);
            }
        }
        support = next_support;
        probs = next_probs;
    }
    Distribution::from_parts(support, probs)
}
