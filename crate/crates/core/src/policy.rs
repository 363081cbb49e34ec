use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::model::Model;

/// A stationary joint policy: one row over next joint states per joint state.
///
/// Rows are restricted to the support of the uncontrolled kernel, so a
/// policy can only reweight transitions the passive dynamics already allow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointPolicy {
    rows: Vec<Distribution>,
}

impl JointPolicy {
    pub fn new(model: &Model, rows: Vec<Distribution>) -> Result<Self> {
        let policy = Self { rows };
        policy.validate(model)?;
        Ok(policy)
    }

    pub(crate) fn new_unchecked(rows: Vec<Distribution>) -> Self {
        Self { rows }
    }

    /// The passive policy `π = P_0`.
    pub fn uncontrolled(model: &Model) -> Self {
        Self {
            rows: model.joint_rows().to_vec(),
        }
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.rows.len() != model.n_states() {
            return Err(Error::DimensionMismatch {
                expected: model.n_states(),
                actual: self.rows.len(),
            });
        }
        for (s, (row, reference)) in self.rows.iter().zip(model.joint_rows()).enumerate() {
            if !row.is_supported_by(reference) {
                return Err(Error::InvalidPolicy(format!(
                    "row {s} puts mass outside the uncontrolled kernel support"
                )));
            }
        }
        Ok(())
    }

    pub fn row(&self, state: usize) -> &Distribution {
        &self.rows[state]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-agent marginal of a joint policy: for every joint state, the
/// distribution of the agent's own next sub-state, summing out all other
/// agents.
pub fn marginal_policy(model: &Model, policy: &JointPolicy, agent: usize) -> Result<Vec<Distribution>> {
    if agent >= model.n_agents() {
        return Err(Error::IndexOutOfRange {
            index: agent,
            size: model.n_agents(),
        });
    }
    let size = model.space().sizes()[agent];
    let mut mass = vec![0.0; size];
    policy
        .rows()
        .iter()
        .map(|row| {
            mass.iter_mut().for_each(|m| *m = 0.0);
            for (next, p) in row.iter() {
                mass[model.space().substate(next, agent)] += p;
            }
            let (support, probs): (Vec<_>, Vec<_>) = mass
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0.0)
                .map(|(i, &m)| (i, m))
                .unzip();
            Distribution::from_parts(support, probs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(row: Distribution) -> (Model, JointPolicy) {
        let u = Distribution::uniform(2).unwrap();
        let model = Model::new(vec![2, 2], vec![vec![u.clone(); 4], vec![u; 4]], vec![0.0; 4], 0.5).unwrap();
        let policy = JointPolicy::new(&model, vec![row; 4]).unwrap();
        (model, policy)
    }

    #[test]
    fn marginal_of_joint_row() {
        // joint (a0, a1) -> index 2 * a0 + a1
        let row = Distribution::new(vec![(0, 0.4), (1, 0.2), (2, 0.3), (3, 0.1)]).unwrap();
        let (model, policy) = two_by_two(row);
        let m0 = marginal_policy(&model, &policy, 0).unwrap();
        assert!((m0[0].prob(0) - 0.6).abs() < 1e-15);
        assert!((m0[0].prob(1) - 0.4).abs() < 1e-15);
        let m1 = marginal_policy(&model, &policy, 1).unwrap();
        assert!((m1[2].prob(0) - 0.7).abs() < 1e-15);
        assert!(marginal_policy(&model, &policy, 2).is_err());
    }

    #[test]
    fn marginal_of_point_mass() {
        let kernel = |n: usize| {
            (0..100).map(|_| Distribution::uniform(n).unwrap()).collect::<Vec<_>>()
        };
        let model = Model::new(vec![10, 10], vec![kernel(10), kernel(10)], vec![0.0; 100], 0.5).unwrap();
        let target = model.space().encode(&[3, 7]).unwrap();
        let policy = JointPolicy::new(&model, vec![Distribution::point_mass(target); 100]).unwrap();
        let m0 = marginal_policy(&model, &policy, 0).unwrap();
        assert_eq!(m0[0], Distribution::point_mass(3));
        let m1 = marginal_policy(&model, &policy, 1).unwrap();
        assert_eq!(m1[99], Distribution::point_mass(7));
    }

    #[test]
    fn marginal_of_product_kernel_is_agent_kernel() {
        let a = Distribution::new(vec![(0, 0.9), (1, 0.1)]).unwrap();
        let b = Distribution::new(vec![(0, 0.3), (2, 0.7)]).unwrap();
        let model = Model::new(vec![2, 3], vec![vec![a; 6], vec![b; 6]], vec![0.0; 6], 0.5).unwrap();
        let policy = JointPolicy::uncontrolled(&model);
        for agent in 0..2 {
            let marginals = marginal_policy(&model, &policy, agent).unwrap();
            for (s, m) in marginals.iter().enumerate() {
                assert!(m.approx_eq(model.kernel_row(agent, s), 1e-15));
            }
        }
    }

    #[test]
    fn rejects_off_support_rows() {
        let point = Distribution::point_mass(0);
        let model = Model::new(vec![2], vec![vec![point.clone(); 2]], vec![0.0; 2], 0.5).unwrap();
        let bad = JointPolicy::new(&model, vec![Distribution::point_mass(1); 2]);
        assert!(matches!(bad, Err(Error::InvalidPolicy(_))));
        assert!(JointPolicy::new(&model, vec![point]).is_err());
    }
}
