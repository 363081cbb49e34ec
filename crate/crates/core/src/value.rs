use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost-to-go estimate indexed by flat joint state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                actual: self.0.len(),
            })
        }
    }
}

impl Deref for ValueFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for ValueFunction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `max_s |v1(s) - v2(s)|`.
pub fn sup_norm_diff(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::DimensionMismatch {
            expected: v1.len(),
            actual: v2.len(),
        });
    }
    Ok(v1
        .iter()
        .zip(v2)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Largest `|v|` for which `exp(-v)` stays a normal, finite float.
pub const SATURATION_LIMIT: f64 = 700.0;

/// Exponentiated value function, `z(s) = exp(-v(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Desirability(Vec<f64>);

impl Desirability {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Inverse transform back to `-ln z`.
    pub fn to_value_function(&self) -> ValueFunction {
        ValueFunction(self.0.iter().map(|z| -z.ln()).collect())
    }
}

/// Reports [`Error::Saturation`] instead of returning zeros or infinities.
/// Policy weights never go through this path; they are computed in log
/// space.
pub fn desirability(v: &ValueFunction) -> Result<Desirability> {
    v.iter()
        .enumerate()
        .map(|(state, &value)| {
            if !value.is_finite() || value.abs() > SATURATION_LIMIT {
                Err(Error::Saturation { state, value })
            } else {
                Ok((-value).exp())
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Desirability)
}
