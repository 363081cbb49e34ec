//! Sparse probability vectors over a finite index set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a row.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability vector that stores only its strictly positive entries.
///
/// The support is kept sorted and duplicate-free so that two rows over the
/// same index set can be merged in a single pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, f64)>", into = "Vec<(usize, f64)>")]
pub struct Distribution {
    support: Vec<usize>,
    probs: Vec<f64>,
}

impl Distribution {
    /// Builds a distribution from `(index, prob)` pairs in any order.
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let (support, probs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        Self::from_parts(support, probs)
    }

    pub fn from_parts(support: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} indices but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(w) = support.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(format!(
                "support not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if let Some((&i, &p)) = support
            .iter()
            .zip(&probs)
            .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} at index {i} is not positive and finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { support, probs })
    }

    /// Builds a distribution proportional to `exp(log_weights)` on `support`.
    ///
    /// Returns the distribution together with `ln Σ exp(log_weights)`.
    /// Weights are max-shifted before exponentiation; an entry that would
    /// underflow is floored at the smallest positive normal so the support
    /// is preserved exactly.
    pub fn from_log_weights(support: Vec<usize>, log_weights: &[f64]) -> Result<(Self, f64)> {
        let lse = log_sum_exp(log_weights);
        if !lse.is_finite() {
            return Err(Error::InvalidDistribution(
                "log weights are not finite".into(),
            ));
        }
        let mut probs: Vec<f64> = log_weights
            .iter()
            .map(|&w| (w - lse).exp().max(f64::MIN_POSITIVE))
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok((Self::from_parts(support, probs)?, lse))
    }

    pub fn point_mass(index: usize) -> Self {
        Self {
            support: vec![index],
            probs: vec![1.0],
        }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_parts((0..n).collect(), vec![1.0 / n as f64; n])
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    /// Probability of `index`, zero if it is off the support.
    pub fn prob(&self, index: usize) -> f64 {
        self.support
            .binary_search(&index)
            .map_or(0.0, |pos| self.probs[pos])
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.iter().map(|(i, p)| p * values[i]).sum()
    }

    pub fn max_index(&self) -> usize {
        *self.support.last().expect("distribution support is never empty")
    }

    /// Whether every index of `self` is also in the support of `other`.
    pub fn is_supported_by(&self, other: &Distribution) -> bool {
        let mut theirs = other.support.iter().peekable();
        'outer: for &i in &self.support {
            while let Some(&&j) = theirs.peek() {
                theirs.next();
                if j == i {
                    continue 'outer;
                }
                if j > i {
                    return false;
                }
            }
            return false;
        }
        true
    }

    /// Inverse-CDF draw given a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.iter() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.max_index()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.support.len() == 1 {
            return self.support[0];
        }
        self.sample_with(rng.random::<f64>())
    }

    /// Entrywise comparison within `tol`, treating off-support mass as zero.
    pub fn approx_eq(&self, other: &Distribution, tol: f64) -> bool {
        let (mut a, mut b) = (self.iter().peekable(), other.iter().peekable());
        loop {
            match (a.peek().copied(), b.peek().copied()) {
                (None, None) => return true,
                (Some((i, p)), Some((j, q))) if i == j => {
                    if (p - q).abs() > tol {
                        return false;
                    }
                    a.next();
                    b.next();
                }
                (Some((i, p)), Some((j, _))) if i < j => {
                    if p > tol {
                        return false;
                    }
                    a.next();
                }
                (Some(_), Some((_, q))) | (None, Some((_, q))) => {
                    if q > tol {
                        return false;
                    }
                    b.next();
                }
                (Some((_, p)), None) => {
                    if p > tol {
                        return false;
                    }
                    a.next();
                }
            }
        }
    }
}

impl TryFrom<Vec<(usize, f64)>> for Distribution {
    type Error = Error;

    fn try_from(pairs: Vec<(usize, f64)>) -> Result<Self> {
        Distribution::new(pairs)
    }
}

impl From<Distribution> for Vec<(usize, f64)> {
    fn from(d: Distribution) -> Self {
        d.support.into_iter().zip(d.probs).collect()
    }
}

/// `KL(p ‖ q)` in nats.
///
/// Fails with [`Error::SupportViolation`] when `p` puts mass where `q` has
/// none. Identical rows give exactly zero.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    let mut q_iter = q.iter();
    let mut total = 0.0;
    for (i, pi) in p.iter() {
        let qi = loop {
            match q_iter.next() {
                Some((j, qj)) if j == i => break qj,
                Some((j, _)) if j < i => continue,
                _ => return Err(Error::SupportViolation { index: i }),
            }
        };
        if pi != qi {
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Max-shifted `ln Σ exp(x)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(pairs: &[(usize, f64)]) -> Distribution {
        Distribution::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![(0, 0.5), (0, 0.5)]).is_err());
        assert!(Distribution::new(vec![(0, 0.5), (1, 0.4)]).is_err());
        assert!(Distribution::new(vec![(0, 1.0), (1, 0.0)]).is_err());
        assert!(Distribution::new(vec![(0, f64::NAN)]).is_err());
        assert!(Distribution::from_parts(vec![1, 0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn unsorted_pairs_are_sorted() {
        let row = d(&[(5, 0.25), (1, 0.75)]);
        assert_eq!(row.support(), &[1, 5]);
        assert_eq!(row.prob(5), 0.25);
        assert_eq!(row.prob(2), 0.0);
    }

    #[test]
    fn kl_examples() {
        let p = d(&[(0, 0.9), (1, 0.1)]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        let half = d(&[(0, 0.5), (1, 0.5)]);
        let point = Distribution::point_mass(0);
        assert_abs_diff_eq!(
            kl_divergence(&point, &half).unwrap(),
            0.693147,
            epsilon = 1e-6
        );
        // 0.9 ln 1.8 + 0.1 ln 0.2
        assert_abs_diff_eq!(kl_divergence(&p, &half).unwrap(), 0.368064, epsilon = 1e-6);
    }

    #[test]
    fn kl_support_violation() {
        let p = d(&[(0, 0.5), (2, 0.5)]);
        let q = d(&[(0, 0.5), (1, 0.5)]);
        assert_eq!(
            kl_divergence(&p, &q),
            Err(Error::SupportViolation { index: 2 })
        );
        let tail = d(&[(3, 1.0)]);
        assert!(kl_divergence(&tail, &q).is_err());
    }

    #[test]
    fn support_inclusion() {
        let big = d(&[(0, 0.25), (2, 0.25), (4, 0.5)]);
        assert!(d(&[(2, 1.0)]).is_supported_by(&big));
        assert!(d(&[(0, 0.5), (4, 0.5)]).is_supported_by(&big));
        assert!(!d(&[(1, 1.0)]).is_supported_by(&big));
        assert!(!d(&[(5, 1.0)]).is_supported_by(&big));
    }

    #[test]
    fn log_weights_normalize() {
        let (row, lse) = Distribution::from_log_weights(vec![0, 1], &[0.5f64.ln(), (0.5f64).ln() - 0.5]).unwrap();
        assert_abs_diff_eq!(row.prob(0), 0.622459, epsilon = 1e-6);
        assert_abs_diff_eq!(row.prob(1), 0.377541, epsilon = 1e-6);
        assert_abs_diff_eq!(-lse, 0.219070, epsilon = 1e-6);
    }

    #[test]
    fn extreme_log_weights_keep_support() {
        let (row, _) = Distribution::from_log_weights(vec![0, 1], &[0.0, -2000.0]).unwrap();
        assert_eq!(row.len(), 2);
        assert!(row.prob(1) > 0.0);
    }

    #[test]
    fn sampling_covers_support() {
        let row = d(&[(3, 0.5), (7, 0.5)]);
        assert_eq!(row.sample_with(0.0), 3);
        assert_eq!(row.sample_with(0.6), 7);
        assert_eq!(row.sample_with(0.999_999_999_999_999_9), 7);
    }

    #[test]
    fn serde_pairs() {
        let row = d(&[(0, 0.9), (1, 0.05), (5, 0.05)]);
        let json = serde_json::to_string(&row).unwrap();
        assert_eq!(json, "[[0,0.9],[1,0.05],[5,0.05]]");
        let back: Distribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, row);
        assert!(serde_json::from_str::<Distribution>("[[0,0.5]]").is_err());
    }
}
