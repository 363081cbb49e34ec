#![allow(dead_code)]

use klc_opi::staghare::GridSpec;
use klc_opi::{Distribution, JointPolicy, Model, ValueFunction};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive weights on `support`, normalized.
fn random_row<R: Rng>(rng: &mut R, mut support: Vec<usize>) -> Distribution {
    support.sort_unstable();
    let weights: Vec<f64> = support.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    Distribution::from_parts(support, weights.iter().map(|w| w / total).collect()).unwrap()
}

/// A row over `0..size` with a random non-empty support.
fn random_sparse_row<R: Rng>(rng: &mut R, size: usize) -> Distribution {
    let k = rng.random_range(1..=size);
    let support = sample(rng, size, k).into_vec();
    random_row(rng, support)
}

/// Random factored model: every agent's row at every joint state has a
/// random sparse support, costs uniform in `[-10, 10]`.
pub fn random_model<R: Rng>(rng: &mut R, sizes: &[usize], gamma: f64) -> Model {
    let n: usize = sizes.iter().product();
    let kernels = sizes
        .iter()
        .map(|&size| (0..n).map(|_| random_sparse_row(rng, size)).collect())
        .collect();
    let cost = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    Model::new(sizes.to_vec(), kernels, cost, gamma).unwrap()
}

/// Two agents with 2 to 4 sub-states each and `γ ∈ {0.5, 0.9, 0.95}`.
pub fn small_model<R: Rng>(rng: &mut R) -> Model {
    let sizes = [rng.random_range(2..=4), rng.random_range(2..=4)];
    let gamma = [0.5, 0.9, 0.95][rng.random_range(0..3)];
    random_model(rng, &sizes, gamma)
}

pub fn random_values<R: Rng>(rng: &mut R, n: usize, scale: f64) -> ValueFunction {
    ValueFunction::new((0..n).map(|_| rng.random_range(-scale..scale)).collect())
}

/// A row supported on a random non-empty subset of `reference`'s support.
pub fn perturbed_row<R: Rng>(rng: &mut R, reference: &Distribution) -> Distribution {
    let k = rng.random_range(1..=reference.len());
    let picks = sample(rng, reference.len(), k).into_vec();
    random_row(rng, picks.into_iter().map(|i| reference.support()[i]).collect())
}

pub fn random_policy<R: Rng>(rng: &mut R, model: &Model) -> JointPolicy {
    let rows = model.joint_rows().iter().map(|row| perturbed_row(rng, row)).collect();
    JointPolicy::new(model, rows).unwrap()
}

/// The 2-hunter 3×3 grid: hares in the corners, stag in the center.
pub fn grid3() -> GridSpec {
    GridSpec::square(3)
}
