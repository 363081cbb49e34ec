//! Synchronous and asynchronous KL-control optimistic policy iteration.
//!
//! Every iteration takes the Boltzmann-greedy policy of the current
//! estimate, forms an m-step target at each evaluated state, and moves the
//! estimate toward it with step `α_k`:
//! `v_{k+1}(s) = (1 - α_k) v_k(s) + α_k target(s)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::operators::{apply_affine, bellman_residual, greedy_with_backup};
use crate::value::{sup_norm_diff, ValueFunction};

use super::config::{init_value, Mode, RunConfig, Scheme};
use super::rng::{Purpose, SeedLineage};
use super::rollout::RolloutContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub v: ValueFunction,
    pub k: usize,
    pub lineage: SeedLineage,
}

impl LearnerState {
    pub fn new(v: ValueFunction, seed: u64) -> Self {
        Self {
            v,
            k: 0,
            lineage: SeedLineage::new(seed),
        }
    }

    pub fn init(model: &Model, config: &RunConfig) -> Result<Self> {
        Ok(Self::new(init_value(model, &config.init)?, config.seed))
    }
}

/// What one iteration did, besides producing the next state.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub alpha: f64,
    /// States updated this iteration, increasing.
    pub batch: Vec<usize>,
    /// Mean of the targets over `batch`.
    pub mean_return: f64,
}

/// Updates every joint state.
pub fn sync_iteration(state: &LearnerState, model: &Model, config: &RunConfig) -> Result<(LearnerState, IterationStats)> {
    let batch: Vec<usize> = (0..model.n_states()).collect();
    step(state, model, config, batch)
}

/// Updates a uniformly drawn set of `D` distinct joint states; the others
/// keep their values. The greedy policy is still taken over the full
/// estimate.
pub fn async_iteration(state: &LearnerState, model: &Model, config: &RunConfig) -> Result<(LearnerState, IterationStats)> {
    let n = model.n_states();
    let d = config.scheme.batch_size(n);
    if d == 0 || d > n {
        return Err(Error::InvalidConfig(format!("batch size {d} not in [1, {n}]")));
    }
    step(state, model, config, sample_batch(&state.lineage, state.k, n, d))
}

/// Draws `d` distinct states out of `n` uniformly, returned sorted.
pub fn sample_batch(lineage: &SeedLineage, k: usize, n: usize, d: usize) -> Vec<usize> {
    if d == n {
        return (0..n).collect();
    }
    let mut rng = lineage.stream(Purpose::Batch, k as u64, 0);
    let mut batch = rand::seq::index::sample(&mut rng, n, d).into_vec();
    batch.sort_unstable();
    batch
}

fn step(state: &LearnerState, model: &Model, config: &RunConfig, batch: Vec<usize>) -> Result<(LearnerState, IterationStats)> {
    config.validate(model)?;
    state.v.check_len(model.n_states())?;
    let v = &state.v;
    let k = state.k;
    let alpha = config.step.at(k);
    let (policy, backup) = greedy_with_backup(model, v)?;

    let targets: Vec<f64> = match config.mode {
        Mode::Expected => {
            // The first application of T^π at the greedy policy is T v
            // itself, so start from the backup.
            let q = crate::operators::step_costs(model, &policy)?;
            let mut target = backup;
            for _ in 1..config.m {
                target = apply_affine(model, &policy, &q, &target)?;
            }
            batch.iter().map(|&s| target[s]).collect()
        }
        Mode::Sampled => {
            let ctx = RolloutContext::new(model, &policy, config.sampling_rule)?;
            let lineage = state.lineage;
            batch
                .par_iter()
                .map(|&s| {
                    let mut rng = lineage.stream(Purpose::Rollout, k as u64, s as u64);
                    ctx.rollout_return(s, config.m, v, &mut rng)
                })
                .collect()
        }
    };

    let mut next = v.clone();
    for (&s, &target) in batch.iter().zip(&targets) {
        next.values_mut()[s] = (1.0 - alpha) * v[s] + alpha * target;
    }
    if !next.is_finite() {
        return Err(Error::Diverged { iteration: k });
    }
    let mean_return = targets.iter().sum::<f64>() / targets.len() as f64;
    Ok((
        LearnerState {
            v: next,
            k: k + 1,
            lineage: state.lineage,
        },
        IterationStats {
            alpha,
            batch,
            mean_return,
        },
    ))
}

/// One row of the run trace, describing the estimate after iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    /// `‖v_{k+1} - v*‖_∞` when an oracle is supplied.
    pub sup_err_vstar: Option<f64>,
    /// `‖T v_{k+1} - v_{k+1}‖_∞`.
    pub bellman_residual: f64,
    pub mean_return: f64,
    pub alpha: f64,
    pub d_size: usize,
    /// Updated states; only recorded for the asynchronous scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Rollout worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
    /// Keep `v_0, …, v_K`.
    pub keep_history: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub state: LearnerState,
    /// `v_0, …, v_K` when requested, otherwise empty.
    pub history: Vec<ValueFunction>,
}

/// Runs `config.iterations` iterations of the configured scheme from its
/// initial estimate.
pub fn run(model: &Model, config: &RunConfig, oracle: Option<&ValueFunction>, options: &RunOptions) -> Result<RunOutput> {
    config.validate(model)?;
    if let Some(o) = oracle {
        o.check_len(model.n_states())?;
    }
    match options.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            pool.install(|| run_inner(model, config, oracle, options))
        }
        None => run_inner(model, config, oracle, options),
    }
}

fn run_inner(model: &Model, config: &RunConfig, oracle: Option<&ValueFunction>, options: &RunOptions) -> Result<RunOutput> {
    let mut state = LearnerState::init(model, config)?;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut history = Vec::new();
    if options.keep_history {
        history.push(state.v.clone());
    }
    for _ in 0..config.iterations {
        let k = state.k;
        let (next, stats) = match config.scheme {
            Scheme::Sync => sync_iteration(&state, model, config)?,
            Scheme::Async { .. } => async_iteration(&state, model, config)?,
        };
        state = next;
        trace.push(TraceRow {
            k,
            sup_err_vstar: oracle.map(|o| sup_norm_diff(&state.v, o)).transpose()?,
            bellman_residual: bellman_residual(model, &state.v)?,
            mean_return: stats.mean_return,
            alpha: stats.alpha,
            d_size: stats.batch.len(),
            sampled: matches!(config.scheme, Scheme::Async { .. }).then_some(stats.batch),
        });
        if options.keep_history {
            history.push(state.v.clone());
        }
    }
    Ok(RunOutput {
        trace,
        state,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;
    use crate::learner::config::{InitRule, SamplingRule, StepSchedule};
    use crate::operators::apply_optimal_operator;
    use crate::solver::value_iteration;

    fn two_state() -> Model {
        let u = Distribution::uniform(2).unwrap();
        Model::new(vec![2], vec![vec![u.clone(), u]], vec![0.0, 1.0], 0.5).unwrap()
    }

    fn expected(m: usize) -> RunConfig {
        RunConfig {
            m,
            iterations: 10,
            mode: Mode::Expected,
            step: StepSchedule::Unit,
            ..RunConfig::default()
        }
    }

    #[test]
    fn expected_unit_step_is_value_iteration() {
        let model = two_state();
        let v0 = ValueFunction::new(vec![3.0, 4.0]);
        let state = LearnerState::new(v0.clone(), 0);
        let (next, stats) = sync_iteration(&state, &model, &expected(1)).unwrap();
        assert_eq!(next.v, apply_optimal_operator(&model, &v0).unwrap());
        assert_eq!(next.k, 1);
        assert_eq!(stats.alpha, 1.0);
        assert_eq!(stats.batch, vec![0, 1]);
    }

    #[test]
    fn fixed_point_is_stable() {
        let model = two_state();
        let v_star = value_iteration(&model, 1e-13, 10_000).unwrap().v_star;
        let state = LearnerState::new(v_star.clone(), 0);
        let mut cfg = expected(4);
        cfg.step = StepSchedule::Harmonic { c0: 3.0 };
        let (next, _) = sync_iteration(&state, &model, &cfg).unwrap();
        assert!(sup_norm_diff(&next.v, &v_star).unwrap() < 1e-9);
    }

    #[test]
    fn zero_cost_sampled_stays_zero() {
        let u = Distribution::uniform(3).unwrap();
        let model = Model::new(vec![3], vec![vec![u; 3]], vec![0.0; 3], 0.9).unwrap();
        for seed in [0, 1, 99] {
            let state = LearnerState::new(ValueFunction::zeros(3), seed);
            let cfg = RunConfig {
                m: 5,
                seed,
                ..RunConfig::default()
            };
            let (next, _) = sync_iteration(&state, &model, &cfg).unwrap();
            assert_eq!(next.v.values(), &[0.0; 3]);

            let cfg = RunConfig {
                scheme: Scheme::Async { batch: 1 },
                ..cfg
            };
            let (next, stats) = async_iteration(&state, &model, &cfg).unwrap();
            assert_eq!(next.v.values(), &[0.0; 3]);
            assert_eq!(stats.batch.len(), 1);
        }
    }

    #[test]
    fn async_leaves_other_states_alone() {
        let model = two_state().with_gamma(0.9).unwrap();
        let cfg = RunConfig {
            m: 3,
            scheme: Scheme::Async { batch: 1 },
            init: InitRule::Explicit(ValueFunction::constant(2, 100.0)),
            ..RunConfig::default()
        };
        let state = LearnerState::init(&model, &cfg).unwrap();
        let (next, stats) = async_iteration(&state, &model, &cfg).unwrap();
        let other = 1 - stats.batch[0];
        assert_eq!(next.v[other], 100.0);
        assert_ne!(next.v[stats.batch[0]], 100.0);

        let bad = RunConfig {
            scheme: Scheme::Async { batch: 3 },
            ..cfg
        };
        assert!(async_iteration(&state, &model, &bad).is_err());
    }

    #[test]
    fn full_batch_async_matches_sync() {
        let model = two_state().with_gamma(0.8).unwrap();
        let sync = RunConfig {
            m: 4,
            iterations: 25,
            seed: 11,
            ..RunConfig::default()
        };
        let asynch = RunConfig {
            scheme: Scheme::Async { batch: 2 },
            ..sync.clone()
        };
        let a = run(&model, &sync, None, &RunOptions::default()).unwrap();
        let b = run(&model, &asynch, None, &RunOptions::default()).unwrap();
        assert_eq!(a.state.v, b.state.v);
    }

    #[test]
    fn empty_run() {
        let model = two_state();
        let cfg = RunConfig {
            iterations: 0,
            init: InitRule::Explicit(ValueFunction::constant(2, 10.0)),
            ..RunConfig::default()
        };
        let out = run(&model, &cfg, None, &RunOptions { keep_history: true, ..Default::default() }).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.state.v.values(), &[10.0, 10.0]);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn trace_fields() {
        let model = two_state();
        let v_star = value_iteration(&model, 1e-12, 10_000).unwrap().v_star;
        let cfg = RunConfig {
            m: 2,
            iterations: 5,
            scheme: Scheme::Async { batch: 1 },
            sampling_rule: SamplingRule::ProductOfMarginals,
            ..RunConfig::default()
        };
        let out = run(&model, &cfg, Some(&v_star), &RunOptions { keep_history: true, workers: Some(2) }).unwrap();
        assert_eq!(out.trace.len(), 5);
        assert_eq!(out.history.len(), 6);
        for (i, row) in out.trace.iter().enumerate() {
            assert_eq!(row.k, i);
            assert_eq!(row.d_size, 1);
            assert_eq!(row.sampled.as_ref().unwrap().len(), 1);
            assert_eq!(row.alpha, 50.0 / (50.0 + i as f64));
            let err = sup_norm_diff(&out.history[i + 1], &v_star).unwrap();
            assert_eq!(row.sup_err_vstar, Some(err));
        }
    }
}
