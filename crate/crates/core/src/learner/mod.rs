//! Simulation-based learners: m-step TD rollouts driving synchronous and
//! asynchronous optimistic policy iteration.

mod config;
mod rng;
mod rollout;
mod scheme;

pub use config::{
    init_value, learning_rate, InitRule, Mode, RunConfig, SamplingRule, Scheme, StepSchedule, INIT_TOL,
};
pub use rng::{Purpose, SeedLineage};
pub use rollout::{expected_m_step, rollout, RolloutContext, RolloutSample};
pub use scheme::{
    async_iteration, run, sample_batch, sync_iteration, IterationStats, LearnerState, RunOptions, RunOutput,
    TraceRow,
};
