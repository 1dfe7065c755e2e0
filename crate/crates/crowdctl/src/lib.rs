//! Finite-state, finite-horizon source-selection control.
//!
//! An agent must track a target behavior (a sequence of transition kernels)
//! while collecting per-state rewards, and at every stage may only adopt the
//! kernel offered by one of several sources. This crate provides:
//!
//! - [`model`]: the finite probability types and scenario validation;
//! - [`numerics`]: KL divergence, stable log-expectation-of-exponentials,
//!   expectations, marginal propagation (all in nats);
//! - [`selector`]: the exact backward-DP solution of the integer selection
//!   problem — per stage and state, pick the source minimizing the KL-to-target
//!   score net of cumulative reward;
//! - [`oracle`]: the closed-form unconstrained optimum obtained by
//!   exponentially twisting the target kernels, and source synthesis from a
//!   source's own target/reward;
//! - [`evaluation`]: the cost functional, realized regret with its computable
//!   per-stage upper bound, and an exhaustive policy search used as a test
//!   oracle for the selector;
//! - [`simulate`]: reproducible seeded rollouts and batch statistics;
//! - [`scenario`]: versioned JSON scenario files;
//! - [`grid`]: the grid-navigation scenario generator.
//!
//! Batch operations (rollouts, exhaustive search) run on rayon when the
//! default `parallel` feature is enabled; `*_seq` variants provide the
//! sequential reference path with identical results.

pub mod error;
pub mod evaluation;
pub mod grid;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod scenario;
pub mod selector;
pub mod simulate;

pub use error::{Error, Result};
pub use evaluation::{
    brute_force_policy_search, brute_force_policy_search_seq, cost, regret_and_bound, CostReport,
    RegretBoundReport, StageConstants,
};
pub use grid::{default_profiles, generate_grid_scenario, GridSpec, RewardPreset, SourceProfile};
pub use model::{
    validate_scenario, BehaviorSequence, Pmf, RewardSchedule, Scenario, SourceSpec, StateSpace,
    TransitionKernel, ValidationReport, Violation,
};
pub use numerics::{expectation, kl_divergence, log_sum_exp, propagate_marginals};
pub use oracle::{solve_oracle, synthesize_source, OracleRecursion, OracleResult};
pub use scenario::{load_scenario, save_scenario, scenario_from_json, scenario_to_json};
pub use selector::{
    compose_agent_behavior, solve_selection, stage_scores, CumulativeReward, SelectionPolicy,
    StageScores,
};
pub use simulate::{
    rollout_statistics, sample_rollout, sample_rollout_with_policy, sample_rollouts,
    sample_rollouts_seq, Rollout, RolloutStats,
};
