//! Seeded trajectory sampling and rollout statistics.
//!
//! Randomness is pinned for reproducibility across platforms and releases:
//! the generator is ChaCha8 (`rand_chacha` 0.3) seeded through
//! `seed_from_u64`, uniforms are derived explicitly as
//! `(next_u64() >> 11) · 2⁻⁵³`, and states are drawn by inverse CDF over
//! ascending state index (first index with positive mass whose cumulative sum
//! reaches the uniform). Batch rollout `i` uses seed `base_seed + i`
//! (wrapping), so batches parallelize without changing any trajectory.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BehaviorSequence, Pmf, RewardSchedule};
use crate::selector::SelectionPolicy;

/// One sampled trajectory `x_0..x_N`, with the source picked at each step
/// when the behavior came from a selection policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub states: Vec<usize>,
    pub chosen_sources: Option<Vec<usize>>,
    pub seed: u64,
}

/// Per-stage aggregates over a batch of rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    /// `frequencies[t][x]`: fraction of rollouts at state `x` at time `t`
    /// (`t = 0..=N`). Each row sums to 1.
    pub frequencies: Vec<Vec<f64>>,
    /// `mean_reward[k - 1]`: average realized reward at stage `k = 1..=N`.
    pub mean_reward: Vec<f64>,
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// First index with positive mass whose cumulative sum reaches `u`.
fn inverse_cdf(mass: &[f64], u: f64) -> Result<usize> {
    let mut acc = 0.0;
    let mut last_supported = None;
    for (i, &m) in mass.iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        acc += m;
        last_supported = Some(i);
        if acc >= u {
            return Ok(i);
        }
    }
    // Rounding can leave acc a hair under u = ~1; fall back to the last
    // supported state rather than fail.
    last_supported.ok_or(Error::EmptySupport)
}

fn rollout_impl(
    initial: &Pmf,
    behavior: &BehaviorSequence,
    policy: Option<&SelectionPolicy>,
    seed: u64,
) -> Result<Rollout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(behavior.horizon() + 1);
    let mut x = inverse_cdf(&initial.mass, uniform(&mut rng))?;
    states.push(x);
    let mut chosen = policy.map(|_| Vec::with_capacity(behavior.horizon()));
    for k in 1..=behavior.horizon() {
        if let (Some(chosen), Some(policy)) = (&mut chosen, policy) {
            chosen.push(policy.choice[k - 1][x]);
        }
        x = inverse_cdf(behavior.stage(k).row(x), uniform(&mut rng))?;
        states.push(x);
    }
    Ok(Rollout {
        states,
        chosen_sources: chosen,
        seed,
    })
}

/// Samples one trajectory from `behavior`, starting from `initial`.
pub fn sample_rollout(initial: &Pmf, behavior: &BehaviorSequence, seed: u64) -> Result<Rollout> {
    rollout_impl(initial, behavior, None, seed)
}

/// Like [`sample_rollout`], also recording which source the policy picks at
/// each visited state.
pub fn sample_rollout_with_policy(
    initial: &Pmf,
    behavior: &BehaviorSequence,
    policy: &SelectionPolicy,
    seed: u64,
) -> Result<Rollout> {
    rollout_impl(initial, behavior, Some(policy), seed)
}

/// Batch sampling; rollout `i` uses seed `base_seed + i`.
#[cfg(feature = "parallel")]
pub fn sample_rollouts(
    initial: &Pmf,
    behavior: &BehaviorSequence,
    policy: Option<&SelectionPolicy>,
    base_seed: u64,
    count: usize,
) -> Result<Vec<Rollout>> {
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|i| rollout_impl(initial, behavior, policy, base_seed.wrapping_add(i as u64)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn sample_rollouts(
    initial: &Pmf,
    behavior: &BehaviorSequence,
    policy: Option<&SelectionPolicy>,
    base_seed: u64,
    count: usize,
) -> Result<Vec<Rollout>> {
    sample_rollouts_seq(initial, behavior, policy, base_seed, count)
}

/// Sequential reference path for [`sample_rollouts`]; identical output.
pub fn sample_rollouts_seq(
    initial: &Pmf,
    behavior: &BehaviorSequence,
    policy: Option<&SelectionPolicy>,
    base_seed: u64,
    count: usize,
) -> Result<Vec<Rollout>> {
    (0..count)
        .map(|i| rollout_impl(initial, behavior, policy, base_seed.wrapping_add(i as u64)))
        .collect()
}

/// Visit frequencies per time step and mean realized reward per stage.
pub fn rollout_statistics(
    rollouts: &[Rollout],
    num_states: usize,
    reward: &RewardSchedule,
) -> RolloutStats {
    assert!(!rollouts.is_empty(), "rollout_statistics: empty batch");
    let steps = rollouts[0].states.len();
    let mut counts = vec![vec![0u64; num_states]; steps];
    for r in rollouts {
        assert_eq!(r.states.len(), steps, "rollout_statistics: ragged batch");
        for (t, &x) in r.states.iter().enumerate() {
            counts[t][x] += 1;
        }
    }
    let m = rollouts.len() as f64;
    let frequencies = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / m).collect())
        .collect();
    let mean_reward = (1..steps)
        .map(|t| {
            rollouts
                .iter()
                .map(|r| reward.stage(t)[r.states[t]])
                .sum::<f64>()
                / m
        })
        .collect();
    RolloutStats {
        frequencies,
        mean_reward,
    }
}
