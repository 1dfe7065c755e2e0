//! Optimal per-stage source selection by backward dynamic programming.
//!
//! At each stage `k` and conditioning state `x`, every source `i` gets the
//! score
//!
//! ```text
//! a_k[i](x) = KL(source_i row at (k, x) || target row at (k, x))
//!           - E_{source_i row at (k, x)}[ r̄_k ]
//! ```
//!
//! where the cumulative reward `r̄_k = r_k + r̂_k` carries the value of future
//! stages back through `r̂_{k-1}(x) = -a_k[chosen](x)`, starting from
//! `r̂_N ≡ 0`. Picking the per-state argmin of the scores is exactly optimal
//! for the integer selection problem; the exhaustive search in
//! [`crate::evaluation::brute_force_policy_search`] cross-checks this.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_scenario, BehaviorSequence, Scenario, TransitionKernel};
use crate::numerics::{expectation, kl_divergence};

/// Score table for one stage: `a[source][state]`, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageScores {
    pub a: Vec<Vec<f64>>,
}

impl StageScores {
    /// Index of the minimizing source at `state`, lowest index on ties.
    pub fn argmin(&self, state: usize) -> usize {
        let mut best = 0;
        for i in 1..self.a.len() {
            if self.a[i][state] < self.a[best][state] {
                best = i;
            }
        }
        best
    }
}

/// Backward-recursion tables: `r_hat[k][x]` for stages `k = 0..=N`
/// (`r_hat[N]` is identically zero) and `r_bar[k - 1][x]` for stages
/// `k = 1..=N`, with `r_bar_k = r_k + r_hat_k` elementwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeReward {
    pub r_bar: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<f64>>,
}

/// Complete output of the backward pass: the per-stage, per-state source
/// choice plus every intermediate table (kept for diagnostics and for the
/// regret-bound constants).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    /// `choice[k - 1][x]` is the selected source index (0-based) at stage `k`
    /// conditioning state `x`.
    pub choice: Vec<Vec<usize>>,
    /// `scores[k - 1]` is the full score table of stage `k`.
    pub scores: Vec<StageScores>,
    pub cumulative: CumulativeReward,
}

impl SelectionPolicy {
    /// The cost the recursion itself predicts for the composed behavior:
    /// `E_initial[-r_hat_0]`. Matches the evaluation module's cost of the
    /// composed behavior up to rounding.
    pub fn predicted_cost(&self, initial: &[f64]) -> f64 {
        -expectation(&self.cumulative.r_hat[0], initial)
    }
}

/// Scores of stage `k` (1-based) for every source and conditioning state,
/// given the cumulative reward `r̄_k` as a state-indexed vector.
pub fn stage_scores(s: &Scenario, k: usize, r_bar_k: &[f64]) -> Result<StageScores> {
    let target = s.target.stage(k);
    let mut a = Vec::with_capacity(s.num_sources());
    for source in &s.sources {
        let kernel = source.kernels.stage(k);
        let mut row_scores = Vec::with_capacity(s.num_states());
        for x in 0..s.num_states() {
            let row = kernel.row(x);
            let score = kl_divergence(row, target.row(x))? - expectation(r_bar_k, row);
            row_scores.push(score);
        }
        a.push(row_scores);
    }
    Ok(StageScores { a })
}

/// Runs the backward pass over stages `N..1` and returns the full policy.
/// The scenario must be valid; the validation report is wrapped into the
/// error otherwise.
pub fn solve_selection(s: &Scenario) -> Result<SelectionPolicy> {
    let report = validate_scenario(s);
    if !report.is_empty() {
        return Err(Error::InvalidScenario(report));
    }

    let n = s.horizon;
    let size = s.num_states();
    let mut r_hat = vec![vec![0.0; size]; n + 1];
    let mut r_bar = vec![vec![0.0; size]; n];
    let mut scores: Vec<Option<StageScores>> = vec![None; n];
    let mut choice = vec![vec![0usize; size]; n];

    for k in (1..=n).rev() {
        for x in 0..size {
            r_bar[k - 1][x] = s.reward.stage(k)[x] + r_hat[k][x];
        }
        let stage = stage_scores(s, k, &r_bar[k - 1])?;
        for x in 0..size {
            let j = stage.argmin(x);
            choice[k - 1][x] = j;
            r_hat[k - 1][x] = -stage.a[j][x];
        }
        scores[k - 1] = Some(stage);
    }

    Ok(SelectionPolicy {
        choice,
        scores: scores.into_iter().map(Option::unwrap).collect(),
        cumulative: CumulativeReward { r_bar, r_hat },
    })
}

/// Builds the agent behavior the policy induces: the stage-`k` row at state
/// `x` is the chosen source's row at `(k, x)`.
pub fn compose_agent_behavior(s: &Scenario, policy: &SelectionPolicy) -> BehaviorSequence {
    let kernels = (1..=s.horizon)
        .map(|k| {
            let rows = (0..s.num_states())
                .map(|x| {
                    s.sources[policy.choice[k - 1][x]]
                        .kernels
                        .stage(k)
                        .row(x)
                        .to_vec()
                })
                .collect();
            TransitionKernel::new(rows)
        })
        .collect();
    BehaviorSequence::new(kernels)
}
