//! Exact evaluation: the cost functional, realized regret with its computable
//! upper bound, and an exhaustive policy search used as a correctness oracle
//! for the DP selector.
//!
//! The cost of a behavior decomposes stage by stage through the chain rule:
//! the stage-`k` KL term is the expectation, under the time-`k-1` marginal,
//! of the row-wise divergence to the target, and the stage-`k` reward term is
//! the expected reward under the time-`k` marginal. Rows at states the
//! behavior never reaches contribute nothing (and may even break absolute
//! continuity without raising an error).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_scenario, BehaviorSequence, Scenario, MASS_TOLERANCE, RENORM_THRESHOLD,
};
use crate::numerics::{expectation, kl_divergence};
use crate::oracle::solve_oracle;
use crate::selector::{compose_agent_behavior, SelectionPolicy};

/// Hard ceiling on `S^(|X|·N)` for [`brute_force_policy_search`].
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Cost functional value with its KL/reward split, per stage and in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// `kl_term - reward_term`, in nats.
    pub total: f64,
    pub kl_term: f64,
    pub reward_term: f64,
    pub per_stage_kl: Vec<f64>,
    pub per_stage_reward: Vec<f64>,
}

/// Stage constants of the regret bound: envelopes of the log-ratio of the
/// selected source's own target to the agent target, and the worst reward gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConstants {
    /// `l_k`: minimum of `ln(p_src / p)` over target-supported pairs;
    /// `-inf` when the selected source's target misses such a pair.
    pub log_ratio_min: f64,
    /// `L_k`: maximum of the same log-ratio.
    pub log_ratio_max: f64,
    /// `R_k`: maximum of `|r_src - r|` over states.
    pub reward_gap: f64,
}

/// Realized regret against the oracle plus the computable upper bound
/// `Σ_k (L_k - l_k + 2 R_k)`; the bound is `+inf` when some stage envelope
/// is unbounded (reported, not an error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretBoundReport {
    pub regret: f64,
    pub bound: f64,
    pub per_stage: Vec<StageConstants>,
}

/// Stage-`k` row at conditioning state `x`, however the behavior is stored.
trait StageRows {
    fn row(&self, k: usize, x: usize) -> &[f64];
}

impl StageRows for BehaviorSequence {
    fn row(&self, k: usize, x: usize) -> &[f64] {
        self.stage(k).row(x)
    }
}

/// A state-feedback integer policy viewed as a behavior, without
/// materializing the kernels.
struct ChoiceRows<'a> {
    scenario: &'a Scenario,
    choice: &'a [Vec<usize>],
}

impl StageRows for ChoiceRows<'_> {
    fn row(&self, k: usize, x: usize) -> &[f64] {
        self.scenario.sources[self.choice[k - 1][x]]
            .kernels
            .stage(k)
            .row(x)
    }
}

fn cost_impl(s: &Scenario, rows: &impl StageRows) -> Result<CostReport> {
    let size = s.num_states();
    let mut marginal = s.initial.mass.clone();
    let mut per_stage_kl = Vec::with_capacity(s.horizon);
    let mut per_stage_reward = Vec::with_capacity(s.horizon);

    for k in 1..=s.horizon {
        let target = s.target.stage(k);
        let mut kl_k = 0.0;
        let mut next = vec![0.0; size];
        for (x, &px) in marginal.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let row = rows.row(k, x);
            kl_k += px * kl_divergence(row, target.row(x))?;
            for (y, &m) in row.iter().enumerate() {
                next[y] += px * m;
            }
        }
        let mass: f64 = next.iter().sum();
        let drift = (mass - 1.0).abs();
        if drift > MASS_TOLERANCE {
            return Err(Error::NumericalDrift { stage: k, mass });
        }
        if drift > RENORM_THRESHOLD {
            for m in &mut next {
                *m /= mass;
            }
        }
        per_stage_kl.push(kl_k);
        per_stage_reward.push(expectation(s.reward.stage(k), &next));
        marginal = next;
    }

    let kl_term: f64 = per_stage_kl.iter().sum();
    let reward_term: f64 = per_stage_reward.iter().sum();
    Ok(CostReport {
        total: kl_term - reward_term,
        kl_term,
        reward_term,
        per_stage_kl,
        per_stage_reward,
    })
}

/// Cost of following `behavior` in scenario `s`.
pub fn cost(s: &Scenario, behavior: &BehaviorSequence) -> Result<CostReport> {
    assert_eq!(
        behavior.horizon(),
        s.horizon,
        "cost: behavior horizon mismatch"
    );
    cost_impl(s, behavior)
}

/// Regret of the selected behavior against the oracle, together with the
/// stage constants and the bound they yield.
pub fn regret_and_bound(s: &Scenario, policy: &SelectionPolicy) -> Result<RegretBoundReport> {
    let composed = compose_agent_behavior(s, policy);
    let realized = cost(s, &composed)?.total;
    let oracle = solve_oracle(&s.target, &s.reward, &s.initial)?;
    let regret = realized - oracle.optimal_cost;

    let size = s.num_states();
    let mut per_stage = Vec::with_capacity(s.horizon);
    let mut bound = 0.0;
    for k in 1..=s.horizon {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut gap: f64 = 0.0;
        for x in 0..size {
            let j = policy.choice[k - 1][x];
            let src = &s.sources[j];
            let own_target = src.own_target.as_ref().unwrap_or(&src.kernels).stage(k);
            let target_row = s.target.stage(k).row(x);
            for (y, &p) in target_row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let ps = own_target.row(x)[y];
                if ps == 0.0 {
                    lo = f64::NEG_INFINITY;
                } else {
                    let ratio = (ps / p).ln();
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
            }
            for y in 0..size {
                let r_src = src.own_reward.as_ref().map_or(0.0, |r| r.stage(k)[y]);
                gap = gap.max((r_src - s.reward.stage(k)[y]).abs());
            }
        }
        per_stage.push(StageConstants {
            log_ratio_min: lo,
            log_ratio_max: hi,
            reward_gap: gap,
        });
        bound += hi - lo + 2.0 * gap;
    }

    Ok(RegretBoundReport {
        regret,
        bound,
        per_stage,
    })
}

fn decode_choice(mut index: u64, stages: usize, size: usize, num_sources: u64) -> Vec<Vec<usize>> {
    let digits = stages * size;
    let mut flat = vec![0usize; digits];
    for d in (0..digits).rev() {
        flat[d] = (index % num_sources) as usize;
        index /= num_sources;
    }
    flat.chunks(size).map(|c| c.to_vec()).collect()
}

fn evaluate_policy_index(s: &Scenario, index: u64, num_sources: u64) -> Result<(f64, u64)> {
    let choice = decode_choice(index, s.horizon, s.num_states(), num_sources);
    let report = cost_impl(
        s,
        &ChoiceRows {
            scenario: s,
            choice: &choice,
        },
    )?;
    Ok((report.total, index))
}

/// `a` is better than `b` if it costs less, or ties at a lexicographically
/// smaller choice matrix (= smaller enumeration index).
fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
        a
    } else {
        b
    }
}

fn search_space(s: &Scenario) -> Result<u64> {
    let digits = (s.horizon * s.num_states()) as i32;
    let total = (s.num_sources() as f64).powi(digits);
    if total > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            policies: total,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(total as u64)
}

/// Enumerates every state-feedback integer policy, evaluates its cost, and
/// returns the minimizer (lowest lexicographic choice matrix on ties) with
/// its cost. Guarded to `S^(|X|·N) ≤ 1e6`.
#[cfg(feature = "parallel")]
pub fn brute_force_policy_search(s: &Scenario) -> Result<(Vec<Vec<usize>>, f64)> {
    use rayon::prelude::*;

    let report = validate_scenario(s);
    if !report.is_empty() {
        return Err(Error::InvalidScenario(report));
    }
    let total = search_space(s)?;
    let num_sources = s.num_sources() as u64;
    let best = (0..total)
        .into_par_iter()
        .map(|index| evaluate_policy_index(s, index, num_sources))
        .try_reduce(|| (f64::INFINITY, u64::MAX), |a, b| Ok(better(a, b)))?;
    Ok((
        decode_choice(best.1, s.horizon, s.num_states(), num_sources),
        best.0,
    ))
}

/// Sequential dispatch used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn brute_force_policy_search(s: &Scenario) -> Result<(Vec<Vec<usize>>, f64)> {
    brute_force_policy_search_seq(s)
}

/// Sequential reference implementation of [`brute_force_policy_search`];
/// always available, returns bit-identical results.
pub fn brute_force_policy_search_seq(s: &Scenario) -> Result<(Vec<Vec<usize>>, f64)> {
    let report = validate_scenario(s);
    if !report.is_empty() {
        return Err(Error::InvalidScenario(report));
    }
    let total = search_space(s)?;
    let num_sources = s.num_sources() as u64;
    let mut best = (f64::INFINITY, u64::MAX);
    for index in 0..total {
        best = better(evaluate_policy_index(s, index, num_sources)?, best);
    }
    Ok((
        decode_choice(best.1, s.horizon, s.num_states(), num_sources),
        best.0,
    ))
}
