//! Closed-form unconstrained optimum: the best behavior any agent could
//! follow, obtained by exponentially twisting the target kernels.
//!
//! The backward pass runs entirely in log domain,
//!
//! ```text
//! ρ̄_{N+1} ≡ 0,    ρ̄_k = r_k + ρ̂_k,
//! ρ̂_{k-1}(x) = ln E_{p_{k|k-1}(·|x)}[ exp(ρ̄_k) ],
//! ```
//!
//! and the optimal stage-`k` row at state `x` reweights the target row by
//! `exp(ρ̄_k)` and renormalizes. Exponentials are always max-shifted, so
//! desk-scale rewards (|r| ≈ 50 over 20 stages) cannot overflow. The optimal
//! cost is `-E_initial[ρ̂_0]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BehaviorSequence, Pmf, RewardSchedule, TransitionKernel};
use crate::numerics::{expectation, log_sum_exp};

/// Log-domain value tables. `rho_bar[k - 1]` holds `ρ̄_k` for stages
/// `k = 1..=N+1` (the last row is identically zero); `rho_hat[k]` holds
/// `ρ̂_k` for stages `k = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecursion {
    pub rho_bar: Vec<Vec<f64>>,
    pub rho_hat: Vec<Vec<f64>>,
}

/// The oracle behavior with its recursion tables and optimal cost (nats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub behavior: BehaviorSequence,
    pub recursion: OracleRecursion,
    pub optimal_cost: f64,
}

/// Shared backward pass: twisted kernels plus the recursion tables.
fn twist(
    target: &BehaviorSequence,
    reward: &RewardSchedule,
) -> Result<(BehaviorSequence, OracleRecursion)> {
    let n = target.horizon();
    assert!(n > 0, "solve_oracle: empty kernel sequence");
    assert_eq!(reward.horizon(), n, "solve_oracle: reward horizon mismatch");
    let size = target.stage(1).size();

    let mut rho_bar = vec![vec![0.0; size]; n + 1];
    let mut rho_hat = vec![vec![0.0; size]; n + 1];

    for k in (1..=n).rev() {
        for x in 0..size {
            rho_bar[k - 1][x] = reward.stage(k)[x] + rho_hat[k][x];
        }
        for (x, out) in rho_hat[k - 1].iter_mut().enumerate() {
            *out = log_sum_exp(&rho_bar[k - 1], target.stage(k).row(x))?;
        }
    }

    let mut kernels = Vec::with_capacity(n);
    for k in 1..=n {
        let weights = &rho_bar[k - 1];
        let mut rows = Vec::with_capacity(size);
        for x in 0..size {
            let target_row = target.stage(k).row(x);
            let max = weights
                .iter()
                .zip(target_row)
                .filter(|(_, &p)| p > 0.0)
                .map(|(&w, _)| w)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::EmptySupport);
            }
            let mut row: Vec<f64> = target_row
                .iter()
                .zip(weights)
                .map(|(&p, &w)| if p > 0.0 { p * (w - max).exp() } else { 0.0 })
                .collect();
            let norm: f64 = row.iter().sum();
            for m in &mut row {
                *m /= norm;
            }
            rows.push(row);
        }
        kernels.push(TransitionKernel::new(rows));
    }

    Ok((
        BehaviorSequence::new(kernels),
        OracleRecursion { rho_bar, rho_hat },
    ))
}

/// Solves the unconstrained relaxation for `(target, reward, initial)` and
/// returns the oracle behavior, the recursion tables, and the optimal cost
/// `-E_initial[ρ̂_0]`. Zero reward reproduces the target with cost 0.
pub fn solve_oracle(
    target: &BehaviorSequence,
    reward: &RewardSchedule,
    initial: &Pmf,
) -> Result<OracleResult> {
    let (behavior, recursion) = twist(target, reward)?;
    let optimal_cost = -expectation(&recursion.rho_hat[0], &initial.mass);
    Ok(OracleResult {
        behavior,
        recursion,
        optimal_cost,
    })
}

/// Builds the behavior a source provides when it optimally solves its own
/// problem `(own_target, own_reward)` — the same twist as [`solve_oracle`],
/// discarding the cost.
pub fn synthesize_source(
    own_target: &BehaviorSequence,
    own_reward: &RewardSchedule,
) -> Result<BehaviorSequence> {
    Ok(twist(own_target, own_reward)?.0)
}
