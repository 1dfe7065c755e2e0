//! Full pipeline on the 5×5 benchmark grid with the penalty reward:
//! generate, solve, evaluate, bound the regret, and sample a few routes.
//!
//! Run with `cargo run --example grid_pipeline`.

use crowdctl::*;

fn main() -> Result<()> {
    let spec = GridSpec {
        rows: 5,
        cols: 5,
        horizon: 8,
        start: 0,
        goal: 24,
        noise: 0.15,
        source_profiles: vec![],
        preset: RewardPreset::Penalty { rho: 5.0 },
    };
    let scenario = generate_grid_scenario(&spec, 0)?;
    assert!(validate_scenario(&scenario).is_empty());

    let policy = solve_selection(&scenario)?;
    let behavior = compose_agent_behavior(&scenario, &policy);
    let report = cost(&scenario, &behavior)?;
    let regret = regret_and_bound(&scenario, &policy)?;
    println!(
        "cost {:.4} (kl {:.4} - reward {:.4}), regret {:.4} <= bound {:.4}",
        report.total, report.kl_term, report.reward_term, regret.regret, regret.bound
    );

    for rollout in sample_rollouts(&scenario.initial, &behavior, Some(&policy), 7, 5)? {
        println!(
            "seed {:>2}: route {:?} via sources {:?}",
            rollout.seed,
            rollout.states,
            rollout.chosen_sources.unwrap()
        );
    }
    Ok(())
}
