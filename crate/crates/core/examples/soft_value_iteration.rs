//! Soft value iteration on a small windy gridworld.
//!
//! Solves the integrated Bellman equation for the true reward and prints the
//! ex-ante values as a grid next to the most likely action in each cell.

use ccp_irl::env::{build_fixed_target, GridSpec, ACTION_NAMES};
use ccp_irl::soft_dp::{choice_values, policy_from_values, solve_soft_vi, SoftDpConfig};

fn main() -> ccp_irl::Result<()> {
    let spec = GridSpec { n: 6, seed: 3, ..Default::default() };
    let (model, truth) = build_fixed_target(&spec)?;
    let rewards = truth.table(model.n_actions());

    let sol = solve_soft_vi(&model, &rewards, &SoftDpConfig::default())?;
    println!("converged in {} sweeps, residual {:.2e}", sol.sweeps, sol.residual);

    let policy = policy_from_values(&choice_values(&model, &rewards, &sol.value)?);
    let v = sol.value.values();
    for row in 0..spec.n {
        let mut values = String::new();
        let mut moves = String::new();
        for col in 0..spec.n {
            let s = row * spec.n + col;
            values.push_str(&format!("{:7.2}", v[s]));
            let best = (0..model.n_actions()).max_by(|&a, &b| policy.prob(s, a).total_cmp(&policy.prob(s, b))).unwrap();
            let mark = if model.is_goal(s) { "*" } else { ACTION_NAMES[best] };
            moves.push_str(&format!(" {mark}"));
        }
        println!("{values}   {moves}");
    }
    Ok(())
}
