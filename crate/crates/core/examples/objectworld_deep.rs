//! Nonlinear rewards: a two-layer network trained with Adam on objectworld.

use ccp_irl::env::{build_objectworld, generate_experts, ExpertKind, ObjectworldSpec};
use ccp_irl::irl::{train_ccp, train_maxent, OptimizerConfig, RewardModel, TrainConfig};
use ccp_irl::metrics::EvdOracle;

fn main() -> ccp_irl::Result<()> {
    let spec = ObjectworldSpec { n: 12, n_colors: 2, seed: 4, ..Default::default() };
    let (model, truth) = build_objectworld(&spec)?;
    let demos = generate_experts(&model, &truth, 40, spec.n, 9, ExpertKind::Soft)?;
    let oracle = EvdOracle::new(&model, &truth)?;
    println!("{} states, {} features; uniform EVD {:.3}", model.n_states(), model.features().feature_dim(), oracle.uniform_evd(&model)?);

    let cfg = TrainConfig { iterations: 150, optimizer: OptimizerConfig::Adam { step_size: 0.01 }, ..Default::default() };
    let start = RewardModel::Mlp.init(model.features().feature_dim(), 32, 1);
    for report in [train_maxent(&model, &demos, start.clone(), &cfg)?, train_ccp(&model, &demos, start, &cfg)?] {
        println!(
            "{:<7} nll {:.3} -> {:.3}  evd {:.3}  {:.2}s",
            report.algorithm.label(),
            report.initial_nll,
            report.final_nll(),
            oracle.reward_evd(&model, &report.final_rewards)?,
            report.total_seconds
        );
    }
    Ok(())
}
