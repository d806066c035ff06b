//! MaxEnt-IRL and CCP-IRL side by side on a 16×16 fixed-target gridworld.
//!
//! Both learners start from zero weights on the same 80 demonstrations. The
//! report shows fit, policy quality, wall time and how much dynamic
//! programming each loop performed.

use ccp_irl::env::{generate_experts, EnvSpec, ExpertKind, GridSpec};
use ccp_irl::irl::{train_ccp, train_maxent, LinearReward, RewardParams, TrainConfig};
use ccp_irl::metrics::EvdOracle;

fn main() -> ccp_irl::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let spec = EnvSpec::FixedTarget(GridSpec { n, seed: 0, ..Default::default() });
    let (model, truth) = spec.build()?;
    let demos = generate_experts(&model, &truth, 80, spec.default_traj_length(), 100, ExpertKind::Soft)?;
    let oracle = EvdOracle::new(&model, &truth)?;
    println!("uniform policy EVD {:.3}", oracle.uniform_evd(&model)?);

    let cfg = TrainConfig::default();
    let start = RewardParams::Linear(LinearReward::zeros(model.features().feature_dim()));
    for report in [train_maxent(&model, &demos, start.clone(), &cfg)?, train_ccp(&model, &demos, start, &cfg)?] {
        println!(
            "{:<7} nll {:.3} -> {:.3}  evd {:.4}  theta {:?}  {:.3}s ({:.3}s setup)  solves {} builds {}",
            report.algorithm.label(),
            report.initial_nll,
            report.final_nll(),
            oracle.reward_evd(&model, &report.final_rewards)?,
            report.final_params.flatten().iter().map(|t| (t * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            report.total_seconds,
            report.setup_seconds,
            report.counts.soft_vi_solves,
            report.counts.operator_builds,
        );
    }
    Ok(())
}
