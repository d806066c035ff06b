//! How policy quality depends on the number of demonstrations.
//!
//! CCP-IRL reads its values off estimated choice probabilities, so with few
//! demonstrations it trails MaxEnt-IRL; with enough data the two agree. Experts
//! here act greedily with 10% random actions.

use ccp_irl::env::{generate_experts, EnvSpec, ExpertKind, GridSpec};
use ccp_irl::irl::{train_ccp, train_maxent, LinearReward, RewardParams, TrainConfig};
use ccp_irl::metrics::EvdOracle;

fn main() -> ccp_irl::Result<()> {
    let seeds = 5u64;
    let expert = ExpertKind::HardNoisy { epsilon: 0.1 };
    let cfg = TrainConfig { iterations: 200, ..Default::default() };
    println!("{:>6} {:>10} {:>10} {:>10}", "demos", "maxent", "ccp", "uniform");
    for n_demos in [10, 20, 40, 80] {
        let (mut me, mut cc, mut un) = (0.0, 0.0, 0.0);
        for seed in 0..seeds {
            let spec = EnvSpec::MacroCell(GridSpec { n: 16, seed, ..Default::default() });
            let (model, truth) = spec.build()?;
            let demos = generate_experts(&model, &truth, n_demos, spec.default_traj_length(), seed, expert)?;
            let oracle = EvdOracle::new(&model, &truth)?;
            let start = RewardParams::Linear(LinearReward::zeros(model.features().feature_dim()));
            me += oracle.reward_evd(&model, &train_maxent(&model, &demos, start.clone(), &cfg)?.final_rewards)?;
            cc += oracle.reward_evd(&model, &train_ccp(&model, &demos, start, &cfg)?.final_rewards)?;
            un += oracle.uniform_evd(&model)?;
        }
        let k = seeds as f64;
        println!("{n_demos:>6} {:>10.3} {:>10.3} {:>10.3}", me / k, cc / k, un / k);
    }
    Ok(())
}
