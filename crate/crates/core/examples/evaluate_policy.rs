//! NLL and expected value difference for a few reference policies.

use ccp_irl::env::{expert_policy, generate_experts, EnvSpec, ExpertKind, GridSpec};
use ccp_irl::metrics::{greedy_policy, nll, EvdOracle};
use ccp_irl::model::SoftPolicy;

fn main() -> ccp_irl::Result<()> {
    let spec = EnvSpec::FixedTarget(GridSpec { n: 10, seed: 5, ..Default::default() });
    let (model, truth) = spec.build()?;
    let held_out = generate_experts(&model, &truth, 200, spec.default_traj_length(), 42, ExpertKind::Soft)?;
    let oracle = EvdOracle::new(&model, &truth)?;

    let candidates = [
        ("uniform", SoftPolicy::uniform(model.n_states(), model.n_actions())),
        ("soft expert", expert_policy(&model, &truth, ExpertKind::Soft)?),
        ("ε-greedy 0.2", expert_policy(&model, &truth, ExpertKind::HardNoisy { epsilon: 0.2 })?),
        ("optimal", greedy_policy(&model, &truth.table(model.n_actions()))?),
    ];
    println!("{:<14} {:>10} {:>8}", "policy", "nll", "evd");
    for (name, policy) in &candidates {
        println!("{name:<14} {:>10.3} {:>8.4}", nll(policy, &held_out)?, oracle.evd(&model, policy)?);
    }
    Ok(())
}
