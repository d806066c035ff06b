//! Frequency estimates of choice probabilities sharpen with more demonstrations.

use ccp_irl::ccp::{estimate_ccp, SmoothingConfig};
use ccp_irl::env::{expert_policy, generate_experts, EnvSpec, ExpertKind, GridSpec};

fn main() -> ccp_irl::Result<()> {
    let spec = EnvSpec::FixedTarget(GridSpec { n: 10, seed: 2, ..Default::default() });
    let (model, truth) = spec.build()?;
    let expert = expert_policy(&model, &truth, ExpertKind::Soft)?;
    println!("{:>8} {:>10} {:>14}", "demos", "visited", "mean |σ̂ − σ|");
    for n in [10, 40, 160, 640, 2560] {
        let demos = generate_experts(&model, &truth, n, spec.default_traj_length(), 7, ExpertKind::Soft)?;
        let ccp = estimate_ccp(&demos, model.n_states(), model.n_actions(), &SmoothingConfig::default())?;
        let mut err = 0.0;
        let mut visited = 0;
        for s in 0..model.n_states() {
            if ccp.support_counts().row(s).sum() == 0 {
                continue;
            }
            visited += 1;
            err += (0..model.n_actions()).map(|a| (ccp.probs()[[s, a]] - expert.prob(s, a)).abs()).sum::<f64>();
        }
        println!("{n:>8} {visited:>10} {:>14.4}", err / visited as f64);
    }
    Ok(())
}
