//! Expert demonstrations sampled from the true reward.

use ndarray::Array2;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrueReward;
use crate::error::{Error, Result};
use crate::metrics::hard_value_iteration;
use crate::model::{DdcModel, SoftPolicy, Trajectory};
use crate::soft_dp::{model_policy, SoftDpConfig};

/// How the demonstrator picks actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExpertKind {
    /// Samples from the soft-optimal policy.
    #[default]
    Soft,
    /// Hard-optimal action, replaced by a uniform action with probability `epsilon`.
    HardNoisy { epsilon: f64 },
}

/// Action distribution the demonstrator follows.
pub fn expert_policy(model: &DdcModel, truth: &TrueReward, kind: ExpertKind) -> Result<SoftPolicy> {
    let rewards = truth.table(model.n_actions());
    match kind {
        ExpertKind::Soft => Ok(model_policy(model, &rewards, &SoftDpConfig::default())?.0),
        ExpertKind::HardNoisy { epsilon } => {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::InvalidSpec(format!("epsilon: must lie in [0, 1], got {epsilon}")));
            }
            let (_, greedy) = hard_value_iteration(model, &rewards, 1e-10)?;
            let na = model.n_actions();
            let mut probs = Array2::from_elem((model.n_states(), na), epsilon / na as f64);
            for (s, &a) in greedy.iter().enumerate() {
                probs[[s, a]] += 1.0 - epsilon;
            }
            SoftPolicy::new(probs)
        }
    }
}

/// Samples `n_trajectories` episodes of at most `traj_length` steps. Starts
/// come from the initial distribution; an episode ends after the step taken in
/// a goal state. Trajectory `i` uses its own stream of the seeded generator, so
/// sampling in parallel gives the same result as sampling in order.
pub fn sample_trajectories(
    model: &DdcModel,
    policy: &SoftPolicy,
    n_trajectories: usize,
    traj_length: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if traj_length == 0 {
        return Err(Error::InvalidSpec("traj_length: must be at least 1".into()));
    }
    if policy.n_states() != model.n_states() || policy.n_actions() != model.n_actions() {
        return Err(Error::DimensionMismatch {
            what: "policy",
            expected: model.n_states() * model.n_actions(),
            found: policy.n_states() * policy.n_actions(),
        });
    }
    let start = WeightedIndex::new(model.initial_dist().iter().copied())
        .map_err(|e| Error::InvalidSpec(format!("initial_dist: {e}")))?;
    let action_dists = policy
        .probs()
        .rows()
        .into_iter()
        .map(|row| WeightedIndex::new(row.iter().copied()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidSpec(format!("policy: {e}")))?;
    let next_dists = (0..model.n_actions())
        .map(|a| {
            model
                .transitions()
                .matrix(a)
                .rows()
                .into_iter()
                .map(|row| WeightedIndex::new(row.iter().copied()))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidSpec(format!("transitions: {e}")))?;

    let trajectories = (0..n_trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut state = start.sample(&mut rng);
            let mut steps = Vec::with_capacity(traj_length);
            for _ in 0..traj_length {
                let action = action_dists[state].sample(&mut rng);
                steps.push((state, action));
                if model.is_goal(state) {
                    break;
                }
                state = next_dists[action][state].sample(&mut rng);
            }
            Trajectory::new(steps)
        })
        .collect();
    Ok(trajectories)
}

/// Demonstrations from an expert that knows the true reward.
pub fn generate_experts(
    model: &DdcModel,
    truth: &TrueReward,
    n_trajectories: usize,
    traj_length: usize,
    seed: u64,
    kind: ExpertKind,
) -> Result<Vec<Trajectory>> {
    let policy = expert_policy(model, truth, kind)?;
    sample_trajectories(model, &policy, n_trajectories, traj_length, seed)
}

/// Uniformly random actions, used for held-out baselines.
pub fn random_trajectories(model: &DdcModel, n_trajectories: usize, traj_length: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let policy = SoftPolicy::uniform(model.n_states(), model.n_actions());
    sample_trajectories(model, &policy, n_trajectories, traj_length, seed)
}

/// Fraction of sampled steps whose action is among the maximizers in `greedy`.
pub fn agreement(trajectories: &[Trajectory], greedy: &[usize]) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for t in trajectories {
        for &(s, a) in &t.steps {
            hit += usize::from(greedy[s] == a);
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}
