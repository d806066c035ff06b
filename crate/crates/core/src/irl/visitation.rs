//! State-visitation forward pass and feature expectations.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::add_vecmat;
use crate::model::{DdcModel, FeatureMatrix, SoftPolicy, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct VisitationResult {
    /// `D⁽⁰⁾ … D⁽ⁿ⁾`.
    pub per_step: Vec<Array1<f64>>,
    pub total: Array1<f64>,
    pub horizon: usize,
}

fn propagate_step(model: &DdcModel, policy: &SoftPolicy, prev: &Array1<f64>) -> Array1<f64> {
    let mut src = prev.clone();
    for &g in model.goal_states() {
        src[g] = 0.0;
    }
    let weights = policy.probs() * &src.view().insert_axis(ndarray::Axis(1));
    model.transitions().propagate(weights.view())
}

fn accumulate(per_step: Vec<Array1<f64>>) -> VisitationResult {
    let horizon = per_step.len() - 1;
    let mut total = Array1::zeros(per_step[0].len());
    for d in &per_step {
        total += d;
    }
    VisitationResult { per_step, total, horizon }
}

fn check_policy(model: &DdcModel, policy: &SoftPolicy) -> Result<()> {
    model.check_table("policy", policy.probs())
}

/// Expected state occupancies over `horizon` propagation steps under a
/// stationary policy. Mass sitting in a goal state is counted at that step
/// and then removed, so episodes end on reaching a goal.
pub fn forward_pass(model: &DdcModel, policy: &SoftPolicy, horizon: usize) -> Result<VisitationResult> {
    check_policy(model, policy)?;
    let mut per_step = Vec::with_capacity(horizon + 1);
    per_step.push(model.initial_dist().clone());
    if horizon <= model.n_actions() {
        for i in 0..horizon {
            let next = propagate_step(model, policy, &per_step[i]);
            per_step.push(next);
        }
        return Ok(accumulate(per_step));
    }
    // Long horizons: fold the policy into one matrix with goal rows cleared,
    // so each step reads a single |X|×|X| matrix instead of |A| of them.
    let mut f = model.transitions().policy_matrix(policy.probs().view());
    for &g in model.goal_states() {
        f.row_mut(g).fill(0.0);
    }
    for i in 0..horizon {
        let mut next = vec![0.0; model.n_states()];
        add_vecmat(&mut next, per_step[i].view(), f.view());
        per_step.push(Array1::from(next));
    }
    Ok(accumulate(per_step))
}

/// Forward pass where step `i` propagates with `policies[i]`; the horizon is
/// `policies.len()`.
pub fn forward_pass_time_varying(model: &DdcModel, policies: &[SoftPolicy]) -> Result<VisitationResult> {
    let mut per_step = Vec::with_capacity(policies.len() + 1);
    per_step.push(model.initial_dist().clone());
    for (i, p) in policies.iter().enumerate() {
        check_policy(model, p)?;
        let next = propagate_step(model, p, &per_step[i]);
        per_step.push(next);
    }
    Ok(accumulate(per_step))
}

pub fn feature_expectations_from_visitation(vis: &VisitationResult, features: &FeatureMatrix) -> Array1<f64> {
    features.values().t().dot(&vis.total)
}

/// Per-state visit counts averaged over trajectories.
pub fn demo_state_visits(trajectories: &[Trajectory], n_states: usize) -> Result<Array1<f64>> {
    if trajectories.is_empty() || trajectories.iter().all(|t| t.is_empty()) {
        return Err(Error::EmptyData);
    }
    let mut counts = Array1::zeros(n_states);
    for t in trajectories {
        for &(s, _) in &t.steps {
            if s >= n_states {
                return Err(Error::IndexOutOfRange { what: "trajectory state", index: s, bound: n_states });
            }
            counts[s] += 1.0;
        }
    }
    Ok(counts / trajectories.len() as f64)
}

/// `μ_D = (1/N) Σ_i Σ_t f(x_it)`.
pub fn feature_expectations_from_demos(trajectories: &[Trajectory], features: &FeatureMatrix) -> Result<Array1<f64>> {
    let visits = demo_state_visits(trajectories, features.n_states())?;
    Ok(features.values().t().dot(&visits))
}

/// Horizon that makes the forward pass cover as many states as the longest
/// demonstration: a trajectory of `T` steps visits `T` states, one initial and
/// `T − 1` propagated.
pub fn default_horizon(trajectories: &[Trajectory]) -> usize {
    trajectories.iter().map(Trajectory::len).max().unwrap_or(1).saturating_sub(1)
}

/// Per-state policy weights `π(a|x)·D(x)`, used by tests and diagnostics.
pub fn state_action_visits(policy: &SoftPolicy, visits: &Array1<f64>) -> Array2<f64> {
    policy.probs() * &visits.view().insert_axis(ndarray::Axis(1))
}
