//! Evaluation metrics: demonstration NLL and expected value difference.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::env::TrueReward;
use crate::error::{Error, Result};
use crate::linalg::LuFactors;
use crate::model::{DdcModel, SoftPolicy, Trajectory};

const HARD_VI_MAX_SWEEPS: usize = 200_000;
const POLICY_ITERATION_MAX: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub nll: f64,
    /// EVD of the greedy policy of the learned reward.
    pub evd: f64,
    pub n_eval_trajectories: usize,
    /// EVD of the learned reward's soft policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft_evd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_evd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

/// Mean over trajectories of `−Σ_t log π(a_t | x_t)`. Zero probabilities are
/// floored at the smallest positive double.
pub fn nll(policy: &SoftPolicy, trajectories: &[Trajectory]) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut total = 0.0;
    for t in trajectories {
        t.check_indices(policy.n_states(), policy.n_actions())?;
        for &(s, a) in &t.steps {
            total -= policy.prob(s, a).max(f64::MIN_POSITIVE).ln();
        }
    }
    Ok(total / trajectories.len() as f64)
}

fn check_rewards(model: &DdcModel, rewards: &Array2<f64>) -> Result<()> {
    model.check_table("rewards", rewards)?;
    if model.discount() >= 1.0 {
        return Err(Error::InvalidSpec(format!("discount: {} must be below 1", model.discount())));
    }
    Ok(())
}

/// `q(x, a) = r(x, a) + β T(a) v`.
fn hard_q(model: &DdcModel, rewards: &Array2<f64>, v: &Array1<f64>) -> Array2<f64> {
    let beta = model.discount();
    let mut q = rewards.clone();
    for a in 0..model.n_actions() {
        let next = model.transitions().apply(a, v.view());
        q.column_mut(a).scaled_add(beta, &next);
    }
    q
}

/// Row maxima and the first maximizing action per row.
fn greedy(q: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
    let mut values = Array1::zeros(q.nrows());
    let mut actions = vec![0; q.nrows()];
    for (s, row) in q.rows().into_iter().enumerate() {
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        values[s] = row[best];
        actions[s] = best;
    }
    (values, actions)
}

/// Max-Bellman value iteration from zero until successive iterates differ by
/// less than `tolerance` in sup-norm. Returns the values and a greedy policy.
pub fn hard_value_iteration(model: &DdcModel, rewards: &Array2<f64>, tolerance: f64) -> Result<(Array1<f64>, Vec<usize>)> {
    check_rewards(model, rewards)?;
    let mut v = Array1::zeros(model.n_states());
    let mut residual = f64::INFINITY;
    for _ in 0..HARD_VI_MAX_SWEEPS {
        let (next, _) = greedy(&hard_q(model, rewards, &v));
        residual = crate::linalg::max_abs_diff(next.view(), v.view());
        v = next;
        if residual < tolerance {
            let (_, policy) = greedy(&hard_q(model, rewards, &v));
            return Ok((v, policy));
        }
    }
    Err(Error::MaxSweepsExceeded { sweeps: HARD_VI_MAX_SWEEPS, residual, last: v })
}

/// Solves `V = R_π + β T_π V` with one LU factorization.
pub fn policy_evaluation(model: &DdcModel, rewards: &Array2<f64>, policy: &SoftPolicy) -> Result<Array1<f64>> {
    check_rewards(model, rewards)?;
    model.check_table("policy", policy.probs())?;
    evaluate_weights(model, rewards, policy.probs())
}

fn evaluate_weights(model: &DdcModel, rewards: &Array2<f64>, weights: &Array2<f64>) -> Result<Array1<f64>> {
    let n = model.n_states();
    let beta = model.discount();
    let mut system = model.transitions().policy_matrix(weights.view());
    system.mapv_inplace(|x| -beta * x);
    for i in 0..n {
        system[[i, i]] += 1.0;
    }
    let flow = (weights * rewards).sum_axis(ndarray::Axis(1));
    LuFactors::factor(&system)?.solve(flow.view())
}

fn deterministic(n_states: usize, n_actions: usize, actions: &[usize]) -> Array2<f64> {
    let mut w = Array2::zeros((n_states, n_actions));
    for (s, &a) in actions.iter().enumerate() {
        w[[s, a]] = 1.0;
    }
    w
}

/// Exact optimal values by policy iteration. An action is only replaced when
/// the improvement exceeds rounding noise, which rules out cycling.
pub fn optimal_values(model: &DdcModel, rewards: &Array2<f64>) -> Result<(Array1<f64>, Vec<usize>)> {
    check_rewards(model, rewards)?;
    let (ns, na) = (model.n_states(), model.n_actions());
    let (_, mut actions) = greedy(rewards);
    for _ in 0..POLICY_ITERATION_MAX {
        let v = evaluate_weights(model, rewards, &deterministic(ns, na, &actions))?;
        let q = hard_q(model, rewards, &v);
        let mut changed = false;
        for s in 0..ns {
            let current = q[[s, actions[s]]];
            let (mut best, mut best_q) = (actions[s], current);
            for a in 0..na {
                if q[[s, a]] > best_q {
                    best = a;
                    best_q = q[[s, a]];
                }
            }
            if best_q - current > 1e-10 * (1.0 + current.abs()) {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok((v, actions));
        }
    }
    Err(Error::MaxSweepsExceeded { sweeps: POLICY_ITERATION_MAX, residual: f64::NAN, last: Array1::zeros(ns) })
}

/// Deterministic optimal policy of a reward table, as a one-hot [`SoftPolicy`].
pub fn greedy_policy(model: &DdcModel, rewards: &Array2<f64>) -> Result<SoftPolicy> {
    let (_, actions) = optimal_values(model, rewards)?;
    SoftPolicy::new(deterministic(model.n_states(), model.n_actions(), &actions))
}

/// Precomputed optimum under the true reward, so that many policies can be
/// scored against one environment.
#[derive(Debug, Clone)]
pub struct EvdOracle {
    rewards: Array2<f64>,
    optimal: Array1<f64>,
    optimal_start_value: f64,
}

impl EvdOracle {
    pub fn new(model: &DdcModel, truth: &TrueReward) -> Result<Self> {
        let rewards = truth.table(model.n_actions());
        let (optimal, _) = optimal_values(model, &rewards)?;
        let optimal_start_value = model.initial_dist().dot(&optimal);
        Ok(Self { rewards, optimal, optimal_start_value })
    }

    pub fn optimal_values(&self) -> &Array1<f64> {
        &self.optimal
    }

    /// `E_{x ~ initial}[V*(x) − V^π(x)]`.
    pub fn evd(&self, model: &DdcModel, policy: &SoftPolicy) -> Result<f64> {
        let v = policy_evaluation(model, &self.rewards, policy)?;
        Ok(self.optimal_start_value - model.initial_dist().dot(&v))
    }

    /// EVD of the hard-optimal policy of a learned reward table.
    pub fn reward_evd(&self, model: &DdcModel, learned_rewards: &Array2<f64>) -> Result<f64> {
        self.evd(model, &greedy_policy(model, learned_rewards)?)
    }

    /// EVD of the uniform random policy, the usual scale for reporting.
    pub fn uniform_evd(&self, model: &DdcModel) -> Result<f64> {
        self.evd(model, &SoftPolicy::uniform(model.n_states(), model.n_actions()))
    }
}

/// Expected value difference between the hard optimum and `policy` under the
/// true reward.
pub fn evd(model: &DdcModel, truth: &TrueReward, policy: &SoftPolicy) -> Result<f64> {
    EvdOracle::new(model, truth)?.evd(model, policy)
}
