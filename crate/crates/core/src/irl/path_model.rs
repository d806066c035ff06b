//! Finite-horizon MaxEnt path distribution.
//!
//! Paths with `n` actions are weighted by the dynamics and the exponentiated
//! reward of their `n + 1` states:
//! `P(τ | x₀) ∝ Π_t T(x_{t+1} | x_t, a_t) · exp(Σ_t r(x_t))`.
//! For a linear reward the demonstration log-likelihood under this model has
//! gradient exactly `μ_D − E[μ]`, where `E[μ]` uses the path distribution's
//! own state marginals. Under that distribution the next state is tilted
//! toward high-value successors, `P(y | x, t) ∝ Σ_a T(y | x, a) exp(Z_{t+1}(y))`,
//! so a forward pass that draws actions from the local marginals `π_t` and
//! then moves by the untilted `T` is exact only for deterministic dynamics.

use ndarray::{Array1, Array2};

use super::reward::LinearReward;
use super::visitation::{default_horizon, feature_expectations_from_demos, feature_expectations_from_visitation, VisitationResult};
use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, matvec};
use crate::model::{DdcModel, SoftPolicy, Trajectory};

#[derive(Debug, Clone)]
pub struct PathModel {
    /// `log Z_t(x)` for `t = 0..=n`: log total weight of path suffixes from `x` at step `t`.
    pub log_partition: Vec<Array1<f64>>,
    /// Local action distributions `π_t(a | x)` for `t = 0..n`.
    pub policies: Vec<SoftPolicy>,
}

fn goal_free(model: &DdcModel) -> Result<()> {
    if !model.goal_states().is_empty() {
        return Err(Error::InvalidSpec("path model: goal states are not supported".into()));
    }
    Ok(())
}

/// Backward recursion in log space.
pub fn path_model(model: &DdcModel, state_rewards: &Array1<f64>, horizon: usize) -> Result<PathModel> {
    goal_free(model)?;
    model.check_vector("state rewards", state_rewards)?;
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut log_z = vec![state_rewards.clone()];
    let mut policies = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = log_z.last().expect("nonempty");
        let shift = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled = next.mapv(|z| (z - shift).exp());
        let mut w = Array2::zeros((ns, na));
        for a in 0..na {
            let col = matvec(model.transitions().matrix(a), scaled.view());
            w.column_mut(a).assign(&col.mapv(|v| shift + v.ln()));
        }
        let mut z = Array1::zeros(ns);
        let mut probs = Array2::zeros((ns, na));
        for s in 0..ns {
            let row = w.row(s);
            let lse = log_sum_exp(row.iter());
            z[s] = state_rewards[s] + lse;
            for a in 0..na {
                probs[[s, a]] = (row[a] - lse).exp();
            }
        }
        log_z.push(z);
        policies.push(SoftPolicy::from_normalized(probs));
    }
    log_z.reverse();
    policies.reverse();
    if log_z.iter().any(|z| z.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("path model partition"));
    }
    Ok(PathModel { log_partition: log_z, policies })
}

/// Exact state marginals `D_0 … D_n` of the path distribution started from
/// the model's initial distribution.
pub fn path_visitation(model: &DdcModel, state_rewards: &Array1<f64>, horizon: usize) -> Result<VisitationResult> {
    let pm = path_model(model, state_rewards, horizon)?;
    let ns = model.n_states();
    let mut per_step = vec![model.initial_dist().clone()];
    for t in 0..horizon {
        let next_z = &pm.log_partition[t + 1];
        let mut d = Array1::zeros(ns);
        for x in 0..ns {
            let mass = per_step[t][x];
            if mass == 0.0 {
                continue;
            }
            let norm = pm.log_partition[t][x] - state_rewards[x];
            for a in 0..model.n_actions() {
                for (y, &p) in model.transitions().matrix(a).row(x).iter().enumerate() {
                    if p > 0.0 {
                        d[y] += mass * p * (next_z[y] - norm).exp();
                    }
                }
            }
        }
        per_step.push(d);
    }
    let total = per_step.iter().fold(Array1::zeros(ns), |acc, d| acc + d);
    Ok(VisitationResult { per_step, total, horizon })
}

/// `μ_D − E[μ]` under the path model of a linear reward, with the horizon set
/// by the longest demonstration.
pub fn path_gradient(model: &DdcModel, demos: &[Trajectory], reward: &LinearReward) -> Result<Array1<f64>> {
    let features = model.features();
    let mu_d = feature_expectations_from_demos(demos, features)?;
    let vis = path_visitation(model, &reward.state_rewards(features), default_horizon(demos))?;
    Ok(mu_d - feature_expectations_from_visitation(&vis, features))
}

/// Mean demonstration log-likelihood under the path model, conditioning on
/// each demonstration's start state. All demonstrations must share one length.
pub fn path_log_likelihood(model: &DdcModel, demos: &[Trajectory], reward: &LinearReward) -> Result<f64> {
    if demos.is_empty() {
        return Err(Error::EmptyData);
    }
    let len = demos[0].len();
    if demos.iter().any(|t| t.len() != len) || len == 0 {
        return Err(Error::InvalidSpec("path likelihood: demonstrations must share one nonzero length".into()));
    }
    let r = reward.state_rewards(model.features());
    let pm = path_model(model, &r, len - 1)?;
    let mut total = 0.0;
    for t in demos {
        t.check_indices(model.n_states(), model.n_actions())?;
        let mut ll = -pm.log_partition[0][t.steps[0].0];
        for (i, &(s, a)) in t.steps.iter().enumerate() {
            ll += r[s];
            if let Some(&(next, _)) = t.steps.get(i + 1) {
                ll += model.transitions().matrix(a)[[s, next]].ln();
            }
        }
        total += ll;
    }
    Ok(total / demos.len() as f64)
}
