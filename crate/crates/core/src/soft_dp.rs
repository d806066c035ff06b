//! Soft (log-sum-exp) Bellman recursion for the ex-ante value function under
//! Gumbel shocks, choice-specific values, and the closed-form choice
//! probabilities they imply.
//!
//! ```text
//! V̄(x)   = log Σ_a exp(r(x,a) + β E[V̄(x') | x, a]) + γ
//! q(x,a) = r(x,a) + β E[V̄(x') | x, a]
//! σ(a|x) = exp q(x,a) / Σ_a' exp q(x,a')
//! ```
//!
//! Sweeps are Jacobi-style: every state in a sweep reads the previous iterate.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::instrument;
use crate::linalg;
use crate::model::{DdcModel, ExAnteValue, SoftPolicy};

/// Euler–Mascheroni constant, the mean of a standard Gumbel shock.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SoftDpConfig {
    /// Sup-norm threshold on successive iterates.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SoftDpConfig {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_sweeps: 10_000 }
    }
}

impl SoftDpConfig {
    pub fn euler_gamma(&self) -> f64 {
        EULER_GAMMA
    }
}

/// Choice-specific values `q(x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceValues {
    pub q: Array2<f64>,
}

/// Result of iterating the soft backup to its fixed point.
#[derive(Debug, Clone)]
pub struct SoftViSolution {
    pub value: ExAnteValue,
    pub sweeps: usize,
    pub residual: f64,
}

fn check_rewards(model: &DdcModel, rewards: &Array2<f64>) -> Result<()> {
    model.check_table("reward table", rewards)?;
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("reward table"));
    }
    Ok(())
}

/// Fills `q` with `r + β T(a) v` for every action.
fn fill_choice_values(model: &DdcModel, rewards: &Array2<f64>, v: &Array1<f64>, q: &mut Array2<f64>, scratch: &mut [f64]) {
    let beta = model.discount();
    for a in 0..model.n_actions() {
        model.transitions().apply_into(a, v.view(), scratch);
        for (x, &ev) in scratch.iter().enumerate() {
            q[[x, a]] = rewards[[x, a]] + beta * ev;
        }
    }
}

fn row_log_sum_exp(q: &Array2<f64>, out: &mut Array1<f64>) {
    for (o, row) in out.iter_mut().zip(q.rows()) {
        *o = linalg::log_sum_exp(row.as_slice().expect("standard layout")) + EULER_GAMMA;
    }
}

/// One application of the soft Bellman operator.
pub fn soft_bellman_backup(model: &DdcModel, rewards: &Array2<f64>, vbar: &ExAnteValue) -> Result<ExAnteValue> {
    check_rewards(model, rewards)?;
    model.check_vector("ex-ante value", &vbar.0)?;
    let n = model.n_states();
    let mut q = Array2::zeros((n, model.n_actions()));
    let mut scratch = vec![0.0; n];
    fill_choice_values(model, rewards, &vbar.0, &mut q, &mut scratch);
    let mut out = Array1::zeros(n);
    row_log_sum_exp(&q, &mut out);
    Ok(ExAnteValue(out))
}

/// Iterates the soft backup from `V̄ = 0` until successive iterates differ by
/// less than `config.tolerance` in sup-norm.
pub fn solve_soft_vi(model: &DdcModel, rewards: &Array2<f64>, config: &SoftDpConfig) -> Result<SoftViSolution> {
    solve_soft_vi_from(model, rewards, config, ExAnteValue::zeros(model.n_states()))
}

/// As [`solve_soft_vi`], starting from a caller-supplied iterate.
pub fn solve_soft_vi_from(
    model: &DdcModel,
    rewards: &Array2<f64>,
    config: &SoftDpConfig,
    start: ExAnteValue,
) -> Result<SoftViSolution> {
    check_rewards(model, rewards)?;
    model.check_vector("initial ex-ante value", &start.0)?;
    if !(model.discount() < 1.0) {
        return Err(Error::InvalidModel(vec![format!("discount {} must be < 1", model.discount())]));
    }
    instrument::record_soft_vi_solve();
    let n = model.n_states();
    let mut q = Array2::zeros((n, model.n_actions()));
    let mut scratch = vec![0.0; n];
    let mut v = start.0;
    let mut next = Array1::zeros(n);
    let mut residual = f64::INFINITY;
    for sweep in 1..=config.max_sweeps {
        fill_choice_values(model, rewards, &v, &mut q, &mut scratch);
        row_log_sum_exp(&q, &mut next);
        residual = linalg::max_abs_diff(next.view(), v.view());
        std::mem::swap(&mut v, &mut next);
        if residual < config.tolerance {
            return Ok(SoftViSolution { value: ExAnteValue(v), sweeps: sweep, residual });
        }
    }
    Err(Error::MaxSweepsExceeded { sweeps: config.max_sweeps, residual, last: v })
}

/// `q(x, a) = r(x, a) + β (T(a) V̄)(x)`.
pub fn choice_values(model: &DdcModel, rewards: &Array2<f64>, vbar: &ExAnteValue) -> Result<ChoiceValues> {
    check_rewards(model, rewards)?;
    model.check_vector("ex-ante value", &vbar.0)?;
    if !vbar.is_finite() {
        return Err(Error::NonFinite("ex-ante value"));
    }
    let n = model.n_states();
    let mut q = Array2::zeros((n, model.n_actions()));
    let mut scratch = vec![0.0; n];
    fill_choice_values(model, rewards, &vbar.0, &mut q, &mut scratch);
    Ok(ChoiceValues { q })
}

/// Row-wise softmax of the choice values.
pub fn policy_from_values(values: &ChoiceValues) -> SoftPolicy {
    let mut probs = values.q.clone();
    for mut row in probs.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - m).exp());
        let s = row.sum();
        row /= s;
    }
    SoftPolicy::from_normalized(probs)
}

/// Model-implied choice probabilities of a reward table: solve, then softmax.
pub fn model_policy(model: &DdcModel, rewards: &Array2<f64>, config: &SoftDpConfig) -> Result<(SoftPolicy, ExAnteValue)> {
    let sol = solve_soft_vi(model, rewards, config)?;
    let q = choice_values(model, rewards, &sol.value)?;
    Ok((policy_from_values(&q), sol.value))
}
