//! MaxEnt-IRL and CCP-IRL training loops.
//!
//! Both loops share everything except how the ex-ante value of the current
//! reward is obtained: MaxEnt iterates the soft Bellman operator to its fixed
//! point every iteration, CCP-IRL applies the Hotz-Miller operator built once
//! from the demonstrations' empirical choice probabilities.

use std::io::{Read, Write};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::optim::{OptimizerConfig, OptimizerState};
use super::reward::RewardParams;
use super::visitation::{default_horizon, demo_state_visits, forward_pass};
use crate::ccp::{estimate_ccp, SmoothingConfig};
use crate::error::{Error, Result};
use crate::hotz_miller::{build_operator, HotzMillerOperator, OperatorMode};
use crate::instrument::{self, Counts};
use crate::metrics::nll;
use crate::model::{ensure_valid, CcpTable, DdcModel, ExAnteValue, SoftPolicy, Trajectory};
use crate::soft_dp::{choice_values, policy_from_values, solve_soft_vi, SoftDpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Maxent,
    Ccp,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Maxent => "maxent",
            Algorithm::Ccp => "ccp",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxent" => Ok(Algorithm::Maxent),
            "ccp" => Ok(Algorithm::Ccp),
            other => Err(Error::InvalidSpec(format!("algorithm: expected maxent or ccp, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Forward-pass propagation steps; defaults to the longest demonstration
    /// length minus one.
    pub horizon: Option<usize>,
    pub optimizer: OptimizerConfig,
    pub smoothing: SmoothingConfig,
    pub operator_mode: OperatorMode,
    pub soft_dp: SoftDpConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            horizon: None,
            optimizer: OptimizerConfig::default(),
            smoothing: SmoothingConfig::default(),
            operator_mode: OperatorMode::Auto,
            soft_dp: SoftDpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// NLL of the demonstrations under the policy evaluated this iteration.
    pub nll: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out_nll: Option<f64>,
    /// Max-norm of the parameter gradient.
    pub grad_norm: f64,
    /// Seconds spent obtaining the ex-ante value.
    pub dp_seconds: f64,
    pub seconds: f64,
    /// Cumulative seconds including setup.
    pub total_seconds: f64,
}

/// Parameters and optimizer state after some number of iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub algorithm: Algorithm,
    pub iteration: usize,
    pub params: RewardParams,
    pub optimizer: OptimizerState,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fingerprint: Option<String>,
}

pub fn write_checkpoint<W: Write>(writer: W, checkpoint: &Checkpoint) -> Result<()> {
    serde_json::to_writer_pretty(writer, checkpoint)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<Checkpoint> {
    let c: Checkpoint = serde_json::from_reader(reader)?;
    if !c.params.is_finite() {
        return Err(Error::NonFinite("checkpoint parameters"));
    }
    Ok(c)
}

/// Where a run starts: fresh parameters, or a checkpoint.
#[derive(Debug, Clone)]
pub struct TrainStart {
    pub params: RewardParams,
    pub optimizer: Option<OptimizerState>,
    pub completed_iterations: usize,
}

impl From<RewardParams> for TrainStart {
    fn from(params: RewardParams) -> Self {
        Self { params, optimizer: None, completed_iterations: 0 }
    }
}

impl From<Checkpoint> for TrainStart {
    fn from(c: Checkpoint) -> Self {
        Self { params: c.params, optimizer: Some(c.optimizer), completed_iterations: c.iteration }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    /// NLL under the starting parameters.
    pub initial_nll: f64,
    /// CCP estimation plus operator build; zero for MaxEnt.
    pub setup_seconds: f64,
    pub total_seconds: f64,
    /// Parameters after the last update.
    pub final_params: RewardParams,
    pub final_optimizer: OptimizerState,
    /// Reward table and policy of the last evaluation, i.e. before the last
    /// update.
    pub final_rewards: Array2<f64>,
    pub final_policy: SoftPolicy,
    /// Counter deltas over the whole call.
    pub counts: Counts,
    /// Counter deltas over the iterations alone, after setup.
    pub loop_counts: Counts,
    pub threads: usize,
    pub horizon: usize,
    pub ccp: Option<CcpTable>,
    pub completed_iterations: usize,
}

impl TrainReport {
    pub fn checkpoint(&self, seed: Option<u64>, fingerprint: Option<String>) -> Checkpoint {
        Checkpoint {
            algorithm: self.algorithm,
            iteration: self.completed_iterations,
            params: self.final_params.clone(),
            optimizer: self.final_optimizer.clone(),
            seed,
            fingerprint,
        }
    }

    pub fn final_nll(&self) -> f64 {
        self.records.last().map_or(self.initial_nll, |r| r.nll)
    }
}

/// CSV with one row per iteration.
pub fn write_report_csv<W: Write>(writer: W, report: &TrainReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "nll", "grad_norm", "dp_seconds", "total_seconds"])?;
    for r in &report.records {
        w.write_record([
            r.iteration.to_string(),
            r.nll.to_string(),
            r.grad_norm.to_string(),
            r.dp_seconds.to_string(),
            r.total_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

enum ValueSolver {
    SoftVi(SoftDpConfig),
    HotzMiller(Box<HotzMillerOperator>),
}

impl ValueSolver {
    fn exante(&self, model: &DdcModel, rewards: &Array2<f64>) -> Result<ExAnteValue> {
        match self {
            ValueSolver::SoftVi(cfg) => Ok(solve_soft_vi(model, rewards, cfg)?.value),
            ValueSolver::HotzMiller(op) => op.exante_value(rewards),
        }
    }
}

pub fn train_maxent(model: &DdcModel, demos: &[Trajectory], params: RewardParams, config: &TrainConfig) -> Result<TrainReport> {
    train_with(Algorithm::Maxent, model, demos, &[], params.into(), config)
}

pub fn train_ccp(model: &DdcModel, demos: &[Trajectory], params: RewardParams, config: &TrainConfig) -> Result<TrainReport> {
    train_with(Algorithm::Ccp, model, demos, &[], params.into(), config)
}

/// CCP-IRL with a caller-supplied choice-probability table instead of one
/// estimated from `demos`.
pub fn train_ccp_from_table(
    model: &DdcModel,
    demos: &[Trajectory],
    ccp: &CcpTable,
    params: RewardParams,
    config: &TrainConfig,
) -> Result<TrainReport> {
    ensure_valid(model)?;
    let before = instrument::snapshot();
    let clock = Instant::now();
    let op = build_operator(model, ccp, config.operator_mode)?;
    let setup = clock.elapsed().as_secs_f64();
    run(Algorithm::Ccp, model, demos, &[], params.into(), config, ValueSolver::HotzMiller(Box::new(op)), setup, before, Some(ccp.clone()))
}

/// General entry point. `held_out` trajectories, when given, are scored every
/// iteration alongside the training demonstrations.
pub fn train_with(
    algorithm: Algorithm,
    model: &DdcModel,
    demos: &[Trajectory],
    held_out: &[Trajectory],
    start: TrainStart,
    config: &TrainConfig,
) -> Result<TrainReport> {
    ensure_valid(model)?;
    for t in demos.iter().chain(held_out) {
        t.check_indices(model.n_states(), model.n_actions())?;
    }
    let before = instrument::snapshot();
    let clock = Instant::now();
    let (solver, ccp) = match algorithm {
        Algorithm::Maxent => (ValueSolver::SoftVi(config.soft_dp.clone()), None),
        Algorithm::Ccp => {
            let ccp = estimate_ccp(demos, model.n_states(), model.n_actions(), &config.smoothing)?;
            let op = build_operator(model, &ccp, config.operator_mode)?;
            (ValueSolver::HotzMiller(Box::new(op)), Some(ccp))
        }
    };
    let setup = clock.elapsed().as_secs_f64();
    run(algorithm, model, demos, held_out, start, config, solver, setup, before, ccp)
}

#[allow(clippy::too_many_arguments)]
fn run(
    algorithm: Algorithm,
    model: &DdcModel,
    demos: &[Trajectory],
    held_out: &[Trajectory],
    start: TrainStart,
    config: &TrainConfig,
    solver: ValueSolver,
    setup_seconds: f64,
    before: Counts,
    ccp: Option<CcpTable>,
) -> Result<TrainReport> {
    let demo_visits = demo_state_visits(demos, model.n_states())?;
    let horizon = config.horizon.unwrap_or_else(|| default_horizon(demos));
    let features = model.features();
    let n_actions = model.n_actions();
    let mut params = start.params;
    let mut flat = params.flatten();
    let mut optimizer = start.optimizer.unwrap_or_else(|| config.optimizer.start(flat.len()));
    let loop_start = instrument::snapshot();

    let evaluate = |params: &RewardParams| -> Result<(Array2<f64>, SoftPolicy, f64)> {
        let rewards = params.reward_table(features, n_actions)?;
        let t = Instant::now();
        let vbar = solver.exante(model, &rewards)?;
        let dp = t.elapsed().as_secs_f64();
        if !vbar.is_finite() {
            return Err(Error::NonFinite("ex-ante value"));
        }
        let policy = policy_from_values(&choice_values(model, &rewards, &vbar)?);
        Ok((rewards, policy, dp))
    };

    let mut records = Vec::with_capacity(config.iterations);
    let mut total = setup_seconds;
    let mut last: Option<(Array2<f64>, SoftPolicy)> = None;
    let mut initial_nll = f64::NAN;
    for k in 0..config.iterations {
        let iteration = start.completed_iterations + k + 1;
        let t = Instant::now();
        let (rewards, policy, dp_seconds) = evaluate(&params)?;
        let train_nll = nll(&policy, demos)?;
        if k == 0 {
            initial_nll = train_nll;
        }
        let vis = forward_pass(model, &policy, horizon)?;
        let upstream = &demo_visits - &vis.total;
        let grads = params.backward(features, &upstream)?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration, detail: format!("component {i} is {}", grads[i]) });
        }
        let grad_norm = grads.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        optimizer.step(&mut flat, &grads)?;
        params.assign(&flat)?;
        let seconds = t.elapsed().as_secs_f64();
        total += seconds;
        let held_out_nll = if held_out.is_empty() { None } else { Some(nll(&policy, held_out)?) };
        records.push(IterationRecord { iteration, nll: train_nll, held_out_nll, grad_norm, dp_seconds, seconds, total_seconds: total });
        last = Some((rewards, policy));
    }
    let (final_rewards, final_policy) = match last {
        Some(pair) => pair,
        None => {
            let t = Instant::now();
            let (rewards, policy, _) = evaluate(&params)?;
            initial_nll = nll(&policy, demos)?;
            total += t.elapsed().as_secs_f64();
            (rewards, policy)
        }
    };
    let now = instrument::snapshot();
    Ok(TrainReport {
        algorithm,
        records,
        initial_nll,
        setup_seconds,
        total_seconds: total,
        final_params: params,
        final_optimizer: optimizer,
        final_rewards,
        final_policy,
        counts: now.since(&before),
        loop_counts: now.since(&loop_start),
        threads: rayon::current_num_threads(),
        horizon,
        ccp,
        completed_iterations: start.completed_iterations + config.iterations,
    })
}

/// Model-implied policy of a reward parameterization, by soft value iteration.
pub fn policy_of(model: &DdcModel, params: &RewardParams, config: &SoftDpConfig) -> Result<(Array2<f64>, SoftPolicy)> {
    let rewards = params.reward_table(model.features(), model.n_actions())?;
    let (policy, _) = crate::soft_dp::model_policy(model, &rewards, config)?;
    Ok((rewards, policy))
}
