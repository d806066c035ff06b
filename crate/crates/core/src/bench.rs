//! Wall-clock benchmark harness pairing MaxEnt and CCP runs on identical demonstrations.
//!
//! A suite lists cells; each cell expands over sizes, discounts, trajectory
//! counts and seeds. Every expanded cell builds its environment and demos
//! once, then trains each algorithm `repeats` times, strictly one run at a time.
//! Timing covers training only, CCP setup included; environment construction,
//! demo generation and evaluation are outside the clock.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{generate_experts, EnvSpec, ExpertKind, GridSpec};
use crate::error::{Error, Result};
use crate::fingerprint;
use crate::irl::{train_with, Algorithm, OptimizerConfig, RewardModel, TrainConfig, TrainStart};
use crate::metrics::EvdOracle;
use crate::model::{read_trajectories, write_trajectories};

pub const CSV_HEADER: [&str; 13] = [
    "algorithm",
    "env",
    "n_states",
    "n_actions",
    "beta",
    "iterations",
    "trajectories",
    "setup_s",
    "total_s",
    "nll",
    "evd",
    "seed",
    "repeat",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchCell {
    pub env: EnvSpec,
    /// Grid sides to sweep; empty keeps the side in `env`.
    pub sizes: Vec<usize>,
    /// Discounts to sweep; empty keeps the discount in `env`.
    pub discounts: Vec<f64>,
    pub trajectories: Vec<usize>,
    /// Defaults to the environment's episode length.
    pub traj_length: Option<usize>,
    /// Each seed sets both the environment seed and the demo seed.
    pub seeds: Vec<u64>,
}

impl Default for BenchCell {
    fn default() -> Self {
        Self {
            env: EnvSpec::FixedTarget(GridSpec::default()),
            sizes: vec![],
            discounts: vec![],
            trajectories: vec![80],
            traj_length: None,
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSuite {
    pub name: String,
    pub iterations: usize,
    pub repeats: usize,
    /// Run a one-iteration untimed pass per algorithm before the timed repeats.
    pub warmup: bool,
    pub algorithms: Vec<Algorithm>,
    pub reward_model: RewardModel,
    pub hidden: usize,
    /// Defaults to the reward model's usual optimizer.
    pub optimizer: Option<OptimizerConfig>,
    pub expert: ExpertKind,
    pub cells: Vec<BenchCell>,
}

impl Default for BenchSuite {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            iterations: 50,
            repeats: 3,
            warmup: true,
            algorithms: vec![Algorithm::Maxent, Algorithm::Ccp],
            reward_model: RewardModel::Linear,
            hidden: 32,
            optimizer: None,
            expert: ExpertKind::Soft,
            cells: vec![],
        }
    }
}

const PRESETS: [(&str, &str); 5] = [
    ("table1", include_str!("../presets/table1.json")),
    ("table2-style", include_str!("../presets/table2-style.json")),
    ("fig4-beta-sweep", include_str!("../presets/fig4-beta-sweep.json")),
    ("fig2-trajectory-sweep", include_str!("../presets/fig2-trajectory-sweep.json")),
    ("objectworld-evd", include_str!("../presets/objectworld-evd.json")),
];

impl BenchSuite {
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::InvalidSpec(format!("suite: no preset named {name}")))?;
        Ok(serde_json::from_str(text)?)
    }

    pub fn fingerprint(&self) -> Result<String> {
        fingerprint::of_json(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(format!("suite: {msg}")));
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.algorithms.is_empty() {
            return bad("algorithms is empty");
        }
        if self.cells.is_empty() {
            return bad("cells is empty");
        }
        for c in &self.cells {
            if c.trajectories.is_empty() || c.trajectories.contains(&0) {
                return bad("trajectories must be a nonempty list of positive counts");
            }
            if c.seeds.is_empty() {
                return bad("seeds is empty");
            }
            if c.discounts.iter().any(|b| !(0.0..1.0).contains(b)) {
                return bad("discounts must lie in [0, 1)");
            }
            if c.sizes.contains(&0) {
                return bad("sizes must be positive");
            }
        }
        Ok(())
    }

    /// Every concrete run the suite describes, in execution order.
    pub fn expand(&self) -> Vec<CellRun> {
        let mut out = vec![];
        for cell in &self.cells {
            let sizes = if cell.sizes.is_empty() { vec![cell.env.side()] } else { cell.sizes.clone() };
            let discounts = if cell.discounts.is_empty() { vec![cell.env.discount()] } else { cell.discounts.clone() };
            for &n in &sizes {
                for &beta in &discounts {
                    for &trajectories in &cell.trajectories {
                        for &seed in &cell.seeds {
                            let mut env = cell.env.clone();
                            env.set_side(n);
                            env.set_discount(beta);
                            env.set_seed(seed);
                            let traj_length = cell.traj_length.unwrap_or_else(|| env.default_traj_length());
                            out.push(CellRun { env, trajectories, traj_length, seed });
                        }
                    }
                }
            }
        }
        out
    }

    fn train_config(&self, iterations: usize) -> TrainConfig {
        TrainConfig {
            iterations,
            optimizer: self.optimizer.unwrap_or_else(|| self.reward_model.default_optimizer()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub env: EnvSpec,
    pub trajectories: usize,
    pub traj_length: usize,
    pub seed: u64,
}

impl CellRun {
    /// `name-side`, plus the region size or color count where a suite may vary it.
    pub fn label(&self) -> String {
        let base = format!("{}-{}", self.env.name(), self.env.side());
        match &self.env {
            EnvSpec::MacroCell(g) => format!("{base}-m{}", g.macro_size),
            EnvSpec::Objectworld(o) => format!("{base}-c{}", o.n_colors),
            EnvSpec::FixedTarget(_) => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub env: String,
    pub env_fingerprint: String,
    pub demo_fingerprint: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub beta: f64,
    pub iterations: usize,
    pub trajectories: usize,
    pub setup_seconds: f64,
    pub total_seconds: f64,
    pub iteration_seconds: Vec<f64>,
    pub nll: f64,
    pub evd: f64,
    pub seed: u64,
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: CellRun,
    pub algorithm: Option<Algorithm>,
    pub message: String,
}

/// MaxEnt and CCP timings for one expanded cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub env: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub beta: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub maxent_mean_s: f64,
    pub maxent_min_s: f64,
    pub ccp_mean_s: f64,
    pub ccp_min_s: f64,
    pub maxent_evd: f64,
    pub ccp_evd: f64,
    /// `maxent_mean_s / ccp_mean_s`.
    pub speedup: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    pub pairs: Vec<PairSummary>,
    pub failures: Vec<CellFailure>,
}

pub fn run_benchmark(suite: &BenchSuite) -> Result<BenchOutcome> {
    run_benchmark_with(suite, |_| {})
}

/// Runs the suite, calling `progress` after every timed record.
pub fn run_benchmark_with(suite: &BenchSuite, mut progress: impl FnMut(&BenchRecord)) -> Result<BenchOutcome> {
    suite.validate()?;
    let mut outcome = BenchOutcome::default();
    for cell in suite.expand() {
        match run_cell(suite, &cell, &mut outcome, &mut progress) {
            Ok(()) => {}
            Err(e) => outcome.failures.push(CellFailure { cell: cell.clone(), algorithm: None, message: e.to_string() }),
        }
    }
    Ok(outcome)
}

fn run_cell(
    suite: &BenchSuite,
    cell: &CellRun,
    outcome: &mut BenchOutcome,
    progress: &mut impl FnMut(&BenchRecord),
) -> Result<()> {
    let (model, truth) = cell.env.build()?;
    let demos = generate_experts(&model, &truth, cell.trajectories, cell.traj_length, cell.seed, suite.expert)?;
    let mut demo_bytes = vec![];
    write_trajectories(&mut demo_bytes, &demos)?;
    let oracle = EvdOracle::new(&model, &truth)?;
    let env_fingerprint = fingerprint::of_json(&cell.env)?;
    let params = suite.reward_model.init(model.features().feature_dim(), suite.hidden, cell.seed);

    let mut runs: Vec<(Algorithm, Vec<f64>, f64, String)> = vec![];
    for &algorithm in &suite.algorithms {
        // Each algorithm decodes its own copy of the serialized demos.
        let demos = read_trajectories(demo_bytes.as_slice())?;
        let demo_fingerprint = fingerprint::of_bytes(&demo_bytes);
        let attempt = (|| -> Result<(Vec<f64>, f64)> {
            if suite.warmup {
                train_with(algorithm, &model, &demos, &[], params.clone().into(), &suite.train_config(1))?;
            }
            let cfg = suite.train_config(suite.iterations);
            let mut totals = vec![];
            let mut evd = f64::NAN;
            for repeat in 0..suite.repeats {
                let report = train_with(algorithm, &model, &demos, &[], TrainStart::from(params.clone()), &cfg)?;
                evd = oracle.reward_evd(&model, &report.final_rewards)?;
                let mut last = report.setup_seconds;
                let iteration_seconds = report
                    .records
                    .iter()
                    .map(|r| {
                        let d = r.total_seconds - last;
                        last = r.total_seconds;
                        d
                    })
                    .collect();
                let record = BenchRecord {
                    algorithm,
                    env: cell.label(),
                    env_fingerprint: env_fingerprint.clone(),
                    demo_fingerprint: demo_fingerprint.clone(),
                    n_states: model.n_states(),
                    n_actions: model.n_actions(),
                    beta: model.discount(),
                    iterations: suite.iterations,
                    trajectories: cell.trajectories,
                    setup_seconds: report.setup_seconds,
                    total_seconds: report.total_seconds,
                    iteration_seconds,
                    nll: report.final_nll(),
                    evd,
                    seed: cell.seed,
                    repeat,
                };
                progress(&record);
                totals.push(record.total_seconds);
                outcome.records.push(record);
            }
            Ok((totals, evd))
        })();
        match attempt {
            Ok((totals, evd)) => runs.push((algorithm, totals, evd, demo_fingerprint)),
            Err(e) => outcome.failures.push(CellFailure {
                cell: cell.clone(),
                algorithm: Some(algorithm),
                message: e.to_string(),
            }),
        }
    }

    let find = |a: Algorithm| runs.iter().find(|r| r.0 == a);
    if let (Some(m), Some(c)) = (find(Algorithm::Maxent), find(Algorithm::Ccp)) {
        if m.3 != c.3 {
            return Err(Error::InvalidSpec("bench: paired runs saw different demonstrations".into()));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        outcome.pairs.push(PairSummary {
            env: cell.label(),
            n_states: model.n_states(),
            n_actions: model.n_actions(),
            beta: model.discount(),
            trajectories: cell.trajectories,
            seed: cell.seed,
            maxent_mean_s: mean(&m.1),
            maxent_min_s: min(&m.1),
            ccp_mean_s: mean(&c.1),
            ccp_min_s: min(&c.1),
            maxent_evd: m.2,
            ccp_evd: c.2,
            speedup: mean(&m.1) / mean(&c.1),
        });
    }
    Ok(())
}

pub fn write_bench_csv<W: Write>(writer: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.algorithm.label().to_string(),
            r.env.clone(),
            r.n_states.to_string(),
            r.n_actions.to_string(),
            r.beta.to_string(),
            r.iterations.to_string(),
            r.trajectories.to_string(),
            r.setup_seconds.to_string(),
            r.total_seconds.to_string(),
            r.nll.to_string(),
            r.evd.to_string(),
            r.seed.to_string(),
            r.repeat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per MaxEnt/CCP pair, carrying the speedup.
pub fn write_summary_csv<W: Write>(writer: W, pairs: &[PairSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in pairs {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
