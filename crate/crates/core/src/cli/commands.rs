use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{env_of_kind, ExperimentConfig};
use super::{BenchArgs, CommonArgs, EstimateCcpArgs, EvalArgs, GenEnvArgs, GenExpertsArgs, TrainArgs, EXIT_OK, EXIT_SOLVER};
use crate::bench::{run_benchmark_with, write_bench_csv, write_summary_csv, BenchSuite, CellFailure};
use crate::ccp::{estimate_ccp as estimate, write_ccp};
use crate::env::{generate_experts, read_true_reward, write_true_reward, EnvSpec, ExpertKind, TrueReward};
use crate::error::{Error, Result};
use crate::fingerprint;
use crate::irl::{policy_of, read_checkpoint, train_with, write_checkpoint, write_report_csv, Algorithm, RewardModel, TrainStart};
use crate::metrics::{nll, EvalResult, EvdOracle};
use crate::model::{read_model, read_trajectories, write_model, write_trajectories, DdcModel, Trajectory};
use crate::soft_dp::SoftDpConfig;

const CONFIG: &str = "config.json";
const MODEL: &str = "model.json";
const TRUE_REWARD: &str = "true_reward.json";
const FEATURES: &str = "features.csv";
const TRAJECTORIES: &str = "trajectories.json";
const HELD_OUT: &str = "held_out.json";
const CCP: &str = "ccp.json";
const REPORT: &str = "report.csv";
const REWARD_GRID: &str = "reward_grid.csv";
const CHECKPOINT: &str = "checkpoint.json";
const EVAL: &str = "eval.json";

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&common.config, &common.dir) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(d)) if d.join(CONFIG).exists() => ExperimentConfig::load(&d.join(CONFIG))?,
        _ => ExperimentConfig::default(),
    };
    if let Some(d) = &common.dir {
        cfg.output_dir = d.clone();
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn open(path: &Path, what: &str, hint: &str) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidSpec(format!("{what}: cannot open {} ({e}); {hint}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn save_config(cfg: &ExperimentConfig) -> Result<()> {
    write_json_pretty(&cfg.output_dir.join(CONFIG), &cfg.to_file()?)
}

fn load_model(dir: &Path) -> Result<DdcModel> {
    read_model(open(&dir.join(MODEL), "model", "run gen-env first")?)
}

fn load_truth(dir: &Path) -> Result<TrueReward> {
    read_true_reward(open(&dir.join(TRUE_REWARD), "true reward", "run gen-env first")?)
}

fn load_trajectories(path: &Path, what: &str) -> Result<Vec<Trajectory>> {
    read_trajectories(open(path, what, "run gen-experts first")?)
}

fn write_features(path: &Path, model: &DdcModel) -> Result<()> {
    let f = model.features().values();
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["state".to_string()];
    header.extend((0..f.ncols()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (s, row) in f.rows().into_iter().enumerate() {
        let mut rec = vec![s.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// State rewards laid out as the `n × n` grid, row-major.
fn write_reward_grid(path: &Path, rewards: &[f64], side: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for row in rewards.chunks(side.max(1)) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn apply_env_flags(env: &mut EnvSpec, a: &GenEnvArgs) -> Result<()> {
    if let Some(kind) = &a.env {
        *env = env_of_kind(kind, env)?;
    }
    if let Some(n) = a.n {
        env.set_side(n);
    }
    if let Some(b) = a.discount {
        env.set_discount(b);
    }
    match env {
        EnvSpec::FixedTarget(g) | EnvSpec::MacroCell(g) => {
            if let Some(w) = a.wind {
                g.wind = w;
            }
            if a.colors.is_some() {
                return Err(Error::InvalidSpec("colors: only applies to objectworld".into()));
            }
        }
        EnvSpec::Objectworld(o) => {
            if let Some(w) = a.wind {
                o.wind = w;
            }
            if let Some(c) = a.colors {
                o.n_colors = c;
            }
        }
    }
    match env {
        EnvSpec::MacroCell(g) => {
            if let Some(m) = a.macro_size {
                g.macro_size = m;
            }
        }
        _ if a.macro_size.is_some() => return Err(Error::InvalidSpec("macro_size: only applies to macro-cell".into())),
        _ => {}
    }
    Ok(())
}

pub fn gen_env(a: &GenEnvArgs) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    apply_env_flags(&mut cfg.env, a)?;
    let seed = cfg.resolve_seed()?;
    cfg.env.set_seed(seed);
    cfg.validate()?;
    let (model, truth) = cfg.env.build()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut w = create(&dir.join(MODEL))?;
    write_model(&mut w, &model, Some(fingerprint::of_json(&cfg.env)?))?;
    w.flush()?;
    let mut w = create(&dir.join(TRUE_REWARD))?;
    write_true_reward(&mut w, &truth)?;
    w.flush()?;
    write_features(&dir.join(FEATURES), &model)?;
    save_config(&cfg)?;
    println!(
        "{}: {} states, {} actions, β = {}, written to {}",
        cfg.env.name(),
        model.n_states(),
        model.n_actions(),
        model.discount(),
        dir.display()
    );
    Ok(EXIT_OK)
}

pub fn gen_experts(a: &GenExpertsArgs) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    if let Some(n) = a.n_trajectories {
        cfg.n_trajectories = n;
    }
    if a.traj_length.is_some() {
        cfg.traj_length = a.traj_length;
    }
    if let Some(h) = a.held_out {
        cfg.n_held_out = h;
    }
    if let Some(epsilon) = a.epsilon {
        cfg.expert = ExpertKind::HardNoisy { epsilon };
    }
    let seed = cfg.resolve_seed()?;
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let model = load_model(&dir)?;
    let truth = load_truth(&dir)?;
    let len = cfg.traj_length();
    let demos = generate_experts(&model, &truth, cfg.n_trajectories, len, seed, cfg.expert)?;
    let mut w = create(&dir.join(TRAJECTORIES))?;
    write_trajectories(&mut w, &demos)?;
    w.flush()?;
    if cfg.n_held_out > 0 {
        let held = generate_experts(&model, &truth, cfg.n_held_out, len, ExperimentConfig::held_out_seed(seed), cfg.expert)?;
        let mut w = create(&dir.join(HELD_OUT))?;
        write_trajectories(&mut w, &held)?;
        w.flush()?;
    }
    save_config(&cfg)?;
    println!("{} demonstrations (+{} held out), length ≤ {len}", demos.len(), cfg.n_held_out);
    Ok(EXIT_OK)
}

pub fn estimate_ccp(a: &EstimateCcpArgs) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    if let Some(alpha) = a.alpha {
        cfg.smoothing.alpha = alpha;
    }
    let dir = cfg.output_dir.clone();
    let model = load_model(&dir)?;
    let demos = load_trajectories(&dir.join(TRAJECTORIES), "trajectories")?;
    let ccp = estimate(&demos, model.n_states(), model.n_actions(), &cfg.smoothing)?;
    let mut w = create(&dir.join(CCP))?;
    write_ccp(&mut w, &ccp, Some(cfg.smoothing))?;
    w.flush()?;
    save_config(&cfg)?;
    let visited = ccp.support_counts().rows().into_iter().filter(|r| r.sum() > 0).count();
    println!("CCPs for {} states ({visited} visited) written to {}", ccp.n_states(), dir.join(CCP).display());
    Ok(EXIT_OK)
}

pub fn train(a: &TrainArgs) -> Result<i32> {
    let mut cfg = load_config(&a.common)?;
    if let Some(algo) = &a.algo {
        cfg.algorithm = algo.parse()?;
    }
    if let Some(n) = a.iters {
        cfg.iterations = n;
    }
    if let Some(m) = &a.reward_model {
        cfg.reward_model = m.parse::<RewardModel>()?;
    }
    let seed = cfg.resolve_seed()?;
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let model = load_model(&dir)?;
    let demos = load_trajectories(&dir.join(TRAJECTORIES), "trajectories")?;
    let held_out = if dir.join(HELD_OUT).exists() { load_trajectories(&dir.join(HELD_OUT), "held-out trajectories")? } else { vec![] };

    let (start, remaining) = if a.resume {
        let ckpt = read_checkpoint(open(&dir.join(CHECKPOINT), "checkpoint", "train without --resume first")?)?;
        if ckpt.algorithm != cfg.algorithm {
            return Err(Error::InvalidSpec(format!(
                "algo: checkpoint was trained with {}, not {}",
                ckpt.algorithm.label(),
                cfg.algorithm.label()
            )));
        }
        let remaining = cfg.iterations.checked_sub(ckpt.iteration).ok_or_else(|| {
            Error::InvalidSpec(format!("iters: checkpoint already has {} iterations, more than {}", ckpt.iteration, cfg.iterations))
        })?;
        (TrainStart::from(ckpt), remaining)
    } else {
        let params = cfg.reward_model.init(model.features().feature_dim(), cfg.hidden, seed);
        (TrainStart::from(params), cfg.iterations)
    };

    let report = train_with(cfg.algorithm, &model, &demos, &held_out, start, &cfg.train_config(remaining))?;
    let fp = cfg.fingerprint()?;
    let mut w = create(&dir.join(REPORT))?;
    write_report_csv(&mut w, &report)?;
    w.flush()?;
    let rewards = report.final_params.state_rewards(model.features())?;
    write_reward_grid(&dir.join(REWARD_GRID), rewards.as_slice().expect("contiguous"), cfg.env.side())?;
    let mut w = create(&dir.join(CHECKPOINT))?;
    write_checkpoint(&mut w, &report.checkpoint(Some(seed), Some(fp)))?;
    w.flush()?;
    save_config(&cfg)?;
    println!(
        "{} finished {} iterations: nll {:.4} -> {:.4}, {:.3}s total ({:.3}s setup), {} soft-VI solves, {} operator builds",
        cfg.algorithm.label(),
        report.completed_iterations,
        report.initial_nll,
        report.final_nll(),
        report.total_seconds,
        report.setup_seconds,
        report.counts.soft_vi_solves,
        report.counts.operator_builds
    );
    Ok(EXIT_OK)
}

pub fn eval(a: &EvalArgs) -> Result<i32> {
    let cfg = load_config(&a.common)?;
    let dir = cfg.output_dir.clone();
    let model = load_model(&dir)?;
    let truth = load_truth(&dir)?;
    let ckpt_path = a.checkpoint.clone().unwrap_or_else(|| dir.join(CHECKPOINT));
    let ckpt = read_checkpoint(open(&ckpt_path, "checkpoint", "run train first")?)?;
    let held_path: PathBuf = a.held_out.clone().unwrap_or_else(|| dir.join(HELD_OUT));
    let held_out = load_trajectories(&held_path, "held-out trajectories")?;
    let (rewards, policy) = policy_of(&model, &ckpt.params, &SoftDpConfig::default())?;
    let oracle = EvdOracle::new(&model, &truth)?;
    let result = EvalResult {
        nll: nll(&policy, &held_out)?,
        evd: oracle.reward_evd(&model, &rewards)?,
        n_eval_trajectories: held_out.len(),
        soft_evd: Some(oracle.evd(&model, &policy)?),
        uniform_evd: Some(oracle.uniform_evd(&model)?),
        fingerprint: ckpt.fingerprint.clone().or(Some(cfg.fingerprint()?)),
    };
    write_json_pretty(&dir.join(EVAL), &result)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BenchConfigFile<'a> {
    suite: &'a BenchSuite,
    fingerprint: String,
    failures: &'a [CellFailure],
}

pub fn bench(a: &BenchArgs) -> Result<i32> {
    let mut suite = match (&a.preset, &a.suite) {
        (Some(name), _) => BenchSuite::preset(name)?,
        (None, Some(path)) => serde_json::from_reader(open(path, "suite", "check the path")?)?,
        (None, None) => {
            let names: Vec<_> = BenchSuite::preset_names().collect();
            return Err(Error::InvalidSpec(format!("suite: pass --suite FILE or --preset ({})", names.join(", "))));
        }
    };
    if let Some(r) = a.repeats {
        suite.repeats = r;
    }
    if let Some(k) = a.iters {
        suite.iterations = k;
    }
    if a.no_warmup {
        suite.warmup = false;
    }
    suite.validate()?;
    fs::create_dir_all(&a.out)?;
    let outcome = run_benchmark_with(&suite, |r| {
        eprintln!(
            "{:<6} {} β={} n={} repeat {}: {:.3}s (setup {:.3}s), evd {:.4}",
            r.algorithm.label(),
            r.env,
            r.beta,
            r.trajectories,
            r.repeat,
            r.total_seconds,
            r.setup_seconds,
            r.evd
        );
    })?;
    write_bench_csv(create(&a.out.join("bench.csv"))?, &outcome.records)?;
    write_summary_csv(create(&a.out.join("bench_summary.csv"))?, &outcome.pairs)?;
    let file = BenchConfigFile { suite: &suite, fingerprint: suite.fingerprint()?, failures: &outcome.failures };
    write_json_pretty(&a.out.join("bench_config.json"), &file)?;
    for f in &outcome.failures {
        eprintln!(
            "failed: {} {}: {}",
            f.algorithm.map_or("cell", |x: Algorithm| x.label()),
            f.cell.label(),
            f.message
        );
    }
    for p in &outcome.pairs {
        println!("{} β={} n={} seed {}: speedup {:.2}", p.env, p.beta, p.trajectories, p.seed, p.speedup);
    }
    Ok(if outcome.records.is_empty() { EXIT_SOLVER } else { EXIT_OK })
}
