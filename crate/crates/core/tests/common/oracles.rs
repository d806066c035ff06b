//! Independent gradient oracles shared by the gradient tests and the
//! acceptance run. Each returns the worst relative error it saw.

use ccp_irl::irl::{
    feature_expectations_from_demos, feature_expectations_from_visitation, forward_pass_time_varying, mlp_backward, mlp_forward,
    path_gradient, path_model, LinearReward, MlpReward, RewardParams,
};
use ccp_irl::model::{DdcModel, FeatureMatrix, Trajectory};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean log-likelihood of equal-length demos under the MaxEnt path
/// distribution, computed by listing every path from each start state.
pub fn enumerated_log_lik(model: &DdcModel, theta: &[f64], demos: &[Trajectory]) -> f64 {
    let r = model.features().values().dot(&Array1::from(theta.to_vec()));
    let len = demos[0].len();
    let t = |a: usize, x: usize, y: usize| model.transitions().matrix(a)[[x, y]];
    let mut log_z = vec![0.0; model.n_states()];
    for (x0, z) in log_z.iter_mut().enumerate() {
        // Stack of (state, depth, log weight so far including r of state).
        let mut total = 0.0;
        let mut stack = vec![(x0, 1usize, r[x0])];
        while let Some((x, depth, w)) = stack.pop() {
            if depth == len {
                total += w.exp();
                continue;
            }
            for a in 0..model.n_actions() {
                for y in 0..model.n_states() {
                    if t(a, x, y) > 0.0 {
                        stack.push((y, depth + 1, w + t(a, x, y).ln() + r[y]));
                    }
                }
            }
        }
        *z = total.ln();
    }
    let mut ll = 0.0;
    for d in demos {
        let mut w = -log_z[d.steps[0].0];
        for (i, &(s, a)) in d.steps.iter().enumerate() {
            w += r[s];
            if let Some(&(next, _)) = d.steps.get(i + 1) {
                w += t(a, s, next).ln();
            }
        }
        ll += w;
    }
    ll / demos.len() as f64
}

pub fn sample_demos(model: &DdcModel, n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<Trajectory> {
    (0..n)
        .map(|_| {
            let mut s = rng.random_range(0..model.n_states());
            let mut steps = vec![];
            for _ in 0..len {
                let a = rng.random_range(0..model.n_actions());
                steps.push((s, a));
                let row = model.transitions().matrix(a).row(s).to_owned();
                let u: f64 = rng.random();
                let mut acc = 0.0;
                s = row
                    .iter()
                    .position(|&p| {
                        acc += p;
                        u < acc
                    })
                    .unwrap_or(model.n_states() - 1);
            }
            Trajectory::new(steps)
        })
        .collect()
}

/// Same dynamics and features, with the start distribution set to the demos' empirical one.
pub fn with_empirical_start(model: &DdcModel, demos: &[Trajectory]) -> DdcModel {
    let mut init = Array1::zeros(model.n_states());
    for d in demos {
        init[d.steps[0].0] += 1.0 / demos.len() as f64;
    }
    DdcModel::new(model.transitions().clone(), model.discount(), model.features().clone(), init, vec![]).unwrap()
}

pub fn finite_difference(model: &DdcModel, theta: &[f64], demos: &[Trajectory], k: usize) -> f64 {
    let h = 1e-5;
    let (mut up, mut dn) = (theta.to_vec(), theta.to_vec());
    up[k] += h;
    dn[k] -= h;
    (enumerated_log_lik(model, &up, demos) - enumerated_log_lik(model, &dn, demos)) / (2.0 * h)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Exact path-model gradient on random stochastic dynamics, |X| ≤ 6, horizon ≤ 4.
pub fn stochastic_path_gradient_error(cases: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let ns = 3 + (case as usize % 4);
        let len = 2 + (case as usize % 3);
        let base = super::random_model(ns, 2, 3, 0.9, 100 + case);
        let demos = sample_demos(&base, 12, len, &mut rng);
        let model = with_empirical_start(&base, &demos);
        let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = path_gradient(&model, &demos, &LinearReward { theta: theta.clone() }).unwrap();
        for k in 0..3 {
            worst = worst.max(rel(g[k], finite_difference(&model, &theta, &demos, k)));
        }
    }
    worst
}

/// The training engine's gradient, demo features minus forward-pass features,
/// on deterministic dynamics where the local-policy pass is exact.
pub fn engine_gradient_error(cases: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let ns = 2 + case as usize % 5;
        let len = 2 + case as usize % 4;
        let base = super::random_deterministic_model(ns, 3, 2, case);
        let demos = sample_demos(&base, 9, len, &mut rng);
        let model = with_empirical_start(&base, &demos);
        let theta: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
        let reward = LinearReward { theta: theta.clone() };
        let pm = path_model(&model, &reward.state_rewards(model.features()), len - 1).unwrap();
        let vis = forward_pass_time_varying(&model, &pm.policies).unwrap();
        let g = feature_expectations_from_demos(&demos, model.features()).unwrap()
            - feature_expectations_from_visitation(&vis, model.features());
        for k in 0..2 {
            worst = worst.max(rel(g[k], finite_difference(&model, &theta, &demos, k)));
        }
    }
    worst
}

/// Backprop through the MLP against central differences, per parameter.
pub fn mlp_gradient_error(cases: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let (ns, d, h) = (5 + case as usize, 2 + case as usize % 3, 3 + case as usize % 4);
        let features = FeatureMatrix::new(Array2::from_shape_fn((ns, d), |_| rng.random_range(-2.0..2.0))).unwrap();
        let mut mlp = MlpReward::init(d, h, case);
        mlp.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        let upstream = Array1::from_shape_fn(ns, |_| rng.random_range(-1.0..1.0));
        let grads = mlp_backward(&mlp, &features, &upstream).unwrap().flatten();
        let mut params = RewardParams::Mlp(mlp);
        let base = params.flatten();
        let mut objective = |p: &[f64]| {
            params.assign(p).unwrap();
            match &params {
                RewardParams::Mlp(m) => mlp_forward(m, &features).unwrap().dot(&upstream),
                RewardParams::Linear(_) => unreachable!(),
            }
        };
        let eps = 1e-6;
        for (i, &g) in grads.iter().enumerate() {
            let mut p = base.clone();
            p[i] += eps;
            let up = objective(&p);
            p[i] -= 2.0 * eps;
            let dn = objective(&p);
            worst = worst.max(rel(g, (up - dn) / (2.0 * eps)));
        }
    }
    worst
}
