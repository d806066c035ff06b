#![allow(dead_code)]

pub mod oracles;

use ccp_irl::model::{DdcModel, FeatureMatrix, TransitionModel};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stochastic_rows(n: usize, m: usize, rng: &mut ChaCha8Rng, sparsity: f64) -> Array2<f64> {
    let mut t = Array2::from_shape_fn((n, m), |_| if rng.random::<f64>() < sparsity { 0.0 } else { rng.random::<f64>() });
    for mut row in t.rows_mut() {
        if row.sum() == 0.0 {
            let j = rng.random_range(0..m);
            row[j] = 1.0;
        }
        let s = row.sum();
        row /= s;
    }
    t
}

/// Goal-free model with random dense-ish dynamics and `d` features in [-1, 1].
pub fn random_model(n: usize, n_actions: usize, d: usize, discount: f64, seed: u64) -> DdcModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_action = (0..n_actions).map(|_| stochastic_rows(n, n, &mut rng, 0.5)).collect();
    let features = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let init = {
        let w = Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.05);
        let s = w.sum();
        w / s
    };
    DdcModel::new(TransitionModel::new(per_action).unwrap(), discount, FeatureMatrix::new(features).unwrap(), init, vec![]).unwrap()
}

pub fn random_rewards(n: usize, n_actions: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, n_actions), |_| rng.random_range(-2.0..2.0))
}

pub fn sup(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).iter().fold(0.0f64, |m, d| m.max(d.abs()))
}

/// Goal-free model whose actions each move to one fixed successor.
pub fn random_deterministic_model(n: usize, n_actions: usize, d: usize, seed: u64) -> DdcModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_action = (0..n_actions)
        .map(|_| {
            let mut t = Array2::zeros((n, n));
            for x in 0..n {
                t[[x, rng.random_range(0..n)]] = 1.0;
            }
            t
        })
        .collect();
    let features = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    DdcModel::new(
        TransitionModel::new(per_action).unwrap(),
        0.9,
        FeatureMatrix::new(features).unwrap(),
        Array1::from_elem(n, 1.0 / n as f64),
        vec![],
    )
    .unwrap()
}
