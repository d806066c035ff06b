//! Reward parameterizations: linear in features, or a two-layer ReLU network.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::OptimizerConfig;
use crate::error::{Error, Result};
use crate::model::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReward {
    pub theta: Vec<f64>,
}

impl LinearReward {
    pub fn zeros(feature_dim: usize) -> Self {
        Self { theta: vec![0.0; feature_dim] }
    }

    pub fn state_rewards(&self, features: &FeatureMatrix) -> Array1<f64> {
        features.values().dot(&ndarray::ArrayView1::from(&self.theta))
    }
}

/// `r(x) = w2ᵀ relu(w1ᵀ f(x) + b1) + b2`. `w1` is stored row-major with shape
/// `input_dim × hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpReward {
    pub input_dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Gradients with the same layout as [`MlpReward`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpReward {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self { input_dim, hidden, w1: vec![0.0; input_dim * hidden], b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w1 = (0..input_dim * hidden).map(|_| rng.random_range(-l1..=l1)).collect();
        let w2 = (0..hidden).map(|_| rng.random_range(-l2..=l2)).collect();
        Self { input_dim, hidden, w1, b1: vec![0.0; hidden], w2, b2: 0.0 }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    fn check(&self, features: &FeatureMatrix) -> Result<()> {
        if features.feature_dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "mlp input width",
                expected: self.input_dim,
                found: features.feature_dim(),
            });
        }
        Ok(())
    }

    fn pre_activation(&self, f: ndarray::ArrayView1<f64>, out: &mut [f64]) {
        out.copy_from_slice(&self.b1);
        for (i, &fi) in f.iter().enumerate() {
            if fi != 0.0 {
                let row = &self.w1[i * self.hidden..(i + 1) * self.hidden];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += fi * w;
                }
            }
        }
    }
}

pub fn mlp_forward(mlp: &MlpReward, features: &FeatureMatrix) -> Result<Array1<f64>> {
    mlp.check(features)?;
    let mut z = vec![0.0; mlp.hidden];
    let out = (0..features.n_states())
        .map(|s| {
            mlp.pre_activation(features.row(s), &mut z);
            mlp.b2 + z.iter().zip(&mlp.w2).map(|(&zi, w)| zi.max(0.0) * w).sum::<f64>()
        })
        .collect();
    Ok(out)
}

/// Gradients of `Σ_x upstream(x) · r(x)` with respect to every parameter.
/// The ReLU derivative at exactly zero is taken as zero.
pub fn mlp_backward(mlp: &MlpReward, features: &FeatureMatrix, upstream: &Array1<f64>) -> Result<MlpGradients> {
    mlp.check(features)?;
    if upstream.len() != features.n_states() {
        return Err(Error::DimensionMismatch { what: "mlp upstream", expected: features.n_states(), found: upstream.len() });
    }
    if upstream.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite("mlp upstream gradient"));
    }
    let h = mlp.hidden;
    let mut g = MlpGradients { w1: vec![0.0; mlp.w1.len()], b1: vec![0.0; h], w2: vec![0.0; h], b2: 0.0 };
    let mut z = vec![0.0; h];
    let mut dz = vec![0.0; h];
    for s in 0..features.n_states() {
        let u = upstream[s];
        if u == 0.0 {
            continue;
        }
        let f = features.row(s);
        mlp.pre_activation(f, &mut z);
        g.b2 += u;
        for j in 0..h {
            let active = z[j] > 0.0;
            g.w2[j] += u * z[j].max(0.0);
            dz[j] = if active { u * mlp.w2[j] } else { 0.0 };
            g.b1[j] += dz[j];
        }
        for (i, &fi) in f.iter().enumerate() {
            if fi != 0.0 {
                let row = &mut g.w1[i * h..(i + 1) * h];
                for (gw, d) in row.iter_mut().zip(&dz) {
                    *gw += fi * d;
                }
            }
        }
    }
    Ok(g)
}

impl MlpGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.b1.len() + 1);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }
}

/// Either reward model, tagged by `kind` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardParams {
    Linear(LinearReward),
    Mlp(MlpReward),
}

impl RewardParams {
    pub fn state_rewards(&self, features: &FeatureMatrix) -> Result<Array1<f64>> {
        match self {
            RewardParams::Linear(l) => {
                if l.theta.len() != features.feature_dim() {
                    return Err(Error::DimensionMismatch {
                        what: "linear reward weights",
                        expected: features.feature_dim(),
                        found: l.theta.len(),
                    });
                }
                Ok(l.state_rewards(features))
            }
            RewardParams::Mlp(m) => mlp_forward(m, features),
        }
    }

    /// State rewards broadcast to an `|X| × |A|` table.
    pub fn reward_table(&self, features: &FeatureMatrix, n_actions: usize) -> Result<Array2<f64>> {
        let r = self.state_rewards(features)?;
        Ok(Array2::from_shape_fn((r.len(), n_actions), |(s, _)| r[s]))
    }

    /// Parameter gradient of `Σ_x upstream(x) r(x)`, flattened.
    pub fn backward(&self, features: &FeatureMatrix, upstream: &Array1<f64>) -> Result<Vec<f64>> {
        match self {
            RewardParams::Linear(_) => Ok(features.values().t().dot(upstream).to_vec()),
            RewardParams::Mlp(m) => Ok(mlp_backward(m, features, upstream)?.flatten()),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            RewardParams::Linear(l) => l.theta.clone(),
            RewardParams::Mlp(m) => {
                let mut v = Vec::with_capacity(m.n_params());
                v.extend_from_slice(&m.w1);
                v.extend_from_slice(&m.b1);
                v.extend_from_slice(&m.w2);
                v.push(m.b2);
                v
            }
        }
    }

    /// Replaces all parameters from a flat vector produced by [`flatten`](Self::flatten).
    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.n_params();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch { what: "flat reward parameters", expected, found: flat.len() });
        }
        match self {
            RewardParams::Linear(l) => l.theta.copy_from_slice(flat),
            RewardParams::Mlp(m) => {
                let (a, rest) = flat.split_at(m.w1.len());
                let (b, rest) = rest.split_at(m.hidden);
                let (c, d) = rest.split_at(m.hidden);
                m.w1.copy_from_slice(a);
                m.b1.copy_from_slice(b);
                m.w2.copy_from_slice(c);
                m.b2 = d[0];
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        match self {
            RewardParams::Linear(l) => l.theta.len(),
            RewardParams::Mlp(m) => m.n_params(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Which reward family to fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardModel {
    #[default]
    Linear,
    Mlp,
}

impl RewardModel {
    /// Starting parameters: zeros for linear, Glorot draws for the MLP.
    pub fn init(self, feature_dim: usize, hidden: usize, seed: u64) -> RewardParams {
        match self {
            RewardModel::Linear => RewardParams::Linear(LinearReward::zeros(feature_dim)),
            RewardModel::Mlp => RewardParams::Mlp(MlpReward::init(feature_dim, hidden, seed)),
        }
    }

    /// Plain ascent at 0.1 for linear rewards, Adam at 1e-3 for the MLP.
    pub fn default_optimizer(self) -> OptimizerConfig {
        match self {
            RewardModel::Linear => OptimizerConfig::default(),
            RewardModel::Mlp => OptimizerConfig::adam(),
        }
    }
}

impl std::str::FromStr for RewardModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(RewardModel::Linear),
            "mlp" => Ok(RewardModel::Mlp),
            other => Err(Error::InvalidSpec(format!("reward_model: expected linear or mlp, got {other}"))),
        }
    }
}
