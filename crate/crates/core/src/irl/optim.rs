//! First-order optimizers. Both ascend: parameters move along `+grad`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub timestep: u64,
}

impl AdamState {
    pub fn new(n_params: usize, step_size: f64) -> Self {
        Self {
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            timestep: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    let n = params.len();
    for found in [grads.len(), state.first_moment.len(), state.second_moment.len()] {
        if found != n {
            return Err(Error::DimensionMismatch { what: "adam parameter vector", expected: n, found });
        }
    }
    state.timestep += 1;
    let t = state.timestep as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..n {
        let g = grads[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        params[i] += state.step_size * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Optimizer choice as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerConfig {
    GradientAscent { step: f64 },
    Adam { step_size: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::GradientAscent { step: 0.1 }
    }
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        OptimizerConfig::Adam { step_size: 1e-3 }
    }

    pub fn start(&self, n_params: usize) -> OptimizerState {
        match *self {
            OptimizerConfig::GradientAscent { step } => OptimizerState::GradientAscent { step },
            OptimizerConfig::Adam { step_size } => OptimizerState::Adam(AdamState::new(n_params, step_size)),
        }
    }
}

/// Optimizer plus whatever running state it keeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerState {
    GradientAscent { step: f64 },
    Adam(AdamState),
}

impl OptimizerState {
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            OptimizerState::GradientAscent { step } => {
                if grads.len() != params.len() {
                    return Err(Error::DimensionMismatch {
                        what: "gradient length",
                        expected: params.len(),
                        found: grads.len(),
                    });
                }
                for (p, g) in params.iter_mut().zip(grads) {
                    *p += *step * g;
                }
                Ok(())
            }
            OptimizerState::Adam(state) => adam_step(state, params, grads),
        }
    }
}
