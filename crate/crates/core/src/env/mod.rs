//! Benchmark environments: fixed-target and macro-cell gridworlds, objectworld.

mod experts;
mod grid;
mod gridworld;
mod objectworld;

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DdcModel;

pub use experts::{agreement, expert_policy, generate_experts, random_trajectories, sample_trajectories, ExpertKind};
pub use grid::{Grid, ACTION_NAMES, MOVES};
pub use gridworld::{build_fixed_target, build_macro_cell, macro_region, GridSpec};
pub use objectworld::{build_from_layout, build_objectworld, place_objects, Object, ObjectLayout, ObjectworldSpec};

/// Ground-truth state reward with a note on how it was generated.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueReward {
    values: Array1<f64>,
    pub provenance: String,
}

impl TrueReward {
    pub fn new(values: Array1<f64>, provenance: String) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("true reward"));
        }
        Ok(Self { values, provenance })
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    /// State rewards broadcast to every action.
    pub fn table(&self, n_actions: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.values.len(), n_actions), |(s, _)| self.values[s])
    }
}

#[derive(Serialize, Deserialize)]
struct TrueRewardFile {
    values: Vec<f64>,
    provenance: String,
}

pub fn write_true_reward<W: Write>(writer: W, truth: &TrueReward) -> Result<()> {
    let file = TrueRewardFile { values: truth.values.to_vec(), provenance: truth.provenance.clone() };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

pub fn read_true_reward<R: Read>(reader: R) -> Result<TrueReward> {
    let raw: TrueRewardFile = serde_json::from_reader(reader)?;
    TrueReward::new(Array1::from(raw.values), raw.provenance)
}

/// Any of the three environments, tagged by `kind` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSpec {
    FixedTarget(GridSpec),
    MacroCell(GridSpec),
    Objectworld(ObjectworldSpec),
}

impl EnvSpec {
    pub fn build(&self) -> Result<(DdcModel, TrueReward)> {
        match self {
            EnvSpec::FixedTarget(s) => build_fixed_target(s),
            EnvSpec::MacroCell(s) => build_macro_cell(s),
            EnvSpec::Objectworld(s) => build_objectworld(s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::FixedTarget(_) => "fixed-target",
            EnvSpec::MacroCell(_) => "macro-cell",
            EnvSpec::Objectworld(_) => "objectworld",
        }
    }

    pub fn side(&self) -> usize {
        match self {
            EnvSpec::FixedTarget(s) | EnvSpec::MacroCell(s) => s.n,
            EnvSpec::Objectworld(s) => s.n,
        }
    }

    pub fn set_side(&mut self, n: usize) {
        match self {
            EnvSpec::FixedTarget(s) | EnvSpec::MacroCell(s) => s.n = n,
            EnvSpec::Objectworld(s) => s.n = n,
        }
    }

    pub fn discount(&self) -> f64 {
        match self {
            EnvSpec::FixedTarget(s) | EnvSpec::MacroCell(s) => s.discount,
            EnvSpec::Objectworld(s) => s.discount,
        }
    }

    pub fn set_discount(&mut self, discount: f64) {
        match self {
            EnvSpec::FixedTarget(s) | EnvSpec::MacroCell(s) => s.discount = discount,
            EnvSpec::Objectworld(s) => s.discount = discount,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            EnvSpec::FixedTarget(s) | EnvSpec::MacroCell(s) => s.seed,
            EnvSpec::Objectworld(s) => s.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            EnvSpec::FixedTarget(s) | EnvSpec::MacroCell(s) => s.seed = seed,
            EnvSpec::Objectworld(s) => s.seed = seed,
        }
    }

    /// Default episode length: `4n` for fixed-target (episodes also stop at
    /// the goal), `n` otherwise.
    pub fn default_traj_length(&self) -> usize {
        match self {
            EnvSpec::FixedTarget(s) => 4 * s.n,
            _ => self.side(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn spec_json_roundtrip() {
        let spec = EnvSpec::MacroCell(GridSpec { n: 16, macro_size: 4, ..Default::default() });
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"macro-cell\""));
        assert_eq!(serde_json::from_str::<EnvSpec>(&text).unwrap(), spec);
        let partial: EnvSpec = serde_json::from_str(r#"{"kind":"objectworld","n":12}"#).unwrap();
        assert_eq!(partial.side(), 12);
        assert_eq!(partial.discount(), 0.9);
    }

    #[test]
    fn all_builders_produce_valid_models() {
        let specs = [
            EnvSpec::FixedTarget(GridSpec { n: 7, seed: 4, ..Default::default() }),
            EnvSpec::MacroCell(GridSpec { n: 8, ..Default::default() }),
            EnvSpec::Objectworld(ObjectworldSpec { n: 6, n_colors: 4, ..Default::default() }),
        ];
        for spec in specs {
            let (m, truth) = spec.build().unwrap();
            assert!(validate_model(&m).is_empty(), "{}", spec.name());
            assert_eq!(truth.values().len(), m.n_states());
            assert!(m.features().values().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn true_reward_roundtrip() {
        let t = TrueReward::new(ndarray::array![1.0, -1.0, 0.0], "test".into()).unwrap();
        let mut buf = Vec::new();
        write_true_reward(&mut buf, &t).unwrap();
        assert_eq!(read_true_reward(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn table_broadcasts_over_actions() {
        let t = TrueReward::new(ndarray::array![2.0, 3.0], "x".into()).unwrap();
        let table = t.table(3);
        assert_eq!(table.shape(), &[2, 3]);
        assert!(table.row(1).iter().all(|&v| v == 3.0));
    }
}
