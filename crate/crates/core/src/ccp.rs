//! Empirical conditional choice probabilities from demonstrations, and the
//! expected-shock correction `ε̃(a|x) = γ − log σ(a|x)` they induce under
//! Gumbel shocks.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CcpTable, Trajectory};
use crate::soft_dp::EULER_GAMMA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingMode {
    /// `(count(x,a) + α) / (count(x) + α|A|)`.
    Additive,
    /// Pure MLE on visited states with zero-count actions floored at the
    /// smallest positive double; unvisited states are uniform.
    UniformFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub mode: SmoothingMode,
    pub alpha: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { mode: SmoothingMode::Additive, alpha: 0.01 }
    }
}

/// Raw `(state, action)` occurrence counts. Merging shards is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts(pub Array2<u64>);

impl PairCounts {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self(Array2::zeros((n_states, n_actions)))
    }

    pub fn from_trajectories(trajectories: &[Trajectory], n_states: usize, n_actions: usize) -> Result<Self> {
        let mut counts = Self::zeros(n_states, n_actions);
        for t in trajectories {
            t.check_indices(n_states, n_actions)?;
            for &(x, a) in &t.steps {
                counts.0[[x, a]] += 1;
            }
        }
        Ok(counts)
    }

    pub fn merge(&mut self, other: &PairCounts) {
        self.0 += &other.0;
    }

    pub fn total(&self) -> u64 {
        self.0.sum()
    }
}

/// Smoothed CCPs from raw counts.
pub fn ccp_from_counts(counts: &PairCounts, smoothing: &SmoothingConfig) -> Result<CcpTable> {
    if counts.total() == 0 {
        return Err(Error::EmptyData);
    }
    let (n_states, n_actions) = counts.0.dim();
    let mut probs = Array2::zeros((n_states, n_actions));
    match smoothing.mode {
        SmoothingMode::Additive => {
            if !(smoothing.alpha > 0.0 && smoothing.alpha.is_finite()) {
                return Err(Error::InvalidSpec(format!("smoothing alpha must be > 0, got {}", smoothing.alpha)));
            }
            let alpha = smoothing.alpha;
            for x in 0..n_states {
                let row_total: u64 = counts.0.row(x).sum();
                let denom = row_total as f64 + alpha * n_actions as f64;
                for a in 0..n_actions {
                    probs[[x, a]] = (counts.0[[x, a]] as f64 + alpha) / denom;
                }
            }
        }
        SmoothingMode::UniformFallback => {
            for x in 0..n_states {
                let row_total: u64 = counts.0.row(x).sum();
                if row_total == 0 {
                    probs.row_mut(x).fill(1.0 / n_actions as f64);
                    continue;
                }
                let mut row: Vec<f64> = (0..n_actions)
                    .map(|a| (counts.0[[x, a]] as f64 / row_total as f64).max(f64::MIN_POSITIVE))
                    .collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= s);
                for (a, p) in row.into_iter().enumerate() {
                    probs[[x, a]] = p;
                }
            }
        }
    }
    Ok(CcpTable { probs, support_counts: counts.0.clone() })
}

/// Counts every `(state, action)` pair in the demonstrations and smooths.
pub fn estimate_ccp(
    trajectories: &[Trajectory],
    n_states: usize,
    n_actions: usize,
    smoothing: &SmoothingConfig,
) -> Result<CcpTable> {
    let counts = PairCounts::from_trajectories(trajectories, n_states, n_actions)?;
    ccp_from_counts(&counts, smoothing)
}

/// `ε̃(a|x) = γ − log σ(a|x)`.
pub fn expected_shock(ccp: &CcpTable) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(ccp.probs.dim());
    for ((x, a), &p) in ccp.probs.indexed_iter() {
        if !(p > 0.0) {
            return Err(Error::NonPositiveProbability { state: x, action: a, value: p });
        }
        out[[x, a]] = EULER_GAMMA - p.ln();
    }
    Ok(out)
}

/// On-disk CCP layout, including counts and smoothing for audits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcpFile {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `n_states × n_actions`.
    pub probs: Vec<f64>,
    pub counts: Vec<u64>,
    pub smoothing: Option<SmoothingConfig>,
}

pub fn write_ccp<W: Write>(writer: W, ccp: &CcpTable, smoothing: Option<SmoothingConfig>) -> Result<()> {
    let file = CcpFile {
        n_states: ccp.n_states(),
        n_actions: ccp.n_actions(),
        probs: ccp.probs.iter().copied().collect(),
        counts: ccp.support_counts.iter().copied().collect(),
        smoothing,
    };
    serde_json::to_writer(writer, &file)?;
    Ok(())
}

pub fn read_ccp<R: Read>(reader: R) -> Result<(CcpTable, Option<SmoothingConfig>)> {
    let file: CcpFile = serde_json::from_reader(reader)?;
    let shape = (file.n_states, file.n_actions);
    let bad = |found| Error::DimensionMismatch { what: "CCP file", expected: shape.0 * shape.1, found };
    let found_p = file.probs.len();
    let found_c = file.counts.len();
    let probs = Array2::from_shape_vec(shape, file.probs).map_err(|_| bad(found_p))?;
    let counts = Array2::from_shape_vec(shape, file.counts).map_err(|_| bad(found_c))?;
    let mut table = CcpTable::from_probs(probs)?;
    table.support_counts = counts;
    Ok((table, file.smoothing))
}
