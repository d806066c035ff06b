//! Fixed-target and macro-cell gridworlds.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{check_grid_common, Grid};
use super::TrueReward;
use crate::error::{Error, Result};
use crate::model::{DdcModel, FeatureMatrix};

const MAX_LAYOUT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub n: usize,
    /// Slip probability.
    pub wind: f64,
    /// Fraction of cells holding obstacles (fixed target only).
    pub obstacle_density: f64,
    /// `(row, col)`; drawn from the seed when absent (fixed target only).
    pub target: Option<(usize, usize)>,
    /// Explicit obstacle cells, overriding `obstacle_density`.
    pub obstacles: Option<Vec<(usize, usize)>>,
    /// Region side length (macro cells only).
    pub macro_size: usize,
    pub discount: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 8,
            wind: 0.3,
            obstacle_density: 0.1,
            target: None,
            obstacles: None,
            macro_size: 2,
            discount: 0.9,
            seed: 0,
        }
    }
}

/// Every free cell reaches the target through free cells.
fn target_reachable(grid: &Grid, target: usize, blocked: &[bool]) -> bool {
    let mut seen = vec![false; grid.n_cells()];
    let mut queue = VecDeque::from([target]);
    seen[target] = true;
    while let Some(s) = queue.pop_front() {
        for mv in super::grid::MOVES {
            let t = grid.step(s, mv);
            if !seen[t] && !blocked[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    (0..grid.n_cells()).all(|s| blocked[s] || seen[s])
}

/// Navigation to a single absorbing target with obstacle penalties.
///
/// Rewards are `+1` at the target, `−1` on obstacles and `0` elsewhere.
/// Features per cell are the negated Manhattan distance to the target
/// (normalized by the grid diameter) and an obstacle indicator.
pub fn build_fixed_target(spec: &GridSpec) -> Result<(DdcModel, TrueReward)> {
    check_grid_common(spec.n, spec.wind, spec.discount)?;
    if !(0.0..1.0).contains(&spec.obstacle_density) {
        return Err(Error::InvalidSpec(format!(
            "obstacle_density: must lie in [0, 1), got {}",
            spec.obstacle_density
        )));
    }
    let grid = Grid { n: spec.n };
    let cells = grid.n_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let target = match spec.target {
        Some((r, c)) if r < spec.n && c < spec.n => grid.index(r, c),
        Some((r, c)) => return Err(Error::InvalidSpec(format!("target: ({r}, {c}) lies outside the grid"))),
        None => rng.random_range(0..cells),
    };

    let mut blocked = vec![false; cells];
    match &spec.obstacles {
        Some(list) => {
            for &(r, c) in list {
                if r >= spec.n || c >= spec.n {
                    return Err(Error::InvalidSpec(format!("obstacles: ({r}, {c}) lies outside the grid")));
                }
                blocked[grid.index(r, c)] = true;
            }
            if blocked[target] {
                return Err(Error::InvalidSpec("target: placed on an obstacle".into()));
            }
        }
        None => {
            let count = ((spec.obstacle_density * cells as f64).round() as usize).min(cells - 1);
            let mut placed = false;
            for _ in 0..MAX_LAYOUT_ATTEMPTS {
                blocked.iter_mut().for_each(|b| *b = false);
                for i in sample(&mut rng, cells - 1, count) {
                    // Skip over the target index.
                    blocked[if i >= target { i + 1 } else { i }] = true;
                }
                if target_reachable(&grid, target, &blocked) {
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::InvalidSpec(
                    "obstacle_density: could not place obstacles leaving the target reachable".into(),
                ));
            }
        }
    }

    let transitions = grid.windy_transitions(spec.wind, false, &[target])?;
    let diameter = grid.max_distance().max(1) as f64;
    let features = Array2::from_shape_fn((cells, 2), |(s, k)| match k {
        0 => -(grid.manhattan(s, target) as f64) / diameter,
        _ => f64::from(u8::from(blocked[s])),
    });
    let rewards = Array1::from_shape_fn(cells, |s| {
        if s == target {
            1.0
        } else if blocked[s] {
            -1.0
        } else {
            0.0
        }
    });
    let starts: Vec<usize> = (0..cells).filter(|&s| s != target && !blocked[s]).collect();
    let initial = if starts.is_empty() {
        Array1::from_elem(cells, 1.0 / cells as f64)
    } else {
        let mut d = Array1::zeros(cells);
        for &s in &starts {
            d[s] = 1.0 / starts.len() as f64;
        }
        d
    };
    let model = DdcModel::new(transitions, spec.discount, FeatureMatrix::new(features)?, initial, vec![target])?;
    let (tr, tc) = grid.coords(target);
    let n_obstacles = blocked.iter().filter(|&&b| b).count();
    let truth = TrueReward::new(
        rewards,
        format!(
            "fixed-target n={} target=({tr},{tc}) obstacles={n_obstacles} wind={} seed={}",
            spec.n, spec.wind, spec.seed
        ),
    )?;
    Ok((model, truth))
}

/// Region index of a cell in a macro-cell grid.
pub fn macro_region(grid: &Grid, macro_size: usize, state: usize) -> usize {
    let (r, c) = grid.coords(state);
    let per_side = grid.n / macro_size;
    (r / macro_size) * per_side + c / macro_size
}

/// Grid split into square regions sharing one reward: with probability 0.1 a
/// region draws a reward uniformly in (0, 1), otherwise its reward is 0.
/// Features are one-hot region encodings. Episodes are fixed-length, so there
/// are no goal states.
pub fn build_macro_cell(spec: &GridSpec) -> Result<(DdcModel, TrueReward)> {
    check_grid_common(spec.n, spec.wind, spec.discount)?;
    if spec.macro_size == 0 || spec.n % spec.macro_size != 0 {
        return Err(Error::InvalidSpec(format!(
            "macro_size: {} must be positive and divide n = {}",
            spec.macro_size, spec.n
        )));
    }
    let grid = Grid { n: spec.n };
    let cells = grid.n_cells();
    let per_side = spec.n / spec.macro_size;
    let n_regions = per_side * per_side;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let region_rewards: Vec<f64> = (0..n_regions)
        .map(|_| {
            if rng.random::<f64>() < 0.1 {
                // Open interval (0, 1).
                loop {
                    let r = rng.random::<f64>();
                    if r > 0.0 {
                        break r;
                    }
                }
            } else {
                0.0
            }
        })
        .collect();
    let transitions = grid.windy_transitions(spec.wind, false, &[])?;
    let mut features = Array2::zeros((cells, n_regions));
    let mut rewards = Array1::zeros(cells);
    for s in 0..cells {
        let region = macro_region(&grid, spec.macro_size, s);
        features[[s, region]] = 1.0;
        rewards[s] = region_rewards[region];
    }
    let initial = Array1::from_elem(cells, 1.0 / cells as f64);
    let model = DdcModel::new(transitions, spec.discount, FeatureMatrix::new(features)?, initial, vec![])?;
    let positive = region_rewards.iter().filter(|&&r| r > 0.0).count();
    let truth = TrueReward::new(
        rewards,
        format!(
            "macro-cell n={} macro={} positive_regions={positive}/{n_regions} wind={} seed={}",
            spec.n, spec.macro_size, spec.wind, spec.seed
        ),
    )?;
    Ok((model, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn fixed_target_layout() {
        let spec = GridSpec { n: 8, seed: 7, ..Default::default() };
        let (m, truth) = build_fixed_target(&spec).unwrap();
        assert_eq!((m.n_states(), m.n_actions()), (64, 4));
        assert!(validate_model(&m).is_empty());
        assert_eq!(m.goal_states().len(), 1);
        let target = m.goal_states()[0];
        assert_eq!(truth.values()[target], 1.0);
        for a in 0..4 {
            assert_eq!(m.transitions().matrix(a)[[target, target]], 1.0);
        }
        let obstacles = truth.values().iter().filter(|&&r| r == -1.0).count();
        assert_eq!(obstacles, 6);
        assert_eq!(m.features().row(target)[0], 0.0);
        assert_eq!(m.initial_dist()[target], 0.0);
        assert!((m.initial_dist().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_target_on_obstacle_is_rejected() {
        let spec = GridSpec { n: 4, target: Some((1, 1)), obstacles: Some(vec![(1, 1)]), ..Default::default() };
        let err = build_fixed_target(&spec).unwrap_err();
        assert!(err.to_string().contains("target"));
    }

    #[test]
    fn fixed_target_is_seed_deterministic() {
        let spec = GridSpec { n: 6, seed: 3, ..Default::default() };
        let (a, ta) = build_fixed_target(&spec).unwrap();
        let (b, tb) = build_fixed_target(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn macro_feature_dimension() {
        let spec = GridSpec { n: 16, macro_size: 2, ..Default::default() };
        let (m, _) = build_macro_cell(&spec).unwrap();
        assert_eq!(m.features().feature_dim(), 64);
        assert!(m.goal_states().is_empty());
        assert!(validate_model(&m).is_empty());
    }

    #[test]
    fn macro_regions_share_features_and_reward() {
        let spec = GridSpec { n: 8, macro_size: 4, seed: 12, ..Default::default() };
        let (m, truth) = build_macro_cell(&spec).unwrap();
        let grid = Grid { n: 8 };
        for s in 0..64 {
            for t in 0..64 {
                if macro_region(&grid, 4, s) == macro_region(&grid, 4, t) {
                    assert_eq!(m.features().row(s), m.features().row(t));
                    assert_eq!(truth.values()[s], truth.values()[t]);
                }
            }
        }
    }

    #[test]
    fn macro_size_must_divide() {
        let spec = GridSpec { n: 10, macro_size: 3, ..Default::default() };
        assert!(build_macro_cell(&spec).unwrap_err().to_string().contains("macro_size"));
    }

    #[test]
    fn positive_region_rate_matches_binomial() {
        // 16 regions per draw, success probability 0.1: mean 1.6, sd of the
        // mean over 200 seeds ≈ sqrt(16·0.09/200) ≈ 0.085.
        let grid = Grid { n: 8 };
        let mut total = 0usize;
        for seed in 0..200 {
            let spec = GridSpec { n: 8, macro_size: 2, seed, ..Default::default() };
            let (_, truth) = build_macro_cell(&spec).unwrap();
            let mut seen = [false; 16];
            for s in 0..64 {
                let r = macro_region(&grid, 2, s);
                if truth.values()[s] > 0.0 && !seen[r] {
                    seen[r] = true;
                    total += 1;
                }
            }
        }
        let mean = total as f64 / 200.0;
        assert!((mean - 1.6).abs() < 4.0 * 0.085, "mean positive regions {mean}");
    }
}
