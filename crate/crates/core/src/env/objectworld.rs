//! Objectworld: colored objects on a windy grid with a non-linear reward.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{check_grid_common, Grid};
use super::TrueReward;
use crate::error::{Error, Result};
use crate::model::{DdcModel, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectworldSpec {
    pub n: usize,
    pub n_colors: usize,
    /// Defaults to `⌊n²/10⌋` when absent.
    pub n_objects: Option<usize>,
    pub wind: f64,
    pub discount: f64,
    pub seed: u64,
}

impl Default for ObjectworldSpec {
    fn default() -> Self {
        Self { n: 8, n_colors: 2, n_objects: None, wind: 0.3, discount: 0.9, seed: 0 }
    }
}

impl ObjectworldSpec {
    pub fn object_count(&self) -> usize {
        self.n_objects.unwrap_or(self.n * self.n / 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Object {
    pub cell: usize,
    pub inner: usize,
    pub outer: usize,
}

/// Placed objects, kept alongside the model so rewards can be re-derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectLayout {
    pub n: usize,
    pub n_colors: usize,
    pub objects: Vec<Object>,
}

impl ObjectLayout {
    /// Manhattan distance from `state` to the nearest object whose chosen
    /// color equals `color`; the grid diameter when there is none.
    pub fn nearest(&self, state: usize, color: usize, outer: bool) -> usize {
        let grid = Grid { n: self.n };
        self.objects
            .iter()
            .filter(|o| if outer { o.outer == color } else { o.inner == color })
            .map(|o| grid.manhattan(state, o.cell))
            .min()
            .unwrap_or(grid.max_distance())
    }

    /// Features `[inner_0, outer_0, inner_1, outer_1, ...]`.
    pub fn features(&self) -> Array2<f64> {
        let cells = self.n * self.n;
        Array2::from_shape_fn((cells, 2 * self.n_colors), |(s, k)| {
            self.nearest(s, k / 2, k % 2 == 1) as f64
        })
    }

    /// +1 within 3 of outer color 0 and within 2 of outer color 1,
    /// −1 within 3 of outer color 0 only, else 0.
    pub fn reward(&self, state: usize) -> f64 {
        let near0 = self.nearest(state, 0, true) <= 3;
        let near1 = self.nearest(state, 1, true) <= 2;
        match (near0, near1) {
            (true, true) => 1.0,
            (true, false) => -1.0,
            _ => 0.0,
        }
    }
}

pub fn place_objects(spec: &ObjectworldSpec) -> Result<ObjectLayout> {
    check_grid_common(spec.n, spec.wind, spec.discount)?;
    if spec.n_colors < 2 {
        return Err(Error::InvalidSpec(format!("n_colors: need at least 2, got {}", spec.n_colors)));
    }
    let cells = spec.n * spec.n;
    let count = spec.object_count();
    if count > cells {
        return Err(Error::InvalidSpec(format!("n_objects: {count} exceeds the {cells} grid cells")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen = sample(&mut rng, cells, count).into_vec();
    chosen.sort_unstable();
    let objects = chosen
        .into_iter()
        .map(|cell| Object {
            cell,
            inner: rng.random_range(0..spec.n_colors),
            outer: rng.random_range(0..spec.n_colors),
        })
        .collect();
    Ok(ObjectLayout { n: spec.n, n_colors: spec.n_colors, objects })
}

/// Builds the objectworld model from a fresh layout.
pub fn build_objectworld(spec: &ObjectworldSpec) -> Result<(DdcModel, TrueReward)> {
    let layout = place_objects(spec)?;
    build_from_layout(&layout, spec.wind, spec.discount, spec.seed)
}

pub fn build_from_layout(layout: &ObjectLayout, wind: f64, discount: f64, seed: u64) -> Result<(DdcModel, TrueReward)> {
    let grid = Grid { n: layout.n };
    let cells = grid.n_cells();
    let transitions = grid.windy_transitions(wind, true, &[])?;
    let features = FeatureMatrix::new(layout.features())?;
    let rewards = Array1::from_shape_fn(cells, |s| layout.reward(s));
    let initial = Array1::from_elem(cells, 1.0 / cells as f64);
    let model = DdcModel::new(transitions, discount, features, initial, vec![])?;
    let positive = rewards.iter().filter(|&&r| r > 0.0).count();
    let negative = rewards.iter().filter(|&&r| r < 0.0).count();
    let truth = TrueReward::new(
        rewards,
        format!(
            "objectworld n={} colors={} objects={} positive={positive} negative={negative} wind={wind} seed={seed}",
            layout.n,
            layout.n_colors,
            layout.objects.len()
        ),
    )?;
    Ok((model, truth))
}
