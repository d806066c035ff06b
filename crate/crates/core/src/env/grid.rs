//! Shared N×N grid geometry and windy dynamics.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::TransitionModel;

/// Compass moves in action order: north, south, east, west.
pub const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];
pub const ACTION_NAMES: [&str; 5] = ["N", "S", "E", "W", "Stay"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n + col
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state / self.n, state % self.n)
    }

    /// Destination of a compass move; moves off the grid stay in place.
    pub fn step(&self, state: usize, mv: (isize, isize)) -> usize {
        let (r, c) = self.coords(state);
        let nr = r as isize + mv.0;
        let nc = c as isize + mv.1;
        if nr < 0 || nc < 0 || nr >= self.n as isize || nc >= self.n as isize {
            state
        } else {
            self.index(nr as usize, nc as usize)
        }
    }

    pub fn manhattan(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    /// Largest possible Manhattan distance on the grid.
    pub fn max_distance(&self) -> usize {
        2 * (self.n - 1)
    }

    /// Windy transition kernels. A move action goes to its intended
    /// neighbour with probability `1 − wind` and to a uniformly random compass
    /// neighbour (possibly the intended one) with probability `wind`. An
    /// optional fifth "stay" action is deterministic. States in `absorbing`
    /// self-loop under every action.
    pub fn windy_transitions(&self, wind: f64, with_stay: bool, absorbing: &[usize]) -> Result<TransitionModel> {
        let n_states = self.n_cells();
        let n_actions = if with_stay { 5 } else { 4 };
        let mut mats = vec![Array2::<f64>::zeros((n_states, n_states)); n_actions];
        for s in 0..n_states {
            for (a, m) in mats.iter_mut().enumerate() {
                if absorbing.contains(&s) || a == 4 {
                    m[[s, s]] = 1.0;
                    continue;
                }
                m[[s, self.step(s, MOVES[a])]] += 1.0 - wind;
                for &mv in &MOVES {
                    m[[s, self.step(s, mv)]] += wind / 4.0;
                }
            }
        }
        TransitionModel::new(mats)
    }
}

pub(crate) fn check_grid_common(n: usize, wind: f64, discount: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSpec("n: grid side must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&wind) {
        return Err(Error::InvalidSpec(format!("wind: must lie in [0, 1), got {wind}")));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::InvalidSpec(format!("discount: must lie in [0, 1), got {discount}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_interior_move() {
        let g = Grid { n: 3 };
        let t = g.windy_transitions(0.0, false, &[]).unwrap();
        let centre = g.index(1, 1);
        assert_eq!(t.matrix(0)[[centre, g.index(0, 1)]], 1.0);
    }

    #[test]
    fn corner_into_wall_enumerates_slips() {
        // Top-left corner, action north: the intended move and the north/west
        // slips are clamped back to the corner.
        let g = Grid { n: 4 };
        let p = 0.3;
        let t = g.windy_transitions(p, false, &[]).unwrap();
        let corner = g.index(0, 0);
        let mut want_self = 0.0;
        want_self += 1.0 - p;
        for mv in MOVES {
            if g.step(corner, mv) == corner {
                want_self += p / 4.0;
            }
        }
        let got = t.matrix(0)[[corner, corner]];
        assert!((got - want_self).abs() < 1e-15);
        assert!((got - 0.85).abs() < 1e-12);
        assert!(got >= 0.7);
    }

    #[test]
    fn rows_sum_to_one_with_stay() {
        let g = Grid { n: 5 };
        let t = g.windy_transitions(0.3, true, &[7]).unwrap();
        for a in 0..5 {
            for row in t.matrix(a).rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
            assert_eq!(t.matrix(a)[[7, 7]], 1.0);
        }
        assert_eq!(t.matrix(4)[[3, 3]], 1.0);
    }
}
