//! Dynamic discrete choice model: states, actions, per-action transition
//! kernels, discount, state features, start distribution and goal states.
//!
//! States and actions are dense indices `0..n_states` and `0..n_actions`.
//! Shocks are fixed to the type-1 extreme value (Gumbel) family, which is why
//! no shock distribution appears here: it enters the solvers only through
//! Euler's constant and the log-form of the expected-shock correction.

use std::fmt;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const STOCHASTIC_TOL: f64 = 1e-9;

/// Per-action row-stochastic matrices; entry `(i, j)` of matrix `a` is
/// `T(x_j | x_i, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    per_action: Vec<Array2<f64>>,
}

impl TransitionModel {
    pub fn new(per_action: Vec<Array2<f64>>) -> Result<Self> {
        let n = per_action.first().map(|m| m.nrows()).ok_or(Error::DimensionMismatch {
            what: "transition model action count",
            expected: 1,
            found: 0,
        })?;
        for m in &per_action {
            for found in [m.nrows(), m.ncols()] {
                if found != n {
                    return Err(Error::DimensionMismatch {
                        what: "transition matrix shape",
                        expected: n,
                        found,
                    });
                }
            }
        }
        // Kernels assume standard row-major layout.
        let per_action = per_action
            .into_iter()
            .map(|m| if m.is_standard_layout() { m } else { m.as_standard_layout().into_owned() })
            .collect();
        Ok(Self { per_action })
    }

    pub fn n_states(&self) -> usize {
        self.per_action[0].nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.per_action.len()
    }

    pub fn matrix(&self, action: usize) -> ArrayView2<'_, f64> {
        self.per_action[action].view()
    }

    /// `T(a) · v`.
    pub fn apply(&self, action: usize, v: ArrayView1<f64>) -> Array1<f64> {
        linalg::matvec(self.per_action[action].view(), v)
    }

    pub(crate) fn apply_into(&self, action: usize, v: ArrayView1<f64>, out: &mut [f64]) {
        linalg::matvec_into(self.per_action[action].view(), v, out);
    }

    /// Policy-weighted transition matrix `Σ_a diag(w(·, a)) T(a)`.
    pub fn policy_matrix(&self, weights: ArrayView2<f64>) -> Array2<f64> {
        let n = self.n_states();
        let mut f = Array2::<f64>::zeros((n, n));
        for (a, t) in self.per_action.iter().enumerate() {
            for (i, mut row) in f.rows_mut().into_iter().enumerate() {
                let w = weights[[i, a]];
                if w != 0.0 {
                    row.scaled_add(w, &t.row(i));
                }
            }
        }
        f
    }

    /// One step of occupancy propagation: `out[x] = Σ_{x',a} T(x | x', a) w(x', a)`.
    pub fn propagate(&self, weights: ArrayView2<f64>) -> Array1<f64> {
        let mut out = vec![0.0; self.n_states()];
        for (a, t) in self.per_action.iter().enumerate() {
            linalg::add_vecmat(&mut out, weights.column(a), t.view());
        }
        Array1::from(out)
    }
}

/// State features, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self { values: values.as_standard_layout().into_owned() })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_states(&self) -> usize {
        self.values.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, state: usize) -> ArrayView1<'_, f64> {
        self.values.row(state)
    }

    /// `Σ_x weights(x) f(x)`.
    pub fn weighted_sum(&self, weights: ArrayView1<f64>) -> Array1<f64> {
        self.values.t().dot(&weights)
    }
}

/// A complete dynamic discrete choice model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DdcModel {
    transitions: TransitionModel,
    discount: f64,
    features: FeatureMatrix,
    initial_dist: Array1<f64>,
    goal_states: Vec<usize>,
}

impl DdcModel {
    /// Checks shapes and index ranges only; value-level invariants are
    /// reported by [`validate_model`].
    pub fn new(
        transitions: TransitionModel,
        discount: f64,
        features: FeatureMatrix,
        initial_dist: Array1<f64>,
        mut goal_states: Vec<usize>,
    ) -> Result<Self> {
        let n = transitions.n_states();
        if features.n_states() != n {
            return Err(Error::DimensionMismatch {
                what: "feature rows",
                expected: n,
                found: features.n_states(),
            });
        }
        if initial_dist.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial distribution",
                expected: n,
                found: initial_dist.len(),
            });
        }
        goal_states.sort_unstable();
        goal_states.dedup();
        if let Some(&g) = goal_states.iter().find(|&&g| g >= n) {
            return Err(Error::IndexOutOfRange { what: "goal state", index: g, bound: n });
        }
        Ok(Self { transitions, discount, features, initial_dist, goal_states })
    }

    pub fn n_states(&self) -> usize {
        self.transitions.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.n_actions()
    }

    pub fn transitions(&self) -> &TransitionModel {
        &self.transitions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn initial_dist(&self) -> &Array1<f64> {
        &self.initial_dist
    }

    pub fn goal_states(&self) -> &[usize] {
        &self.goal_states
    }

    pub fn is_goal(&self, state: usize) -> bool {
        self.goal_states.binary_search(&state).is_ok()
    }

    /// Same model with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Self {
        Self { discount, ..self.clone() }
    }

    pub(crate) fn check_table(&self, what: &'static str, table: &Array2<f64>) -> Result<()> {
        let (r, c) = table.dim();
        if r != self.n_states() {
            return Err(Error::DimensionMismatch { what, expected: self.n_states(), found: r });
        }
        if c != self.n_actions() {
            return Err(Error::DimensionMismatch { what, expected: self.n_actions(), found: c });
        }
        Ok(())
    }

    pub(crate) fn check_vector(&self, what: &'static str, v: &Array1<f64>) -> Result<()> {
        if v.len() != self.n_states() {
            return Err(Error::DimensionMismatch { what, expected: self.n_states(), found: v.len() });
        }
        Ok(())
    }
}

/// A violated model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelIssue {
    RowNotStochastic { action: usize, state: usize, sum: f64 },
    EntryOutOfRange { action: usize, state: usize, next: usize, value: f64 },
    DiscountOutOfRange { discount: f64 },
    InitialDistNotNormalized { sum: f64 },
    InitialDistNegative { state: usize, value: f64 },
}

impl fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelIssue::RowNotStochastic { action, state, sum } => {
                write!(f, "transition row for action {action}, state {state} sums to {sum}")
            }
            ModelIssue::EntryOutOfRange { action, state, next, value } => write!(
                f,
                "transition entry T({next} | {state}, {action}) = {value} outside [0, 1]"
            ),
            ModelIssue::DiscountOutOfRange { discount } => write!(
                f,
                "discount {discount} outside [0, 1); the Hotz-Miller system is not invertible"
            ),
            ModelIssue::InitialDistNotNormalized { sum } => {
                write!(f, "initial distribution sums to {sum}")
            }
            ModelIssue::InitialDistNegative { state, value } => {
                write!(f, "initial distribution has negative mass {value} at state {state}")
            }
        }
    }
}

/// Lists every violated invariant; empty iff the model is well formed.
pub fn validate_model(model: &DdcModel) -> Vec<ModelIssue> {
    let mut issues = Vec::new();
    for action in 0..model.n_actions() {
        let t = model.transitions.matrix(action);
        for (state, row) in t.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for (next, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    issues.push(ModelIssue::EntryOutOfRange { action, state, next, value });
                }
                sum += value;
            }
            if !((sum - 1.0).abs() <= STOCHASTIC_TOL) {
                issues.push(ModelIssue::RowNotStochastic { action, state, sum });
            }
        }
    }
    if !(0.0..1.0).contains(&model.discount) {
        issues.push(ModelIssue::DiscountOutOfRange { discount: model.discount });
    }
    for (state, &value) in model.initial_dist.iter().enumerate() {
        if !(value >= 0.0) {
            issues.push(ModelIssue::InitialDistNegative { state, value });
        }
    }
    let sum = model.initial_dist.sum();
    if !((sum - 1.0).abs() <= STOCHASTIC_TOL) {
        issues.push(ModelIssue::InitialDistNotNormalized { sum });
    }
    issues
}

/// Errors with every violated invariant if the model is malformed.
pub fn ensure_valid(model: &DdcModel) -> Result<()> {
    let issues = validate_model(model);
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(issues.iter().map(ToString::to_string).collect()))
    }
}

/// Ex-ante (shock-integrated) value function, one entry per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExAnteValue(pub Array1<f64>);

impl ExAnteValue {
    pub fn zeros(n_states: usize) -> Self {
        Self(Array1::zeros(n_states))
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// `E[V̄(x') | x, a]` for every state: the product `T(a) · V̄`.
pub fn expected_next_value(model: &DdcModel, vbar: &ExAnteValue, action: usize) -> Result<Array1<f64>> {
    model.check_vector("ex-ante value", &vbar.0)?;
    if action >= model.n_actions() {
        return Err(Error::IndexOutOfRange { what: "action", index: action, bound: model.n_actions() });
    }
    if !vbar.is_finite() {
        return Err(Error::NonFinite("ex-ante value"));
    }
    Ok(model.transitions.apply(action, vbar.0.view()))
}

/// Stationary stochastic policy `π(a | x)`, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPolicy {
    probs: Array2<f64>,
}

impl SoftPolicy {
    /// Wraps a row-stochastic matrix, checking rows sum to one within 1e-9.
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (x, row) in probs.rows().into_iter().enumerate() {
            let s = row.sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidSpec(format!("policy row {x} is not a distribution (sum {s})")));
            }
        }
        Ok(Self { probs })
    }

    pub(crate) fn from_normalized(probs: Array2<f64>) -> Self {
        Self { probs }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64) }
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[[state, action]]
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }
}

/// A demonstrated sequence of `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn new(steps: Vec<(usize, usize)>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn check_indices(&self, n_states: usize, n_actions: usize) -> Result<()> {
        for &(s, a) in &self.steps {
            if s >= n_states {
                return Err(Error::IndexOutOfRange { what: "trajectory state", index: s, bound: n_states });
            }
            if a >= n_actions {
                return Err(Error::IndexOutOfRange { what: "trajectory action", index: a, bound: n_actions });
            }
        }
        Ok(())
    }
}

/// Writes trajectories as a JSON array of arrays of `[state, action]` pairs.
pub fn write_trajectories<W: Write>(writer: W, trajectories: &[Trajectory]) -> Result<()> {
    serde_json::to_writer(writer, trajectories)?;
    Ok(())
}

pub fn read_trajectories<R: Read>(reader: R) -> Result<Vec<Trajectory>> {
    Ok(serde_json::from_reader(reader)?)
}

/// Conditional choice probabilities `σ(a | x)` with the raw counts they were
/// estimated from.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpTable {
    pub(crate) probs: Array2<f64>,
    pub(crate) support_counts: Array2<u64>,
}

impl CcpTable {
    /// Builds a table from explicit probabilities (for example a model-implied
    /// policy). Rows must sum to one and every entry must be positive.
    pub fn from_probs(probs: Array2<f64>) -> Result<Self> {
        for ((x, a), &p) in probs.indexed_iter() {
            if !(p > 0.0) {
                return Err(Error::NonPositiveProbability { state: x, action: a, value: p });
            }
        }
        for (x, row) in probs.rows().into_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidSpec(format!("CCP row {x} sums to {s}")));
            }
        }
        let support_counts = Array2::zeros(probs.dim());
        Ok(Self { probs, support_counts })
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    pub fn support_counts(&self) -> &Array2<u64> {
        &self.support_counts
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }
}

/// On-disk model layout: dimensions, discount, flattened tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub feature_dim: usize,
    pub discount: f64,
    /// Action-major, then row-major: index `(a * n + i) * n + j`.
    pub transitions: Vec<f64>,
    /// Row-major `n_states × feature_dim`.
    pub features: Vec<f64>,
    pub initial_dist: Vec<f64>,
    pub goal_states: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl ModelFile {
    pub fn from_model(model: &DdcModel) -> Self {
        let n = model.n_states();
        let mut transitions = Vec::with_capacity(model.n_actions() * n * n);
        for a in 0..model.n_actions() {
            transitions.extend(model.transitions.matrix(a).iter().copied());
        }
        Self {
            n_states: n,
            n_actions: model.n_actions(),
            feature_dim: model.features.feature_dim(),
            discount: model.discount,
            transitions,
            features: model.features.values.iter().copied().collect(),
            initial_dist: model.initial_dist.to_vec(),
            goal_states: model.goal_states.clone(),
            fingerprint: None,
        }
    }

    pub fn into_model(self) -> Result<DdcModel> {
        let n = self.n_states;
        let expected = self.n_actions * n * n;
        if self.transitions.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "flattened transitions",
                expected,
                found: self.transitions.len(),
            });
        }
        if self.n_actions == 0 {
            return Err(Error::InvalidSpec("model has no actions".into()));
        }
        let per_action = self
            .transitions
            .chunks(n * n)
            .map(|c| Array2::from_shape_vec((n, n), c.to_vec()).expect("chunk size checked"))
            .collect();
        let features = Array2::from_shape_vec((n, self.feature_dim), self.features).map_err(|_| {
            Error::DimensionMismatch { what: "flattened features", expected: n * self.feature_dim, found: 0 }
        })?;
        DdcModel::new(
            TransitionModel::new(per_action)?,
            self.discount,
            FeatureMatrix::new(features)?,
            Array1::from(self.initial_dist),
            self.goal_states,
        )
    }
}

pub fn write_model<W: Write>(writer: W, model: &DdcModel, fingerprint: Option<String>) -> Result<()> {
    let mut file = ModelFile::from_model(model);
    file.fingerprint = fingerprint;
    serde_json::to_writer(writer, &file)?;
    Ok(())
}

pub fn read_model<R: Read>(reader: R) -> Result<DdcModel> {
    let file: ModelFile = serde_json::from_reader(reader)?;
    file.into_model()
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use ndarray::array;

    fn identity_model(discount: f64) -> DdcModel {
        let id = Array2::eye(2);
        DdcModel::new(
            TransitionModel::new(vec![id.clone(), id]).unwrap(),
            discount,
            FeatureMatrix::new(Array2::eye(2)).unwrap(),
            array![0.5, 0.5],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn identity_model_is_valid() {
        assert!(validate_model(&identity_model(0.9)).is_empty());
    }

    #[test]
    fn half_mass_row_is_reported_with_location() {
        let bad = array![[0.5, 0.0], [0.0, 1.0]];
        let m = DdcModel::new(
            TransitionModel::new(vec![Array2::eye(2), bad]).unwrap(),
            0.9,
            FeatureMatrix::new(Array2::eye(2)).unwrap(),
            array![0.5, 0.5],
            vec![],
        )
        .unwrap();
        let issues = validate_model(&m);
        assert_eq!(issues.len(), 1);
        match issues[0] {
            ModelIssue::RowNotStochastic { action, state, sum } => {
                assert_eq!((action, state), (1, 0));
                assert!((sum - 0.5).abs() < 1e-15);
            }
            ref other => panic!("unexpected issue {other:?}"),
        }
        assert!(issues[0].to_string().contains("action 1, state 0"));
    }

    #[test]
    fn unit_discount_is_flagged() {
        let issues = validate_model(&identity_model(1.0));
        assert_eq!(issues, vec![ModelIssue::DiscountOutOfRange { discount: 1.0 }]);
        assert!(issues[0].to_string().contains("not invertible"));
    }

    #[test]
    fn expected_next_value_cases() {
        let m = identity_model(0.9);
        let v = ExAnteValue(array![3.0, -2.0]);
        assert_eq!(expected_next_value(&m, &v, 0).unwrap(), array![3.0, -2.0]);

        let uniform = Array2::from_elem((2, 2), 0.5);
        let m = DdcModel::new(
            TransitionModel::new(vec![uniform]).unwrap(),
            0.9,
            FeatureMatrix::new(Array2::eye(2)).unwrap(),
            array![0.5, 0.5],
            vec![],
        )
        .unwrap();
        let out = expected_next_value(&m, &ExAnteValue(array![0.0, 10.0]), 0).unwrap();
        assert_eq!(out, array![5.0, 5.0]);
    }

    #[test]
    fn expected_next_value_matches_direct_summation() {
        let m = random_model(3, 2, 0.9, 11);
        let v = ExAnteValue(array![1.5, -0.25, 4.0]);
        for a in 0..2 {
            let got = expected_next_value(&m, &v, a).unwrap();
            for i in 0..3 {
                let mut want = 0.0;
                for j in 0..3 {
                    want += m.transitions().matrix(a)[[i, j]] * v.0[j];
                }
                assert!((got[i] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expected_next_value_rejects_bad_dims() {
        let m = identity_model(0.9);
        let err = expected_next_value(&m, &ExAnteValue(array![1.0]), 0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn model_file_round_trip() {
        let m = random_model(4, 3, 0.95, 2);
        let mut buf = Vec::new();
        write_model(&mut buf, &m, None).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn trajectory_file_layout() {
        let t = vec![Trajectory::new(vec![(0, 1), (2, 0)]), Trajectory::new(vec![(1, 1)])];
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "[[[0,1],[2,0]],[[1,1]]]");
        assert_eq!(read_trajectories(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn goal_states_are_sorted_and_checked() {
        let m = single_state(1, 0.5);
        let err = DdcModel::new(
            m.transitions().clone(),
            0.5,
            m.features().clone(),
            array![1.0],
            vec![3],
        )
        .unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { .. }));
    }

    proptest::proptest! {
        #[test]
        fn expected_next_value_is_max_norm_bounded(seed in 0u64..500, scale in 0.1f64..100.0) {
            let m = random_model(5, 2, 0.9, seed);
            let v = ExAnteValue(Array1::from_shape_fn(5, |i| scale * ((i as f64 * 1.7 + seed as f64).sin())));
            let bound = linalg::sup_norm(v.0.view());
            for a in 0..2 {
                let tv = expected_next_value(&m, &v, a).unwrap();
                proptest::prop_assert!(linalg::sup_norm(tv.view()) <= bound + 1e-12);
            }
        }
    }
}
