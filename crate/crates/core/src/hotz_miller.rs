//! CCP representation of the ex-ante value function.
//!
//! Given choice probabilities `σ`, the ex-ante value is linear in the reward:
//!
//! ```text
//! V̄ = (I − β F)⁻¹ b,   F = Σ_a diag(σ(a|·)) T(a),
//! b(x) = Σ_a σ(a|x) (r(x,a) + ε̃(a|x)),   ε̃ = γ − log σ.
//! ```
//!
//! The operator `(I − βF)⁻¹` depends only on the data, so it is prepared once
//! and every later reward evaluation costs a solve (direct mode) or a short
//! successive-approximation run of `V ← b + βFV` (iterative mode).

use ndarray::{Array1, Array2, ArrayView1};

use crate::ccp::expected_shock;
use crate::error::{Error, Result};
use crate::instrument;
use crate::linalg::{self, LuFactors};
use crate::model::{CcpTable, DdcModel, ExAnteValue};

/// Above this many states the direct inverse is kept factored, not materialized.
pub const MATERIALIZE_MAX_STATES: usize = 256;
/// Above this many states `Auto` picks successive approximation.
pub const AUTO_DIRECT_MAX_STATES: usize = 4096;
pub const ITERATIVE_TOLERANCE: f64 = 1e-8;
pub const ITERATIVE_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorMode {
    Direct,
    Iterative,
    #[default]
    Auto,
}

#[derive(Debug, Clone)]
enum Inverse {
    Materialized(Array2<f64>),
    Factored(LuFactors),
    Iterative { tolerance: f64, max_sweeps: usize },
}

/// Precomputed `(I − βF)⁻¹` together with the CCPs and shock correction.
#[derive(Debug, Clone)]
pub struct HotzMillerOperator {
    ccp: CcpTable,
    shock_correction: Array2<f64>,
    /// `Σ_a σ(a|x) ε̃(a|x)`, the reward-independent part of `b`.
    shock_term: Array1<f64>,
    policy_transition: Array2<f64>,
    discount: f64,
    inverse: Inverse,
}

/// Assembles `F`, the shock correction, and the inverse for the chosen mode.
pub fn build_operator(model: &DdcModel, ccp: &CcpTable, mode: OperatorMode) -> Result<HotzMillerOperator> {
    let n = model.n_states();
    if ccp.n_states() != n {
        return Err(Error::DimensionMismatch { what: "CCP states", expected: n, found: ccp.n_states() });
    }
    if ccp.n_actions() != model.n_actions() {
        return Err(Error::DimensionMismatch {
            what: "CCP actions",
            expected: model.n_actions(),
            found: ccp.n_actions(),
        });
    }
    let beta = model.discount();
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::SingularMatrix);
    }
    instrument::record_operator_build();
    let shock_correction = expected_shock(ccp)?;
    let shock_term = (ccp.probs() * &shock_correction).sum_axis(ndarray::Axis(1));
    let policy_transition = model.transitions().policy_matrix(ccp.probs().view());

    let resolved = match mode {
        OperatorMode::Auto if n <= AUTO_DIRECT_MAX_STATES => OperatorMode::Direct,
        OperatorMode::Auto => OperatorMode::Iterative,
        m => m,
    };
    let inverse = match resolved {
        OperatorMode::Direct => {
            let mut system = policy_transition.mapv(|f| -beta * f);
            for i in 0..n {
                system[[i, i]] += 1.0;
            }
            let lu = LuFactors::factor(&system)?;
            if n <= MATERIALIZE_MAX_STATES {
                Inverse::Materialized(lu.inverse()?)
            } else {
                Inverse::Factored(lu)
            }
        }
        _ => Inverse::Iterative { tolerance: ITERATIVE_TOLERANCE, max_sweeps: ITERATIVE_MAX_SWEEPS },
    };
    Ok(HotzMillerOperator {
        ccp: ccp.clone(),
        shock_correction,
        shock_term,
        policy_transition,
        discount: beta,
        inverse,
    })
}

impl HotzMillerOperator {
    pub fn mode(&self) -> OperatorMode {
        match self.inverse {
            Inverse::Iterative { .. } => OperatorMode::Iterative,
            _ => OperatorMode::Direct,
        }
    }

    pub fn ccp(&self) -> &CcpTable {
        &self.ccp
    }

    pub fn shock_correction(&self) -> &Array2<f64> {
        &self.shock_correction
    }

    /// `F = Σ_a diag(σ(a|·)) T(a)`.
    pub fn policy_transition(&self) -> &Array2<f64> {
        &self.policy_transition
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn n_states(&self) -> usize {
        self.policy_transition.nrows()
    }

    /// `M = (I − βF)⁻¹` when it was materialized.
    pub fn inverse_matrix(&self) -> Option<&Array2<f64>> {
        match &self.inverse {
            Inverse::Materialized(m) => Some(m),
            _ => None,
        }
    }

    /// Applies `(I − βF)⁻¹` to an arbitrary vector.
    pub fn apply_inverse(&self, b: ArrayView1<f64>) -> Result<Array1<f64>> {
        if b.len() != self.n_states() {
            return Err(Error::DimensionMismatch { what: "operator input", expected: self.n_states(), found: b.len() });
        }
        match &self.inverse {
            Inverse::Materialized(m) => Ok(linalg::matvec(m.view(), b)),
            Inverse::Factored(lu) => lu.solve(b),
            Inverse::Iterative { tolerance, max_sweeps } => {
                iterative_inverse_apply(&self.policy_transition, self.discount, b, *tolerance, *max_sweeps)
            }
        }
    }

    /// `b(x) = Σ_a σ(a|x)(r(x,a) + ε̃(a|x))`.
    pub fn flow_term(&self, rewards: &Array2<f64>) -> Result<Array1<f64>> {
        if rewards.dim() != self.ccp.probs().dim() {
            return Err(Error::DimensionMismatch {
                what: "reward table",
                expected: self.ccp.probs().len(),
                found: rewards.len(),
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward table"));
        }
        Ok((self.ccp.probs() * rewards).sum_axis(ndarray::Axis(1)) + &self.shock_term)
    }

    /// Ex-ante value of a reward table under the stored CCPs. No
    /// factorization happens here.
    pub fn exante_value(&self, rewards: &Array2<f64>) -> Result<ExAnteValue> {
        let b = self.flow_term(rewards)?;
        self.apply_inverse(b.view()).map(ExAnteValue)
    }
}

/// Successive approximation of `v = b + βFv`, stopping once the residual is
/// below `tolerance · (1 − β)` so the value error stays under `tolerance`.
pub fn iterative_inverse_apply(
    f: &Array2<f64>,
    beta: f64,
    b: ArrayView1<f64>,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<Array1<f64>> {
    let n = f.nrows();
    if f.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch { what: "successive approximation", expected: n, found: b.len() });
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::SingularMatrix);
    }
    let threshold = tolerance * (1.0 - beta);
    let mut v = b.to_owned();
    let mut fv = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        linalg::matvec_into(f.view(), v.view(), &mut fv);
        residual = 0.0;
        for i in 0..n {
            let next = b[i] + beta * fv[i];
            residual = f64::max(residual, (next - v[i]).abs());
            v[i] = next;
        }
        if residual < threshold {
            return Ok(v);
        }
    }
    Err(Error::MaxSweepsExceeded { sweeps: max_sweeps, residual, last: v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccp::{estimate_ccp, SmoothingConfig};
    use crate::model::test_support::{random_model, single_state};
    use crate::model::Trajectory;
    use crate::soft_dp::{model_policy, solve_soft_vi, SoftDpConfig, EULER_GAMMA};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ccp(n: usize, a: usize, seed: u64) -> CcpTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Array2::from_shape_fn((n, a), |_| rng.random::<f64>() + 0.05);
        for mut row in p.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        CcpTable::from_probs(p).unwrap()
    }

    fn random_rewards(n: usize, a: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, a), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn scalar_geometric_series() {
        let m = single_state(1, 0.9);
        let ccp = CcpTable::from_probs(array![[1.0]]).unwrap();
        let op = build_operator(&m, &ccp, OperatorMode::Direct).unwrap();
        assert!((op.inverse_matrix().unwrap()[[0, 0]] - 10.0).abs() < 1e-12);
        let v = op.exante_value(&Array2::zeros((1, 1))).unwrap();
        assert!((v.0[0] - 10.0 * EULER_GAMMA).abs() < 1e-12);
        let vi = solve_soft_vi(&m, &Array2::zeros((1, 1)), &SoftDpConfig::default()).unwrap();
        assert!((v.0[0] - vi.value.0[0]).abs() < 1e-5);
    }

    #[test]
    fn identical_kernels_give_shared_kernel() {
        let base = random_model(4, 1, 0.9, 3);
        let t = base.transitions().matrix(0).to_owned();
        let m = DdcModel::new(
            crate::model::TransitionModel::new(vec![t.clone(), t.clone()]).unwrap(),
            0.9,
            base.features().clone(),
            base.initial_dist().clone(),
            vec![],
        )
        .unwrap();
        let op = build_operator(&m, &random_ccp(4, 2, 8), OperatorMode::Direct).unwrap();
        assert!(linalg::max_abs_diff(
            op.policy_transition().iter().copied().collect::<Array1<_>>().view(),
            t.iter().copied().collect::<Array1<_>>().view()
        ) < 1e-15);
    }

    #[test]
    fn inverse_multiplies_back_to_identity() {
        let m = random_model(6, 3, 0.95, 17);
        let op = build_operator(&m, &random_ccp(6, 3, 18), OperatorMode::Direct).unwrap();
        let inv = op.inverse_matrix().unwrap();
        let sys = Array2::<f64>::eye(6) - op.policy_transition() * 0.95;
        let prod = inv.dot(&sys);
        for ((i, j), &v) in prod.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-8);
        }
    }

    #[test]
    fn operator_invariants() {
        let m = random_model(12, 4, 0.99, 5);
        let op = build_operator(&m, &random_ccp(12, 4, 6), OperatorMode::Direct).unwrap();
        for row in op.policy_transition().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        for row in op.inverse_matrix().unwrap().rows() {
            assert!((row.sum() - 100.0).abs() < 1e-6);
        }
    }

    #[test]
    fn factored_mode_above_materialize_threshold() {
        let m = random_model(MATERIALIZE_MAX_STATES + 4, 2, 0.9, 1);
        let op = build_operator(&m, &random_ccp(MATERIALIZE_MAX_STATES + 4, 2, 2), OperatorMode::Direct).unwrap();
        assert!(op.inverse_matrix().is_none());
        let ones = Array1::ones(MATERIALIZE_MAX_STATES + 4);
        let row_sums = op.apply_inverse(ones.view()).unwrap();
        assert!(row_sums.iter().all(|s| (s - 10.0).abs() < 1e-6));
    }

    #[test]
    fn shifted_rewards_shift_value() {
        let m = random_model(5, 2, 0.9, 30);
        let op = build_operator(&m, &random_ccp(5, 2, 31), OperatorMode::Direct).unwrap();
        let r = random_rewards(5, 2, 32);
        let v0 = op.exante_value(&r).unwrap();
        let v1 = op.exante_value(&r.mapv(|x| x + 1.5)).unwrap();
        for x in 0..5 {
            assert!((v1.0[x] - v0.0[x] - 1.5 / 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_ccps_reproduce_soft_vi_on_gridworld() {
        let spec = crate::env::GridSpec { n: 5, ..Default::default() };
        let (m, truth) = crate::env::build_fixed_target(&spec).unwrap();
        let r = truth.table(m.n_actions());
        let cfg = SoftDpConfig { tolerance: 1e-10, max_sweeps: 100_000 };
        let (pi, v) = model_policy(&m, &r, &cfg).unwrap();
        let op = build_operator(&m, &CcpTable::from_probs(pi.probs().clone()).unwrap(), OperatorMode::Direct).unwrap();
        let hm = op.exante_value(&r).unwrap();
        assert!(linalg::max_abs_diff(hm.0.view(), v.0.view()) < 1e-5);
    }

    #[test]
    fn value_is_affine_in_rewards() {
        let m = random_model(7, 3, 0.9, 40);
        let op = build_operator(&m, &random_ccp(7, 3, 41), OperatorMode::Direct).unwrap();
        let r1 = random_rewards(7, 3, 42);
        let r2 = random_rewards(7, 3, 43);
        let lhs = op.exante_value(&(&r1 + &r2)).unwrap().0;
        let rhs = op.exante_value(&r1).unwrap().0 + op.exante_value(&r2).unwrap().0
            - op.exante_value(&Array2::zeros((7, 3))).unwrap().0;
        assert!(linalg::max_abs_diff(lhs.view(), rhs.view()) < 1e-10);
    }

    #[test]
    fn successive_approximation_cases() {
        let f = array![[1.0]];
        let v = iterative_inverse_apply(&f, 0.5, array![1.0].view(), 1e-10, 1000).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-9);
        let m = random_model(4, 1, 0.9, 2);
        let f = m.transitions().matrix(0).to_owned();
        let v = iterative_inverse_apply(&f, 0.9, Array1::zeros(4).view(), 1e-10, 1000).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn successive_approximation_matches_direct() {
        let m = random_model(8, 3, 0.95, 50);
        let ccp = random_ccp(8, 3, 51);
        let direct = build_operator(&m, &ccp, OperatorMode::Direct).unwrap();
        let b = Array1::from_shape_fn(8, |i| (i as f64).cos() * 3.0);
        let want = direct.apply_inverse(b.view()).unwrap();
        let got = iterative_inverse_apply(direct.policy_transition(), 0.95, b.view(), 1e-8, 100_000).unwrap();
        assert!(linalg::max_abs_diff(got.view(), want.view()) < 1e-6);
        // Residual bound from the stopping rule.
        let fv = direct.policy_transition().dot(&got);
        let res = (0..8).fold(0.0f64, |m, i| m.max((got[i] - b[i] - 0.95 * fv[i]).abs()));
        assert!(res < 1e-8 * 0.05 + 1e-12);
    }

    #[test]
    fn modes_agree_on_random_instances() {
        for seed in 0..5 {
            let m = random_model(30, 3, 0.9, 100 + seed);
            let ccp = random_ccp(30, 3, 200 + seed);
            let r = random_rewards(30, 3, 300 + seed);
            let d = build_operator(&m, &ccp, OperatorMode::Direct).unwrap().exante_value(&r).unwrap();
            let it = build_operator(&m, &ccp, OperatorMode::Iterative).unwrap();
            assert_eq!(it.mode(), OperatorMode::Iterative);
            let i = it.exante_value(&r).unwrap();
            assert!(linalg::max_abs_diff(d.0.view(), i.0.view()) < 1e-6);
        }
    }

    #[test]
    fn evaluations_never_refactor() {
        let m = random_model(20, 2, 0.9, 60);
        let before = instrument::snapshot();
        let op = build_operator(&m, &random_ccp(20, 2, 61), OperatorMode::Direct).unwrap();
        let after_build = instrument::snapshot();
        assert_eq!(after_build.since(&before).factorizations, 1);
        assert_eq!(after_build.since(&before).operator_builds, 1);
        for k in 0..10 {
            op.exante_value(&random_rewards(20, 2, k)).unwrap();
        }
        assert_eq!(instrument::snapshot().since(&after_build), instrument::Counts::default());
    }

    #[test]
    fn unit_discount_is_singular() {
        let m = random_model(3, 2, 1.0, 1);
        assert!(matches!(build_operator(&m, &random_ccp(3, 2, 1), OperatorMode::Direct), Err(Error::SingularMatrix)));
    }

    #[test]
    fn empirical_ccps_plug_in() {
        let m = random_model(3, 2, 0.9, 70);
        let trajs = vec![Trajectory::new(vec![(0, 0), (1, 1), (2, 0), (0, 1)])];
        let ccp = estimate_ccp(&trajs, 3, 2, &SmoothingConfig::default()).unwrap();
        let op = build_operator(&m, &ccp, OperatorMode::Auto).unwrap();
        assert_eq!(op.mode(), OperatorMode::Direct);
        assert!(op.exante_value(&Array2::zeros((3, 2))).unwrap().is_finite());
    }
}
