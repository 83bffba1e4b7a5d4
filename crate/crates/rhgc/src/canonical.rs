//! Controllability analysis and transformation of a controllable LTI system
//! into the staircase canonical form whose input matrix has a single unit per
//! column and whose non-actuated state rows are pure shifts.

use crate::cost::{CostFn, CostSequence, StageCost};
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Absolute entry tolerance when checking the canonical sparsity pattern.
pub const CANONICAL_ENTRY_TOL: f64 = 1e-9;
/// Relative pivot tolerance for the basis selection.
const PIVOT_TOL: f64 = 1e-9;
/// Condition-number ceiling for the selected basis.
const COND_LIMIT: f64 = 1e12;

/// A discrete-time LTI system `x_{t+1} = A x_t + B u_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows but A is {n}x{n}",
                b.nrows(),
                n = a.nrows()
            )));
        }
        if a.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::DimensionMismatch("n and m must be at least 1".into()));
        }
        if b.ncols() > a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "m = {} exceeds n = {}",
                b.ncols(),
                a.nrows()
            )));
        }
        Ok(LtiSystem { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `[B, AB, ..., A^{n-1}B]`.
    pub fn controllability_matrix(&self) -> DMatrix<f64> {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut ctrb = DMatrix::zeros(n, n * m);
        let mut block = self.b.clone();
        for k in 0..n {
            ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
            block = &self.a * &block;
        }
        ctrb
    }

    pub fn is_controllable(&self) -> bool {
        linalg::numerical_rank(&self.controllability_matrix()) == self.state_dim()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

/// A system in canonical form together with the transform that produced it.
///
/// `indices` holds the actuated rows `k_1 < ... < k_m` (1-based as in the
/// structure definition), `p_list` the per-input chain lengths
/// `p_i = k_i - k_{i-1}`, and `p = max_i p_i` the controllability index.
#[derive(Clone, Debug)]
pub struct CanonicalSystem {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub s_x: DMatrix<f64>,
    pub s_u: DMatrix<f64>,
    s_x_inv: DMatrix<f64>,
    s_u_inv: DMatrix<f64>,
    pub indices: Vec<usize>,
    pub p_list: Vec<usize>,
    pub p: usize,
}

impl CanonicalSystem {
    pub fn state_dim(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_hat.ncols()
    }

    pub fn s_x_inv(&self) -> &DMatrix<f64> {
        &self.s_x_inv
    }

    pub fn s_u_inv(&self) -> &DMatrix<f64> {
        &self.s_u_inv
    }

    /// 0-based start offset of block `i` in the state vector (`k_{i-1}`).
    pub fn block_offset(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.indices[i - 1]
        }
    }

    /// The actuated rows of `A_hat` stacked: an `m x n` matrix.
    pub fn actuated_rows(&self) -> DMatrix<f64> {
        let m = self.input_dim();
        let n = self.state_dim();
        let mut rows = DMatrix::zeros(m, n);
        for (i, &k) in self.indices.iter().enumerate() {
            rows.row_mut(i).copy_from(&self.a_hat.row(k - 1));
        }
        rows
    }

    pub fn system(&self) -> LtiSystem {
        LtiSystem {
            a: self.a_hat.clone(),
            b: self.b_hat.clone(),
        }
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a_hat * x + &self.b_hat * u
    }
}

/// Check that `(A, B)` already matches the canonical sparsity pattern and
/// extract the actuated-row structure. The transform of the result is the
/// identity.
pub fn verify_canonical(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<CanonicalSystem> {
    let sys = LtiSystem::new(a.clone(), b.clone())?;
    let n = sys.state_dim();
    let m = sys.input_dim();
    let tol = CANONICAL_ENTRY_TOL;

    // Each B column must carry a single unit entry; collect its row.
    let mut indices = Vec::with_capacity(m);
    for j in 0..m {
        let mut unit_row = None;
        for i in 0..n {
            let v = b[(i, j)];
            if (v - 1.0).abs() <= tol {
                if unit_row.is_some() {
                    return Err(Error::NotCanonical { row: i + 1, col: j + 1 });
                }
                unit_row = Some(i);
            } else if v.abs() > tol {
                return Err(Error::NotCanonical { row: i + 1, col: j + 1 });
            }
        }
        match unit_row {
            Some(i) => indices.push(i + 1),
            None => return Err(Error::NotCanonical { row: 1, col: j + 1 }),
        }
    }
    for w in indices.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::NotCanonical { row: w[1], col: 0 });
        }
    }

    // Rows outside the actuated set must be unit shifts.
    for i in 0..n {
        let row = i + 1;
        if indices.contains(&row) {
            continue;
        }
        if row == n {
            // The last row has no superdiagonal slot, so it must be actuated.
            return Err(Error::NotCanonical { row, col: n });
        }
        for j in 0..n {
            let expect = if j == i + 1 { 1.0 } else { 0.0 };
            if (a[(i, j)] - expect).abs() > tol {
                return Err(Error::NotCanonical { row, col: j + 1 });
            }
        }
    }

    let mut p_list = Vec::with_capacity(m);
    let mut prev = 0usize;
    for &k in &indices {
        p_list.push(k - prev);
        prev = k;
    }
    let p = *p_list.iter().max().unwrap();

    Ok(CanonicalSystem {
        a_hat: a.clone(),
        b_hat: b.clone(),
        s_x: DMatrix::identity(n, n),
        s_u: DMatrix::identity(m, m),
        s_x_inv: DMatrix::identity(n, n),
        s_u_inv: DMatrix::identity(m, m),
        indices,
        p_list,
        p,
    })
}

/// Transform a controllable system into canonical form.
///
/// Basis columns are taken from the controllability matrix scanned by powers,
/// `B e_1, .., B e_m, AB e_1, ..`, keeping each column that survives a
/// Gram-Schmidt pivot test. The scan yields one contiguous chain per input;
/// the state transform stacks the chain-end dual rows propagated through `A`
/// and the input transform absorbs the residual couplings between chains.
/// Already-canonical systems return the identity transform.
pub fn to_canonical(sys: &LtiSystem) -> Result<CanonicalSystem> {
    let n = sys.state_dim();
    let m = sys.input_dim();

    let ctrb = sys.controllability_matrix();
    let rank = linalg::numerical_rank(&ctrb);
    if rank != n {
        return Err(Error::NotControllable { rank, n });
    }

    if let Ok(canon) = verify_canonical(&sys.a, &sys.b) {
        return Ok(canon);
    }

    // Power-ordered greedy selection; chain_len[j] counts the selected
    // contiguous powers of input j.
    let mut chain_len = vec![0usize; m];
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut powers: Vec<DVector<f64>> = (0..m).map(|j| sys.b.column(j).into_owned()).collect();

    'scan: for _k in 0..n {
        for j in 0..m {
            if basis.len() == n {
                break 'scan;
            }
            // A chain stops permanently at its first dependent power.
            if chain_len[j] < _k {
                continue;
            }
            let v = powers[j].clone();
            let norm = v.norm();
            let mut r = v.clone();
            for q in &ortho {
                let c = q.dot(&r);
                r -= q * c;
            }
            // Second orthogonalization pass for numerical robustness.
            for q in &ortho {
                let c = q.dot(&r);
                r -= q * c;
            }
            if norm > 0.0 && r.norm() > PIVOT_TOL * norm {
                ortho.push(r.clone() / r.norm());
                basis.push(v);
                chain_len[j] += 1;
                powers[j] = &sys.a * &powers[j];
            }
        }
    }

    if basis.len() != n {
        return Err(Error::NotControllable { rank: basis.len(), n });
    }
    if chain_len.iter().any(|&c| c == 0) {
        // An input whose column is dependent on the others cannot head a
        // chain, so the input transform would be singular.
        return Err(Error::IllConditioned { cond: f64::INFINITY });
    }

    // Reorder the basis into per-input chains: [b_1, Ab_1, ..., b_2, ...].
    let mut basis_mat = DMatrix::zeros(n, n);
    let mut col = 0usize;
    for j in 0..m {
        let mut v = sys.b.column(j).into_owned();
        for _ in 0..chain_len[j] {
            basis_mat.set_column(col, &v);
            col += 1;
            v = &sys.a * &v;
        }
    }

    let cond = linalg::condition_estimate(&basis_mat);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::IllConditioned { cond });
    }

    let basis_inv = linalg::invert(&basis_mat).map_err(|_| Error::IllConditioned { cond })?;

    // Chain-end dual rows: row sum(chain_len[..=j]) of the inverse basis.
    let mut s_x = DMatrix::zeros(n, n);
    let mut row_out = 0usize;
    let mut end = 0usize;
    for j in 0..m {
        end += chain_len[j];
        let q = basis_inv.row(end - 1).into_owned();
        let mut qk = q;
        for _ in 0..chain_len[j] {
            s_x.row_mut(row_out).copy_from(&qk);
            row_out += 1;
            qk = &qk * &sys.a;
        }
    }

    let s_x_cond = linalg::condition_estimate(&s_x);
    if !s_x_cond.is_finite() || s_x_cond > COND_LIMIT {
        return Err(Error::IllConditioned { cond: s_x_cond });
    }
    let s_x_inv = linalg::invert(&s_x).map_err(|_| Error::IllConditioned { cond: s_x_cond })?;

    // Input transform: the actuated rows of S_x B.
    let sxb = &s_x * &sys.b;
    let mut s_u = DMatrix::zeros(m, m);
    let mut k_acc = 0usize;
    let mut indices = Vec::with_capacity(m);
    for j in 0..m {
        k_acc += chain_len[j];
        indices.push(k_acc);
        s_u.row_mut(j).copy_from(&sxb.row(k_acc - 1));
    }
    let s_u_inv = linalg::invert(&s_u).map_err(|_| Error::SingularTransform)?;

    let a_hat_raw = &s_x * &sys.a * &s_x_inv;
    let b_hat_raw = &sxb * &s_u_inv;

    // The computed matrices must match the canonical pattern up to round-off;
    // snap the structural entries so downstream reassembly is exact.
    let scale = linalg::spectral_norm(&a_hat_raw).max(1.0);
    let snap_tol = (1e-8 * scale).max(CANONICAL_ENTRY_TOL);
    let mut a_hat = a_hat_raw.clone();
    let mut b_hat = b_hat_raw.clone();
    for i in 0..n {
        let row = i + 1;
        if indices.contains(&row) {
            for j in 0..m {
                let expect = if indices[j] == row { 1.0 } else { 0.0 };
                if (b_hat[(i, j)] - expect).abs() > snap_tol {
                    return Err(Error::IllConditioned { cond: s_x_cond });
                }
                b_hat[(i, j)] = expect;
            }
            continue;
        }
        for j in 0..n {
            let expect = if j == i + 1 { 1.0 } else { 0.0 };
            if (a_hat[(i, j)] - expect).abs() > snap_tol {
                return Err(Error::IllConditioned { cond: s_x_cond });
            }
            a_hat[(i, j)] = expect;
        }
        for j in 0..m {
            if b_hat[(i, j)].abs() > snap_tol {
                return Err(Error::IllConditioned { cond: s_x_cond });
            }
            b_hat[(i, j)] = 0.0;
        }
    }

    let mut p_list = Vec::with_capacity(m);
    let mut prev = 0usize;
    for &k in &indices {
        p_list.push(k - prev);
        prev = k;
    }
    let p = *p_list.iter().max().unwrap();

    Ok(CanonicalSystem {
        a_hat,
        b_hat,
        s_x,
        s_u,
        s_x_inv,
        s_u_inv,
        indices,
        p_list,
        p,
    })
}

struct TransformedCost {
    inner: Arc<dyn CostFn>,
    t_inv: DMatrix<f64>,
}

impl CostFn for TransformedCost {
    fn value(&self, v: &DVector<f64>) -> f64 {
        self.inner.value(&(&self.t_inv * v))
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        self.t_inv.transpose() * self.inner.gradient(&(&self.t_inv * v))
    }
}

/// Transport a cost sequence from original to transformed coordinates:
/// `f_hat(x_hat) = f(S_x^{-1} x_hat)`, `g_hat(u_hat) = g(S_u^{-1} u_hat)`.
/// Smoothness constants rescale as `mu_f / |S_x|^2`, `l_f |S_x^{-1}|^2`,
/// `l_g |S_u^{-1}|^2`.
pub fn transform_costs(
    costs: &CostSequence,
    s_x: &DMatrix<f64>,
    s_u: &DMatrix<f64>,
) -> Result<CostSequence> {
    let s_x_inv = s_x.clone().try_inverse().ok_or(Error::SingularTransform)?;
    let s_u_inv = s_u.clone().try_inverse().ok_or(Error::SingularTransform)?;

    let map = |cost: &StageCost, t: &DMatrix<f64>, t_inv: &DMatrix<f64>| -> StageCost {
        match cost {
            StageCost::Quadratic(q) => StageCost::Quadratic(crate::cost::QuadraticCost::new(
                t_inv.transpose() * &q.weight * t_inv,
                t * &q.center,
            )),
            StageCost::Custom(f) => StageCost::Custom(Arc::new(TransformedCost {
                inner: Arc::clone(f),
                t_inv: t_inv.clone(),
            })),
        }
    };

    let n_stages = costs.horizon();
    let state = (0..=n_stages)
        .map(|t| map(costs.state_cost(t), s_x, &s_x_inv))
        .collect();
    let control = (0..n_stages)
        .map(|t| map(costs.control_cost(t), s_u, &s_u_inv))
        .collect();

    let sx_norm = linalg::spectral_norm(s_x);
    let sx_inv_norm = linalg::spectral_norm(&s_x_inv);
    let su_inv_norm = linalg::spectral_norm(&s_u_inv);

    CostSequence::new(
        state,
        control,
        costs.mu_f / (sx_norm * sx_norm),
        costs.l_f * sx_inv_norm * sx_inv_norm,
        costs.l_g * su_inv_norm * su_inv_norm,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub fn example2(a1: f64, a2: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, a1, a2]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
    }

    #[test]
    fn verify_canonical_two_state_single_input() {
        let (a, b) = example2(0.3, -0.7);
        let canon = verify_canonical(&a, &b).unwrap();
        assert_eq!(canon.indices, vec![2]);
        assert_eq!(canon.p_list, vec![2]);
        assert_eq!(canon.p, 2);
        assert_eq!(canon.s_x, DMatrix::identity(2, 2));
    }

    #[test]
    fn verify_canonical_scalar_integrator() {
        let a = DMatrix::from_element(1, 1, 1.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let canon = verify_canonical(&a, &b).unwrap();
        assert_eq!(canon.indices, vec![1]);
        assert_eq!(canon.p, 1);
    }

    #[test]
    fn verify_canonical_rejects_bad_input_pattern() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let err = verify_canonical(&a, &b).unwrap_err();
        assert!(matches!(err, Error::NotCanonical { .. }));
    }

    #[test]
    fn verify_canonical_multi_input() {
        // n = 3, chains of length 2 and 1.
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 0.5, -0.2, 0.1, 0.3, 0.0, 0.9],
        );
        let b = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let canon = verify_canonical(&a, &b).unwrap();
        assert_eq!(canon.indices, vec![2, 3]);
        assert_eq!(canon.p_list, vec![2, 1]);
        assert_eq!(canon.p, 2);
    }

    #[test]
    fn to_canonical_is_identity_on_canonical_input() {
        let (a, b) = example2(0.4, 0.1);
        let sys = LtiSystem::new(a.clone(), b.clone()).unwrap();
        let canon = to_canonical(&sys).unwrap();
        assert_eq!(canon.s_x, DMatrix::identity(2, 2));
        assert_eq!(canon.s_u, DMatrix::identity(1, 1));
        assert_eq!(canon.a_hat, a);
        assert_eq!(canon.b_hat, b);
    }

    #[test]
    fn to_canonical_rejects_uncontrollable() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        let sys = LtiSystem::new(a, b).unwrap();
        assert!(matches!(
            to_canonical(&sys),
            Err(Error::NotControllable { .. })
        ));
    }

    fn random_system(n: usize, m: usize, rng: &mut ChaCha8Rng) -> LtiSystem {
        loop {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            let sys = LtiSystem::new(a, b).unwrap();
            if sys.is_controllable() {
                return sys;
            }
        }
    }

    #[test]
    fn round_trip_random_single_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let sys = random_system(3, 1, &mut rng);
            let canon = to_canonical(&sys).unwrap();
            verify_canonical(&canon.a_hat, &canon.b_hat).unwrap();
            let reproduced = &canon.s_x * &sys.a * canon.s_x_inv();
            let err = (&reproduced - &canon.a_hat).abs().max();
            assert!(err < 1e-10, "similarity error {err}");
        }
    }

    #[test]
    fn round_trip_random_multi_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, m) in &[(3usize, 2usize), (4, 2), (5, 3)] {
            for _ in 0..10 {
                let sys = random_system(n, m, &mut rng);
                let canon = to_canonical(&sys).unwrap();
                let extracted = verify_canonical(&canon.a_hat, &canon.b_hat).unwrap();
                assert_eq!(extracted.indices, canon.indices);
                assert_eq!(canon.p_list.iter().sum::<usize>(), n);
                // k_i reconstruction from chain lengths.
                let mut acc = 0;
                for (i, &pi) in canon.p_list.iter().enumerate() {
                    acc += pi;
                    assert_eq!(canon.indices[i], acc);
                }
            }
        }
    }

    #[test]
    fn one_step_simulation_commutes_with_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let sys = random_system(4, 2, &mut rng);
            let canon = to_canonical(&sys).unwrap();
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let u = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = &canon.s_x * sys.step(&x, &u);
            let rhs = canon.step(&(&canon.s_x * &x), &(&canon.s_u * &u));
            assert!((lhs - rhs).norm() <= 1e-9);
        }
    }

    #[test]
    fn quadratic_cost_transport_preserves_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sys = random_system(3, 1, &mut rng);
        let canon = to_canonical(&sys).unwrap();

        let q = {
            let d = DMatrix::from_diagonal(&DVector::from_fn(3, |_, _| rng.gen_range(1.0..2.0)));
            d
        };
        let theta = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let r = DMatrix::from_element(1, 1, rng.gen_range(1.0..2.0));
        let f = StageCost::quadratic(q.clone(), theta.clone());
        let g = StageCost::quadratic(r.clone(), DVector::zeros(1));
        let costs = CostSequence::new(vec![f.clone(), f.clone()], vec![g], 1.0, 2.0, 2.0).unwrap();

        let hat = transform_costs(&costs, &canon.s_x, &canon.s_u).unwrap();
        for _ in 0..100 {
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-5.0..5.0));
            let x_hat = &canon.s_x * &x;
            assert_relative_eq!(
                costs.state_cost(0).value(&x),
                hat.state_cost(0).value(&x_hat),
                max_relative = 1e-12,
                epsilon = 1e-12
            );
        }

        // Expected closed form: Q_hat = S^{-T} Q S^{-1}, theta_hat = S theta.
        let qh = hat.state_cost(0).as_quadratic().unwrap();
        let expect = canon.s_x_inv().transpose() * &q * canon.s_x_inv();
        assert!((&qh.weight - expect).abs().max() < 1e-12);
        assert!((&qh.center - &canon.s_x * &theta).abs().max() < 1e-12);
    }

    #[test]
    fn transported_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let sys = random_system(3, 1, &mut rng);
        let canon = to_canonical(&sys).unwrap();
        let q = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.5, 1.1, 1.9]));
        let theta = DVector::from_row_slice(&[0.3, -0.8, 0.5]);
        let f = StageCost::quadratic(q, theta);
        let g = StageCost::quadratic(DMatrix::identity(1, 1), DVector::zeros(1));
        let costs = CostSequence::new(vec![f.clone(), f], vec![g], 1.0, 2.0, 1.0).unwrap();
        let hat = transform_costs(&costs, &canon.s_x, &canon.s_u).unwrap();

        let x_hat = DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0));
        let grad = hat.state_cost(0).gradient(&x_hat);
        let h = 1e-6;
        for i in 0..3 {
            let mut plus = x_hat.clone();
            let mut minus = x_hat.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (hat.state_cost(0).value(&plus) - hat.state_cost(0).value(&minus)) / (2.0 * h);
            assert!((grad[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn identity_transform_keeps_costs() {
        let f = StageCost::quadratic(DMatrix::identity(2, 2), DVector::zeros(2));
        let g = StageCost::quadratic(DMatrix::identity(1, 1), DVector::zeros(1));
        let costs = CostSequence::new(vec![f.clone(), f], vec![g], 1.0, 1.0, 1.0).unwrap();
        let hat = transform_costs(&costs, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)).unwrap();
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        assert_eq!(costs.state_cost(0).value(&x), hat.state_cost(0).value(&x));
        assert_eq!(costs.mu_f, hat.mu_f);
    }
}
