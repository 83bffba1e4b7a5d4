//! Property tests for the structural invariants: the trajectory/decision
//! bijection, canonical-form round trips, and gradient consistency.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rhgc::canonical::{to_canonical, verify_canonical, LtiSystem};
use rhgc::cost::{CostSequence, StageCost};
use rhgc::reformulate::{
    control_at, full_gradient, state_at, total_cost, trajectory_of_z, zpath_of_trajectory, ZPath,
};

/// Random canonical system: a chain-length composition plus actuated rows.
fn canonical_strategy() -> impl Strategy<Value = rhgc::canonical::CanonicalSystem> {
    (1usize..=4, 1usize..=2, proptest::collection::vec(-0.9f64..0.9, 16))
        .prop_map(|(n, m_raw, entries)| {
            let n = n.max(1);
            let m = m_raw.min(n);
            // Split n into m chain lengths.
            let base = n / m;
            let mut p_list = vec![base; m];
            for item in p_list.iter_mut().take(n % m) {
                *item += 1;
            }
            let mut a = DMatrix::zeros(n, n);
            let mut b = DMatrix::zeros(n, m);
            let mut row = 0usize;
            let mut e = entries.into_iter().cycle();
            for (i, &p_i) in p_list.iter().enumerate() {
                for r in 0..p_i - 1 {
                    a[(row + r, row + r + 1)] = 1.0;
                }
                let last = row + p_i - 1;
                for c in 0..n {
                    a[(last, c)] = e.next().unwrap();
                }
                b[(last, i)] = 1.0;
                row += p_i;
            }
            verify_canonical(&a, &b).expect("constructed pattern is canonical")
        })
}

fn quadratic_costs(canon: &rhgc::canonical::CanonicalSystem, n_stages: usize) -> CostSequence {
    let n = canon.state_dim();
    let m = canon.input_dim();
    let state = (0..=n_stages)
        .map(|t| {
            StageCost::quadratic(
                DMatrix::identity(n, n) * (1.0 + (t % 3) as f64 * 0.3),
                DVector::from_fn(n, |i, _| ((t + i) % 5) as f64 - 2.0),
            )
        })
        .collect();
    let control = (0..n_stages)
        .map(|_| StageCost::quadratic(DMatrix::identity(m, m), DVector::zeros(m)))
        .collect();
    CostSequence::new(state, control, 1.0, 1.9, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every decision sequence induces a dynamics-feasible trajectory with
    /// matching cost, and extraction inverts the construction.
    #[test]
    fn decision_trajectory_bijection(
        canon in canonical_strategy(),
        raw in proptest::collection::vec(-3.0f64..3.0, 40),
        x0_raw in proptest::collection::vec(-2.0f64..2.0, 4),
    ) {
        let n_stages = 8usize;
        let m = canon.input_dim();
        let n = canon.state_dim();
        let x0 = DVector::from_fn(n, |i, _| x0_raw[i % x0_raw.len()]);
        let mut it = raw.into_iter().cycle();
        let vars: Vec<DVector<f64>> = (0..n_stages)
            .map(|_| DVector::from_fn(m, |_, _| it.next().unwrap()))
            .collect();
        let zpath = ZPath::new(&canon, &x0, vars);
        let costs = quadratic_costs(&canon, n_stages);

        // Forward: induced trajectory is feasible and matches C(z).
        let traj = trajectory_of_z(&canon, &costs, &zpath).unwrap();
        prop_assert!((traj.states[0].clone() - &x0).abs().max() < 1e-12);
        for t in 0..n_stages {
            let next = canon.step(&traj.states[t], &traj.controls[t]);
            prop_assert!((next - &traj.states[t + 1]).abs().max() < 1e-10);
        }
        let c = total_cost(&canon, &costs, &zpath, n_stages);
        prop_assert!((c - traj.cost).abs() <= 1e-10 * (1.0 + c.abs()));

        // Backward: extraction returns the same decision sequence.
        let back = zpath_of_trajectory(&canon, &traj.states);
        for t in 1..=n_stages as i64 {
            prop_assert!((state_at(&canon, &back, t) - &traj.states[t as usize]).abs().max() < 1e-12);
        }
        for t in 0..n_stages as i64 {
            prop_assert!((control_at(&canon, &back, t) - &traj.controls[t as usize]).abs().max() < 1e-10);
        }
    }

    /// Stacked partial gradients agree with finite differences of the total
    /// cost.
    #[test]
    fn gradient_consistency(
        canon in canonical_strategy(),
        raw in proptest::collection::vec(-2.0f64..2.0, 24),
    ) {
        let n_stages = 6usize;
        let m = canon.input_dim();
        let n = canon.state_dim();
        let mut it = raw.into_iter().cycle();
        let vars: Vec<DVector<f64>> = (0..n_stages)
            .map(|_| DVector::from_fn(m, |_, _| it.next().unwrap()))
            .collect();
        let zpath = ZPath::new(&canon, &DVector::zeros(n), vars);
        let costs = quadratic_costs(&canon, n_stages);
        let grads = full_gradient(&canon, &costs, &zpath).unwrap();
        let h = 1e-6;
        for t in 1..=n_stages {
            for i in 0..m {
                let mut plus = zpath.clone();
                plus.vars_mut()[t - 1][i] += h;
                let mut minus = zpath.clone();
                minus.vars_mut()[t - 1][i] -= h;
                let fd = (total_cost(&canon, &costs, &plus, n_stages)
                    - total_cost(&canon, &costs, &minus, n_stages))
                    / (2.0 * h);
                let denom = 1.0 + fd.abs();
                prop_assert!(((grads[t - 1][i] - fd) / denom).abs() < 1e-5);
            }
        }
    }

    /// Controllable systems round-trip through the canonical transform.
    #[test]
    fn canonical_round_trip(
        entries in proptest::collection::vec(-1.0f64..1.0, 12),
        b_entries in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let a = DMatrix::from_fn(3, 3, |i, j| entries[(3 * i + j) % entries.len()]);
        let b = DMatrix::from_fn(3, 1, |i, _| b_entries[i]);
        let sys = LtiSystem::new(a, b).unwrap();
        prop_assume!(sys.is_controllable());
        let canon = match to_canonical(&sys) {
            Ok(c) => c,
            // Near-singular bases are legitimately rejected.
            Err(_) => return Ok(()),
        };
        verify_canonical(&canon.a_hat, &canon.b_hat).unwrap();
        prop_assert_eq!(canon.p_list.iter().sum::<usize>(), 3);

        // One-step simulation commutes with the transform.
        let x = DVector::from_row_slice(&[0.3, -0.8, 1.1]);
        let u = DVector::from_row_slice(&[0.6]);
        let lhs = &canon.s_x * sys.step(&x, &u);
        let rhs = canon.step(&(&canon.s_x * &x), &(&canon.s_u * &u));
        prop_assert!((lhs - rhs).norm() <= 1e-9);
    }
}
