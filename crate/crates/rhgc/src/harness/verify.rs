//! The verification battery: quantitative checks of the guarantee
//! inequalities, the reformulation constants, gradient correctness, offline
//! oracle agreement, the adversarial family's structure, and the flatness of
//! the steady-state initialization's regret under constant costs. The
//! `verify` subcommand and the acceptance suite both run these.

use crate::adversary;
use crate::algorithms::{
    compute_stepsizes, oracle_rollout, rhag_coefficients, rhgd_run, rhtm_run, Algorithm,
    FossOracle, StepSizes,
};
use crate::baselines::{offline_direct, offline_optimal};
use crate::error::Result;
use crate::generate::{self, CostRanges};
use crate::linalg;
use crate::lqt::QuadraticInstance;
use crate::optimize::{batch_gradient_descent, batch_triple_momentum};
use crate::reformulate::{partial_gradient, quadratic_gradient_map, total_cost};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use std::time::Instant;

/// Outcome of one check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub skipped: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    fn finish(name: &'static str, started: Instant, passed: bool, detail: String) -> Check {
        Check {
            name,
            passed,
            skipped: false,
            detail,
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.skipped)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.skipped {
                "SKIP"
            } else if c.passed {
                "PASS"
            } else {
                "FAIL"
            };
            out.push_str(&format!(
                "[{status}] {:<28} ({:.2}s) {}\n",
                c.name, c.seconds, c.detail
            ));
        }
        out
    }
}

/// The instance battery shared by the quantitative checks: twenty diagonal
/// tracking instances over state dimensions 2..4 and one or two inputs.
pub fn standard_instances(horizon: usize) -> Vec<QuadraticInstance> {
    let dims = [(2usize, 1usize), (3, 1), (3, 2), (4, 1), (4, 2)];
    let mut out = Vec::with_capacity(20);
    for seed in 0..20u64 {
        let (n, m) = dims[seed as usize % dims.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let canon = generate::random_canonical(n, m, &mut rng);
        out.push(generate::random_quadratic_instance(
            &canon,
            horizon,
            &CostRanges::default(),
            &mut rng,
        ));
    }
    out
}

/// Guarantee inequalities for the gradient and momentum controllers against
/// the steady-state initialization, across twenty instances and lookaheads
/// 1..13. `gamma_scale` perturbs the gradient step for canary testing.
pub fn check_guarantee_inequalities(gamma_scale: f64) -> Check {
    let started = Instant::now();
    let slack = 1e-9;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut failures = 0usize;
    let mut runs = 0usize;
    for quad in standard_instances(40) {
        let inst = quad.instance();
        let sp = inst.smoothness();
        let steps_raw = compute_stepsizes(sp.l_c, sp.zeta).unwrap();
        let steps = StepSizes {
            gamma_g: steps_raw.gamma_g * gamma_scale,
            ..steps_raw
        };
        let j_star = offline_optimal(&quad).unwrap().j_star;
        let foss = oracle_rollout(&inst, &mut FossOracle).unwrap().trajectory.cost - j_star;
        for w in 1..=13usize {
            let gd = rhgd_run(&inst, w, &mut FossOracle, &steps).unwrap();
            let tm = rhtm_run(&inst, w, &mut FossOracle, &steps).unwrap();
            let gd_gap =
                (gd.trajectory.cost - j_star) - Algorithm::Rhgd.bound_factor(sp.zeta, gd.k) * foss;
            let tm_gap =
                (tm.trajectory.cost - j_star) - Algorithm::Rhtm.bound_factor(sp.zeta, tm.k) * foss;
            worst = worst.max(gd_gap).max(tm_gap);
            if gd_gap > slack || tm_gap > slack {
                failures += 1;
            }
            runs += 1;
        }
    }
    Check::finish(
        "guarantee-inequalities",
        started,
        failures == 0,
        format!("{runs} runs, worst bound gap {worst:.3e}"),
    )
}

/// The decision sequence assembled online must equal batch optimization from
/// the same initialization, coordinate for coordinate.
pub fn check_online_batch_equivalence() -> Check {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for quad in standard_instances(30).into_iter().take(10) {
        let inst = quad.instance();
        let sp = inst.smoothness();
        let steps = compute_stepsizes(sp.l_c, sp.zeta).unwrap();
        let p = inst.canonical.p;
        let z0 = oracle_rollout(&inst, &mut FossOracle).unwrap().z_final;
        for w in [p + 1, 2 * p + 1, 3 * p + 1] {
            let gd = rhgd_run(&inst, w, &mut FossOracle, &steps).unwrap();
            let batch_gd =
                batch_gradient_descent(&inst.canonical, &inst.costs, &z0, steps.gamma_g, gd.k)
                    .unwrap();
            let tm = rhtm_run(&inst, w, &mut FossOracle, &steps).unwrap();
            let batch_tm = batch_triple_momentum(
                &inst.canonical,
                &inst.costs,
                &z0,
                &steps.tm_coefficients(),
                tm.k,
            )
            .unwrap();
            let ag = crate::algorithms::rhag_run(&inst, w, &mut FossOracle).unwrap();
            let batch_ag = batch_triple_momentum(
                &inst.canonical,
                &inst.costs,
                &z0,
                &rhag_coefficients(sp.l_c, sp.zeta).unwrap(),
                ag.k,
            )
            .unwrap();
            for (a, b) in gd.z_final.vars().iter().zip(batch_gd.vars().iter()) {
                worst = worst.max((a - b).abs().max());
            }
            for (a, b) in tm.z_final.vars().iter().zip(batch_tm.vars().iter()) {
                worst = worst.max((a - b).abs().max());
            }
            for (a, b) in ag.z_final.vars().iter().zip(batch_ag.vars().iter()) {
                worst = worst.max((a - b).abs().max());
            }
        }
    }
    Check::finish(
        "online-batch-equivalence",
        started,
        worst <= 1e-10,
        format!("max coordinate deviation {worst:.3e}"),
    )
}

/// The reformulated cost's Hessian spectrum must sit inside the closed-form
/// convexity and smoothness constants.
pub fn check_smoothness_constants() -> Check {
    let started = Instant::now();
    let mut worst_low: f64 = f64::INFINITY;
    let mut worst_high: f64 = f64::INFINITY;
    let mut pass = true;
    for quad in standard_instances(12).into_iter().take(10) {
        let inst = quad.instance();
        let sp = inst.smoothness();
        let (h, _) = quadratic_gradient_map(&inst).unwrap();
        let eigs = linalg::symmetric_eigenvalues(&h);
        let lo = eigs[0] - sp.mu_c;
        let hi = sp.l_c - *eigs.last().unwrap();
        worst_low = worst_low.min(lo);
        worst_high = worst_high.min(hi);
        if lo < -1e-9 || hi < -1e-9 {
            pass = false;
        }
    }
    Check::finish(
        "smoothness-constants",
        started,
        pass,
        format!("min eig slack {worst_low:.3e}, max eig slack {worst_high:.3e}"),
    )
}

/// Partial gradients against central finite differences on a thousand
/// random (instance, stage, path) triples.
pub fn check_gradient_correctness() -> Check {
    let started = Instant::now();
    let instances = standard_instances(12);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    'outer: loop {
        for quad in &instances {
            let inst = quad.instance();
            let zp = crate::harness::experiment::random_zpath(quad, 5.0, &mut rng);
            let t = rng.gen_range(1..=quad.horizon()) as i64;
            let g = partial_gradient(&inst.canonical, &inst.costs, &zp, t).unwrap();
            let m = inst.canonical.input_dim();
            let h = 1e-6;
            for i in 0..m {
                let mut plus = zp.clone();
                plus.vars_mut()[(t - 1) as usize][i] += h;
                let mut minus = zp.clone();
                minus.vars_mut()[(t - 1) as usize][i] -= h;
                let fd = (total_cost(&inst.canonical, &inst.costs, &plus, quad.horizon())
                    - total_cost(&inst.canonical, &inst.costs, &minus, quad.horizon()))
                    / (2.0 * h);
                worst = worst.max((g[i] - fd).abs() / (1.0 + fd.abs()));
            }
            count += 1;
            if count >= 1000 {
                break 'outer;
            }
        }
    }
    Check::finish(
        "gradient-correctness",
        started,
        worst <= 1e-5,
        format!("{count} triples, worst relative error {worst:.3e}"),
    )
}

/// Dynamic programming against the direct stationarity solve, and against
/// the adversarial family's explicit linear system.
pub fn check_offline_equivalence() -> Check {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for quad in standard_instances(40) {
        let dp = offline_optimal(&quad).unwrap();
        let direct = offline_direct(&quad).unwrap();
        worst = worst.max((dp.j_star - direct.j_star).abs() / (1.0 + dp.j_star.abs()));
    }
    let mut worst_adv: f64 = 0.0;
    for seed in [0u64, 1, 2] {
        let inst = adversary::build_instance(5.0, 2, 30, 8.0, 1.0, seed).unwrap();
        let quad = inst.quadratic();
        let dp = offline_optimal(&quad).unwrap();
        let (_, z_star) = adversary::assemble_h_system(&inst).unwrap();
        for t in 0..inst.horizon {
            worst_adv = worst_adv.max((dp.z_star.vars()[t][0] - z_star[t]).abs());
        }
    }
    Check::finish(
        "offline-equivalence",
        started,
        worst <= 1e-8 && worst_adv <= 1e-8,
        format!("dp/direct relative gap {worst:.3e}, tridiagonal solve gap {worst_adv:.3e}"),
    )
}

/// Diagonal structure, spacing and closed form of the adversarial family's
/// Riccati solution.
pub fn check_riccati_structure() -> Check {
    let started = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for &zeta in &[2.0, 5.0, 10.0] {
        for &p in &[1usize, 2, 3, 4] {
            let inst = adversary::build_instance(zeta, p, 24, 8.0, 1.0, 3).unwrap();
            let report = adversary::verify_pe_form(&inst);
            if !report.pass {
                pass = false;
                detail = format!(
                    "zeta={zeta} p={p}: offdiag {:.1e} spacing {:.1e} q1 {:.4} cf {:.1e}",
                    report.max_offdiagonal,
                    report.max_spacing_error,
                    report.q_first,
                    report.closed_form_error
                );
            }
        }
    }
    if pass {
        detail = "diagonal, spaced, and closed-form checks hold for 12 parameter pairs".into();
    }
    Check::finish("riccati-structure", started, pass, detail)
}

/// Geometric decay of the stationarity-system inverse and containment of its
/// spectrum.
pub fn check_inverse_decay() -> Check {
    let started = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for &(n, horizon) in &[(1usize, 20usize), (2, 40), (3, 30)] {
        for &zeta in &[2.0, 5.0] {
            let inst = adversary::build_instance(zeta, n, horizon, 8.0, 1.0, 5).unwrap();
            let decay = adversary::verify_y_decay(&inst).unwrap();
            let (system, _) = adversary::assemble_h_system(&inst).unwrap();
            let eigs = linalg::symmetric_eigenvalues(&system.h);
            let dn = inst.delta * n as f64;
            let contained = eigs[0] >= dn - 1e-9 && *eigs.last().unwrap() <= dn + 4.0 + 1e-9;
            if !decay.pass || !contained {
                pass = false;
                detail = format!(
                    "n={n} N={horizon} zeta={zeta}: slack {:.1e}, spectrum [{:.4}, {:.4}] vs [{:.4}, {:.4}]",
                    decay.min_bound_slack,
                    eigs[0],
                    eigs.last().unwrap(),
                    dn,
                    dn + 4.0
                );
            }
        }
    }
    if pass {
        detail = "decay floor and spectrum containment hold for 6 parameter pairs".into();
    }
    Check::finish("inverse-decay", started, pass, detail)
}

/// Regret of the steady-state initialization under constant costs must not
/// grow with the horizon.
pub fn check_steady_state_regret_flat() -> Check {
    let started = Instant::now();
    let canon = crate::canonical::verify_canonical(
        &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0 / 6.0, 5.0 / 6.0]),
        &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
    )
    .unwrap();
    let theta = DVector::from_row_slice(&[2.0, -1.5]);
    let regret_at = |n_stages: usize| -> f64 {
        let quad = QuadraticInstance::new(
            canon.clone(),
            vec![DMatrix::identity(2, 2); n_stages],
            vec![DMatrix::identity(1, 1); n_stages],
            vec![theta.clone(); n_stages + 1],
            DMatrix::identity(2, 2),
            DVector::zeros(2),
        )
        .unwrap();
        let j_star = offline_optimal(&quad).unwrap().j_star;
        let run = oracle_rollout(&quad.instance(), &mut FossOracle).unwrap();
        run.trajectory.cost - j_star
    };
    let r30 = regret_at(30);
    let r300 = regret_at(300);
    let gap = (r300 - r30).abs();
    let pass = gap <= 1e-6 * (1.0 + r30.abs());
    Check::finish(
        "steady-state-regret-flat",
        started,
        pass,
        format!("regret {r30:.6} at N=30 vs {r300:.6} at N=300, gap {gap:.3e}"),
    )
}

/// Sanity canary: the guarantee check must fail when the gradient step is
/// corrupted hard enough to cross the descent stability threshold. The
/// closed-form smoothness constant is conservative on diagonal instances, so
/// a merely doubled step still converges; six times the step does not.
pub const CANARY_STEP_SCALE: f64 = 6.0;

pub fn check_guarantee_canary() -> Check {
    let started = Instant::now();
    let corrupted = check_guarantee_inequalities(CANARY_STEP_SCALE);
    Check::finish(
        "guarantee-canary",
        started,
        !corrupted.passed,
        format!(
            "gradient step scaled by {CANARY_STEP_SCALE}: {}",
            corrupted.detail
        ),
    )
}

/// The full battery. Everything must pass for a zero exit.
pub fn verify_suite() -> Result<VerifyReport> {
    let checks = vec![
        check_guarantee_inequalities(1.0),
        check_online_batch_equivalence(),
        check_smoothness_constants(),
        check_gradient_correctness(),
        check_offline_equivalence(),
        check_riccati_structure(),
        check_inverse_decay(),
        check_steady_state_regret_flat(),
    ];
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canary_fails_with_corrupted_step() {
        let canary = check_guarantee_canary();
        assert!(canary.passed, "canary did not trip: {}", canary.detail);
    }

    #[test]
    fn noninteger_ratio_reports_skip_semantics() {
        let inst = adversary::build_instance(5.0, 2, 31, 8.0, 1.0, 1).unwrap();
        assert!(adversary::verify_y_decay(&inst).is_err());
    }
}
