//! Acceptance suite. Each test covers one release criterion at its stated
//! tolerance and prints a single pass line; run with `--nocapture` to see
//! them.

use rhgc::adversary::{self, FamilyParams};
use rhgc::algorithms::Algorithm;
use rhgc::harness::{self, verify, ExperimentConfig};
use rhgc::robot::{robot_rhgc, RobotAlgorithm, RobotInit, RobotInstance};
use std::time::Instant;

fn report(criterion: &str, detail: &str) {
    println!("acceptance [{criterion}]: PASS ({detail})");
}

#[test]
fn criterion_01_guarantee_inequalities() {
    let started = Instant::now();
    let check = verify::check_guarantee_inequalities(1.0);
    assert!(check.passed, "{}", check.detail);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 1 exceeded its runtime cap: {elapsed:.1}s");
    report(
        "1 guarantee inequalities",
        &format!("{}; {:.1}s", check.detail, elapsed),
    );
}

#[test]
fn criterion_02_online_batch_equivalence() {
    let check = verify::check_online_batch_equivalence();
    assert!(check.passed, "{}", check.detail);
    report("2 online/batch equivalence", &check.detail);
}

#[test]
fn criterion_03_smoothness_constants() {
    let check = verify::check_smoothness_constants();
    assert!(check.passed, "{}", check.detail);
    report("3 spectrum within constants", &check.detail);
}

#[test]
fn criterion_04_gradient_correctness() {
    let check = verify::check_gradient_correctness();
    assert!(check.passed, "{}", check.detail);
    report("4 gradient correctness", &check.detail);
}

#[test]
fn criterion_05_offline_equivalence() {
    let check = verify::check_offline_equivalence();
    assert!(check.passed, "{}", check.detail);
    report("5 offline equivalence", &check.detail);
}

#[test]
fn criterion_06_riccati_structure() {
    let check = verify::check_riccati_structure();
    assert!(check.passed, "{}", check.detail);
    report("6 riccati structure", &check.detail);
}

#[test]
fn criterion_07_inverse_decay() {
    let check = verify::check_inverse_decay();
    assert!(check.passed, "{}", check.detail);
    report("7 inverse decay bound", &check.detail);
}

fn sweep_summary() -> (ExperimentConfig, harness::SweepSummary, usize) {
    let config = ExperimentConfig::from_str_validated(&harness::example_sweep_config()).unwrap();
    assert!(config.run.seeds.len() >= 20);
    let rows = harness::run_experiment(&config).unwrap();
    let n = rows.len();
    let summary = harness::sweep_report(&rows);
    (config, summary, n)
}

fn mean_of(summary: &harness::SweepSummary, alg: &str, w: usize) -> f64 {
    summary
        .means
        .iter()
        .find(|m| m.algorithm == alg && m.w == w)
        .unwrap_or_else(|| panic!("missing mean for {alg} W={w}"))
        .mean_regret
}

#[test]
fn criterion_08ab_sweep_monotone_and_piecewise_constant() {
    // Two-state tracking sweep: 25 seeds, lookaheads 1..13, all controllers
    // plus the one-iteration truncated-horizon baseline.
    let (_, summary, n_rows) = sweep_summary();

    // (a) Mean regret nonincreasing in K for each receding-horizon variant.
    for alg in ["rhgd", "rhag", "rhtm"] {
        let mut per_k: Vec<(usize, f64)> = summary
            .means
            .iter()
            .filter(|m| m.algorithm == alg)
            .map(|m| (m.k, m.mean_regret))
            .collect();
        per_k.sort_by_key(|e| e.0);
        per_k.dedup_by_key(|e| e.0);
        for pair in per_k.windows(2) {
            assert!(
                pair[1].1 <= pair[0].1 + 1e-9,
                "{alg}: mean regret rose from K={} to K={}",
                pair[0].0,
                pair[1].0
            );
        }
    }

    // (b) Piecewise constancy across equal-K windows per seed for the
    // receding-horizon variants (the truncated baseline has no such
    // structure).
    for v in &summary.constancy_violations {
        assert!(
            v.algorithm.starts_with("submpc"),
            "unexpected constancy violation: {v:?}"
        );
    }

    // Acceleration never loses to plain gradient descent at equal lookahead.
    for m in summary.means.iter().filter(|m| m.algorithm == "rhag") {
        let gd = mean_of(&summary, "rhgd", m.w);
        assert!(
            m.mean_regret <= gd + 1e-9,
            "W={}: rhag {} > rhgd {gd}",
            m.w,
            m.mean_regret
        );
    }

    // The momentum controller's mean regret decays across K.
    assert!(
        summary.log_slopes["rhtm"] < 0.0,
        "expected a negative log-regret slope, got {}",
        summary.log_slopes["rhtm"]
    );

    report(
        "8ab sweep trends",
        &format!("{n_rows} rows; mean regret monotone in K and piecewise constant in W"),
    );
}

/// Criterion 8c as stated: mean rhtm <= mean rhag <= mean rhgd at every
/// lookahead with K >= 2.
///
/// KNOWN RED. The second inequality holds everywhere, but the momentum
/// controller's played decision is an extrapolated iterate whose transient
/// overshoots at this family's condition number (about 14); its mean regret
/// crosses below the accelerated-gradient controller only from K = 5 and
/// below plain gradient descent only from K = 3. The online loops match the
/// batch recursions to 1e-10 per coordinate and the step sizes match their
/// closed forms, so the ordering at K = 2..4 is a property of the method,
/// not of this implementation. Details in the project notes.
#[test]
fn criterion_08c_momentum_ordering() {
    let (config, summary, _) = sweep_summary();
    for &w in &config.run.w {
        let k = (w - 1) / 2;
        if k >= 2 {
            let tm = mean_of(&summary, "rhtm", w);
            let ag = mean_of(&summary, "rhag", w);
            let gd = mean_of(&summary, "rhgd", w);
            assert!(
                ag <= gd + 1e-12,
                "W={w}: rhag {ag} > rhgd {gd}"
            );
            assert!(
                tm <= ag + 1e-12,
                "W={w} (K={k}): mean rhtm {tm:.3} > mean rhag {ag:.3}; the momentum \
                 transient clears only from K = 5 at this condition number"
            );
        }
    }
    report("8c momentum ordering", "rhtm <= rhag <= rhgd for K >= 2");
}

/// Criterion 8d as stated: mean rhtm regret at or below the one-iteration
/// truncated baseline at every lookahead in the sweep.
///
/// KNOWN RED. At W <= 2p the controller performs at most one refinement pass
/// over the steady-state initialization, whose regret on this family is
/// large, while the warm-started baseline already optimizes the truncated
/// problem; the ordering holds from W = 7 on. A cold-started baseline was
/// also measured and does not change the small-W picture. Details in the
/// project notes.
#[test]
fn criterion_08d_baseline_ordering() {
    let (config, summary, _) = sweep_summary();
    for &w in &config.run.w {
        let tm = mean_of(&summary, "rhtm", w);
        let mpc = mean_of(&summary, "submpc1", w);
        assert!(
            tm <= mpc + 1e-12,
            "W={w}: mean rhtm {tm:.3} > mean submpc1 {mpc:.3}; ordering holds only from W = 7"
        );
    }
    report("8d baseline ordering", "rhtm below submpc1 at every W");
}

#[test]
fn criterion_09_lower_bound_sandwich() {
    let params = FamilyParams {
        zeta: 5.0,
        p: 2,
        horizon: 30,
        l_n_over_theta_bar: 8.0,
        theta_bar: 1.0,
    };
    let seeds: Vec<u64> = (0..50).collect();
    let sweep =
        adversary::empirical_lower_bound(&params, Algorithm::Rhtm, &[0, 1, 2, 3, 4, 5], &seeds)
            .unwrap();
    assert!(sweep.fitted_constant > 0.0, "no positive decay constant fits");
    for row in &sweep.rows {
        assert!(
            row.mean_regret >= sweep.fitted_constant * row.decay_envelope - 1e-12,
            "K={}: regret {} below fitted envelope",
            row.k,
            row.mean_regret
        );
        assert!(
            row.mean_regret <= row.upper_bound + 1e-9,
            "K={}: regret {} above the guarantee {}",
            row.k,
            row.mean_regret,
            row.upper_bound
        );
    }
    report(
        "9 lower-bound sandwich",
        &format!(
            "c1 = {:.3e}, K = 0..5 contained, slope {:.3}",
            sweep.fitted_constant, sweep.log_slope
        ),
    );
}

#[test]
fn criterion_10_steady_state_regret_flat() {
    let check = verify::check_steady_state_regret_flat();
    assert!(check.passed, "{}", check.detail);
    report("10 constant-cost flat regret", &check.detail);
}

#[test]
fn criterion_11_robot_demo() {
    let started = Instant::now();
    let instance = RobotInstance::standard(160);
    let short = robot_rhgc(
        &instance,
        40,
        RobotAlgorithm::Rhag,
        RobotInit::ReferenceSteady,
        None,
    )
    .unwrap();
    let long = robot_rhgc(
        &instance,
        80,
        RobotAlgorithm::Rhag,
        RobotInit::ReferenceSteady,
        None,
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        long.executed_cost < short.executed_cost,
        "W=80 cost {} not below W=40 cost {}",
        long.executed_cost,
        short.executed_cost
    );
    assert!(elapsed < 120.0, "robot runs took {elapsed:.1}s");

    // Path CSVs are the artifacts.
    let dir = std::env::temp_dir().join("rhgc_acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    for (name, run) in [("robot_w40", &short), ("robot_w80", &long)] {
        let exec_path = dir.join(format!("{name}.csv"));
        let plan_path = dir.join(format!("{name}.planned.csv"));
        std::fs::write(
            &exec_path,
            harness::experiment::robot_executed_csv(run, &instance),
        )
        .unwrap();
        std::fs::write(
            &plan_path,
            harness::experiment::robot_planned_csv(run, &instance),
        )
        .unwrap();
        let lines = std::fs::read_to_string(&exec_path).unwrap().lines().count();
        assert_eq!(lines, instance.horizon + 2, "header plus one row per stage");
    }
    report(
        "11 robot demo",
        &format!(
            "cost {:.2} at W=80 < {:.2} at W=40; {:.1}s; CSVs in {}",
            long.executed_cost,
            short.executed_cost,
            elapsed,
            dir.display()
        ),
    );
}

#[test]
fn criterion_12_verify_subcommand() {
    let started = Instant::now();
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_rhgc"))
        .arg("verify")
        .output()
        .expect("verify subcommand runs");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        output.status.success(),
        "verify exited nonzero:\n{}",
        String::from_utf8_lossy(&output.stdout)
    );
    assert!(elapsed < 300.0, "verify took {elapsed:.1}s");
    report(
        "12 verify subcommand",
        &format!("exit 0 in {elapsed:.1}s"),
    );
}
