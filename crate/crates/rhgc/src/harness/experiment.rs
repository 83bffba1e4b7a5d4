//! Experiment execution: instance construction per seed, one offline solve
//! per instance, one row per (algorithm, lookahead, seed).

use crate::adversary;
use crate::algorithms::{
    compute_stepsizes, oracle_rollout, rhag_run, rhgd_run, rhtm_run, Algorithm, FossOracle,
};
use crate::baselines::{offline_optimal, submpc_run};
use crate::canonical::{to_canonical, LtiSystem};
use crate::cost::StageCost;
use crate::error::{Error, Result};
use crate::generate::{self, CostRanges};
use crate::harness::config::ExperimentConfig;
use crate::lqt::QuadraticInstance;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

/// One sweep measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub algorithm: String,
    pub w: usize,
    pub k: usize,
    pub seed: u64,
    pub j_online: f64,
    pub j_star: f64,
    pub regret: f64,
    pub bound_factor: f64,
    pub gradient_evaluations: u64,
}

/// CSV header for sweep rows.
pub const SWEEP_HEADER: &str =
    "algorithm,w,k,seed,j_online,j_star,regret,bound_factor,gradient_evaluations";

/// Render a float with 17 significant digits so the value round-trips.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.w,
            self.k,
            self.seed,
            format_float(self.j_online),
            format_float(self.j_star),
            format_float(self.regret),
            format_float(self.bound_factor),
            self.gradient_evaluations
        )
    }
}

/// Build the tracking instance a configuration describes for one seed.
pub fn build_instance(config: &ExperimentConfig, seed: u64) -> Result<QuadraticInstance> {
    let spec = &config.instance;
    let ranges = CostRanges {
        q_diag: (config.costs.q_diag.0, config.costs.q_diag.1),
        r_diag: (config.costs.r_diag.0, config.costs.r_diag.1),
        target: (config.costs.theta.0, config.costs.theta.1),
    };
    match spec.kind.as_str() {
        "explicit" => {
            let a_rows = spec.a.as_ref().expect("validated");
            let b_rows = spec.b.as_ref().expect("validated");
            let n = a_rows.len();
            let m = b_rows[0].len();
            let a = DMatrix::from_fn(n, n, |i, j| a_rows[i][j]);
            let b = DMatrix::from_fn(n, m, |i, j| b_rows[i][j]);
            let sys = LtiSystem::new(a, b)?;
            let canon = to_canonical(&sys)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = generate::random_quadratic_instance(&canon, spec.horizon, &ranges, &mut rng);
            if canon.s_x == DMatrix::identity(n, n) {
                return Ok(raw);
            }
            // Costs were drawn in the original coordinates; transport them.
            transport_instance(raw, &canon)
        }
        "lqt-random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let canon = generate::random_canonical(
                spec.n.expect("validated"),
                spec.m.expect("validated"),
                &mut rng,
            );
            Ok(generate::random_quadratic_instance(
                &canon,
                spec.horizon,
                &ranges,
                &mut rng,
            ))
        }
        "lower-bound" => {
            let theta_bar = spec.theta_bar.unwrap_or(1.0);
            let inst = adversary::build_instance(
                spec.zeta.expect("validated"),
                spec.p.expect("validated"),
                spec.horizon,
                spec.variation_budget.expect("validated") * theta_bar,
                theta_bar,
                seed,
            )?;
            Ok(inst.quadratic())
        }
        _ => unreachable!("validated"),
    }
}

/// Re-express an instance drawn in original coordinates on the transformed
/// system: weights become `S^{-T} W S^{-1}`, targets `S theta`.
fn transport_instance(
    raw: QuadraticInstance,
    canon: &crate::canonical::CanonicalSystem,
) -> Result<QuadraticInstance> {
    let sxi = canon.s_x_inv();
    let sui = canon.s_u_inv();
    let map_q = |w: &DMatrix<f64>| sxi.transpose() * w * sxi;
    let map_r = |w: &DMatrix<f64>| sui.transpose() * w * sui;
    QuadraticInstance::new(
        canon.clone(),
        raw.state_weights.iter().map(map_q).collect(),
        raw.control_weights.iter().map(map_r).collect(),
        raw.targets.iter().map(|t| &canon.s_x * t).collect(),
        map_q(&raw.terminal_weight),
        &canon.s_x * &raw.x0,
    )
}

/// Run every (algorithm, lookahead, seed) triple of a configuration. Rows
/// come back in configuration order regardless of scheduling; the offline
/// optimum is computed once per seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;

    // One offline solve per seed, shared across algorithms and lookaheads.
    let per_seed: Result<Vec<(u64, QuadraticInstance, f64)>> = config
        .run
        .seeds
        .par_iter()
        .map(|&seed| {
            let quad = build_instance(config, seed)?;
            let j_star = offline_optimal(&quad)?.j_star;
            Ok((seed, quad, j_star))
        })
        .collect();
    let per_seed = per_seed?;

    let mut jobs = Vec::new();
    for (ai, alg) in config.run.algorithms.iter().enumerate() {
        for (wi, &w) in config.run.w.iter().enumerate() {
            for (si, entry) in per_seed.iter().enumerate() {
                jobs.push((ai, wi, si, alg.clone(), w, entry));
            }
        }
    }

    let mut rows: Vec<((usize, usize, usize), SweepRow)> = jobs
        .par_iter()
        .map(|(ai, wi, si, alg, w, (seed, quad, j_star))| {
            let row = run_single(alg, *w, *seed, quad, *j_star, config.run.submpc_iterations)?;
            Ok(((*ai, *wi, *si), row))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

fn run_single(
    algorithm: &str,
    w: usize,
    seed: u64,
    quad: &QuadraticInstance,
    j_star: f64,
    submpc_iterations: usize,
) -> Result<SweepRow> {
    let inst = quad.instance();
    let sp = inst.smoothness();
    let steps = compute_stepsizes(sp.l_c, sp.zeta)?;
    let run = match algorithm {
        "rhgd" => rhgd_run(&inst, w, &mut FossOracle, &steps)?,
        "rhtm" => rhtm_run(&inst, w, &mut FossOracle, &steps)?,
        "rhag" => rhag_run(&inst, w, &mut FossOracle)?,
        "submpc" => submpc_run(&inst, w, submpc_iterations)?,
        "foss" => oracle_rollout(&inst, &mut FossOracle)?,
        other => {
            return Err(Error::config(
                "run.algorithms",
                format!("unknown algorithm `{other}`"),
            ))
        }
    };
    let regret = run.trajectory.cost - j_star;
    if regret < -1e-7 {
        return Err(Error::NegativeRegretBeyondTolerance(-regret));
    }
    let label = if algorithm == "submpc" {
        format!("submpc{submpc_iterations}")
    } else {
        algorithm.to_string()
    };
    let bound_factor = match run.algorithm {
        Algorithm::SubMpc => f64::NAN,
        alg => alg.bound_factor(run.zeta, run.k),
    };
    Ok(SweepRow {
        algorithm: label,
        w,
        k: run.k,
        seed,
        j_online: run.trajectory.cost,
        j_star,
        regret,
        bound_factor,
        gradient_evaluations: run.gradient_evaluations,
    })
}

/// Serialize rows as CSV, header first.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// A general convex stage cost used to exercise the non-quadratic paths:
/// a smoothed tracking penalty `sum_i sqrt(1 + (x_i - c_i)^2) - 1` plus a
/// small quadratic that keeps it strongly convex.
pub struct HuberLikeCost {
    pub center: DVector<f64>,
    pub curvature: f64,
}

impl crate::cost::CostFn for HuberLikeCost {
    fn value(&self, v: &DVector<f64>) -> f64 {
        let d = v - &self.center;
        let smooth: f64 = d.iter().map(|x| (1.0 + x * x).sqrt() - 1.0).sum();
        smooth + 0.5 * self.curvature * d.norm_squared()
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = v - &self.center;
        let mut g = DVector::zeros(v.len());
        for i in 0..v.len() {
            g[i] = d[i] / (1.0 + d[i] * d[i]).sqrt() + self.curvature * d[i];
        }
        g
    }
}

/// Replace the state costs of a quadratic instance with smoothed tracking
/// penalties, keeping the same targets. `mu_f = curvature`,
/// `l_f = curvature + 1`.
pub fn huberized_instance(quad: &QuadraticInstance, curvature: f64) -> Result<crate::reformulate::Instance> {
    let n_stages = quad.horizon();
    let mut state: Vec<StageCost> = Vec::with_capacity(n_stages + 1);
    for t in 0..=n_stages {
        state.push(StageCost::Custom(std::sync::Arc::new(HuberLikeCost {
            center: quad.targets[t].clone(),
            curvature,
        })));
    }
    let control: Vec<StageCost> = (0..n_stages)
        .map(|t| {
            StageCost::quadratic(
                quad.control_weights[t].clone(),
                DVector::zeros(quad.canonical.input_dim()),
            )
        })
        .collect();
    let (_, _, _, l_g) = quad.derived_bounds();
    let costs = crate::cost::CostSequence::new(state, control, curvature, curvature + 1.0, l_g)?;
    crate::reformulate::Instance::new(quad.canonical.clone(), costs, quad.x0.clone())
}

/// Deterministic sample used by gradient-check batteries: a random stage
/// index and a random decision path for the given instance.
pub fn random_zpath(
    quad: &QuadraticInstance,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> crate::reformulate::ZPath {
    let m = quad.canonical.input_dim();
    let vars = (0..quad.horizon())
        .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-scale..scale)))
        .collect();
    crate::reformulate::ZPath::new(&quad.canonical, &quad.x0, vars)
}

/// CSV for a robot run's executed path: `t, x, y, x_ref, y_ref, v, w` with
/// the commanded controls.
pub fn robot_executed_csv(
    run: &crate::robot::RobotRun,
    instance: &crate::robot::RobotInstance,
) -> String {
    let mut csv = String::from("t,x,y,x_ref,y_ref,v,w\n");
    for t in 0..=instance.horizon {
        let r = instance.reference(t);
        let (v, w_cmd) = if t < run.commanded.len() {
            run.commanded[t]
        } else {
            (0.0, 0.0)
        };
        csv.push_str(&format!(
            "{t},{},{},{},{},{},{}\n",
            format_float(run.executed[t].x),
            format_float(run.executed[t].y),
            format_float(r.x),
            format_float(r.y),
            format_float(v),
            format_float(w_cmd),
        ));
    }
    csv
}

/// CSV for a robot run's planned path with the kinematics the plan implies.
pub fn robot_planned_csv(
    run: &crate::robot::RobotRun,
    instance: &crate::robot::RobotInstance,
) -> String {
    let (_, speeds, rates) =
        crate::robot::path_kinematics(&run.planned, instance.dt, instance.heading_eps);
    let mut csv = String::from("t,x,y,x_ref,y_ref,v,w\n");
    for t in 0..=instance.horizon {
        let r = instance.reference(t);
        let (v, w_cmd) = if t < speeds.len() {
            (speeds[t], rates[t])
        } else {
            (0.0, 0.0)
        };
        csv.push_str(&format!(
            "{t},{},{},{},{},{},{}\n",
            format_float(run.planned[t].x),
            format_float(run.planned[t].y),
            format_float(r.x),
            format_float(r.y),
            format_float(v),
            format_float(w_cmd),
        ));
    }
    csv
}
