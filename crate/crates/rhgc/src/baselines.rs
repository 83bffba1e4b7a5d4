//! Offline-optimal oracles (the regret denominator) and the truncated-horizon
//! fast-gradient MPC comparator.

use crate::algorithms::{Algorithm, OnlineRun};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lqt::{dp_solve, QuadraticInstance};
use crate::optimize::batch_tm_to_tolerance;
use crate::reformulate::{
    self, full_gradient, quadratic_gradient_map, total_cost, Instance, Trajectory, ZPath,
};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OfflineMethod {
    /// Dynamic programming on the quadratic structure.
    Dp,
    /// Direct solve of the stationarity system of the reformulated cost.
    LinearSolve,
    /// Batch triple momentum on the reformulated cost.
    BatchTm,
}

impl OfflineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            OfflineMethod::Dp => "dp",
            OfflineMethod::LinearSolve => "linear_solve",
            OfflineMethod::BatchTm => "batch_tm",
        }
    }
}

/// The offline optimum in hindsight.
#[derive(Clone, Debug)]
pub struct OfflineSolution {
    pub z_star: ZPath,
    pub j_star: f64,
    pub method: OfflineMethod,
    /// Final gradient norm (iterative methods) or linear residual.
    pub residual: f64,
}

/// Offline optimum of a quadratic instance via dynamic programming.
pub fn offline_optimal(instance: &QuadraticInstance) -> Result<OfflineSolution> {
    let sol = dp_solve(instance)?;
    let z_star = reformulate::zpath_of_trajectory(&instance.canonical, &sol.x_star);
    let inst = instance.instance();
    let grads = full_gradient(&inst.canonical, &inst.costs, &z_star)?;
    let residual = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
    Ok(OfflineSolution {
        z_star,
        j_star: sol.j_star,
        method: OfflineMethod::Dp,
        residual,
    })
}

/// Offline optimum by solving the stationarity system `H z = -d` of the
/// reformulated quadratic cost directly. Independent of the dynamic-
/// programming path, so the two can cross-check each other.
pub fn offline_direct(instance: &QuadraticInstance) -> Result<OfflineSolution> {
    let inst = instance.instance();
    let (h, d) = quadratic_gradient_map(&inst)?;
    let z_flat = linalg::solve(&h, &(-&d))?;
    let residual = (&h * &z_flat + &d).norm();
    let z_star = ZPath::from_stacked(&inst.canonical, &inst.x0, &z_flat, inst.horizon());
    let j_star = total_cost(&inst.canonical, &inst.costs, &z_star, inst.horizon());
    Ok(OfflineSolution {
        z_star,
        j_star,
        method: OfflineMethod::LinearSolve,
        residual,
    })
}

/// Gradient-norm target for the iterative offline solve.
const BATCH_TM_TOL: f64 = 1e-10;
const BATCH_TM_MAX_ITERS: usize = 1_000_000;

/// Offline optimum of a general convex instance by batch triple momentum.
pub fn offline_batch_tm(inst: &Instance) -> Result<OfflineSolution> {
    let sp = inst.smoothness();
    let steps = crate::algorithms::compute_stepsizes(sp.l_c, sp.zeta)?;
    let z0 = ZPath::zeros(&inst.canonical, &inst.x0, inst.horizon());
    let (z_star, residual, iters) = batch_tm_to_tolerance(
        &inst.canonical,
        &inst.costs,
        &z0,
        &steps.tm_coefficients(),
        BATCH_TM_TOL,
        BATCH_TM_MAX_ITERS,
    )?;
    if residual > BATCH_TM_TOL && iters >= BATCH_TM_MAX_ITERS {
        return Err(Error::NoConvergence {
            iterations: iters,
            residual,
        });
    }
    let j_star = total_cost(&inst.canonical, &inst.costs, &z_star, inst.horizon());
    Ok(OfflineSolution {
        z_star,
        j_star,
        method: OfflineMethod::BatchTm,
        residual,
    })
}

/// Truncated-horizon fast-gradient MPC: at each time it runs a fixed number
/// of accelerated-gradient iterations on the `W`-stage problem from the
/// observed state, warm-started by shifting the previous solution, and
/// applies the first control.
pub fn submpc_run(inst: &Instance, w: usize, iterations: usize) -> Result<OnlineRun> {
    if w < 1 || iterations < 1 {
        return Err(Error::Config {
            field: "submpc".into(),
            reason: "window and iteration count must be at least 1".into(),
        });
    }
    let canonical = &inst.canonical;
    let n_stages = inst.horizon();
    let n = canonical.state_dim();
    let m = canonical.input_dim();
    let a = &canonical.a_hat;
    let b = &canonical.b_hat;

    let mut states: Vec<DVector<f64>> = Vec::with_capacity(n_stages + 1);
    states.push(inst.x0.clone());
    let mut controls: Vec<DVector<f64>> = Vec::with_capacity(n_stages);
    let mut warm: Vec<DVector<f64>> = vec![DVector::zeros(m); w];
    let mut gradient_evaluations: u64 = 0;

    // Smoothness of the truncated objective in the stacked controls, from the
    // input-to-state map norms; recomputed when the window shrinks.
    let mut lw_cache: Vec<Option<f64>> = vec![None; w + 1];
    let mut mu_cache: Option<f64> = None;

    for t in 0..n_stages {
        let te = (t + w - 1).min(n_stages - 1);
        let n_ctrl = te - t + 1;
        let include_terminal = t + w - 1 >= n_stages;
        let f_end = if include_terminal { n_stages } else { te };

        let l_w = *lw_cache[n_ctrl].get_or_insert_with(|| {
            truncated_smoothness(a, b, n_ctrl, f_end - t, inst.costs.l_f, inst.costs.l_g)
        });
        let mu_w = *mu_cache.get_or_insert_with(|| control_strong_convexity(inst));

        let x_t = states[t].clone();
        let grad = |u_stack: &DVector<f64>| -> DVector<f64> {
            // Forward rollout.
            let mut xs: Vec<DVector<f64>> = Vec::with_capacity(n_ctrl + 1);
            xs.push(x_t.clone());
            for s in 0..n_ctrl {
                let u = u_stack.rows(s * m, m).into_owned();
                xs.push(a * &xs[s] + b * &u);
            }
            // Adjoint backward pass over the f-stages in the window.
            let mut lambda = DVector::zeros(n);
            let mut g_out = DVector::zeros(n_ctrl * m);
            for s in (0..n_ctrl).rev() {
                let stage = t + s + 1;
                let mut seed = DVector::zeros(n);
                if stage <= f_end {
                    seed = inst.costs.state_cost(stage).gradient(&xs[s + 1]);
                }
                lambda = seed + if s + 1 < n_ctrl { a.transpose() * &lambda } else { DVector::zeros(n) };
                let u = u_stack.rows(s * m, m).into_owned();
                let gu = inst.costs.control_cost(t + s).gradient(&u) + b.transpose() * &lambda;
                g_out.rows_mut(s * m, m).copy_from(&gu);
            }
            g_out
        };

        // Stack the warm start for this window size.
        let mut u0 = DVector::zeros(n_ctrl * m);
        for s in 0..n_ctrl {
            u0.rows_mut(s * m, m).copy_from(&warm[s.min(warm.len() - 1)]);
        }

        let zeta_w = if mu_w > 0.0 { l_w / mu_w } else { f64::INFINITY };
        let u_opt = if zeta_w.is_finite() {
            crate::optimize::nesterov_vec(u0, &grad, l_w, zeta_w, iterations)
        } else {
            // Convex schedule when no strong-convexity modulus is available.
            nesterov_convex(u0, &grad, l_w, iterations)
        };
        gradient_evaluations += (2 * w * iterations) as u64;

        if !u_opt.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteIterate(t as i64));
        }

        let u_first = u_opt.rows(0, m).into_owned();
        states.push(a * &states[t] + b * &u_first);
        controls.push(u_first);

        // Shift for the next warm start, duplicating the last block.
        warm.clear();
        for s in 1..n_ctrl {
            warm.push(u_opt.rows(s * m, m).into_owned());
        }
        let tail = if n_ctrl >= 2 {
            u_opt.rows((n_ctrl - 1) * m, m).into_owned()
        } else {
            u_opt.rows(0, m).into_owned()
        };
        warm.push(tail);
    }

    let cost = reformulate::trajectory_cost(&inst.costs, &states, &controls);
    let z_final = reformulate::zpath_of_trajectory(canonical, &states);
    let sp = inst.smoothness();
    Ok(OnlineRun {
        algorithm: Algorithm::SubMpc,
        trajectory: Trajectory {
            states,
            controls,
            cost,
        },
        z_final,
        k: (w - 1) / canonical.p,
        w,
        zeta: sp.zeta,
        oracle_name: format!("submpc{iterations}"),
        gradient_evaluations,
        oracle_evaluations: 0,
    })
}

/// `l_f |Phi|^2 + l_g` where `Phi` maps stacked controls to the stacked
/// states that carry a cost in the window.
fn truncated_smoothness(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n_ctrl: usize,
    n_state_stages: usize,
    l_f: f64,
    l_g: f64,
) -> f64 {
    let n = a.nrows();
    let m = b.ncols();
    if n_state_stages == 0 {
        return l_g;
    }
    // Powers of A applied to B.
    let mut pow_b = vec![b.clone()];
    for _ in 1..n_state_stages {
        pow_b.push(a * pow_b.last().unwrap());
    }
    let mut phi = DMatrix::zeros(n_state_stages * n, n_ctrl * m);
    for row in 0..n_state_stages {
        for col in 0..=row.min(n_ctrl - 1) {
            phi.view_mut((row * n, col * m), (n, m))
                .copy_from(&pow_b[row - col]);
        }
    }
    let sigma = linalg::spectral_norm(&phi);
    l_f * sigma * sigma + l_g
}

/// Smallest control-cost curvature across the horizon; zero when any stage is
/// not quadratic.
fn control_strong_convexity(inst: &Instance) -> f64 {
    let mut mu = f64::INFINITY;
    for t in 0..inst.horizon() {
        match inst.costs.control_cost(t).hessian() {
            Some(h) => {
                let eigs = linalg::symmetric_eigenvalues(h);
                mu = mu.min(eigs[0]);
            }
            None => return 0.0,
        }
    }
    if mu.is_finite() {
        mu.max(0.0)
    } else {
        0.0
    }
}

/// Accelerated gradient with the `(k-1)/(k+2)` momentum schedule.
fn nesterov_convex<G>(x0: DVector<f64>, grad: G, l: f64, iterations: usize) -> DVector<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0.clone();
    let mut y = x0;
    for k in 0..iterations {
        let x_next = &y - grad(&y) / l;
        let beta = k as f64 / (k as f64 + 3.0);
        y = &x_next + (&x_next - &x) * beta;
        x = x_next;
    }
    x
}
