//! Online receding-horizon controllers. Each one initializes the newest
//! decision coordinate from an oracle that sees only revealed stage costs and
//! then spends the rest of the lookahead window on backward gradient or
//! momentum updates of the reformulated total cost.

use crate::canonical::CanonicalSystem;
use crate::cost::{GatedCosts, StageCosts};
use crate::error::{Error, Result};
use crate::lqt;
use crate::optimize::{gradient_descent_vec, TmCoefficients};
use crate::reformulate::{
    self, history_from_x0, partial_gradient, Instance, Trajectory, ZPath, ZView,
};
use nalgebra::DVector;

/// Step sizes for the gradient and momentum recursions, parameterized by the
/// smoothness constant `l_c` and condition number `zeta` of the total cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub gamma_g: f64,
    pub gamma_c: f64,
    pub gamma_omega: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
    pub phi: f64,
}

/// `phi = 1 - 1/sqrt(zeta)`, `gamma_g = 1/l_c`, `gamma_c = (1+phi)/l_c`,
/// `gamma_omega = phi^2/(2-phi)`, `gamma_y = phi^2/((1+phi)(2-phi))`,
/// `gamma_z = phi^2/(1-phi^2)`.
pub fn compute_stepsizes(l_c: f64, zeta: f64) -> Result<StepSizes> {
    if !(l_c > 0.0) {
        return Err(Error::NonPositiveConstant {
            name: "l_c",
            value: l_c,
        });
    }
    if !(zeta >= 1.0) {
        return Err(Error::InvalidConditionNumber(zeta));
    }
    let phi = 1.0 - 1.0 / zeta.sqrt();
    let gamma_z = if phi == 0.0 {
        0.0
    } else {
        phi * phi / (1.0 - phi * phi)
    };
    Ok(StepSizes {
        gamma_g: 1.0 / l_c,
        gamma_c: (1.0 + phi) / l_c,
        gamma_omega: phi * phi / (2.0 - phi),
        gamma_y: phi * phi / ((1.0 + phi) * (2.0 - phi)),
        gamma_z,
        phi,
    })
}

/// Momentum coefficients for the accelerated-gradient variant:
/// `delta_c = 1/l_c`, `delta_y = delta_omega = (sqrt(zeta)-1)/(sqrt(zeta)+1)`,
/// `delta_z = 0`.
pub fn rhag_coefficients(l_c: f64, zeta: f64) -> Result<TmCoefficients> {
    if !(l_c > 0.0) {
        return Err(Error::NonPositiveConstant {
            name: "l_c",
            value: l_c,
        });
    }
    if !(zeta >= 1.0) {
        return Err(Error::InvalidConditionNumber(zeta));
    }
    let rho = (zeta.sqrt() - 1.0) / (zeta.sqrt() + 1.0);
    Ok(TmCoefficients {
        delta_c: 1.0 / l_c,
        delta_omega: rho,
        delta_y: rho,
        delta_z: 0.0,
    })
}

impl StepSizes {
    /// The triple-momentum recursion coefficients these step sizes induce.
    pub fn tm_coefficients(&self) -> TmCoefficients {
        TmCoefficients {
            delta_c: self.gamma_c,
            delta_omega: self.gamma_omega,
            delta_y: self.gamma_y,
            delta_z: self.gamma_z,
        }
    }

    /// Plain gradient descent with step `gamma_g` as a degenerate recursion.
    pub fn gd_coefficients(&self) -> TmCoefficients {
        TmCoefficients::gradient_descent(self.gamma_g)
    }
}

/// Which online controller produced a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Rhgd,
    Rhag,
    Rhtm,
    SubMpc,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rhgd => "rhgd",
            Algorithm::Rhag => "rhag",
            Algorithm::Rhtm => "rhtm",
            Algorithm::SubMpc => "submpc",
        }
    }

    /// The multiplicative factor by which `K` inner iterations shrink the
    /// initialization regret. The accelerated-gradient factor is the standard
    /// strongly-convex estimate; the truncated-horizon baseline has none.
    pub fn bound_factor(&self, zeta: f64, k: usize) -> f64 {
        match self {
            Algorithm::Rhgd => zeta * ((zeta - 1.0) / zeta).powi(k as i32),
            Algorithm::Rhtm => {
                let r = (zeta.sqrt() - 1.0) / zeta.sqrt();
                zeta * zeta * r.powi(2 * k as i32)
            }
            Algorithm::Rhag => 2.0 * (1.0 - 1.0 / zeta.sqrt()).powi(k as i32),
            Algorithm::SubMpc => f64::NAN,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Initialization rule: produces `z_tau(0)` from the stage costs revealed so
/// far (everything up to stage `tau - 1`).
pub trait InitOracle {
    fn name(&self) -> &'static str;
    fn init(
        &mut self,
        tau: usize,
        canonical: &CanonicalSystem,
        costs: &GatedCosts<'_>,
    ) -> Result<DVector<f64>>;
}

/// Follow the optimal steady state: `z_tau(0)` is the actuated part of the
/// steady state that minimizes the newest revealed stage cost pair.
///
/// Quadratic stages use the closed form `z^e = F_2 theta` (extended with the
/// control-target term when the control cost is off-center); anything else
/// solves the reduced steady-state problem by gradient descent.
pub struct FossOracle;

/// Gradient-norm stop for the reduced steady-state solve.
const FOSS_GRAD_TOL: f64 = 1e-10;
const FOSS_MAX_ITERS: usize = 100_000;

impl InitOracle for FossOracle {
    fn name(&self) -> &'static str {
        "foss"
    }

    fn init(
        &mut self,
        tau: usize,
        canonical: &CanonicalSystem,
        costs: &GatedCosts<'_>,
    ) -> Result<DVector<f64>> {
        let stage = tau - 1;
        let f = costs.f(stage);
        let g = costs.g(stage);
        let f1 = lqt::steady_state_basis(canonical);
        let m = canonical.input_dim();
        let gmap = nalgebra::DMatrix::identity(m, m) - canonical.actuated_rows() * &f1;

        if let (Some(fq), Some(gq)) = (f.as_quadratic(), g.as_quadratic()) {
            let hess =
                f1.transpose() * &fq.weight * &f1 + gmap.transpose() * &gq.weight * &gmap;
            let rhs = f1.transpose() * &fq.weight * &fq.center
                + gmap.transpose() * &gq.weight * &gq.center;
            return crate::linalg::solve(&hess, &rhs)
                .map_err(|_| Error::SteadyStateSolveFailed { residual: f64::NAN });
        }

        // Reduced problem min_z f(F_1 z) + g((I - A(I,:)F_1) z) by gradient
        // descent with step 1/(l_f |F_1|^2 + l_g |I - A(I,:)F_1|^2).
        let lf = crate::linalg::spectral_norm(&f1);
        let lg = crate::linalg::spectral_norm(&gmap);
        let (l_f, l_g) = (costs.sequence().l_f, costs.sequence().l_g);
        let step = 1.0 / (l_f * lf * lf + l_g * lg * lg);
        let grad = |z: &DVector<f64>| {
            f1.transpose() * f.gradient(&(&f1 * z)) + gmap.transpose() * g.gradient(&(&gmap * z))
        };
        let (z, norm, _) = gradient_descent_vec(
            DVector::zeros(m),
            grad,
            step,
            FOSS_GRAD_TOL,
            FOSS_MAX_ITERS,
        );
        if norm > 1e-6 {
            return Err(Error::SteadyStateSolveFailed { residual: norm });
        }
        Ok(z)
    }
}

/// Initializes every coordinate at zero. Useful as a worst-case oracle.
pub struct ZeroOracle;

impl InitOracle for ZeroOracle {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn init(
        &mut self,
        _tau: usize,
        canonical: &CanonicalSystem,
        _costs: &GatedCosts<'_>,
    ) -> Result<DVector<f64>> {
        Ok(DVector::zeros(canonical.input_dim()))
    }
}

/// A completed online run.
#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub algorithm: Algorithm,
    pub trajectory: Trajectory,
    /// The decision sequence `z(K)` the controls were read from.
    pub z_final: ZPath,
    pub k: usize,
    pub w: usize,
    pub zeta: f64,
    pub oracle_name: String,
    /// Stage-cost gradient evaluations: `2p + 1` per partial-gradient call.
    pub gradient_evaluations: u64,
    /// Stage-cost accesses made by the initialization oracle (one `f` and one
    /// `g` per initialized coordinate).
    pub oracle_evaluations: u64,
}

/// Gradient descent in the receding-horizon loop.
pub fn rhgd_run(
    instance: &Instance,
    w: usize,
    oracle: &mut dyn InitOracle,
    steps: &StepSizes,
) -> Result<OnlineRun> {
    run_online(instance, w, oracle, &steps.gd_coefficients(), Algorithm::Rhgd)
}

/// Triple momentum in the receding-horizon loop.
pub fn rhtm_run(
    instance: &Instance,
    w: usize,
    oracle: &mut dyn InitOracle,
    steps: &StepSizes,
) -> Result<OnlineRun> {
    run_online(instance, w, oracle, &steps.tm_coefficients(), Algorithm::Rhtm)
}

/// Nesterov's accelerated gradient in the receding-horizon loop.
pub fn rhag_run(instance: &Instance, w: usize, oracle: &mut dyn InitOracle) -> Result<OnlineRun> {
    let sp = instance.smoothness();
    let coeff = rhag_coefficients(sp.l_c, sp.zeta)?;
    run_online(instance, w, oracle, &coeff, Algorithm::Rhag)
}

/// View over one momentum level's per-stage values, backed by the shared
/// history for non-positive indices.
struct LevelView<'a> {
    history: &'a [DVector<f64>],
    values: &'a [Option<DVector<f64>>],
    p: usize,
}

impl ZView for LevelView<'_> {
    fn z(&self, t: i64) -> &DVector<f64> {
        if t >= 1 {
            self.values[(t - 1) as usize]
                .as_ref()
                .expect("stage value read before it was produced")
        } else {
            let idx = t - (1 - self.p as i64);
            assert!(idx >= 0, "z index {t} below the history window");
            &self.history[idx as usize]
        }
    }
}

/// The shared online loop. At each time `t` in `1-W..N-1` it initializes
/// `z_{t+W}(0)`, performs the backward pass of momentum updates
/// `z_{t+W-jp}(j)` for `j = 1..K`, and from `t = 0` on applies
/// `u_t = z_{t+1}(K) - A(I,:) x_t` to the real system. Stage indices outside
/// `1..=N` are skipped while `j` keeps counting, so every variable still
/// receives exactly `K` updates.
pub fn run_online(
    instance: &Instance,
    w: usize,
    oracle: &mut dyn InitOracle,
    coeff: &TmCoefficients,
    algorithm: Algorithm,
) -> Result<OnlineRun> {
    if w < 1 {
        return Err(Error::Config {
            field: "w".into(),
            reason: "lookahead must be at least 1".into(),
        });
    }
    let canonical = &instance.canonical;
    let n_stages = instance.horizon();
    let p = canonical.p;
    let k = (w - 1) / p;
    let sp = instance.smoothness();

    let gate = GatedCosts::new(&instance.costs);
    let history = history_from_x0(canonical, &instance.x0);
    let a_rows = canonical.actuated_rows();

    // Per-level grids; omega[j], y[j] and the final z. omega(-1) = omega(0).
    let mut omega: Vec<Vec<Option<DVector<f64>>>> = vec![vec![None; n_stages]; k + 1];
    let mut yvals: Vec<Vec<Option<DVector<f64>>>> = vec![vec![None; n_stages]; k + 1];
    let mut z_final: Vec<Option<DVector<f64>>> = vec![None; n_stages];

    let mut states: Vec<DVector<f64>> = Vec::with_capacity(n_stages + 1);
    let mut controls: Vec<DVector<f64>> = Vec::with_capacity(n_stages);
    states.push(instance.x0.clone());

    let mut gradient_calls: u64 = 0;
    let mut oracle_evaluations: u64 = 0;

    let t_start = 1 - w as i64;
    for t in t_start..=(n_stages as i64 - 1) {
        let limit = t + w as i64 - 1;
        gate.allow_up_to(limit);

        // Step 1: initialize the newest coordinate.
        let tau0 = t + w as i64;
        if tau0 >= 1 && tau0 <= n_stages as i64 {
            let z0 = oracle.init(tau0 as usize, canonical, &gate)?;
            if !z0.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteIterate(t));
            }
            oracle_evaluations += 2;
            let idx = (tau0 - 1) as usize;
            omega[0][idx] = Some(z0.clone());
            yvals[0][idx] = Some(z0.clone());
            if k == 0 {
                z_final[idx] = Some(z0);
            }
        }

        // Step 2: backward momentum updates.
        for j in 1..=k {
            let tau = t + w as i64 - (j * p) as i64;
            if tau < 1 || tau > n_stages as i64 {
                continue;
            }
            let idx = (tau - 1) as usize;
            let grad = {
                let view = LevelView {
                    history: &history,
                    values: &yvals[j - 1],
                    p,
                };
                partial_gradient(canonical, &gate, &view, tau)?
            };
            gradient_calls += 1;

            let w_prev = omega[j - 1][idx]
                .as_ref()
                .expect("previous momentum level missing");
            let w_prev2 = if j >= 2 {
                omega[j - 2][idx].as_ref().expect("momentum level j-2 missing")
            } else {
                w_prev
            };
            let w_new =
                w_prev * (1.0 + coeff.delta_omega) - w_prev2 * coeff.delta_omega - &grad * coeff.delta_c;
            let y_new = &w_new * (1.0 + coeff.delta_y) - w_prev * coeff.delta_y;
            let z_new = &w_new * (1.0 + coeff.delta_z) - w_prev * coeff.delta_z;
            if !w_new.iter().all(|v| v.is_finite()) || !z_new.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteIterate(t));
            }
            omega[j][idx] = Some(w_new);
            yvals[j][idx] = Some(y_new);
            if j == k {
                z_final[idx] = Some(z_new);
            }
        }

        // Step 3: apply the control computed from z_{t+1}(K).
        if t >= 0 {
            let idx = t as usize;
            let z_next = z_final[idx]
                .as_ref()
                .expect("z(K) for the next stage must be finalized before it is applied");
            let x_t = &states[idx];
            let u_t = z_next - &a_rows * x_t;
            let x_next = canonical.step(x_t, &u_t);
            controls.push(u_t);
            states.push(x_next);
        }
    }

    if let Some((accessed, limit)) = gate.violation() {
        return Err(Error::OracleInformationViolation {
            t: accessed - w as i64 + 1,
            accessed,
            limit,
        });
    }

    let cost = reformulate::trajectory_cost(&instance.costs, &states, &controls);
    let z_final_path = ZPath::new(
        canonical,
        &instance.x0,
        z_final
            .into_iter()
            .map(|z| z.expect("every stage receives its final update"))
            .collect(),
    );

    Ok(OnlineRun {
        algorithm,
        trajectory: Trajectory {
            states,
            controls,
            cost,
        },
        z_final: z_final_path,
        k,
        w,
        zeta: sp.zeta,
        oracle_name: oracle.name().to_string(),
        gradient_evaluations: gradient_calls * (2 * p as u64 + 1),
        oracle_evaluations,
    })
}

/// Pure oracle rollout: the controller follows `z(0)` with no gradient
/// refinement, which is the `W = 1` special case of the online loop.
pub fn oracle_rollout(instance: &Instance, oracle: &mut dyn InitOracle) -> Result<OnlineRun> {
    let sp = instance.smoothness();
    let steps = compute_stepsizes(sp.l_c, sp.zeta)?;
    rhgd_run(instance, 1, oracle, &steps)
}

/// Dynamic-regret summary for one online run.
#[derive(Clone, Debug)]
pub struct RegretReport {
    pub algorithm: Algorithm,
    pub oracle_name: String,
    pub w: usize,
    pub k: usize,
    pub zeta: f64,
    pub j_online: f64,
    pub j_star: f64,
    pub regret: f64,
    /// `bound_factor * Regret(oracle)` upper-bounds the run's regret for the
    /// gradient and momentum controllers.
    pub bound_factor: f64,
    pub gradient_evaluations: u64,
}

/// Tolerance below the offline optimum treated as an oracle failure.
const NEGATIVE_REGRET_TOL: f64 = 1e-7;

pub fn dynamic_regret(run: &OnlineRun, j_star: f64) -> Result<RegretReport> {
    let regret = run.trajectory.cost - j_star;
    if regret < -NEGATIVE_REGRET_TOL {
        return Err(Error::NegativeRegretBeyondTolerance(-regret));
    }
    Ok(RegretReport {
        algorithm: run.algorithm,
        oracle_name: run.oracle_name.clone(),
        w: run.w,
        k: run.k,
        zeta: run.zeta,
        j_online: run.trajectory.cost,
        j_star,
        regret,
        bound_factor: run.algorithm.bound_factor(run.zeta, run.k),
        gradient_evaluations: run.gradient_evaluations,
    })
}
