//! Two-wheel robot path tracking with nonlinear kinematics. The tracking
//! problem is planned over the positions alone; headings, speeds and turn
//! rates are recovered from position differences, which gives the objective
//! the same finite coupling structure the linear controllers exploit.

use crate::error::{Error, Result};
use nalgebra::{DVector, Vector2};

/// Robot pose: position and heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Which update rule refines the planned positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobotAlgorithm {
    Rhgd,
    Rhag,
    Rhtm,
}

impl RobotAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            RobotAlgorithm::Rhgd => "rhgd",
            RobotAlgorithm::Rhag => "rhag",
            RobotAlgorithm::Rhtm => "rhtm",
        }
    }
}

/// How the newest planned position is initialized when the window slides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobotInit {
    /// Hold the plan of the previous stage. By the update schedule this
    /// chains back to the start position, so the whole burden falls on the
    /// gradient refinement.
    PreviousHold,
    /// Park at the newest revealed reference point: the optimal stationary
    /// point of the freshest stage cost, mirroring the steady-state
    /// initialization of the linear controllers.
    ReferenceSteady,
}

impl RobotInit {
    pub fn name(&self) -> &'static str {
        match self {
            RobotInit::PreviousHold => "hold",
            RobotInit::ReferenceSteady => "reference",
        }
    }
}

/// The closed heart-shaped curve at parameter `s`.
pub fn heart_curve(s: f64) -> Vector2<f64> {
    let x = 16.0 * (s - 6.0).sin().powi(3);
    let y = 13.0 * s.cos()
        - 5.0 * (2.0 * s - 12.0).cos()
        - 2.0 * (3.0 * s - 18.0).cos()
        - (4.0 * s - 24.0).cos();
    Vector2::new(x, y)
}

/// Tracking configuration: control interval, inner simulation step, horizon,
/// reference path and the stage cost coefficients.
#[derive(Clone, Debug)]
pub struct RobotInstance {
    pub dt: f64,
    pub sim_dt: f64,
    pub horizon: usize,
    /// The curve parameter advances by `time_scale * dt` per stage; the
    /// default traverses the closed curve once over the horizon. Zero for
    /// instances built from an explicit reference path.
    pub time_scale: f64,
    /// Reference positions `ref_0..ref_N`.
    pub reference_points: Vec<Vector2<f64>>,
    /// Position-error weights `c_0..c_N`.
    pub position_weights: Vec<f64>,
    /// Speed-penalty weights `c^v_0..c^v_N`.
    pub speed_weights: Vec<f64>,
    /// Turn-penalty weights `c^w_0..c^w_N`.
    pub turn_weights: Vec<f64>,
    /// Displacements shorter than this carry the previous heading, the same
    /// fallback that handles exactly zero displacement. This also bounds the
    /// curvature of the turn terms, which otherwise grows without limit as a
    /// segment degenerates.
    pub heading_eps: f64,
}

impl RobotInstance {
    /// Curve-tracking instance with the default coefficients: no position
    /// penalty at the start, no motion penalty at the end, `15 dt^2` on speed
    /// and turn elsewhere. The heading threshold defaults to a quarter of
    /// the median reference segment.
    pub fn new(horizon: usize, dt: f64, sim_dt: f64) -> Self {
        let time_scale = 2.0 * std::f64::consts::PI / (horizon as f64 * dt);
        let reference_points = (0..=horizon)
            .map(|t| heart_curve(time_scale * t as f64 * dt))
            .collect();
        let mut instance = RobotInstance::with_reference(reference_points, dt, sim_dt);
        instance.time_scale = time_scale;
        instance
    }

    /// Instance tracking an explicit reference path.
    pub fn with_reference(reference_points: Vec<Vector2<f64>>, dt: f64, sim_dt: f64) -> Self {
        assert!(reference_points.len() >= 4, "need at least three stages");
        let horizon = reference_points.len() - 1;
        let motion = 15.0 * dt * dt;
        let mut position_weights = vec![1.0; horizon + 1];
        position_weights[0] = 0.0;
        let mut speed_weights = vec![motion; horizon + 1];
        speed_weights[horizon] = 0.0;
        let mut turn_weights = vec![motion; horizon + 1];
        turn_weights[horizon] = 0.0;
        let mut lens: Vec<f64> = (0..horizon)
            .map(|t| (reference_points[t + 1] - reference_points[t]).norm())
            .collect();
        lens.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let heading_eps = 0.25 * lens[horizon / 2].max(1e-9);
        RobotInstance {
            dt,
            sim_dt,
            horizon,
            time_scale: 0.0,
            reference_points,
            position_weights,
            speed_weights,
            turn_weights,
            heading_eps,
        }
    }

    pub fn standard(horizon: usize) -> Self {
        RobotInstance::new(horizon, 0.025, 0.001)
    }

    /// Reference point at stage `t`.
    pub fn reference(&self, t: usize) -> Vector2<f64> {
        self.reference_points[t]
    }

    pub fn reference_path(&self) -> Vec<Vector2<f64>> {
        self.reference_points.clone()
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Integrate the kinematics `x' = v cos(heading), y' = v sin(heading),
/// heading' = w` over one control interval at the inner resolution.
pub fn robot_step(pose: Pose, v: f64, w: f64, dt: f64, sim_dt: f64) -> Pose {
    let substeps = (dt / sim_dt).round() as usize;
    debug_assert!(
        (dt - substeps as f64 * sim_dt).abs() < 1e-9,
        "dt must be a multiple of sim_dt"
    );
    let mut p = pose;
    for _ in 0..substeps.max(1) {
        p.x += sim_dt * p.heading.cos() * v;
        p.y += sim_dt * p.heading.sin() * v;
        p.heading += sim_dt * w;
    }
    p
}

/// Heading, speed and turn rate of the segment pair `(p0 -> p1 -> p2)`.
/// Displacements below `eps` keep the previous heading and, for the first
/// segment, report the speed from the actual displacement.
pub fn controls_of_positions(
    p0: Vector2<f64>,
    p1: Vector2<f64>,
    p2: Vector2<f64>,
    dt: f64,
    prev_heading: f64,
    eps: f64,
) -> (f64, f64, f64) {
    let d0 = p1 - p0;
    let heading = if d0.norm() > eps {
        d0.y.atan2(d0.x)
    } else {
        prev_heading
    };
    let v = d0.norm() / dt;
    let d1 = p2 - p1;
    let heading_next = if d1.norm() > eps {
        d1.y.atan2(d1.x)
    } else {
        heading
    };
    let w = wrap_angle(heading_next - heading) / dt;
    (heading, v, w)
}

/// Headings, speeds and turn rates along a position path. Headings of
/// sub-threshold segments carry over from the previous segment; a turn rate
/// is measurable only between two live segments and is zero otherwise (a
/// near-stationary robot has no observable heading change). The final turn
/// rate has no third support point and is likewise zero.
pub fn path_kinematics(
    positions: &[Vector2<f64>],
    dt: f64,
    eps: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n_stages = positions.len() - 1;
    let mut headings = Vec::with_capacity(n_stages);
    let mut speeds = Vec::with_capacity(n_stages);
    let mut live = Vec::with_capacity(n_stages);
    let mut prev_heading = 0.0;
    for t in 0..n_stages {
        let d = positions[t + 1] - positions[t];
        let is_live = d.norm() > eps;
        let heading = if is_live { d.y.atan2(d.x) } else { prev_heading };
        headings.push(heading);
        speeds.push(d.norm() / dt);
        live.push(is_live);
        prev_heading = heading;
    }
    let mut rates = Vec::with_capacity(n_stages);
    for t in 0..n_stages {
        if t + 1 < n_stages && live[t] && live[t + 1] {
            rates.push(wrap_angle(headings[t + 1] - headings[t]) / dt);
        } else {
            rates.push(0.0);
        }
    }
    (headings, speeds, rates)
}

/// Total tracking cost of a position path:
/// `sum c_t |p_t - ref_t|^2 + c^v_t v_t^2 + c^w_t w_t^2`.
pub fn robot_total_cost(positions: &[Vector2<f64>], instance: &RobotInstance) -> f64 {
    assert_eq!(positions.len(), instance.horizon + 1, "path length");
    let (_, speeds, rates) = path_kinematics(positions, instance.dt, instance.heading_eps);
    let mut total = 0.0;
    for t in 0..=instance.horizon {
        let d = positions[t] - instance.reference(t);
        total += instance.position_weights[t] * d.norm_squared();
        if t < instance.horizon {
            total += instance.speed_weights[t] * speeds[t] * speeds[t];
            total += instance.turn_weights[t] * rates[t] * rates[t];
        }
    }
    total
}

/// Derivative of the segment heading with respect to its endpoint
/// displacement: `d atan2(dy, dx) = (-dy, dx)/|d|^2`.
fn heading_jacobian(d: Vector2<f64>) -> Vector2<f64> {
    let n2 = d.norm_squared();
    if n2 == 0.0 {
        Vector2::zeros()
    } else {
        Vector2::new(-d.y / n2, d.x / n2)
    }
}

/// Analytic gradient of the total cost with respect to position `s`
/// (1 <= s <= N; position 0 is pinned). Touches the position term at `s`,
/// speed terms at `s-1, s` and turn terms at `s-2, s-1, s`. Segments below
/// the heading threshold contribute no turn derivative, matching the
/// carried-heading fallback in the cost.
pub fn position_gradient(
    positions: &[Vector2<f64>],
    instance: &RobotInstance,
    s: usize,
) -> Vector2<f64> {
    let n_stages = instance.horizon;
    assert!(s >= 1 && s <= n_stages);
    let dt = instance.dt;
    let dt2 = dt * dt;
    let eps = instance.heading_eps;
    let mut grad = (positions[s] - instance.reference(s)) * 2.0 * instance.position_weights[s];

    // Speed terms |p_{t+1} - p_t|^2 / dt^2.
    if s >= 1 {
        let t = s - 1;
        let d = positions[s] - positions[t];
        grad += d * (2.0 * instance.speed_weights[t] / dt2);
    }
    if s < n_stages {
        let d = positions[s + 1] - positions[s];
        grad -= d * (2.0 * instance.speed_weights[s] / dt2);
    }

    // Turn terms (wrap(heading_{t+1} - heading_t)/dt)^2 for t <= N-2, with
    // heading derivatives d atan2 / d p_{t+1} = +J(d_t), d / d p_t = -J(d_t).
    for t in s.saturating_sub(2)..=s {
        if t + 2 > n_stages {
            continue;
        }
        let da = positions[t + 1] - positions[t];
        let db = positions[t + 2] - positions[t + 1];
        if da.norm() <= eps || db.norm() <= eps {
            continue;
        }
        let w = wrap_angle(db.y.atan2(db.x) - da.y.atan2(da.x)) / dt;
        let coeff = 2.0 * instance.turn_weights[t] * w / dt;
        let ja = heading_jacobian(da);
        let jb = heading_jacobian(db);
        if s == t {
            grad += ja * coeff;
        } else if s == t + 1 {
            grad += (-jb - ja) * coeff;
        } else {
            grad += jb * coeff;
        }
    }
    grad
}

/// Central finite-difference gradient, the fallback oracle for the analytic
/// expressions.
pub fn position_gradient_fd(
    positions: &[Vector2<f64>],
    instance: &RobotInstance,
    s: usize,
    step: f64,
) -> Vector2<f64> {
    let mut out = Vector2::zeros();
    for axis in 0..2 {
        let mut plus = positions.to_vec();
        let mut minus = positions.to_vec();
        plus[s][axis] += step;
        minus[s][axis] -= step;
        out[axis] =
            (robot_total_cost(&plus, instance) - robot_total_cost(&minus, instance)) / (2.0 * step);
    }
    out
}

/// Empirical smoothness of the position-space objective: power iteration on
/// central-difference Hessian-vector products around `positions`.
pub fn estimate_smoothness(positions: &[Vector2<f64>], instance: &RobotInstance) -> f64 {
    let n_stages = instance.horizon;
    let dim = 2 * n_stages;
    let grad_flat = |flat: &DVector<f64>| -> DVector<f64> {
        let mut pts = positions.to_vec();
        for t in 1..=n_stages {
            pts[t] = Vector2::new(flat[2 * (t - 1)], flat[2 * (t - 1) + 1]);
        }
        let mut g = DVector::zeros(dim);
        for t in 1..=n_stages {
            let gt = position_gradient(&pts, instance, t);
            g[2 * (t - 1)] = gt.x;
            g[2 * (t - 1) + 1] = gt.y;
        }
        g
    };
    let mut base = DVector::zeros(dim);
    for t in 1..=n_stages {
        base[2 * (t - 1)] = positions[t].x;
        base[2 * (t - 1) + 1] = positions[t].y;
    }
    let eps = 1e-5;
    let mut v = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    let mut lambda = 1.0_f64;
    for _ in 0..30 {
        let hv = (grad_flat(&(&base + &v * eps)) - grad_flat(&(&base - &v * eps))) / (2.0 * eps);
        lambda = hv.norm();
        if lambda <= 1e-12 {
            break;
        }
        v = hv / lambda;
    }
    lambda.max(1e-6)
}

/// A finished tracking run: the refined plan and the executed trajectory.
#[derive(Clone, Debug)]
pub struct RobotRun {
    pub algorithm: RobotAlgorithm,
    pub init: RobotInit,
    pub w: usize,
    pub k: usize,
    pub planned: Vec<Vector2<f64>>,
    pub executed: Vec<Pose>,
    pub commanded: Vec<(f64, f64)>,
    pub planned_cost: f64,
    pub executed_cost: f64,
    pub smoothness_estimate: f64,
}

/// Receding-horizon tracking over the positions. Structure mirrors the
/// linear controllers with an effective coupling depth of two: initialize
/// the newest position, refine backward with `K = floor((W-1)/2)` updates,
/// then realize the first planned segment through the kinematic integrator.
/// A horizon shorter than the window clamps the window.
///
/// The step size is `1/(2 L_hat)` with `L_hat` the larger of the power-
/// iteration smoothness estimates at the initialization plan and at the
/// reference path.
pub fn robot_rhgc(
    instance: &RobotInstance,
    w: usize,
    algorithm: RobotAlgorithm,
    init: RobotInit,
    k_override: Option<usize>,
) -> Result<RobotRun> {
    if w < 3 {
        return Err(Error::Config {
            field: "w".into(),
            reason: "the position coupling spans two future stages; need W >= 3".into(),
        });
    }
    let n_stages = instance.horizon;
    let w = w.min(n_stages).max(3);
    let p_eff = 2usize;
    let mut k = (w - 1) / p_eff;
    if let Some(limit) = k_override {
        k = k.min(limit);
    }

    let start = instance.reference(0);
    let init_plan: Vec<Vector2<f64>> = match init {
        RobotInit::PreviousHold => vec![start; n_stages + 1],
        RobotInit::ReferenceSteady => {
            let mut pts = vec![start];
            pts.extend((1..=n_stages).map(|t| instance.reference(t - 1)));
            pts
        }
    };
    let l_hat = estimate_smoothness(&init_plan, instance)
        .max(estimate_smoothness(&instance.reference_path(), instance));
    let step_base = 1.0 / (2.0 * l_hat);
    let mu_hat = 2.0
        * instance.position_weights[1..]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .max(1e-6);
    let zeta_hat = (2.0 * l_hat / mu_hat).max(1.0);
    let rho = (zeta_hat.sqrt() - 1.0) / (zeta_hat.sqrt() + 1.0);
    let (dc, d_omega, dy, dz) = match algorithm {
        RobotAlgorithm::Rhgd => (step_base, 0.0, 0.0, 0.0),
        RobotAlgorithm::Rhag => (step_base, rho, rho, 0.0),
        RobotAlgorithm::Rhtm => {
            let phi = 1.0 - 1.0 / zeta_hat.sqrt();
            (
                (1.0 + phi) * step_base,
                phi * phi / (2.0 - phi),
                phi * phi / ((1.0 + phi) * (2.0 - phi)),
                if phi > 0.0 {
                    phi * phi / (1.0 - phi * phi)
                } else {
                    0.0
                },
            )
        }
    };

    // Momentum grids over refinement levels; index [j][stage-1].
    let mut omega: Vec<Vec<Option<Vector2<f64>>>> = vec![vec![None; n_stages]; k + 1];
    let mut yvals: Vec<Vec<Option<Vector2<f64>>>> = vec![vec![None; n_stages]; k + 1];
    let mut z_final: Vec<Option<Vector2<f64>>> = vec![None; n_stages];

    let mut executed = Vec::with_capacity(n_stages + 1);
    let mut commanded = Vec::with_capacity(n_stages);

    // Positions visible to a gradient evaluation at one level: the pinned
    // start at index 0, the level's values elsewhere, and the init plan for
    // stages not yet reached.
    let assemble = |level: &Vec<Option<Vector2<f64>>>| -> Vec<Vector2<f64>> {
        let mut pts = init_plan.clone();
        for (i, v) in level.iter().enumerate() {
            if let Some(p) = v {
                pts[i + 1] = *p;
            }
        }
        pts
    };

    let t_start = 1 - w as i64;
    for t in t_start..=(n_stages as i64 - 1) {
        // Step 1: initialize the newest coordinate.
        let tau0 = t + w as i64;
        if tau0 >= 1 && tau0 <= n_stages as i64 {
            let idx = (tau0 - 1) as usize;
            let value = match init {
                RobotInit::PreviousHold => {
                    if idx == 0 {
                        start
                    } else {
                        omega[0][idx - 1].expect("previous stage initialized")
                    }
                }
                RobotInit::ReferenceSteady => instance.reference(idx),
            };
            omega[0][idx] = Some(value);
            yvals[0][idx] = Some(value);
            if k == 0 {
                z_final[idx] = Some(value);
            }
        }

        // Step 2: backward refinement.
        for j in 1..=k {
            let tau = t + w as i64 - (j * p_eff) as i64;
            if tau < 1 || tau > n_stages as i64 {
                continue;
            }
            let idx = (tau - 1) as usize;
            let pts = assemble(&yvals[j - 1]);
            let grad = position_gradient(&pts, instance, tau as usize);
            let w_prev = omega[j - 1][idx].expect("level j-1 value present");
            let w_prev2 = if j >= 2 {
                omega[j - 2][idx].expect("level j-2 value present")
            } else {
                w_prev
            };
            let w_new = w_prev * (1.0 + d_omega) - w_prev2 * d_omega - grad * dc;
            if !w_new.x.is_finite() || !w_new.y.is_finite() {
                return Err(Error::NonFiniteIterate(t));
            }
            omega[j][idx] = Some(w_new);
            yvals[j][idx] = Some(w_new * (1.0 + dy) - w_prev * dy);
            if j == k {
                z_final[idx] = Some(w_new * (1.0 + dz) - w_prev * dz);
            }
        }

        // Step 3: realize the next planned position on the robot.
        if t >= 0 {
            let idx = t as usize;
            if executed.is_empty() {
                // Align the start heading with the first planned segment.
                let first = z_final[0].expect("first stage planned");
                let d = first - start;
                let heading = if d.norm() > 0.0 { d.y.atan2(d.x) } else { 0.0 };
                executed.push(Pose {
                    x: start.x,
                    y: start.y,
                    heading,
                });
            }
            let pose = *executed.last().unwrap();
            let target = z_final[idx].expect("next stage planned");
            let here = Vector2::new(pose.x, pose.y);
            let after = if idx + 1 < n_stages {
                // Latest refinement of the stage after next steers the turn.
                (0..=k).rev().find_map(|j| omega[j][idx + 1])
            } else {
                None
            };
            // Speed covers the along-track part of the gap; the cross-track
            // part is taken up by the heading correction. Commanding the full
            // gap while the heading still points elsewhere feeds the
            // cross-track error back into the speed and destabilizes the
            // rollout.
            let gap = target - here;
            let dir = Vector2::new(pose.heading.cos(), pose.heading.sin());
            let v = (gap.dot(&dir) / instance.dt).max(0.0);
            let w_cmd = match after {
                Some(nxt) => {
                    let d = nxt - target;
                    let next_heading = if d.norm() > instance.heading_eps {
                        d.y.atan2(d.x)
                    } else {
                        pose.heading
                    };
                    wrap_angle(next_heading - pose.heading) / instance.dt
                }
                None => 0.0,
            };
            let next_pose = robot_step(pose, v, w_cmd, instance.dt, instance.sim_dt);
            commanded.push((v, w_cmd));
            executed.push(next_pose);
        }
    }

    let mut planned = vec![start];
    planned.extend(z_final.into_iter().map(|z| z.expect("stage planned")));
    let planned_cost = robot_total_cost(&planned, instance);
    let executed_positions: Vec<Vector2<f64>> =
        executed.iter().map(|p| Vector2::new(p.x, p.y)).collect();
    let executed_cost = robot_total_cost(&executed_positions, instance);

    Ok(RobotRun {
        algorithm,
        init,
        w,
        k,
        planned,
        executed,
        commanded,
        planned_cost,
        executed_cost,
        smoothness_estimate: l_hat,
    })
}
