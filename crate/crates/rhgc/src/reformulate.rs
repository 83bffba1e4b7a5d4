//! Reparameterization of feasible trajectories onto the actuated state
//! coordinates `z_t = x_t^{I}`, turning the constrained control problem into
//! an unconstrained cost `C(z)` whose stage terms couple only finitely many
//! neighboring `z_t`.

use crate::canonical::CanonicalSystem;
use crate::cost::{CostSequence, StageCosts};
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// An online optimal-control problem: a canonical system, stage costs over an
/// `N`-step horizon, and the initial state.
#[derive(Clone, Debug)]
pub struct Instance {
    pub canonical: CanonicalSystem,
    pub costs: CostSequence,
    pub x0: DVector<f64>,
}

impl Instance {
    pub fn new(canonical: CanonicalSystem, costs: CostSequence, x0: DVector<f64>) -> Result<Self> {
        if x0.len() != canonical.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "x0 has dimension {} but the state dimension is {}",
                x0.len(),
                canonical.state_dim()
            )));
        }
        Ok(Instance {
            canonical,
            costs,
            x0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.costs.horizon()
    }

    pub fn smoothness(&self) -> SmoothnessParams {
        smoothness_params(
            &self.canonical,
            self.costs.mu_f,
            self.costs.l_f,
            self.costs.l_g,
        )
        .expect("cost sequence constants are validated at construction")
    }
}

/// Strong-convexity and smoothness constants of `C(z)` and their ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessParams {
    pub mu_c: f64,
    pub l_c: f64,
    pub zeta: f64,
}

/// `mu_c = mu_f`, `l_c = p l_f + (p+1) l_g |[I_m, -A(I,:)]|^2` with the
/// spectral norm, `zeta = l_c / mu_c`.
pub fn smoothness_params(
    canonical: &CanonicalSystem,
    mu_f: f64,
    l_f: f64,
    l_g: f64,
) -> Result<SmoothnessParams> {
    if !(mu_f > 0.0) {
        return Err(Error::NonPositiveConstant {
            name: "mu_f",
            value: mu_f,
        });
    }
    if !(l_f >= mu_f) {
        return Err(Error::NonPositiveConstant {
            name: "l_f",
            value: l_f,
        });
    }
    if !(l_g > 0.0) {
        return Err(Error::NonPositiveConstant {
            name: "l_g",
            value: l_g,
        });
    }
    let m = canonical.input_dim();
    let n = canonical.state_dim();
    let a_rows = canonical.actuated_rows();
    let mut block = DMatrix::zeros(m, m + n);
    block.view_mut((0, 0), (m, m)).copy_from(&DMatrix::identity(m, m));
    block.view_mut((0, m), (m, n)).copy_from(&(-&a_rows));
    let norm = linalg::spectral_norm(&block);
    let p = canonical.p as f64;
    let l_c = p * l_f + (p + 1.0) * l_g * norm * norm;
    Ok(SmoothnessParams {
        mu_c: mu_f,
        l_c,
        zeta: l_c / mu_f,
    })
}

/// Extract `z = x^{I}` from a state vector.
pub fn extract_z(canonical: &CanonicalSystem, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(canonical.input_dim(), |j, _| x[canonical.indices[j] - 1])
}

/// Read access to the decision sequence by signed stage index. Indices
/// `1..=N` address the variables; `1-p..=0` address the history induced by
/// the initial state.
pub trait ZView {
    fn z(&self, t: i64) -> &DVector<f64>;
}

/// The decision variable of the reformulated problem: `z_1..z_N` plus the
/// `p` history vectors `z_{1-p}..z_0` pinned by `x_0`.
#[derive(Clone, Debug)]
pub struct ZPath {
    history: Vec<DVector<f64>>,
    vars: Vec<DVector<f64>>,
    p: usize,
}

impl ZPath {
    pub fn new(canonical: &CanonicalSystem, x0: &DVector<f64>, vars: Vec<DVector<f64>>) -> Self {
        ZPath {
            history: history_from_x0(canonical, x0),
            vars,
            p: canonical.p,
        }
    }

    pub fn zeros(canonical: &CanonicalSystem, x0: &DVector<f64>, n_stages: usize) -> Self {
        let m = canonical.input_dim();
        ZPath::new(
            canonical,
            x0,
            (0..n_stages).map(|_| DVector::zeros(m)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn history(&self) -> &[DVector<f64>] {
        &self.history
    }

    pub fn vars(&self) -> &[DVector<f64>] {
        &self.vars
    }

    pub fn vars_mut(&mut self) -> &mut [DVector<f64>] {
        &mut self.vars
    }

    /// Flatten the variables into one stacked vector (`z_1` first).
    pub fn stacked(&self) -> DVector<f64> {
        let m = if self.vars.is_empty() { 0 } else { self.vars[0].len() };
        let mut out = DVector::zeros(m * self.vars.len());
        for (t, z) in self.vars.iter().enumerate() {
            out.rows_mut(t * m, m).copy_from(z);
        }
        out
    }

    pub fn from_stacked(
        canonical: &CanonicalSystem,
        x0: &DVector<f64>,
        stacked: &DVector<f64>,
        n_stages: usize,
    ) -> Self {
        let m = canonical.input_dim();
        assert_eq!(stacked.len(), m * n_stages);
        let vars = (0..n_stages)
            .map(|t| stacked.rows(t * m, m).into_owned())
            .collect();
        ZPath::new(canonical, x0, vars)
    }
}

impl ZView for ZPath {
    fn z(&self, t: i64) -> &DVector<f64> {
        if t >= 1 {
            &self.vars[(t - 1) as usize]
        } else {
            let idx = t - (1 - self.p as i64);
            assert!(idx >= 0, "z index {t} below the history window");
            &self.history[idx as usize]
        }
    }
}

/// History vectors `z_{1-p}..z_0` chosen so the state reassembly reproduces
/// `x_0` exactly; block entries older than their chain length are zero, which
/// matches `z_t = 0` for `t <= 0` when `x_0 = 0`.
pub fn history_from_x0(canonical: &CanonicalSystem, x0: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = canonical.input_dim();
    let p = canonical.p;
    let mut history = vec![DVector::zeros(m); p];
    for i in 0..m {
        let p_i = canonical.p_list[i] as i64;
        let offset = canonical.block_offset(i);
        // x_0 block i holds (z^i_{1-p_i}, ..., z^i_0).
        for s in (1 - p_i)..=0 {
            let hist_idx = (s - (1 - p as i64)) as usize;
            let coord = offset + (s + p_i - 1) as usize;
            history[hist_idx][i] = x0[coord];
        }
    }
    history
}

/// Assemble `x_t` from the window `z_{t-p_i+1}..z_t` per block.
pub fn state_at<V: ZView>(canonical: &CanonicalSystem, zs: &V, t: i64) -> DVector<f64> {
    let n = canonical.state_dim();
    let mut x = DVector::zeros(n);
    for i in 0..canonical.input_dim() {
        let p_i = canonical.p_list[i] as i64;
        let offset = canonical.block_offset(i);
        for s in 0..p_i {
            x[offset + s as usize] = zs.z(t - p_i + 1 + s)[i];
        }
    }
    x
}

/// `u_t = z_{t+1} - A(I,:) x_t`.
pub fn control_at<V: ZView>(canonical: &CanonicalSystem, zs: &V, t: i64) -> DVector<f64> {
    let x_t = state_at(canonical, zs, t);
    zs.z(t + 1) - canonical.actuated_rows() * x_t
}

/// Assemble `x_t` from an explicit window slice `z_{t-p+1}..z_t`.
pub fn state_of_window(canonical: &CanonicalSystem, window: &[DVector<f64>]) -> Result<DVector<f64>> {
    let p = canonical.p;
    if window.len() < p {
        return Err(Error::WindowTooShort {
            got: window.len(),
            need: p,
        });
    }
    let tail = &window[window.len() - p..];
    let n = canonical.state_dim();
    let mut x = DVector::zeros(n);
    for i in 0..canonical.input_dim() {
        let p_i = canonical.p_list[i];
        let offset = canonical.block_offset(i);
        for s in 0..p_i {
            x[offset + s] = tail[p - p_i + s][i];
        }
    }
    Ok(x)
}

/// Recover `u_t` from an explicit window slice `z_{t-p+1}..z_{t+1}`.
pub fn control_of_window(
    canonical: &CanonicalSystem,
    window: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let p = canonical.p;
    if window.len() < p + 1 {
        return Err(Error::WindowTooShort {
            got: window.len(),
            need: p + 1,
        });
    }
    let x_t = state_of_window(canonical, &window[..window.len() - 1])?;
    Ok(&window[window.len() - 1] - canonical.actuated_rows() * x_t)
}

/// Total reformulated cost `C(z)`; equals the trajectory cost of the induced
/// `(x, u)` sequence.
pub fn total_cost<P: StageCosts, V: ZView>(
    canonical: &CanonicalSystem,
    costs: &P,
    zs: &V,
    n_stages: usize,
) -> f64 {
    let mut c = 0.0;
    for t in 0..=n_stages {
        let x = state_at(canonical, zs, t as i64);
        c += costs.f(t).value(&x);
    }
    for t in 0..n_stages {
        let u = control_at(canonical, zs, t as i64);
        c += costs.g(t).value(&u);
    }
    c
}

/// Partial gradient of the total cost with respect to `z_t`.
///
/// The state-cost terms at stages `t..t+p-1` and control-cost terms at
/// `t-1..t+p-1` are the only ones touching `z_t`; stages outside `[0, N]`
/// (respectively `[0, N-1]`) are clamped away, which also routes the terminal
/// cost into the gradients of the last `p` variables.
pub fn partial_gradient<P: StageCosts, V: ZView>(
    canonical: &CanonicalSystem,
    costs: &P,
    zs: &V,
    t: i64,
) -> Result<DVector<f64>> {
    let n_stages = costs.horizon() as i64;
    if t < 1 || t > n_stages {
        return Err(Error::StageOutOfRange {
            t,
            n: n_stages as usize,
        });
    }
    let m = canonical.input_dim();
    let p = canonical.p as i64;
    let a_rows = canonical.actuated_rows();
    let mut grad = DVector::zeros(m);

    for tau in t..=(t + p - 1).min(n_stages) {
        let x = state_at(canonical, zs, tau);
        let gf = costs.f(tau as usize).gradient(&x);
        for i in 0..m {
            let p_i = canonical.p_list[i] as i64;
            let r = t - tau + p_i;
            if r >= 1 && r <= p_i {
                grad[i] += gf[canonical.block_offset(i) + (r - 1) as usize];
            }
        }
    }

    for tau in (t - 1).max(0)..=(t + p - 1).min(n_stages - 1) {
        let u = control_at(canonical, zs, tau);
        let gg = costs.g(tau as usize).gradient(&u);
        if tau + 1 == t {
            grad += &gg;
        }
        for i in 0..m {
            let p_i = canonical.p_list[i] as i64;
            let r = t - tau + p_i;
            if r >= 1 && r <= p_i {
                let col = canonical.block_offset(i) + (r - 1) as usize;
                grad[i] -= a_rows.column(col).dot(&gg);
            }
        }
    }

    Ok(grad)
}

/// Gradient of `C` with respect to every variable, stage by stage.
pub fn full_gradient<P: StageCosts, V: ZView>(
    canonical: &CanonicalSystem,
    costs: &P,
    zs: &V,
) -> Result<Vec<DVector<f64>>> {
    (1..=costs.horizon() as i64)
        .map(|t| partial_gradient(canonical, costs, zs, t))
        .collect()
}

/// A realized state/control sequence with its cost.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub cost: f64,
}

/// The `(x, u)` trajectory induced by a decision sequence.
pub fn trajectory_of_z(
    canonical: &CanonicalSystem,
    costs: &CostSequence,
    zpath: &ZPath,
) -> Result<Trajectory> {
    let n_stages = costs.horizon();
    if zpath.len() != n_stages {
        return Err(Error::LengthMismatch(format!(
            "z has {} stages but the cost horizon is {}",
            zpath.len(),
            n_stages
        )));
    }
    let mut states = Vec::with_capacity(n_stages + 1);
    let mut controls = Vec::with_capacity(n_stages);
    for t in 0..=n_stages {
        states.push(state_at(canonical, zpath, t as i64));
    }
    for t in 0..n_stages {
        controls.push(control_at(canonical, zpath, t as i64));
    }
    let cost = trajectory_cost(costs, &states, &controls);
    Ok(Trajectory {
        states,
        controls,
        cost,
    })
}

pub fn trajectory_cost(
    costs: &CostSequence,
    states: &[DVector<f64>],
    controls: &[DVector<f64>],
) -> f64 {
    let n_stages = costs.horizon();
    let mut c = 0.0;
    for t in 0..n_stages {
        c += costs.state_cost(t).value(&states[t]);
        c += costs.control_cost(t).value(&controls[t]);
    }
    c + costs.state_cost(n_stages).value(&states[n_stages])
}

/// Simulate the system forward under a control sequence.
pub fn simulate(
    canonical: &CanonicalSystem,
    costs: &CostSequence,
    x0: &DVector<f64>,
    controls: &[DVector<f64>],
) -> Trajectory {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0.clone());
    for u in controls {
        let next = canonical.step(states.last().unwrap(), u);
        states.push(next);
    }
    let cost = trajectory_cost(costs, &states, controls);
    Trajectory {
        states,
        controls: controls.to_vec(),
        cost,
    }
}

/// Extract the decision sequence of a feasible trajectory.
pub fn zpath_of_trajectory(
    canonical: &CanonicalSystem,
    states: &[DVector<f64>],
) -> ZPath {
    let vars = states[1..]
        .iter()
        .map(|x| extract_z(canonical, x))
        .collect();
    ZPath::new(canonical, &states[0], vars)
}

/// Affine representation `grad C(z) = H z + d` of a quadratic instance's
/// gradient, assembled by probing the gradient map column by column. Only
/// valid when every stage cost is quadratic.
pub fn quadratic_gradient_map(inst: &Instance) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n_stages = inst.horizon();
    let m = inst.canonical.input_dim();
    let dim = n_stages * m;
    let base = ZPath::zeros(&inst.canonical, &inst.x0, n_stages);
    let g0 = stack(&full_gradient(&inst.canonical, &inst.costs, &base)?);
    let mut h = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut probe = base.clone();
        probe.vars_mut()[col / m][col % m] = 1.0;
        let g = stack(&full_gradient(&inst.canonical, &inst.costs, &probe)?);
        h.set_column(col, &(g - &g0));
    }
    Ok((h, g0))
}

fn stack(grads: &[DVector<f64>]) -> DVector<f64> {
    let m = grads[0].len();
    let mut out = DVector::zeros(m * grads.len());
    for (t, g) in grads.iter().enumerate() {
        out.rows_mut(t * m, m).copy_from(g);
    }
    out
}
