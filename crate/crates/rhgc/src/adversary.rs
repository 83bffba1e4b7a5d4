//! Adversarial tracking family with a tunable condition number: a cyclic
//! shift register driven through its last row, isotropic stage weights, and
//! epoch-constant random targets under a total-variation budget. The
//! stationarity system of its reformulated cost is an explicit block
//! tridiagonal matrix whose inverse has verifiable geometric decay.

use crate::algorithms::{
    compute_stepsizes, oracle_rollout, rhag_run, rhgd_run, rhtm_run, Algorithm, FossOracle,
};
use crate::baselines::offline_optimal;
use crate::canonical::{verify_canonical, CanonicalSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lqt::{solve_dare, QuadraticInstance};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Identifier of the pseudorandom generator baked into instances so regret
/// statistics can be replayed bit for bit.
pub const RNG_ALGORITHM: &str = "chacha8";

/// One member of the adversarial tracking family.
#[derive(Clone, Debug)]
pub struct LowerBoundInstance {
    pub canonical: CanonicalSystem,
    pub zeta: f64,
    /// State dimension; equals the controllability index.
    pub n: usize,
    pub horizon: usize,
    pub l_n: f64,
    pub theta_bar: f64,
    pub seed: u64,
    pub delta: f64,
    pub sigma: f64,
    /// Epoch length.
    pub epoch_len: usize,
    /// Number of epochs.
    pub epoch_count: usize,
    /// First stage of each epoch.
    pub epoch_starts: Vec<usize>,
    /// `theta_0..theta_N` with zero endpoints.
    pub targets: Vec<DVector<f64>>,
    /// Riccati solution used as the terminal weight.
    pub p_e: DMatrix<f64>,
    pub rng_algorithm: &'static str,
}

/// Cyclic shift system with a single input in the last row; `p = n`.
pub fn cyclic_system(n: usize) -> CanonicalSystem {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    a[(n - 1, 0)] = 1.0;
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    verify_canonical(&a, &b).expect("cyclic pattern is canonical")
}

/// Build an instance: `delta = 4/((zeta-1) p)`, `Q = delta I`, `R = 1`,
/// epoch-constant targets with every coordinate `±theta_bar/sqrt(n)`, zero
/// boundary targets, and terminal cost `1/2 x' P^e x`.
pub fn build_instance(
    zeta: f64,
    p: usize,
    horizon: usize,
    l_n: f64,
    theta_bar: f64,
    seed: u64,
) -> Result<LowerBoundInstance> {
    if !(zeta > 1.0) {
        return Err(Error::InadmissibleParameters(format!(
            "zeta must exceed 1, got {zeta}"
        )));
    }
    if p < 1 {
        return Err(Error::InadmissibleParameters("p must be at least 1".into()));
    }
    if !(theta_bar > 0.0) {
        return Err(Error::InadmissibleParameters(
            "theta_bar must be positive".into(),
        ));
    }
    if l_n < 4.0 * theta_bar {
        return Err(Error::InadmissibleParameters(format!(
            "variation budget too small: L_N = {l_n} < 4 theta_bar = {}",
            4.0 * theta_bar
        )));
    }
    if l_n > (2.0 * horizon as f64 + 1.0) * theta_bar {
        return Err(Error::InadmissibleParameters(format!(
            "variation budget too large: L_N = {l_n} > (2N+1) theta_bar = {}",
            (2.0 * horizon as f64 + 1.0) * theta_bar
        )));
    }
    if horizon < 3 {
        return Err(Error::InadmissibleParameters(
            "horizon must be at least 3".into(),
        ));
    }

    let n = p;
    let canonical = cyclic_system(n);
    let delta = 4.0 / ((zeta - 1.0) * p as f64);
    let sigma = theta_bar / (n as f64).sqrt();

    let budget = (l_n / (2.0 * theta_bar)).floor() as usize;
    let epoch_len = (horizon - 1).div_ceil(budget);
    let epoch_count = (horizon - 1).div_ceil(epoch_len);
    let epoch_starts: Vec<usize> = (0..epoch_count).map(|k| k * epoch_len + 1).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = vec![DVector::zeros(n); horizon + 1];
    for (k, &start) in epoch_starts.iter().enumerate() {
        let draw = DVector::from_fn(n, |_, _| {
            if rng.gen_bool(0.5) {
                sigma
            } else {
                -sigma
            }
        });
        let end = if k + 1 < epoch_count {
            epoch_starts[k + 1] - 1
        } else {
            horizon - 1
        };
        for t in start..=end {
            targets[t] = draw.clone();
        }
    }

    let q = DMatrix::identity(n, n) * delta;
    let r = DMatrix::identity(1, 1);
    let p_e = solve_dare(&q, &r, &canonical)?;

    Ok(LowerBoundInstance {
        canonical,
        zeta,
        n,
        horizon,
        l_n,
        theta_bar,
        seed,
        delta,
        sigma,
        epoch_len,
        epoch_count,
        epoch_starts,
        targets,
        p_e,
        rng_algorithm: RNG_ALGORITHM,
    })
}

impl LowerBoundInstance {
    /// `rho = (sqrt(zeta) - 1)/(sqrt(zeta) + 1)`, the decay rate of the
    /// stationarity-system inverse.
    pub fn rho(&self) -> f64 {
        (self.zeta.sqrt() - 1.0) / (self.zeta.sqrt() + 1.0)
    }

    /// Total variation of the target sequence including both boundary jumps.
    pub fn target_variation(&self) -> f64 {
        let mut total = self.targets[0].norm();
        for t in 1..=self.horizon {
            total += (&self.targets[t] - &self.targets[t - 1]).norm();
        }
        total
    }

    /// Largest lookahead admissible for the family's hypotheses.
    pub fn max_admissible_w(&self) -> usize {
        self.horizon / 3
    }

    pub fn quadratic(&self) -> QuadraticInstance {
        let n_stages = self.horizon;
        QuadraticInstance::new(
            self.canonical.clone(),
            vec![DMatrix::identity(self.n, self.n) * self.delta; n_stages],
            vec![DMatrix::identity(1, 1); n_stages],
            self.targets.clone(),
            self.p_e.clone(),
            DVector::zeros(self.n),
        )
        .expect("instance dimensions are consistent")
    }
}

/// The stationarity system `grad C(z) = H z - eta` of an instance.
#[derive(Clone, Debug)]
pub struct QuadraticSystemForm {
    pub h: DMatrix<f64>,
    pub eta: DVector<f64>,
    pub rho: f64,
}

/// Assemble `H` and `eta` from the quadratic expansion of the stage costs,
/// and solve for the offline optimum `z*`.
pub fn assemble_h_system(
    instance: &LowerBoundInstance,
) -> Result<(QuadraticSystemForm, DVector<f64>)> {
    let n = instance.n;
    let big_n = instance.horizon;
    let delta = instance.delta;

    let mut h = DMatrix::zeros(big_n, big_n);
    let mut eta = DVector::zeros(big_n);
    for s in 1..=big_n {
        // State-cost stages touching z_s: t in [s, s+n-1] clipped to < N.
        let f_count = ((s + n - 1).min(big_n - 1) as i64 - s as i64 + 1).max(0) as f64;
        let mut diag = delta * f_count + 1.0;
        if s + n <= big_n {
            diag += 1.0;
            h[(s - 1, s + n - 1)] = -1.0;
        }
        if s > big_n - n {
            diag += instance.p_e[(n + s - big_n - 1, n + s - big_n - 1)];
        }
        if s > n {
            h[(s - 1, s - n - 1)] = -1.0;
        }
        h[(s - 1, s - 1)] = diag;

        let mut rhs = 0.0;
        for j in 0..n {
            let t = s + j;
            if t <= big_n - 1 {
                rhs += instance.targets[t][n - 1 - j];
            }
        }
        eta[s - 1] = delta * rhs;
    }

    let z_star = linalg::solve(&h, &eta)?;
    Ok((
        QuadraticSystemForm {
            h,
            eta,
            rho: instance.rho(),
        },
        z_star,
    ))
}

/// Structural report on the Riccati solution of the family.
#[derive(Clone, Debug)]
pub struct PeReport {
    pub max_offdiagonal: f64,
    pub max_spacing_error: f64,
    pub q_first: f64,
    pub q_last: f64,
    /// `|q_n - (n delta + sqrt(n^2 delta^2 + 4 n delta))/2|`.
    pub closed_form_error: f64,
    pub diagonal_ok: bool,
    pub spacing_ok: bool,
    pub q_first_in_range: bool,
    pub pass: bool,
}

/// Check that `P^e` is diagonal with spacing `delta` and
/// `delta < q_1 < delta + 1`, and that `q_n` matches its closed form.
pub fn verify_pe_form(instance: &LowerBoundInstance) -> PeReport {
    let n = instance.n;
    let p_e = &instance.p_e;
    let delta = instance.delta;

    let mut max_offdiagonal: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_offdiagonal = max_offdiagonal.max(p_e[(i, j)].abs());
            }
        }
    }
    let mut max_spacing_error: f64 = 0.0;
    for i in 0..n - 1 {
        max_spacing_error =
            max_spacing_error.max((p_e[(i + 1, i + 1)] - p_e[(i, i)] - delta).abs());
    }
    let q_first = p_e[(0, 0)];
    let q_last = p_e[(n - 1, n - 1)];
    let nd = n as f64 * delta;
    let closed_form = (nd + (nd * nd + 4.0 * n as f64 * delta).sqrt()) / 2.0;
    let closed_form_error = (q_last - closed_form).abs();

    let diagonal_ok = max_offdiagonal <= 1e-8;
    let spacing_ok = max_spacing_error <= 1e-8;
    let q_first_in_range = q_first > delta && q_first < delta + 1.0;
    PeReport {
        max_offdiagonal,
        max_spacing_error,
        q_first,
        q_last,
        closed_form_error,
        diagonal_ok,
        spacing_ok,
        q_first_in_range,
        pass: diagonal_ok && spacing_ok && q_first_in_range && closed_form_error <= 1e-8,
    }
}

/// Decay report for the inverse of the stationarity system.
#[derive(Clone, Debug)]
pub struct YDecayReport {
    /// Worst slack of `y_{t,t+tau} - (1-rho)/(delta n + 2) rho^tau`.
    pub min_bound_slack: f64,
    /// Largest deviation of the inverse from the `y_{ij} I_n` block pattern.
    pub max_block_deviation: f64,
    /// Smallest block coefficient.
    pub min_block_entry: f64,
    pub pass: bool,
}

/// Verify the geometric lower bound on the inverse's upper-triangular block
/// coefficients. Requires the horizon to be a multiple of the dimension so
/// the inverse carries the scalar block structure.
pub fn verify_y_decay(instance: &LowerBoundInstance) -> Result<YDecayReport> {
    let n = instance.n;
    let big_n = instance.horizon;
    if big_n % n != 0 {
        return Err(Error::NonIntegerHorizonRatio { n_total: big_n, n });
    }
    let blocks = big_n / n;
    let (system, _) = assemble_h_system(instance)?;
    let y = linalg::invert(&system.h)?;

    // Extract block coefficients and check the y_{ij} I_n pattern.
    let mut coeff = DMatrix::zeros(blocks, blocks);
    let mut max_block_deviation: f64 = 0.0;
    for bi in 0..blocks {
        for bj in 0..blocks {
            let mut diag_sum = 0.0;
            for r in 0..n {
                diag_sum += y[(bi * n + r, bj * n + r)];
            }
            let c = diag_sum / n as f64;
            coeff[(bi, bj)] = c;
            for r in 0..n {
                for s in 0..n {
                    let expect = if r == s { c } else { 0.0 };
                    max_block_deviation =
                        max_block_deviation.max((y[(bi * n + r, bj * n + s)] - expect).abs());
                }
            }
        }
    }

    let rho = instance.rho();
    let floor_coeff = (1.0 - rho) / (instance.delta * n as f64 + 2.0);
    let mut min_bound_slack = f64::INFINITY;
    for t in 0..blocks {
        for s in t..blocks {
            let tau = (s - t) as i32;
            let slack = coeff[(t, s)] - floor_coeff * rho.powi(tau);
            min_bound_slack = min_bound_slack.min(slack);
        }
    }
    let min_block_entry = coeff.iter().cloned().fold(f64::INFINITY, f64::min);

    let pass = min_bound_slack >= -1e-12 && max_block_deviation <= 1e-10 && min_block_entry > 0.0;
    Ok(YDecayReport {
        min_bound_slack,
        max_block_deviation,
        min_block_entry,
        pass,
    })
}

/// Mean regret of an algorithm on the family at one inner-iteration count.
#[derive(Clone, Debug)]
pub struct LowerBoundRow {
    pub k: usize,
    pub w: usize,
    pub mean_regret: f64,
    pub mean_oracle_regret: f64,
    /// Guarantee factor times the measured oracle regret.
    pub upper_bound: f64,
    /// `rho^{2K} L_N`, the family's decay envelope before its constant.
    pub decay_envelope: f64,
}

/// Sweep summary across `K` values and seeds.
#[derive(Clone, Debug)]
pub struct LowerBoundSweep {
    pub rows: Vec<LowerBoundRow>,
    /// Largest `c` with `mean_regret >= c * rho^{2K} L_N` across all rows.
    pub fitted_constant: f64,
    /// Least-squares slope of `log(mean_regret)` against `K`.
    pub log_slope: f64,
}

/// Parameters identifying a family member apart from its seed.
#[derive(Clone, Copy, Debug)]
pub struct FamilyParams {
    pub zeta: f64,
    pub p: usize,
    pub horizon: usize,
    pub l_n_over_theta_bar: f64,
    pub theta_bar: f64,
}

/// Run an algorithm across seeds and `K` values, recording the mean regrets
/// next to the decay envelope and the guarantee computed from the measured
/// oracle regret.
pub fn empirical_lower_bound(
    params: &FamilyParams,
    algorithm: Algorithm,
    k_values: &[usize],
    seeds: &[u64],
) -> Result<LowerBoundSweep> {
    let mut rows = Vec::with_capacity(k_values.len());
    let mut fitted_constant = f64::INFINITY;

    for &k in k_values {
        let w = k * params.p + 1;
        let mut regret_sum = 0.0;
        let mut oracle_sum = 0.0;
        let mut zeta_run = 0.0;
        let mut l_n = 0.0;
        let mut rho = 0.0;
        for &seed in seeds {
            let inst = build_instance(
                params.zeta,
                params.p,
                params.horizon,
                params.l_n_over_theta_bar * params.theta_bar,
                params.theta_bar,
                seed,
            )?;
            rho = inst.rho();
            l_n = inst.l_n;
            let quad = inst.quadratic();
            let problem = quad.instance();
            let sp = problem.smoothness();
            let steps = compute_stepsizes(sp.l_c, sp.zeta)?;
            zeta_run = sp.zeta;
            let j_star = offline_optimal(&quad)?.j_star;

            let run = match algorithm {
                Algorithm::Rhgd => rhgd_run(&problem, w, &mut FossOracle, &steps)?,
                Algorithm::Rhtm => rhtm_run(&problem, w, &mut FossOracle, &steps)?,
                Algorithm::Rhag => rhag_run(&problem, w, &mut FossOracle)?,
                Algorithm::SubMpc => crate::baselines::submpc_run(&problem, w, 1)?,
            };
            let oracle = oracle_rollout(&problem, &mut FossOracle)?;
            regret_sum += run.trajectory.cost - j_star;
            oracle_sum += oracle.trajectory.cost - j_star;
        }
        let mean_regret = regret_sum / seeds.len() as f64;
        let mean_oracle_regret = oracle_sum / seeds.len() as f64;
        let envelope = rho.powi(2 * k as i32) * l_n;
        if envelope > 0.0 {
            fitted_constant = fitted_constant.min(mean_regret / envelope);
        }
        rows.push(LowerBoundRow {
            k,
            w,
            mean_regret,
            mean_oracle_regret,
            upper_bound: algorithm.bound_factor(zeta_run, k) * mean_oracle_regret,
            decay_envelope: envelope,
        });
    }

    let log_slope = fit_log_slope(&rows);
    Ok(LowerBoundSweep {
        rows,
        fitted_constant,
        log_slope,
    })
}

/// Least-squares slope of `log(mean_regret)` vs `K` over rows that sit above
/// the numerical floor.
fn fit_log_slope(rows: &[LowerBoundRow]) -> f64 {
    let floor = rows
        .first()
        .map(|r| r.mean_regret * 1e-12)
        .unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_regret > floor && r.mean_regret > 0.0)
        .map(|r| (r.k as f64, r.mean_regret.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
