//! Batch first-order optimizers on the reformulated cost, used as offline
//! solvers and as the reference path for the online/batch equivalence checks,
//! plus small vector-space optimizers for inner subproblems.

use crate::canonical::CanonicalSystem;
use crate::cost::StageCosts;
use crate::error::Result;
use crate::reformulate::{full_gradient, partial_gradient, ZPath};
use nalgebra::DVector;

/// Triple-momentum coefficients. With `delta_omega = delta_y = delta_z = 0`
/// the recursion reduces to plain gradient descent, and with
/// `delta_omega = delta_y = rho, delta_z = 0` it is Nesterov's accelerated
/// gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TmCoefficients {
    pub delta_c: f64,
    pub delta_omega: f64,
    pub delta_y: f64,
    pub delta_z: f64,
}

impl TmCoefficients {
    pub fn gradient_descent(step: f64) -> Self {
        TmCoefficients {
            delta_c: step,
            delta_omega: 0.0,
            delta_y: 0.0,
            delta_z: 0.0,
        }
    }
}

/// `K` iterations of batch gradient descent on `C(z)` from `z0`.
pub fn batch_gradient_descent<P: StageCosts>(
    canonical: &CanonicalSystem,
    costs: &P,
    z0: &ZPath,
    step: f64,
    iterations: usize,
) -> Result<ZPath> {
    let mut z = z0.clone();
    for _ in 0..iterations {
        let grads = full_gradient(canonical, costs, &z)?;
        for (zt, g) in z.vars_mut().iter_mut().zip(grads.iter()) {
            *zt -= g * step;
        }
    }
    Ok(z)
}

/// One triple-momentum sweep: overwrites `omega_next`, `y`, `z` in place.
fn tm_sweep<P: StageCosts>(
    canonical: &CanonicalSystem,
    costs: &P,
    coeff: &TmCoefficients,
    omega_prev: &ZPath,
    omega: &ZPath,
    y: &mut ZPath,
    z: &mut ZPath,
) -> Result<ZPath> {
    let n = y.len();
    let mut omega_next = omega.clone();
    for t in 1..=n as i64 {
        let g = partial_gradient(canonical, costs, y, t)?;
        let idx = (t - 1) as usize;
        let w = &omega.vars()[idx];
        let w_prev = &omega_prev.vars()[idx];
        omega_next.vars_mut()[idx] =
            w * (1.0 + coeff.delta_omega) - w_prev * coeff.delta_omega - g * coeff.delta_c;
    }
    for idx in 0..n {
        let w_new = &omega_next.vars()[idx];
        let w = &omega.vars()[idx];
        y.vars_mut()[idx] = w_new * (1.0 + coeff.delta_y) - w * coeff.delta_y;
        z.vars_mut()[idx] = w_new * (1.0 + coeff.delta_z) - w * coeff.delta_z;
    }
    Ok(omega_next)
}

/// `K` iterations of batch triple momentum on `C(z)` from `z0`, with
/// `omega(-1) = omega(0) = y(0) = z(0)`.
pub fn batch_triple_momentum<P: StageCosts>(
    canonical: &CanonicalSystem,
    costs: &P,
    z0: &ZPath,
    coeff: &TmCoefficients,
    iterations: usize,
) -> Result<ZPath> {
    let mut omega_prev = z0.clone();
    let mut omega = z0.clone();
    let mut y = z0.clone();
    let mut z = z0.clone();
    for _ in 0..iterations {
        let omega_next = tm_sweep(canonical, costs, coeff, &omega_prev, &omega, &mut y, &mut z)?;
        omega_prev = omega;
        omega = omega_next;
    }
    Ok(z)
}

/// Run batch triple momentum until the gradient norm falls below `tol`
/// (or `max_iterations`); returns the final iterate, its gradient norm and
/// the iteration count.
pub fn batch_tm_to_tolerance<P: StageCosts>(
    canonical: &CanonicalSystem,
    costs: &P,
    z0: &ZPath,
    coeff: &TmCoefficients,
    tol: f64,
    max_iterations: usize,
) -> Result<(ZPath, f64, usize)> {
    let mut omega_prev = z0.clone();
    let mut omega = z0.clone();
    let mut y = z0.clone();
    let mut z = z0.clone();
    let mut iters = 0;
    loop {
        let grads = full_gradient(canonical, costs, &z)?;
        let norm: f64 = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if norm <= tol || iters >= max_iterations {
            return Ok((z, norm, iters));
        }
        let omega_next = tm_sweep(canonical, costs, coeff, &omega_prev, &omega, &mut y, &mut z)?;
        omega_prev = omega;
        omega = omega_next;
        iters += 1;
    }
}

/// Plain gradient descent on a vector objective, stopping at gradient norm
/// `tol` or at the iteration cap.
pub fn gradient_descent_vec<G>(
    x0: DVector<f64>,
    grad: G,
    step: f64,
    tol: f64,
    max_iterations: usize,
) -> (DVector<f64>, f64, usize)
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0;
    let mut iters = 0;
    loop {
        let g = grad(&x);
        let norm = g.norm();
        if norm <= tol || iters >= max_iterations {
            return (x, norm, iters);
        }
        x -= g * step;
        iters += 1;
    }
}

/// Nesterov's accelerated gradient for strongly convex smooth objectives,
/// with momentum `(sqrt(zeta)-1)/(sqrt(zeta)+1)` and step `1/l`.
pub fn nesterov_vec<G>(
    x0: DVector<f64>,
    grad: G,
    l: f64,
    zeta: f64,
    iterations: usize,
) -> DVector<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let rho = if zeta > 1.0 {
        (zeta.sqrt() - 1.0) / (zeta.sqrt() + 1.0)
    } else {
        0.0
    };
    let mut x = x0.clone();
    let mut y = x0;
    for _ in 0..iterations {
        let x_next = &y - grad(&y) / l;
        y = &x_next + (&x_next - &x) * rho;
        x = x_next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn gradient_descent_reaches_quadratic_minimum() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0, -1.0]);
        let grad = |x: &DVector<f64>| &a * x - &b;
        let (x, norm, _) = gradient_descent_vec(DVector::zeros(2), grad, 0.5, 1e-12, 10_000);
        assert!(norm <= 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-10);
        assert!((x[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn nesterov_converges_on_ill_conditioned_quadratic() {
        let a = DMatrix::from_row_slice(2, 2, &[100.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_row_slice(&[100.0, 3.0]);
        let grad = |x: &DVector<f64>| &a * x - &b;
        let x = nesterov_vec(DVector::zeros(2), grad, 100.0, 100.0, 2_000);
        assert!((x[0] - 1.0).abs() < 1e-8);
        assert!((x[1] - 3.0).abs() < 1e-8);
    }
}
