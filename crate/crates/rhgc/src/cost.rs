//! Stage-cost representations: quadratic tracking costs, opaque convex costs,
//! per-stage sequences, and the gated provider that enforces the lookahead
//! information model.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::cell::Cell;
use std::sync::Arc;

/// A convex stage cost exposed through value and gradient queries.
pub trait CostFn: Send + Sync {
    fn value(&self, v: &DVector<f64>) -> f64;
    fn gradient(&self, v: &DVector<f64>) -> DVector<f64>;
}

/// `1/2 (v - center)' weight (v - center)` with symmetric positive-definite weight.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCost {
    pub weight: DMatrix<f64>,
    pub center: DVector<f64>,
}

impl QuadraticCost {
    pub fn new(weight: DMatrix<f64>, center: DVector<f64>) -> Self {
        assert_eq!(weight.nrows(), weight.ncols());
        assert_eq!(weight.nrows(), center.len());
        QuadraticCost { weight, center }
    }

    /// Pure penalty `1/2 v' W v`.
    pub fn centered(weight: DMatrix<f64>) -> Self {
        let n = weight.nrows();
        QuadraticCost::new(weight, DVector::zeros(n))
    }

    pub fn value(&self, v: &DVector<f64>) -> f64 {
        let d = v - &self.center;
        0.5 * d.dot(&(&self.weight * &d))
    }

    pub fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.weight * (v - &self.center)
    }
}

/// One stage cost; quadratic costs keep their matrices accessible for the
/// closed-form tracking machinery, anything else goes through `CostFn`.
#[derive(Clone)]
pub enum StageCost {
    Quadratic(QuadraticCost),
    Custom(Arc<dyn CostFn>),
}

impl StageCost {
    pub fn quadratic(weight: DMatrix<f64>, center: DVector<f64>) -> Self {
        StageCost::Quadratic(QuadraticCost::new(weight, center))
    }

    pub fn value(&self, v: &DVector<f64>) -> f64 {
        match self {
            StageCost::Quadratic(q) => q.value(v),
            StageCost::Custom(f) => f.value(v),
        }
    }

    pub fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            StageCost::Quadratic(q) => q.gradient(v),
            StageCost::Custom(f) => f.gradient(v),
        }
    }

    /// Hessian access, only available for quadratic stages.
    pub fn hessian(&self) -> Option<&DMatrix<f64>> {
        match self {
            StageCost::Quadratic(q) => Some(&q.weight),
            StageCost::Custom(_) => None,
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticCost> {
        match self {
            StageCost::Quadratic(q) => Some(q),
            StageCost::Custom(_) => None,
        }
    }
}

impl std::fmt::Debug for StageCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StageCost::Quadratic(q) => write!(f, "Quadratic({}x{})", q.weight.nrows(), q.weight.ncols()),
            StageCost::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Per-stage costs over an `N`-step horizon: state costs `f_0..f_N` (the last
/// one is the terminal cost) and control costs `g_0..g_{N-1}`, together with
/// the convexity and smoothness constants the step-size rules consume.
#[derive(Clone, Debug)]
pub struct CostSequence {
    state: Vec<StageCost>,
    control: Vec<StageCost>,
    pub mu_f: f64,
    pub l_f: f64,
    pub l_g: f64,
}

impl CostSequence {
    pub fn new(
        state: Vec<StageCost>,
        control: Vec<StageCost>,
        mu_f: f64,
        l_f: f64,
        l_g: f64,
    ) -> Result<Self> {
        if state.len() != control.len() + 1 {
            return Err(Error::LengthMismatch(format!(
                "{} state costs vs {} control costs; need one extra state cost for the terminal stage",
                state.len(),
                control.len()
            )));
        }
        if state.is_empty() || control.is_empty() {
            return Err(Error::LengthMismatch("horizon must be at least 1".into()));
        }
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
        Ok(CostSequence {
            state,
            control,
            mu_f,
            l_f,
            l_g,
        })
    }

    /// Number of control stages `N`.
    pub fn horizon(&self) -> usize {
        self.control.len()
    }

    pub fn state_cost(&self, t: usize) -> &StageCost {
        &self.state[t]
    }

    pub fn control_cost(&self, t: usize) -> &StageCost {
        &self.control[t]
    }
}

/// Read access to stage costs. The gated provider interposes on this trait so
/// the same gradient code serves both offline solvers and the online loop.
pub trait StageCosts {
    fn horizon(&self) -> usize;
    fn f(&self, t: usize) -> &StageCost;
    fn g(&self, t: usize) -> &StageCost;
}

impl StageCosts for CostSequence {
    fn horizon(&self) -> usize {
        self.horizon()
    }

    fn f(&self, t: usize) -> &StageCost {
        self.state_cost(t)
    }

    fn g(&self, t: usize) -> &StageCost {
        self.control_cost(t)
    }
}

/// Cost provider that records every stage index it serves. The online loop
/// raises the limit to `t + W - 1` as time advances; any access beyond the
/// limit is recorded and surfaces as an information violation after the run.
pub struct GatedCosts<'a> {
    inner: &'a CostSequence,
    limit: Cell<i64>,
    max_seen: Cell<i64>,
    violation: Cell<Option<(i64, i64)>>,
}

impl<'a> GatedCosts<'a> {
    pub fn new(inner: &'a CostSequence) -> Self {
        GatedCosts {
            inner,
            limit: Cell::new(-1),
            max_seen: Cell::new(-1),
            violation: Cell::new(None),
        }
    }

    /// Reveal stages `0..=limit`.
    pub fn allow_up_to(&self, limit: i64) {
        self.limit.set(limit);
    }

    /// The wrapped sequence, for constants that are not per-stage data.
    pub fn sequence(&self) -> &CostSequence {
        self.inner
    }

    pub fn limit(&self) -> i64 {
        self.limit.get()
    }

    /// Largest stage index served so far.
    pub fn max_accessed(&self) -> i64 {
        self.max_seen.get()
    }

    /// First access past the limit, as `(stage, limit_at_access)`.
    pub fn violation(&self) -> Option<(i64, i64)> {
        self.violation.get()
    }

    fn record(&self, t: usize) {
        let t = t as i64;
        if t > self.max_seen.get() {
            self.max_seen.set(t);
        }
        if t > self.limit.get() && self.violation.get().is_none() {
            self.violation.set(Some((t, self.limit.get())));
        }
    }
}

impl StageCosts for GatedCosts<'_> {
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn f(&self, t: usize) -> &StageCost {
        self.record(t);
        self.inner.state_cost(t)
    }

    fn g(&self, t: usize) -> &StageCost {
        self.record(t);
        self.inner.control_cost(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad1(w: f64, c: f64) -> StageCost {
        StageCost::quadratic(
            DMatrix::from_element(1, 1, w),
            DVector::from_element(1, c),
        )
    }

    #[test]
    fn quadratic_value_and_gradient() {
        let q = QuadraticCost::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]),
            DVector::from_row_slice(&[1.0, -1.0]),
        );
        let x = DVector::from_row_slice(&[2.0, 1.0]);
        assert!((q.value(&x) - (0.5 * (2.0 + 4.0 * 4.0))).abs() < 1e-14);
        let g = q.gradient(&x);
        assert!((g[0] - 2.0).abs() < 1e-14);
        assert!((g[1] - 8.0).abs() < 1e-14);
    }

    #[test]
    fn sequence_rejects_mismatched_lengths() {
        let f = vec![quad1(1.0, 0.0), quad1(1.0, 0.0)];
        let g = vec![quad1(1.0, 0.0), quad1(1.0, 0.0)];
        assert!(matches!(
            CostSequence::new(f, g, 1.0, 1.0, 1.0),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn gated_costs_record_max_access_and_violations() {
        let f = vec![quad1(1.0, 0.0), quad1(1.0, 0.0), quad1(1.0, 0.0)];
        let g = vec![quad1(1.0, 0.0), quad1(1.0, 0.0)];
        let seq = CostSequence::new(f, g, 1.0, 1.0, 1.0).unwrap();
        let gate = GatedCosts::new(&seq);
        gate.allow_up_to(1);
        let x = DVector::zeros(1);
        gate.f(0).value(&x);
        gate.g(1).value(&x);
        assert_eq!(gate.max_accessed(), 1);
        assert_eq!(gate.violation(), None);
        gate.f(2).value(&x);
        assert_eq!(gate.violation(), Some((2, 1)));
    }
}
