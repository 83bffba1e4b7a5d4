//! Seeded generators for random systems and tracking instances.

use crate::canonical::{to_canonical, verify_canonical, CanonicalSystem, LtiSystem};
use crate::lqt::QuadraticInstance;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform sampling ranges for instance weights and targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostRanges {
    pub q_diag: (f64, f64),
    pub r_diag: (f64, f64),
    pub target: (f64, f64),
}

impl Default for CostRanges {
    fn default() -> Self {
        CostRanges {
            q_diag: (1.0, 2.0),
            r_diag: (1.0, 2.0),
            target: (-10.0, 10.0),
        }
    }
}

/// A random canonical system: chain lengths drawn as a random composition of
/// `n` into `m` positive parts, actuated-row entries uniform in [-1, 1].
pub fn random_canonical(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CanonicalSystem {
    assert!(m >= 1 && m <= n);
    // Random composition: choose m-1 distinct cut points in 1..n.
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < m - 1 {
        let c = rng.gen_range(1..n);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    cuts.push(n);

    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut start = 0usize;
    for (i, &end) in cuts.iter().enumerate() {
        for row in start..end - 1 {
            a[(row, row + 1)] = 1.0;
        }
        for col in 0..n {
            a[(end - 1, col)] = rng.gen_range(-1.0..1.0);
        }
        b[(end - 1, i)] = 1.0;
        start = end;
    }
    verify_canonical(&a, &b).expect("constructed pattern is canonical")
}

/// A random dense controllable system, for exercising the transform path.
pub fn random_controllable(n: usize, m: usize, rng: &mut ChaCha8Rng) -> LtiSystem {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let sys = LtiSystem::new(a, b).expect("dimensions are valid");
        if sys.is_controllable() && to_canonical(&sys).is_ok() {
            return sys;
        }
    }
}

/// Random diagonal tracking instance on a given canonical system.
pub fn random_quadratic_instance(
    canonical: &CanonicalSystem,
    n_stages: usize,
    ranges: &CostRanges,
    rng: &mut ChaCha8Rng,
) -> QuadraticInstance {
    let n = canonical.state_dim();
    let m = canonical.input_dim();
    let q = (0..n_stages)
        .map(|_| {
            DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| {
                rng.gen_range(ranges.q_diag.0..ranges.q_diag.1)
            }))
        })
        .collect();
    let r = (0..n_stages)
        .map(|_| {
            DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| {
                rng.gen_range(ranges.r_diag.0..ranges.r_diag.1)
            }))
        })
        .collect();
    let targets = (0..=n_stages)
        .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(ranges.target.0..ranges.target.1)))
        .collect();
    let terminal = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| {
        rng.gen_range(ranges.q_diag.0..ranges.q_diag.1)
    }));
    QuadraticInstance::new(
        canonical.clone(),
        q,
        r,
        targets,
        terminal,
        DVector::zeros(n),
    )
    .expect("generated dimensions are consistent")
}
