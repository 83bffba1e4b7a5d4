//! Aggregation of sweep rows: per-lookahead means, piecewise-constancy
//! checks, and the decay slope of the mean regret across inner-iteration
//! counts.

use crate::harness::experiment::SweepRow;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct MeanRegret {
    pub algorithm: String,
    pub w: usize,
    pub k: usize,
    pub mean_regret: f64,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct ConstancyViolation {
    pub algorithm: String,
    pub seed: u64,
    pub k: usize,
    pub spread: f64,
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub means: Vec<MeanRegret>,
    /// Least-squares slope of `log(mean regret)` against `K` per algorithm.
    pub log_slopes: BTreeMap<String, f64>,
    /// Rows sharing (algorithm, seed, K) whose regrets differ beyond 1e-9.
    pub constancy_violations: Vec<ConstancyViolation>,
}

/// Summarize a sweep table. Regret must be piecewise constant across equal-K
/// lookaheads for deterministic initialization oracles; any spread beyond
/// 1e-9 is flagged.
pub fn sweep_report(rows: &[SweepRow]) -> SweepSummary {
    let mut by_aw: BTreeMap<(String, usize), (f64, usize, usize)> = BTreeMap::new();
    for row in rows {
        let entry = by_aw
            .entry((row.algorithm.clone(), row.w))
            .or_insert((0.0, 0, row.k));
        entry.0 += row.regret;
        entry.1 += 1;
    }
    let means: Vec<MeanRegret> = by_aw
        .into_iter()
        .map(|((algorithm, w), (sum, count, k))| MeanRegret {
            algorithm,
            w,
            k,
            mean_regret: sum / count as f64,
            samples: count,
        })
        .collect();

    let mut log_slopes = BTreeMap::new();
    let algorithms: std::collections::BTreeSet<String> =
        means.iter().map(|m| m.algorithm.clone()).collect();
    for alg in algorithms {
        // One point per K (means across equal-K windows coincide).
        let mut per_k: BTreeMap<usize, f64> = BTreeMap::new();
        for m in means.iter().filter(|m| m.algorithm == alg) {
            per_k.entry(m.k).or_insert(m.mean_regret);
        }
        let pts: Vec<(f64, f64)> = per_k
            .into_iter()
            .filter(|(_, r)| *r > 0.0)
            .map(|(k, r)| (k as f64, r.ln()))
            .collect();
        if pts.len() >= 2 {
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            log_slopes.insert(alg, (n * sxy - sx * sy) / (n * sxx - sx * sx));
        }
    }

    let mut groups: BTreeMap<(String, u64, usize), (f64, f64)> = BTreeMap::new();
    for row in rows {
        let entry = groups
            .entry((row.algorithm.clone(), row.seed, row.k))
            .or_insert((row.regret, row.regret));
        entry.0 = entry.0.min(row.regret);
        entry.1 = entry.1.max(row.regret);
    }
    let constancy_violations = groups
        .into_iter()
        .filter_map(|((algorithm, seed, k), (lo, hi))| {
            let spread = hi - lo;
            (spread > 1e-9).then_some(ConstancyViolation {
                algorithm,
                seed,
                k,
                spread,
            })
        })
        .collect();

    SweepSummary {
        means,
        log_slopes,
        constancy_violations,
    }
}

impl SweepSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("algorithm        W   K   samples   mean regret\n");
        for m in &self.means {
            out.push_str(&format!(
                "{:<14} {:>3} {:>3} {:>9}   {:.6e}\n",
                m.algorithm, m.w, m.k, m.samples, m.mean_regret
            ));
        }
        out.push('\n');
        for (alg, slope) in &self.log_slopes {
            out.push_str(&format!(
                "log mean-regret slope per K [{alg}]: {slope:.4}\n"
            ));
        }
        if self.constancy_violations.is_empty() {
            out.push_str("piecewise constancy across equal-K windows: ok\n");
        } else {
            for v in &self.constancy_violations {
                out.push_str(&format!(
                    "piecewise constancy violated: {} seed {} K {} spread {:.3e}\n",
                    v.algorithm, v.seed, v.k, v.spread
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(algorithm: &str, w: usize, k: usize, seed: u64, regret: f64) -> SweepRow {
        SweepRow {
            algorithm: algorithm.into(),
            w,
            k,
            seed,
            j_online: regret,
            j_star: 0.0,
            regret,
            bound_factor: 1.0,
            gradient_evaluations: 0,
        }
    }

    #[test]
    fn summary_means_match_arithmetic() {
        let rows = vec![
            row("rhtm", 3, 1, 0, 2.0),
            row("rhtm", 3, 1, 1, 4.0),
            row("rhtm", 5, 2, 0, 1.0),
            row("rhtm", 5, 2, 1, 1.0),
        ];
        let summary = sweep_report(&rows);
        assert_eq!(summary.means.len(), 2);
        assert_eq!(summary.means[0].mean_regret, 3.0);
        assert_eq!(summary.means[1].mean_regret, 1.0);
        assert!(summary.constancy_violations.is_empty());
    }

    #[test]
    fn unequal_regret_at_equal_k_is_flagged() {
        let rows = vec![row("rhgd", 3, 1, 0, 2.0), row("rhgd", 4, 1, 0, 2.5)];
        let summary = sweep_report(&rows);
        assert_eq!(summary.constancy_violations.len(), 1);
        assert!((summary.constancy_violations[0].spread - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slope_of_geometric_decay_is_log_rate() {
        let rows = vec![
            row("rhtm", 1, 0, 0, 8.0),
            row("rhtm", 3, 1, 0, 4.0),
            row("rhtm", 5, 2, 0, 2.0),
            row("rhtm", 7, 3, 0, 1.0),
        ];
        let summary = sweep_report(&rows);
        let slope = summary.log_slopes["rhtm"];
        assert!((slope - (-(2.0_f64.ln()))).abs() < 1e-12);
    }
}
