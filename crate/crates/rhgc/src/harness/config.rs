//! Declarative experiment configuration, loaded from TOML with unknown keys
//! rejected.

use crate::error::{Error, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub costs: CostSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub robot: Option<RobotSpec>,
}

/// Which instance family the sweep runs on. Exactly the fields of the chosen
/// `kind` may be set.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub kind: String,
    pub horizon: usize,
    /// Explicit system matrices, row major.
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    /// Random-system dimensions.
    pub n: Option<usize>,
    pub m: Option<usize>,
    /// Adversarial-family parameters.
    pub zeta: Option<f64>,
    pub p: Option<usize>,
    /// Variation budget as a multiple of `theta_bar`.
    pub variation_budget: Option<f64>,
    pub theta_bar: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub q_diag: (f64, f64),
    pub r_diag: (f64, f64),
    pub theta: (f64, f64),
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec {
            q_diag: (1.0, 2.0),
            r_diag: (1.0, 2.0),
            theta: (-10.0, 10.0),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub algorithms: Vec<String>,
    pub w: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_submpc_iterations")]
    pub submpc_iterations: usize,
}

fn default_submpc_iterations() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    #[serde(default = "default_robot_horizon")]
    pub horizon: usize,
    #[serde(default = "default_robot_dt")]
    pub dt: f64,
    #[serde(default = "default_robot_sim_dt")]
    pub sim_dt: f64,
    #[serde(default = "default_robot_w")]
    pub w: usize,
    #[serde(default = "default_robot_algorithm")]
    pub algorithm: String,
}

fn default_robot_horizon() -> usize {
    160
}
fn default_robot_dt() -> f64 {
    0.025
}
fn default_robot_sim_dt() -> f64 {
    0.001
}
fn default_robot_w() -> usize {
    80
}
fn default_robot_algorithm() -> String {
    "rhag".to_string()
}

pub const KNOWN_ALGORITHMS: &[&str] = &["rhgd", "rhag", "rhtm", "submpc", "foss"];

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_str_validated(&text)
    }

    pub fn from_str_validated(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.w.is_empty() {
            return Err(Error::config("run.w", "lookahead list must not be empty"));
        }
        if self.run.w.iter().any(|&w| w < 1) {
            return Err(Error::config("run.w", "lookahead values must be at least 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "seed list must not be empty"));
        }
        if self.run.algorithms.is_empty() {
            return Err(Error::config("run.algorithms", "need at least one algorithm"));
        }
        for alg in &self.run.algorithms {
            if !KNOWN_ALGORITHMS.contains(&alg.as_str()) {
                return Err(Error::config(
                    "run.algorithms",
                    format!("unknown algorithm `{alg}`; known: {KNOWN_ALGORITHMS:?}"),
                ));
            }
        }
        if self.run.submpc_iterations < 1 {
            return Err(Error::config(
                "run.submpc_iterations",
                "iteration count must be at least 1",
            ));
        }
        if self.instance.horizon < 2 {
            return Err(Error::config("instance.horizon", "horizon must be at least 2"));
        }

        let spec = &self.instance;
        match spec.kind.as_str() {
            "explicit" => {
                let a = spec
                    .a
                    .as_ref()
                    .ok_or_else(|| Error::config("instance.a", "explicit kind needs matrix a"))?;
                let b = spec
                    .b
                    .as_ref()
                    .ok_or_else(|| Error::config("instance.b", "explicit kind needs matrix b"))?;
                let n = a.len();
                if n == 0 || a.iter().any(|row| row.len() != n) {
                    return Err(Error::config("instance.a", "a must be square"));
                }
                if b.len() != n || b.is_empty() {
                    return Err(Error::config("instance.b", "b must have n rows"));
                }
                let m = b[0].len();
                if m == 0 || b.iter().any(|row| row.len() != m) {
                    return Err(Error::config("instance.b", "b rows must share one width"));
                }
            }
            "lqt-random" => {
                let n = spec
                    .n
                    .ok_or_else(|| Error::config("instance.n", "lqt-random needs n"))?;
                let m = spec
                    .m
                    .ok_or_else(|| Error::config("instance.m", "lqt-random needs m"))?;
                if m < 1 || m > n {
                    return Err(Error::config("instance.m", "need 1 <= m <= n"));
                }
            }
            "lower-bound" => {
                let zeta = spec
                    .zeta
                    .ok_or_else(|| Error::config("instance.zeta", "lower-bound needs zeta"))?;
                if zeta <= 1.0 {
                    return Err(Error::config("instance.zeta", "zeta must exceed 1"));
                }
                spec.p
                    .ok_or_else(|| Error::config("instance.p", "lower-bound needs p"))?;
                spec.variation_budget.ok_or_else(|| {
                    Error::config("instance.variation_budget", "lower-bound needs a budget")
                })?;
            }
            other => {
                return Err(Error::config(
                    "instance.kind",
                    format!("unknown kind `{other}`; use explicit | lqt-random | lower-bound"),
                ));
            }
        }

        if let Some(robot) = &self.robot {
            if !["rhgd", "rhag", "rhtm"].contains(&robot.algorithm.as_str()) {
                return Err(Error::config(
                    "robot.algorithm",
                    format!("unknown robot algorithm `{}`", robot.algorithm),
                ));
            }
            if robot.dt <= 0.0 || robot.sim_dt <= 0.0 || robot.dt < robot.sim_dt {
                return Err(Error::config("robot.dt", "need dt >= sim_dt > 0"));
            }
        }
        Ok(())
    }
}

/// The configuration shipped for the two-state single-input tracking sweep.
/// The printed source for the lower row of `A` is ambiguous; this file uses
/// the reading `(-1/6, 5/6)` and the entries can be overridden.
pub fn example_sweep_config() -> String {
    let w: Vec<String> = (1..=13).map(|w| w.to_string()).collect();
    let seeds: Vec<String> = (0..25u64).map(|s| s.to_string()).collect();
    format!(
        r#"# Two-state single-input tracking sweep.
#
# The lower row of `a` is one reading of an ambiguously printed source value;
# override the entries freely, the sweep's qualitative behavior is robust to
# them.
[instance]
kind = "explicit"
horizon = 30
a = [[0.0, 1.0], [-0.16666666666666666, 0.8333333333333334]]
b = [[0.0], [1.0]]

[costs]
q_diag = [1.0, 2.0]
r_diag = [1.0, 2.0]
theta = [-10.0, 10.0]

[run]
algorithms = ["rhgd", "rhag", "rhtm", "submpc", "foss"]
submpc_iterations = 1
w = [{}]
seeds = [{}]
"#,
        w.join(", "),
        seeds.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_parses_and_validates() {
        let config = ExperimentConfig::from_str_validated(&example_sweep_config()).unwrap();
        assert_eq!(config.run.w.len(), 13);
        assert_eq!(config.instance.kind, "explicit");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = example_sweep_config().replace("[run]", "[run]\nbogus = 1");
        assert!(matches!(
            ExperimentConfig::from_str_validated(&text),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn empty_lookahead_list_is_rejected() {
        let text = example_sweep_config().replace("w = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13]", "w = []");
        let err = ExperimentConfig::from_str_validated(&text).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn unknown_algorithm_is_rejected() {
        let text = example_sweep_config().replace("\"rhgd\"", "\"mystery\"");
        assert!(ExperimentConfig::from_str_validated(&text).is_err());
    }
}
