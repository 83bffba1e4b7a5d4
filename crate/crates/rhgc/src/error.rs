use thiserror::Error;

/// Errors raised by the control, tracking and experiment machinery.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("matrix dimensions are inconsistent: {0}")]
    DimensionMismatch(String),
    #[error("system matrices are not in canonical form: offending entry at row {row}, col {col}")]
    NotCanonical { row: usize, col: usize },
    #[error("system is not controllable (controllability matrix rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },
    #[error("selected basis is numerically singular (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("state or input transform is singular")]
    SingularTransform,
    #[error("window provides {got} vectors but {need} are required")]
    WindowTooShort { got: usize, need: usize },
    #[error("sequence lengths do not match the horizon: {0}")]
    LengthMismatch(String),
    #[error("stage index {t} is outside the horizon 1..={n}")]
    StageOutOfRange { t: i64, n: usize },
    #[error("constant {name} must be positive, got {value}")]
    NonPositiveConstant { name: &'static str, value: f64 },
    #[error("condition number must be >= 1, got {0}")]
    InvalidConditionNumber(f64),
    #[error("steady-state solve failed, residual {residual:.3e}")]
    SteadyStateSolveFailed { residual: f64 },
    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("inner matrix R + B'PB is singular; check that the weights are positive definite")]
    SingularInnerMatrix,
    #[error("singular reduced Hessian in the steady-state problem")]
    SingularReducedHessian,
    #[error("initialization oracle or gradient read stage {accessed} at online time {t} (limit {limit})")]
    OracleInformationViolation { t: i64, accessed: i64, limit: i64 },
    #[error("iterate became non-finite at online time {0}")]
    NonFiniteIterate(i64),
    #[error("online cost is below the offline optimum by {0:.3e}; the offline oracle is suspect")]
    NegativeRegretBeyondTolerance(f64),
    #[error("lower-bound parameters inadmissible: {0}")]
    InadmissibleParameters(String),
    #[error("horizon ratio N/n = {n_total}/{n} is not an integer")]
    NonIntegerHorizonRatio { n_total: usize, n: usize },
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
