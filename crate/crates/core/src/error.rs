use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in '{expr}' at byte {pos}: {msg}")]
    Parse { expr: String, pos: usize, msg: String },

    #[error("config error at '{key}': {msg}")]
    Config { key: String, msg: String },

    #[error("non-positive diffusion: kappa[{component}] = {value}")]
    NonPositiveDiffusion { component: usize, value: f64 },

    #[error("diffusion coefficient a[{component}] not uniformly positive (min {min} at node {node}, step {time_index})")]
    Ellipticity {
        component: usize,
        min: f64,
        node: usize,
        time_index: usize,
    },

    #[error("robin boundary requires b[] for every component")]
    MissingRobin,

    #[error("robin coefficient b[{component}] must be strictly positive (got {value} at step {time_index})")]
    RobinSign {
        component: usize,
        value: f64,
        time_index: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite sample in {field} at node {node}, step {time_index}")]
    NonFinite {
        field: String,
        node: usize,
        time_index: usize,
    },

    #[error("step bound violated: dt = {dt} but max |diagonal reaction| = {max_diag}; use n_t >= {suggested_n_t}")]
    StepBound {
        dt: f64,
        max_diag: f64,
        suggested_n_t: usize,
    },

    #[error("singular step matrix at time index {time_index}")]
    SingularStep { time_index: usize },

    #[error("matrix is not entrywise nonnegative (entry ({row},{col}) = {value})")]
    NotNonnegative { row: usize, col: usize, value: f64 },

    #[error("matrix contains NaN")]
    NanInput,

    #[error("model has no V/F split form")]
    MissingSplitForm,

    #[error("bracket failure: omega(Psi_mu) = {omega} > 0 at mu = {mu}")]
    BracketFailure { mu: f64, omega: f64 },

    #[error("next-generation tail bound {bound:e} exceeds tolerance after {periods} periods")]
    TailBound { bound: f64, periods: usize },

    #[error("periodic solution did not converge in {periods} periods (defect {defect:e})")]
    NoConvergence { periods: usize, defect: f64 },

    #[error("iterate left the sub/supersolution bracket: component {component}, node {node}, value {value}")]
    BracketViolation {
        component: usize,
        node: usize,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by the input configuration rather than the computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Config { .. }
                | Error::NonPositiveDiffusion { .. }
                | Error::Ellipticity { .. }
                | Error::MissingRobin
                | Error::RobinSign { .. }
                | Error::Shape(_)
                | Error::NonFinite { .. }
                | Error::StepBound { .. }
                | Error::MissingSplitForm
        )
    }
}
