use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("velocity grid needs at least 2 intervals per axis, got {0}")]
    VelocityGridTooSmall(usize),

    #[error("grid ordering violated at point {index}: {left} >= {right}")]
    GridOrdering { index: usize, left: f64, right: f64 },

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("query point {x} outside the interpolation range [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("stencil starvation at x = {x}: {found} admissible neighbor(s) within radius {radius}")]
    StencilStarvation { x: f64, found: usize, radius: f64 },

    #[error("degenerate MLS stencil at x = {x}: all non-anchor weights vanish")]
    DegenerateStencil { x: f64 },

    #[error("non-positive density {rho}")]
    NonPositiveDensity { rho: f64 },

    #[error("non-positive temperature {temperature} (rho = {rho}, E = {energy})")]
    NonPositiveTemperature {
        temperature: f64,
        rho: f64,
        energy: f64,
    },

    #[error("discrete Maxwellian exponent {exponent} overflows")]
    Divergence { exponent: f64 },

    #[error("line search found no admissible step (residual norm {residual:e})")]
    LineSearchFailed { residual: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual norm {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("initial data generate a vacuum; unsupported by the exact Riemann solver")]
    Vacuum,

    #[error("wall emission flux vanishes on this velocity grid")]
    ZeroWallFlux,

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("step {step} (t = {time}) failed at point {point}: {source}")]
    StepFailed {
        step: usize,
        time: f64,
        point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
