use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("asymmetric damping unsupported: gamma1 = {gamma1}, gamma2 = {gamma2}")]
    AsymmetricDamping { gamma1: f64, gamma2: f64 },

    #[error("singular denominator: |x0s| = 2 (x0s = {x0s})")]
    SingularPump { x0s: f64 },

    #[error("approximation used outside its domain: {0}")]
    OutOfDomain(String),

    #[error("no steady state with 0 <= x0s < 2 for mu0 = {mu0}, mu1 = {mu1}")]
    NoPhysicalRoot { mu0: f64, mu1: f64 },

    #[error("steady state is not stable (mu0 = {mu0}, mu1 = {mu1})")]
    UnstableSteadyState { mu0: f64, mu1: f64 },

    #[error(
        "positive-P sampling breakdown: {diverged} of {total} trajectories diverged \
         (mu0 = {mu0}, mu1 = {mu1}, gamma_r = {gamma_r}, g = {g}, dt = {dt})"
    )]
    SamplingBreakdown {
        diverged: usize,
        total: usize,
        mu0: f64,
        mu1: f64,
        gamma_r: f64,
        g: f64,
        dt: f64,
    },

    #[error("trajectory diverged at t = {time}")]
    Diverged { time: f64 },

    #[error("series of length {len} is shorter than one segment ({segment})")]
    SeriesTooShort { len: usize, segment: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("frequency grids do not match")]
    GridMismatch,
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
