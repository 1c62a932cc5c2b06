use thiserror::Error;

/// Errors shared across the solver and algebra layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid points per axis must be a power of two, got {0}")]
    NotPowerOfTwo(usize),

    #[error("total axis count {0} exceeds the desk-scale cap of {1}")]
    AxisOverflow(usize, usize),

    #[error("fields live on different grids ({0} vs {1})")]
    GridMismatch(String, String),

    #[error("field contains NaN or Inf entries")]
    NonFinite,

    #[error("Fourier weight is not finite at a nonzero mode {0:?}")]
    BadWeight(Vec<f64>),

    #[error("scaled potential unresolved: N^beta*dx = {got:.3e} with quadrature defect {defect:.3e}; need n >= {min_n}")]
    Resolution { got: f64, defect: f64, min_n: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("sh/ch series did not converge within {max_terms} terms (last term {last:.3e})")]
    SeriesDiverged { max_terms: usize, last: f64 },

    #[error("Takagi factorization residual {0:.3e} exceeds tolerance")]
    TakagiResidual(f64),

    #[error("operator expected positive semidefinite, found eigenvalue {0:.3e} below clamp")]
    NotPositive(f64),

    #[error("pair-recovery consistency residual {0:.3e} exceeds tolerance")]
    ConsistencyResidual(f64),

    #[error("NaN detected at step {step} of {context}")]
    NanAbort { step: usize, context: &'static str },

    #[error("Bogoliubov residual {0:.3e} exceeded abort threshold during evolution")]
    ResidualAbort(f64),

    #[error("sector-{l} array of {entries} entries exceeds the memory budget ({budget}); pass an explicit override to proceed")]
    MemoryGuard { l: usize, entries: usize, budget: usize },

    #[error("Fock sector dimension {dim} exceeds budget {budget} (M={modes}, n_max={n_max}); pass an explicit override to proceed")]
    FockDimension { dim: usize, budget: usize, modes: usize, n_max: usize },

    #[error("coherent-state tail mass {tail:.3e} beyond n_max={n_max} exceeds {tol:.1e}")]
    TailGuard { tail: f64, n_max: usize, tol: f64 },

    #[error("Bogoliubov exponential did not converge on the truncated space (top-sector mass {0:.3e})")]
    ExpConvergence(f64),

    #[error("zero-particle state has no one-particle marginal")]
    ZeroParticles,

    #[error("stability guard violated: dt*max|xi|^2 = {0:.3} > pi")]
    StepGuard(f64),

    #[error("trajectory window [{lo:.3}, {hi:.3}] outside sampled range [0, {max:.3}]")]
    WindowOutOfRange { lo: f64, hi: f64, max: f64 },

    #[error("mismatched sampling times between trajectories")]
    TimeMismatch,

    #[error("exponent fit needs at least {need} positive samples, got {got}")]
    FitUnderdetermined { need: usize, got: usize },

    #[error("nonpositive value {0:.3e} cannot enter a log-log fit")]
    NonPositiveFit(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
