use thiserror::Error;

/// Errors produced by the solver toolkit.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid filter half-order {0}: must be between 1 and 16")]
    InvalidHalfOrder(usize),

    #[error("invalid wavelet order {0}: must be an even integer >= 4")]
    InvalidWaveletOrder(usize),

    #[error("basis construction failed: {0}")]
    BasisConstruction(String),

    #[error("grid size {size} too small for stencil of order {gamma} along one axis")]
    GridTooSmall { size: usize, gamma: usize },

    #[error("grid axis extent must be a positive integer number of unit cells, got {0}")]
    InvalidAxisExtent(u32),

    #[error("lattice shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("noise truncation must be positive")]
    InvalidTruncation,

    #[error("noise basis is defined on x in [0,1]; grid x-extent is {0}")]
    NonUnitNoiseDomain(u32),

    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),

    #[error("increment sequence has a gap: step {expected} expected, found {found}")]
    IncrementGap { expected: u64, found: u64 },

    #[error("increment sequence is empty")]
    EmptyIncrementSequence,

    #[error("increments span {got} does not match the stepper time step {want}")]
    IncrementSpanMismatch { got: f64, want: f64 },

    #[error(
        "fixed-point iteration diverged at iteration {iterations} (residual {residual:.3e}); \
         reduce the time step"
    )]
    FixedPointDiverged { iterations: usize, residual: f64 },

    #[error(
        "fixed-point iteration did not reach tolerance {tolerance:.3e} within {iterations} \
         iterations (residual {residual:.3e})"
    )]
    FixedPointStalled {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("non-finite field value produced")]
    NonFiniteField,

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<CoreError>,
    },

    #[error("coupled noise paths disagree (checksum mismatch): {0}")]
    CouplingMismatch(String),

    #[error("ensemble series are misaligned: {0}")]
    MisalignedSeries(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),
}

impl CoreError {
    /// Wrap an error with the time-step index at which it occurred.
    pub fn at_step(self, step: u64) -> CoreError {
        CoreError::StepFailed {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
