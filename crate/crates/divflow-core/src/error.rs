use thiserror::Error;

/// Errors raised by grid construction and grid-level operations.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid must have at least one pixel per axis, got {nx}x{ny}")]
    EmptyGrid { nx: usize, ny: usize },

    #[error("grid {nx}x{ny} is too small for a central stencil (need at least 3x3)")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("pixel spacing must be finite and positive, got dx={dx}, dy={dy}")]
    BadSpacing { dx: f64, dy: f64 },

    #[error("value buffer holds {got} entries but the grid is {nx}x{ny}")]
    LengthMismatch { nx: usize, ny: usize, got: usize },

    #[error("non-finite value at pixel ({x}, {y})")]
    NonFinite { x: usize, y: usize },

    #[error("grid mismatch: {left_nx}x{left_ny} (dx={left_dx}, dy={left_dy}) vs {right_nx}x{right_ny} (dx={right_dx}, dy={right_dy})")]
    GridMismatch {
        left_nx: usize,
        left_ny: usize,
        left_dx: f64,
        left_dy: f64,
        right_nx: usize,
        right_ny: usize,
        right_dx: f64,
        right_dy: f64,
    },

    #[error("requested {w}x{h} region does not fit the {nx}x{ny} grid")]
    RegionTooLarge {
        w: usize,
        h: usize,
        nx: usize,
        ny: usize,
    },

    #[error("cannot pad a {nx}x{ny} grid down to {w}x{h}")]
    PadTooSmall {
        w: usize,
        h: usize,
        nx: usize,
        ny: usize,
    },

    #[error("slice index {index} out of range for a volume of {len} slices")]
    SliceIndexOutOfRange { index: usize, len: usize },

    #[error("volume needs at least two slices, got {got}")]
    TooFewSlices { got: usize },

    #[error("inter-slice spacing must be finite and positive, got {dz}")]
    BadSliceSpacing { dz: f64 },
}

/// Errors raised by solver parameter validation.
#[derive(Debug, Error)]
pub enum ParamError {
    #[error("smoothness weight lambda must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("divergence weight gamma must be non-negative, got {0}")]
    NegativeGamma(f64),

    #[error("iteration count must be at least 1")]
    ZeroIterations,

    #[error("early-stop tolerance must be non-negative, got {0}")]
    NegativeTolerance(f64),

    #[error("half-spacing delta must be finite and positive, got {0}")]
    BadDelta(f64),
}

/// Umbrella error for solver entry points, which can fail on either their
/// parameters or their input grids.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Errors raised by the per-pixel direct solver.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("singular 2x2 system (|det| = {det:e})")]
    SingularSystem { det: f64 },
}
