use thiserror::Error;

/// Errors produced by the processing kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("point undistortion did not converge (residual {residual_px} px)")]
    NonConvergence { residual_px: f64 },
    #[error("degenerate stereo geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("need at least {required} correspondences, got {got}")]
    InsufficientPoints { required: usize, got: usize },
    #[error("frame width {0} is odd and cannot be split into a side-by-side pair")]
    OddWidth(usize),
    #[error("sequence length mismatch: {0}")]
    LengthMismatch(&'static str),
    #[error("sequence needs at least two frames")]
    EmptySequence,
    #[error("no valid pixels contributed to the temporal error")]
    NoValidPixels,
    #[error("detection is invalid: {0}")]
    InvalidDetection(&'static str),
    #[error("not enough valid depth under the detection ({fraction:.3} < {required:.3})")]
    NoValidDepth { fraction: f64, required: f64 },
    #[error("invalid truncation window [{left}, {right}]")]
    InvalidWindow { left: f64, right: f64 },
    #[error("all distance bins are empty")]
    EmptyBins,
    #[error("optimizer did not converge after {iterations} iterations")]
    OptimizerNonConvergence { iterations: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
