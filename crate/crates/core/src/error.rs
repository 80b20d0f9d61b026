use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: left operand has {left} coordinates, right operand has {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite value {value} at coordinate {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("length mismatch: {predictors} predictors but {responses} responses")]
    LengthMismatch { predictors: usize, responses: usize },

    #[error("invalid ambient dimension {0}: at least 3 coordinates are required")]
    AmbientTooSmall(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error(
        "basis is not orthonormal under the quadrature weights: gram[{row}][{col}] = {value:.3e}"
    )]
    NonOrthonormalBasis { row: usize, col: usize, value: f64 },

    #[error("operator is not symmetric: max asymmetry {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("symmetric eigensolver failed to converge")]
    EigenNoConvergence,

    #[error("projection rank {rank} is invalid for ambient dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error(
        "eigengap too small at D = {d}: lambda_{d} = {upper:e}, lambda_{next} = {lower:e}",
        next = d + 1
    )]
    EigenGap { d: usize, upper: f64, lower: f64 },

    #[error("projector basis is not orthonormal: gram[{row}][{col}] = {value:.3e}")]
    NonOrthonormalProjector { row: usize, col: usize, value: f64 },

    #[error("projector rank {projector} does not match estimator dimension {config}")]
    RankMismatch { projector: usize, config: usize },

    #[error("kernel argument must be nonnegative, got {0}")]
    NegativeArgument(f64),

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("radii must be positive and strictly increasing (violated at index {0})")]
    InvalidRadii(usize),

    #[error("radius {radius} lies outside the tabulated range [{min}, {max}]")]
    RadiusOutOfRange { radius: f64, min: f64, max: f64 },

    #[error(
        "small-ball estimate is zero at radius {radius}: the radius grid is too fine for n = {n}"
    )]
    EmptyBall { radius: f64, n: usize },

    #[error("spectrum must be positive and strictly decreasing (violated at index {index})")]
    InvalidSpectrum { index: usize },

    #[error("spectrum has {found} entries but the ambient dimension is {expected}")]
    SpectrumLength { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("could not draw {wanted} admissible anchors in {attempts} attempts")]
    AnchorSelection { wanted: usize, attempts: usize },

    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("nonpositive value {value} in row {row} (n = {n}); cannot take logarithms")]
    NonPositiveValue { row: usize, n: usize, value: f64 },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
