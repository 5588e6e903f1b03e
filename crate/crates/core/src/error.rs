use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown wavelet family: {0}")]
    UnknownFamily(String),

    #[error("grid exponent {0} outside supported range [6, 16]")]
    GridExponent(u32),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (pointwise work supports D in {{1, 2}})")]
    UnsupportedDimension(usize),

    #[error("quadrature step 2^-{quad} too coarse for level {j_max} (need quad >= {needed})")]
    QuadratureTooCoarse { quad: u32, j_max: u32, needed: u32 },

    #[error("extremal witness requested for a zero coefficient tree")]
    ZeroInput,

    #[error("sup-norm bound needs sigma > D/p (sigma = {sigma}, D/p = {d_over_p})")]
    BoundInapplicable { sigma: f64, d_over_p: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("sample {value} lies outside the support [-{half_width}, {half_width}]")]
    SampleOutOfSupport { value: f64, half_width: f64 },

    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("codebook length {0} is below the minimum of 8")]
    CodebookTooShort(usize),

    #[error("codebook length {0} needs more than 2^16 codewords; not supported")]
    CodebookTooLarge(usize),

    #[error("nonpositive density {value} at x = {x}")]
    NonpositiveDensity { x: f64, value: f64 },

    #[error("Fano condition unmet: {0}")]
    FanoUnmet(String),

    #[error("clipped negative mass {mass:e} exceeds tolerance {tolerance:e}")]
    ClippingMass { mass: f64, tolerance: f64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
