use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("discriminant 4a^3 + 27b^2 is identically zero; fibration is not elliptic")]
    DegenerateDiscriminant,

    #[error("coefficient {name}[{index}] exceeds the allowed degree {max_degree}")]
    DegreeOverflow {
        name: &'static str,
        index: usize,
        max_degree: usize,
    },

    #[error("non-minimal Weierstrass model at {location}: ord a = {ord_a}, ord b = {ord_b}")]
    NonMinimal {
        location: String,
        ord_a: u32,
        ord_b: u32,
    },

    #[error("order triple (ord a, ord b, ord Δ) = ({ord_a}, {ord_b}, {ord_delta}) matches no Kodaira type")]
    Unclassifiable {
        ord_a: u32,
        ord_b: u32,
        ord_delta: u32,
    },

    #[error("root finding did not converge (residual {residual:e})")]
    RootNonConvergence { residual: f64 },

    #[error("unresolved root cluster near {center}: {size} roots within {spread:e}")]
    UnresolvedCluster {
        center: Complex64,
        size: usize,
        spread: f64,
    },

    #[error("point {point} is {distance:e} from the discriminant (minimum {min:e})")]
    TooCloseToDiscriminant {
        point: Complex64,
        distance: f64,
        min: f64,
    },

    #[error("AGM did not converge after {iterations} iterations")]
    AgmNonConvergence { iterations: usize },

    #[error("continuation step underflow at {point}; closest approach to discriminant {closest:e}")]
    StepUnderflow { point: Complex64, closest: f64 },

    #[error("monodromy matrix not integral: residual {residual:e}")]
    NonIntegralMonodromy { residual: f64 },

    #[error("loop of radius {radius:e} around {center} encloses another discriminant root at {other}")]
    LoopEnclosesRoot {
        center: Complex64,
        radius: f64,
        other: Complex64,
    },

    #[error("matrix is not quasi-unipotent with exponent at most {bound}")]
    NotQuasiUnipotent { bound: u32 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {0} lies outside the chart domain")]
    OutsideDomain(String),

    #[error("Im Z is not positive definite at {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("segment passes through an excluded disc around {0}")]
    ExcludedZone(Complex64),

    #[error("affine transition not integral-symplectic: residual {residual:e}")]
    NonIntegralTransition { residual: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
