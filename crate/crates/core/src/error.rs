use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("box side length {side} must exceed twice the truncation radius {truncation}")]
    BoxTooSmall { side: f64, truncation: f64 },

    #[error("pin {index} at {position:?} lies outside the box [-{half}, {half}]^d")]
    PinOutsideBox {
        index: usize,
        position: Vec<f64>,
        half: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: estimated error {achieved:e} above target {target:e}")]
    Quadrature { achieved: f64, target: f64 },

    #[error("grid geometry mismatch")]
    GeometryMismatch,

    #[error("wraparound guard violated: grid length {grid_length} < 2 x support radius {support}")]
    WraparoundGuard { grid_length: f64, support: f64 },

    #[error("spectral floor violated: 1 + t*P^(w) = {value:e} at frequency index {index:?}")]
    SpectralFloor { value: f64, index: Vec<usize> },

    #[error("Neumann series precondition violated: t*|P|_1 = {0} >= 1")]
    NeumannPrecondition(f64),

    #[error("Neumann series did not converge within {terms} terms (last term {last:e})")]
    NeumannDivergence { terms: usize, last: f64 },

    #[error("integral of Q = {integral} outside [0, 1/t) for t = {t}")]
    QIntegralOutOfRange { integral: f64, t: f64 },

    #[error("intensity t = {t} not below the subcritical bound {bound}")]
    NotSubcritical { t: f64, bound: f64 },

    #[error("graph order {n} exceeds the supported maximum {max}")]
    OrderTooLarge { n: usize, max: usize },

    #[error("graph has {edges} edges, above the subset enumeration limit {limit}")]
    TooManyEdges { edges: u32, limit: u32 },

    #[error("elimination infeasible: {0}; use the Monte Carlo method instead")]
    EliminationInfeasible(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerical regime of the input rather than
    /// by malformed parameters.
    pub fn is_numerical_precondition(&self) -> bool {
        matches!(
            self,
            Error::SpectralFloor { .. }
                | Error::NeumannPrecondition(_)
                | Error::NeumannDivergence { .. }
                | Error::QIntegralOutOfRange { .. }
                | Error::NotSubcritical { .. }
                | Error::Quadrature { .. }
        )
    }
}
