use thiserror::Error;

/// A single violated invariant found while validating a network file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkViolation {
    #[error("spectral radius of the routing matrix is {rho:.6}, must be < 1")]
    SpectralRadiusTooLarge { rho: f64 },
    #[error("constituency matrix malformed: {0}")]
    ConstituencyMalformed(String),
    #[error("negative rate: {0}")]
    NegativeRate(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("routing matrix: {0}")]
    Routing(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network ({} violation(s)): {}", .0.len(), join_violations(.0))]
    InvalidNetwork(Vec<NetworkViolation>),
    #[error("state has a negative coordinate ({0:e})")]
    NegativeState(f64),
    #[error("velocity set is empty at state {0:?}")]
    EmptyVelocitySet(Vec<f64>),
    #[error("polytope dimension {0} exceeds the supported maximum of {max}", max = crate::network::polytope::MAX_DIM)]
    DimensionTooLarge(usize),
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("approach sequence does not converge to the probe point")]
    SequenceNotConverging,
    #[error("shift {shift} exceeds the recorded horizon {horizon}")]
    ShiftBeyondHorizon { shift: f64, horizon: f64 },
    #[error("concatenation endpoints differ by {0:e}")]
    EndpointMismatch(f64),
    #[error("trajectory horizon {have} is shorter than the required {need}")]
    HorizonTooShort { have: f64, need: f64 },
    #[error("trajectories use different step sizes ({0} vs {1})")]
    StepMismatch(f64, f64),
    #[error("Euler step would leave the orthant by {overshoot:e} at coordinate {coord}, beyond the one-step clamp allowance")]
    ClampTooLarge { coord: usize, overshoot: f64 },
    #[error("point {0:?} lies outside the field box")]
    OutsideBox(Vec<f64>),
    #[error("grid is not symmetric about the origin: {0}")]
    AsymmetricGrid(String),
    #[error("mollifier radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("field box too small for mollification radius {0}")]
    BoxTooSmall(f64),
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
    #[error("piece {piece}: radius ladder exhausted without meeting the local bounds (V err {v_err:e} vs {v_req:e}, W err {w_err:e} vs {w_req:e})")]
    PieceBoundUnachievable {
        piece: usize,
        v_err: f64,
        v_req: f64,
        w_err: f64,
        w_req: f64,
    },
    #[error("perturbed start leaves the nonnegative orthant: {0:?}")]
    StartOutsideOrthant(Vec<f64>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

fn join_violations(v: &[NetworkViolation]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
