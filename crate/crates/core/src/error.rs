use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("negative arc length {0}")]
    NegativeArclen(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trajectory length mismatch: expected {expected}, got {got}")]
    TrajectoryLength { expected: usize, got: usize },
    #[error("game has {players} players, above the cap of {cap}")]
    PlayerCap { players: usize, cap: usize },
    #[error("game too large for the exhaustive oracle: {0}")]
    OracleScale(String),
    #[error("unknown player {0}")]
    UnknownPlayer(u32),
    #[error("cannot place {requested} vehicles, capacity is {capacity}")]
    Capacity { requested: usize, capacity: usize },
    #[error("trace i/o: {0}")]
    Trace(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
