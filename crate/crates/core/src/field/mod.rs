//! Random obstacle fields: the smooth obstacle shape, strength laws, windowed
//! Poisson and lattice sampling, and evaluation of `f(x, y)`.

mod field;
mod io;
mod shape;
mod strength;

use thiserror::Error;

pub use field::{FieldKind, FieldSample, Obstacle, ObstacleField, Window, POISSON_CELL};
pub use io::{read_field, write_field, FieldTable};
pub use shape::ObstacleShape;
pub use strength::StrengthDistribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid obstacle shape: {0}")]
    InvalidShape(String),
    #[error("invalid strength distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("window starts at y = {y_lo}, below the obstacle layer y >= r1 = {r1}")]
    BelowSupport { y_lo: f64, r1: f64 },
    #[error("intensity must be positive and finite, got {0}")]
    InvalidIntensity(f64),
    #[error("lattice spacing {spacing} must exceed 2 r1 = {min}")]
    LatticeTooDense { spacing: f64, min: f64 },
    #[error("obstacle outside window or with non-positive strength: {0}")]
    InvalidObstacle(String),
    #[error("query region not fully covered by the sampled window: {0}")]
    Incomplete(String),
    #[error("field table parse error: {0}")]
    Parse(String),
}
