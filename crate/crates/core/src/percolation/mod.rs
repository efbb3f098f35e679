//! Minimal 1-Lipschitz surfaces of open sites on a periodic torus, openness
//! derived from obstacle fields, tail statistics of the surface height, and
//! the per-column choice of pinning obstacles.

mod geometry;
mod select;
mod sites;
mod surface;
mod tail;

use thiserror::Error;

pub use geometry::{BoxGeometry, Torus};
pub use select::{select_obstacles, SelectedObstacle, SelectedObstacles};
pub use sites::{openness_from_field, OpennessReport, SiteField, SiteOrigin};
pub use surface::{minimal_lipschitz_surface, minimal_lipschitz_surface_with_order, LipschitzSurface};
pub use tail::{critical_probability, decay_ratio, tail_statistics, EnvelopeFit, SurvivalCurve, SurvivalRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PercolationError {
    #[error("no open Lipschitz surface below the height cap {cap} (column {column} needed more)")]
    CapExceeded { column: usize, cap: usize },
    #[error("field window does not cover the site cuboids; missing: {}", missing.join(", "))]
    WindowTooSmall { missing: Vec<String> },
    #[error("open site ({column}, {height}) has no qualifying obstacle")]
    NoQualifyingObstacle { column: usize, height: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("surface and site field disagree: {0}")]
    Mismatch(String),
}
