//! Stationary supersolution `v = v_flat + v_glue` for `Δv + f(x, v) + F ≤ 0`:
//! radial local profiles around one selected obstacle per column, combined by
//! a pointwise minimum and lifted to the obstacle heights by the glue.

mod certify;
mod params;
mod profile;

use thiserror::Error;

use crate::assembly::{Assembly, AssemblyError, Composite, FlatEval};
use crate::field::{FieldError, ObstacleField, ObstacleShape, StrengthDistribution};

pub use certify::{certify, CertifyOptions};
pub use params::{box_side, choose_parameters, covering_radius, percolation_constant, QewParams, QewRecipe};
pub use profile::{JumpCheck, LocalProfileQew};

#[derive(Debug, Error)]
pub enum QewError {
    #[error("invalid local profile: {0}")]
    InvalidProfile(String),
    #[error("radius {r} outside [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("field: {0}")]
    Field(#[from] FieldError),
}

/// Which piece of the local profile attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Inner,
    Outer,
}

#[derive(Debug, Clone)]
pub struct SupersolutionQew {
    pub params: QewParams,
    pub composite: Composite<LocalProfileQew<f64>>,
}

impl SupersolutionQew {
    /// Run the percolation pipeline on `field` and attach the local profile.
    pub fn build(
        field: ObstacleField,
        params: &QewParams,
        columns: Vec<usize>,
        height_cap: usize,
    ) -> Result<Self, QewError> {
        let assembly = Assembly::build(field, params.geometry(), params.f_bar, columns, height_cap)?;
        Ok(Self { params: params.clone(), composite: Composite::new(assembly, params.profile()) })
    }

    pub fn assembly(&self) -> &Assembly {
        &self.composite.assembly
    }

    pub fn profile(&self) -> &LocalProfileQew<f64> {
        &self.composite.profile
    }

    pub fn eval(&self, x: &[f64]) -> Result<FlatEval, QewError> {
        Ok(self.composite.eval(x)?)
    }

    /// `v(x)` with the active piece.
    pub fn v_eval(&self, x: &[f64]) -> Result<(f64, Piece), QewError> {
        let e = self.eval(x)?;
        let piece = if e.branch.r <= self.params.r_in { Piece::Inner } else { Piece::Outer };
        Ok((e.value, piece))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.composite.value(x)
    }
}

/// Periodic Poisson field sized for a supersolution on `columns` boxes with
/// room for surfaces up to `height_cap` slabs and the profile above them.
pub fn sample_construction_field(
    params: &QewParams,
    shape: &ObstacleShape<f64>,
    dist: StrengthDistribution,
    columns: &[usize],
    height_cap: usize,
    headroom: f64,
    seed: u64,
) -> Result<ObstacleField, QewError> {
    let period: Vec<f64> = columns.iter().map(|&m| m as f64 * params.period()).collect();
    let top = params.r1 + height_cap as f64 * params.h + headroom;
    Ok(ObstacleField::sample_periodic(&period, (params.r1, top), params.lambda, dist, shape.clone(), seed)?)
}

/// `max v_out = v_out(r_out)`, the rise of the profile above the glue level.
pub fn profile_rise(params: &QewParams) -> f64 {
    params.profile().v_local(params.r_out)
}

/// Field height above the top slab needed so every `f(x, v(x))` query is complete.
pub fn default_headroom(params: &QewParams) -> f64 {
    profile_rise(params) + params.r0 + 2.0 * params.r1 + 1.0
}
