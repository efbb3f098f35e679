//! Stationary supersolution `w = w_flat + v_glue` for graph mean curvature
//! flow: spherical caps over the selected obstacles, constant mean curvature
//! annuli around them, minimum and glue as in the QEW construction.

mod certify;
mod curvature;
mod params;
mod profile;

use thiserror::Error;

use crate::assembly::{Assembly, AssemblyError, Composite, FlatEval};
use crate::field::{FieldError, ObstacleField, ObstacleShape, StrengthDistribution};
use crate::quadrature::QuadratureError;

pub use certify::{certify_mcf, McfCertifyOptions};
pub use curvature::{breakdown, mean_curvature_fd, radial_jet, FdOrder, Jet, TermBreakdown};
pub use params::{check_mcf_conditions, choose_parameters_mcf, McfParams, McfRecipe};
pub use profile::{c_for_slope, c_max_for, g_scaling, DelaunayProfile, McfLocal, SphericalCap};

#[derive(Debug, Error)]
pub enum McfError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("radius {r} outside [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("annulus profile not defined: slope sine at r_in is {q_at_r_in} (must be < 1)")]
    IllDefined { q_at_r_in: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("field: {0}")]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone)]
pub struct SupersolutionMcf {
    pub params: McfParams,
    pub composite: Composite<McfLocal>,
}

impl SupersolutionMcf {
    pub fn build(
        field: ObstacleField,
        params: &McfParams,
        columns: Vec<usize>,
        height_cap: usize,
    ) -> Result<Self, McfError> {
        let local = params.local()?;
        let assembly = Assembly::build(field, params.geometry(), params.f_bar, columns, height_cap)?;
        Ok(Self { params: params.clone(), composite: Composite::new(assembly, local) })
    }

    pub fn assembly(&self) -> &Assembly {
        &self.composite.assembly
    }

    pub fn local(&self) -> &McfLocal {
        &self.composite.profile
    }

    pub fn eval(&self, x: &[f64]) -> Result<FlatEval, McfError> {
        Ok(self.composite.eval(x)?)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.composite.value(x)
    }

    /// The active branch's piece continued smoothly through `r_in`, plus the
    /// glue: the function whose curvature is certified at `x`'s grid point.
    pub fn piece_value(&self, y: &[f64], column: usize, inner: bool) -> f64 {
        let d = self.assembly().displacement(y, column);
        let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.local().piece_value(r, inner) + self.assembly().glue.value(y)
    }
}

/// Periodic field for an MCF supersolution on `columns` boxes.
pub fn sample_construction_field(
    params: &McfParams,
    shape: &ObstacleShape<f64>,
    dist: StrengthDistribution,
    columns: &[usize],
    height_cap: usize,
    headroom: f64,
    seed: u64,
) -> Result<ObstacleField, McfError> {
    let period: Vec<f64> = columns.iter().map(|&m| m as f64 * params.period()).collect();
    let top = params.r1 + height_cap as f64 * params.h + headroom;
    Ok(ObstacleField::sample_periodic(&period, (params.r1, top), params.lambda, dist, shape.clone(), seed)?)
}

/// Field height above the top slab needed so every `f(x, w(x))` query is complete.
pub fn default_headroom(params: &McfParams) -> Result<f64, McfError> {
    Ok(params.local()?.outer.rise() + params.r0 + 2.0 * params.r1 + 1.0)
}
