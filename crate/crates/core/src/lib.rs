//! Supersolution certificates, Lipschitz percolation and explicit time
//! stepping for interfaces driven through quenched random obstacle fields.

// `!(x > y)` comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod certificate;
pub mod experiments;
pub mod field;
pub mod glue;
pub mod mcf;
pub mod quadrature;
pub mod percolation;
pub mod qew;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use scalar::Real;

pub type Shape = field::ObstacleShape<f64>;
pub type QewProfile = qew::LocalProfileQew<f64>;
pub type Glue = glue::GlueFunction<f64>;
