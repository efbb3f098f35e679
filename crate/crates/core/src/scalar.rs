//! Scalar abstraction for the closed-form and quadrature-based profile math.
//!
//! Geometry of the local profiles, the blend used by the glue function and the
//! adaptive quadrature are written once against [`Real`]; the stochastic and
//! simulation layers work in `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point types usable by the profile and quadrature code (`f32`, `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Convert to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Integer power with a `usize` exponent.
    fn powu(self, e: usize) -> Self {
        self.powi(e as i32)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_roundtrip() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.5), 0.5f32);
        assert_eq!(3.0f64.powu(3), 27.0);
    }
}
