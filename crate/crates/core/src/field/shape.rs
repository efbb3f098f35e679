use crate::scalar::Real;

use super::FieldError;

/// Radially symmetric obstacle profile `φ(z) = -A·ψ(|z|/r1)` on ℝ^{n+1}.
///
/// `ψ(t) = exp(-σ t²/(1 - t²))` for `t < 1` and zero beyond, so `φ` is smooth,
/// non-positive and vanishes outside the Euclidean `r1`-ball. The amplitude
/// `A` is fixed so that the corners of the ∞-ball of radius `r0` (the points of
/// that ball farthest from the center) reach exactly `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleShape<T> {
    n: usize,
    r0: T,
    r1: T,
    sigma: T,
    amplitude: T,
}

impl<T: Real> ObstacleShape<T> {
    pub fn new(n: usize, r0: T, r1: T, sigma: T) -> Result<Self, FieldError> {
        if n == 0 {
            return Err(FieldError::InvalidShape("dimension n must be at least 1".into()));
        }
        if !(r0 > T::zero()) || !(sigma > T::zero()) || !r1.is_finite() {
            return Err(FieldError::InvalidShape(format!(
                "need r0 > 0 and sigma > 0 (got r0 = {r0}, sigma = {sigma})"
            )));
        }
        let corner = T::lit((n + 1) as f64).sqrt() * r0;
        if !(r1 > corner) {
            return Err(FieldError::InvalidShape(format!(
                "support radius r1 = {r1} must exceed sqrt(n+1)*r0 = {corner}"
            )));
        }
        let t = corner / r1;
        let amplitude = T::one() / bump(sigma, t);
        Ok(Self { n, r0, r1, sigma, amplitude })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r0(&self) -> T {
        self.r0
    }

    pub fn r1(&self) -> T {
        self.r1
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// Peak depth `A = max |φ|`, attained at the center.
    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    /// `φ` as a function of the Euclidean distance from the center.
    pub fn profile(&self, rho: T) -> T {
        let t = rho.abs() / self.r1;
        if t >= T::one() {
            T::zero()
        } else {
            -self.amplitude * bump(self.sigma, t)
        }
    }

    /// `dφ/dρ`, non-negative on the support.
    pub fn radial_derivative(&self, rho: T) -> T {
        let t = rho.abs() / self.r1;
        if t >= T::one() {
            return T::zero();
        }
        let one_m = T::one() - t * t;
        let two = T::lit(2.0);
        self.amplitude * bump(self.sigma, t) * self.sigma * two * t / (one_m * one_m) / self.r1
    }

    /// `φ(z)` for `z = (x_1, …, x_n, y)`.
    pub fn eval(&self, z: &[T]) -> T {
        debug_assert_eq!(z.len(), self.n + 1);
        let rho2 = z.iter().fold(T::zero(), |acc, &c| acc + c * c);
        self.profile(rho2.sqrt())
    }

    /// `∂φ/∂y` at `z`.
    pub fn d_dy(&self, z: &[T]) -> T {
        let rho2 = z.iter().fold(T::zero(), |acc, &c| acc + c * c);
        let rho = rho2.sqrt();
        if rho == T::zero() {
            return T::zero();
        }
        self.radial_derivative(rho) * z[self.n] / rho
    }

    /// `sup |dφ/dρ|`, bounding `|∂φ/∂y|`, located by a dense scan and a
    /// golden-section refinement; inflated by 1% to stay an upper bound.
    pub fn max_slope(&self) -> T {
        let slope = |t: T| self.radial_derivative(t * self.r1);
        let samples: usize = 4096;
        let mut best_i: usize = 0;
        let mut best = T::zero();
        for i in 1..samples {
            let t = T::lit(i as f64 / samples as f64);
            let s = slope(t);
            if s > best {
                best = s;
                best_i = i;
            }
        }
        let mut a = T::lit((best_i.saturating_sub(1)) as f64 / samples as f64);
        let mut b = T::lit(((best_i + 1).min(samples - 1)) as f64 / samples as f64);
        let g = T::lit(0.618_033_988_749_894_8);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if slope(c) > slope(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let refined = slope((a + b) / T::lit(2.0));
        best.max(refined) * T::lit(1.01)
    }
}

fn bump<T: Real>(sigma: T, t: T) -> T {
    if t >= T::one() {
        return T::zero();
    }
    (-sigma * t * t / (T::one() - t * t)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ObstacleShape<f64> {
        ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap()
    }

    #[test]
    fn zero_outside_support() {
        let s = fixture();
        assert_eq!(s.eval(&[0.8, 0.0]), 0.0);
        assert_eq!(s.eval(&[0.5657, 0.5657]), 0.0);
        assert_eq!(s.radial_derivative(0.41), 0.0);
    }

    #[test]
    fn core_condition_at_center_and_corner() {
        let s = fixture();
        assert!(s.eval(&[0.0, 0.0]) <= -1.0);
        let corner = s.eval(&[0.25, 0.25]);
        assert!(corner <= -1.0 + 1e-12, "corner value {corner}");
        // the sides of the cube are closer than the corner
        assert!(s.eval(&[0.25, 0.0]) < corner);
    }

    #[test]
    fn corner_of_wider_shape() {
        let r1 = 0.5 * 2f64.sqrt() + 0.01;
        let s = ObstacleShape::new(1, 0.25, r1, 0.2).unwrap();
        assert!(s.eval(&[0.25, 0.25]) <= -1.0 + 1e-12);
        for &(x, y) in &[(0.25, -0.25), (-0.25, 0.25), (0.1, -0.25), (-0.25, -0.2)] {
            assert!(s.eval(&[x, y]) <= -1.0 + 1e-12);
        }
    }

    #[test]
    fn rejects_incompatible_radii() {
        // sqrt(n) r0 < r1 but sqrt(n+1) r0 > r1
        assert!(ObstacleShape::new(1, 0.25, 0.3, 0.2).is_err());
        assert!(ObstacleShape::new(2, 0.25, 0.43, 0.2).is_err());
        assert!(ObstacleShape::new(2, 0.25, 0.44, 0.2).is_ok());
        assert!(ObstacleShape::new(1, -1.0, 0.4, 0.2).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = fixture();
        for i in 1..40 {
            let rho = 0.01 * i as f64;
            let h = 1e-6;
            let fd = (s.profile(rho + h) - s.profile(rho - h)) / (2.0 * h);
            assert!((fd - s.radial_derivative(rho)).abs() < 1e-5 * (1.0 + fd.abs()));
        }
        let z = [0.1, 0.2];
        let h = 1e-6;
        let fd = (s.eval(&[0.1, 0.2 + h]) - s.eval(&[0.1, 0.2 - h])) / (2.0 * h);
        assert!((fd - s.d_dy(&z)).abs() < 1e-5);
    }

    #[test]
    fn max_slope_bounds_samples() {
        let s = fixture();
        let m = s.max_slope();
        for i in 0..10_000 {
            let rho = 0.4 * i as f64 / 10_000.0;
            assert!(s.radial_derivative(rho) <= m);
        }
    }

    #[test]
    fn single_precision_shape() {
        let s = ObstacleShape::<f32>::new(1, 0.25, 0.4, 0.2).unwrap();
        assert!(s.eval(&[0.0, 0.0]) <= -1.0);
        assert_eq!(s.eval(&[1.0, 0.0]), 0.0);
    }
}
