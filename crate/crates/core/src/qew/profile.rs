use crate::assembly::RadialProfile;
use crate::scalar::Real;

use super::QewError;

/// Radial local solution: a paraboloid `v_in` with `Δv_in = F_in` on
/// `B_{r_in}`, and `v_out` with `Δv_out = F_out` on the annulus up to `r_out`,
/// zero Neumann data at `r_out`; both vanish on `∂B_{r_in}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProfileQew<T> {
    pub n: usize,
    pub r_in: T,
    pub r_out: T,
    pub f_in: T,
    pub f_out: T,
}

/// Outcome of the jump condition `F_in r_in ≥ |F_out| (r_out^n / r_in^{n-1} - r_in)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpCheck<T> {
    pub holds: bool,
    /// `F_in r_in - |F_out| (r_out^n / r_in^{n-1} - r_in)`.
    pub slack: T,
    /// `∂_r v_in(r_in) = F_in r_in / n`.
    pub inner_slope: T,
    /// `∂_r v_out(r_in)`.
    pub outer_slope: T,
}

impl<T: Real> LocalProfileQew<T> {
    pub fn new(n: usize, r_in: T, r_out: T, f_in: T, f_out: T) -> Result<Self, QewError> {
        if n == 0 || !(r_in > T::zero()) || !(r_out > r_in) || !(f_in > T::zero()) || !(f_out < T::zero()) {
            return Err(QewError::InvalidProfile(format!(
                "need n >= 1, r_out > r_in > 0, F_in > 0 > F_out (r_in = {r_in}, r_out = {r_out}, F_in = {f_in}, F_out = {f_out})"
            )));
        }
        Ok(Self { n, r_in, r_out, f_in, f_out })
    }

    fn nt(&self) -> T {
        T::lit(self.n as f64)
    }

    /// `(v_in(r), ∂_r v_in(r))` for `0 ≤ r ≤ r_in`.
    pub fn v_in(&self, r: T) -> Result<(T, T), QewError> {
        if r < T::zero() || r > self.r_in {
            return Err(QewError::OutOfRange { r: r.to_f64_lossy(), lo: 0.0, hi: self.r_in.to_f64_lossy() });
        }
        let c = self.f_in / (T::lit(2.0) * self.nt());
        Ok((c * (r * r - self.r_in * self.r_in), self.f_in * r / self.nt()))
    }

    /// `∫_{r_in}^r ρ^{1-n} dρ`.
    fn inverse_power_integral(&self, r: T) -> T {
        match self.n {
            1 => r - self.r_in,
            2 => (r / self.r_in).ln(),
            n => {
                let e = T::lit(2.0 - n as f64);
                (r.powf(e) - self.r_in.powf(e)) / e
            }
        }
    }

    /// `(v_out(r), ∂_r v_out(r))` for `r_in ≤ r ≤ r_out`.
    pub fn v_out(&self, r: T) -> Result<(T, T), QewError> {
        if r < self.r_in || r > self.r_out {
            return Err(QewError::OutOfRange {
                r: r.to_f64_lossy(),
                lo: self.r_in.to_f64_lossy(),
                hi: self.r_out.to_f64_lossy(),
            });
        }
        Ok((self.v_out_value(r), self.v_out_slope(r)))
    }

    fn v_out_slope(&self, r: T) -> T {
        let rn = self.r_out.powu(self.n);
        self.f_out / self.nt() * (r - rn / r.powu(self.n - 1))
    }

    fn v_out_value(&self, r: T) -> T {
        let rn = self.r_out.powu(self.n);
        let half = T::lit(0.5);
        self.f_out / self.nt() * (half * (r * r - self.r_in * self.r_in) - rn * self.inverse_power_integral(r))
    }

    /// `v_local` at radius `r`: `v_in`, `v_out`, or `+∞` beyond `r_out`.
    pub fn v_local(&self, r: T) -> T {
        let r = r.abs();
        if r <= self.r_in {
            self.v_in(r).map(|v| v.0).unwrap_or(T::infinity())
        } else if r <= self.r_out {
            self.v_out_value(r)
        } else {
            T::infinity()
        }
    }

    /// `v_local(x)` for a lateral displacement `x ∈ ℝ^n`.
    pub fn v_local_at(&self, x: &[T]) -> T {
        self.v_local(x.iter().fold(T::zero(), |s, &c| s + c * c).sqrt())
    }

    /// `F_in r_in² / (2n)`, the depth of the paraboloid.
    pub fn depth(&self) -> T {
        self.f_in * self.r_in * self.r_in / (T::lit(2.0) * self.nt())
    }

    pub fn laplacian(&self, inner: bool) -> T {
        if inner {
            self.f_in
        } else {
            self.f_out
        }
    }

    pub fn check_jump_condition(&self) -> JumpCheck<T> {
        let rhs = -self.f_out * (self.r_out.powu(self.n) / self.r_in.powu(self.n - 1) - self.r_in);
        let slack = self.f_in * self.r_in - rhs;
        JumpCheck {
            holds: slack >= T::zero(),
            slack,
            inner_slope: self.f_in * self.r_in / self.nt(),
            outer_slope: self.v_out_slope(self.r_in),
        }
    }

    /// Bound on every second directional derivative of either piece.
    pub fn curvature_bound(&self) -> T {
        let n = self.nt();
        let ratio = (self.r_out / self.r_in).powu(self.n);
        let outer = -self.f_out / n * (T::one() + (n - T::one()) * ratio);
        (self.f_in / n).max(outer)
    }
}

impl RadialProfile for LocalProfileQew<f64> {
    fn n(&self) -> usize {
        self.n
    }
    fn r_in(&self) -> f64 {
        self.r_in
    }
    fn r_out(&self) -> f64 {
        self.r_out
    }
    fn value(&self, r: f64) -> f64 {
        self.v_local(r)
    }
    fn slope(&self, r: f64, inner: bool) -> f64 {
        if inner {
            self.f_in * r / self.n as f64
        } else {
            self.v_out_slope(r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> LocalProfileQew<f64> {
        LocalProfileQew::new(1, 0.5, 2.0, 1.0, -0.1).unwrap()
    }

    #[test]
    fn inner_values() {
        let p = p1();
        let (v, s) = p.v_in(0.5).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(s, 0.5);
        assert!((p.v_in(0.0).unwrap().0 + 0.125).abs() < 1e-15);
        assert!((p.v_in(0.0).unwrap().0 + p.depth()).abs() < 1e-15);
        assert!(p.v_in(0.6).is_err());
    }

    #[test]
    fn outer_values() {
        let p = p1();
        assert!((p.v_out(0.5).unwrap().1 - 0.15).abs() < 1e-15);
        assert_eq!(p.v_out(2.0).unwrap().1, 0.0);
        assert_eq!(p.v_out(0.5).unwrap().0, 0.0);
        assert!(p.v_local(2.1).is_infinite());
        for n in 1..=4 {
            let q = LocalProfileQew::<f64>::new(n, 0.3, 1.7, 2.0, -0.05).unwrap();
            assert!(q.v_out(q.r_in).unwrap().0.abs() < 1e-15);
            // footnote form of the slope at r_in
            let s = q.v_out(q.r_in).unwrap().1;
            let nf = n as f64;
            let expected = 0.05 * (-0.3 / nf + 1.7f64.powi(n as i32) / (nf * 0.3f64.powi(n as i32 - 1)));
            assert!((s - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn jump_examples() {
        let ok = LocalProfileQew::<f64>::new(1, 0.5, 2.0, 1.0, -0.3).unwrap().check_jump_condition();
        assert!(ok.holds && (ok.slack - 0.05).abs() < 1e-12);
        let bad = LocalProfileQew::<f64>::new(1, 0.5, 2.0, 1.0, -0.4).unwrap().check_jump_condition();
        assert!(!bad.holds && (bad.slack + 0.1).abs() < 1e-12);
        let tiny = LocalProfileQew::new(3, 0.5, 20.0, 1.0, -1e-12).unwrap().check_jump_condition();
        assert!(tiny.holds);
    }

    #[test]
    fn single_precision_profile() {
        let p = LocalProfileQew::<f32>::new(2, 0.5, 2.0, 1.0, -0.1).unwrap();
        let q = LocalProfileQew::<f64>::new(2, 0.5, 2.0, 1.0, -0.1).unwrap();
        for r in [0.1, 0.5, 1.0, 1.9] {
            assert!((p.v_local(r as f32) as f64 - q.v_local(r)).abs() < 1e-5);
        }
    }
}
