use crate::assembly::RadialProfile;
use crate::quadrature::integrate;
use crate::scalar::Real;

use super::McfError;

/// Lower spherical cap of radius `F_in` shifted to vanish at `r_in`:
/// `w_in(r) = -√(F_in² - r²) + √(F_in² - r_in²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCap<T> {
    pub r_in: T,
    /// Sphere radius (the cap's mean curvature is `1/F_in`).
    pub f_in: T,
}

impl<T: Real> SphericalCap<T> {
    pub fn new(r_in: T, f_in: T) -> Result<Self, McfError> {
        if !(r_in > T::zero()) || !(f_in > r_in) {
            return Err(McfError::InvalidProfile(format!("need 0 < r_in < F_in (r_in = {r_in}, F_in = {f_in})")));
        }
        Ok(Self { r_in, f_in })
    }

    /// Value for any `r < F_in` (the formula continues past `r_in`).
    pub fn value_ext(&self, r: T) -> T {
        -(self.f_in * self.f_in - r * r).sqrt() + (self.f_in * self.f_in - self.r_in * self.r_in).sqrt()
    }

    pub fn slope_ext(&self, r: T) -> T {
        r / (self.f_in * self.f_in - r * r).sqrt()
    }

    /// `(w_in(r), ∂_r w_in(r))` on `[0, r_in]`.
    pub fn eval(&self, r: T) -> Result<(T, T), McfError> {
        if r < T::zero() || r > self.r_in {
            return Err(McfError::OutOfRange { r: r.to_f64_lossy(), lo: 0.0, hi: self.r_in.to_f64_lossy() });
        }
        Ok((self.value_ext(r), self.slope_ext(r)))
    }

    /// `F_in - √(F_in² - r_in²)`, the depth below the rim.
    pub fn depth(&self) -> T {
        self.f_in - (self.f_in * self.f_in - self.r_in * self.r_in).sqrt()
    }

    /// Slope at the rim, `r_in / √(F_in² - r_in²)`.
    pub fn rim_slope(&self) -> T {
        self.slope_ext(self.r_in)
    }
}

/// Rotationally symmetric graph of constant mean curvature `F_out < 0` over
/// the annulus `r_in ≤ r ≤ r_out`, horizontal at `r_out` and zero at `r_in`.
///
/// Its radial slope is `q/√(1 - q²)` with `q(r) = |F_out| (r_out^n - r^n)/r^{n-1}`;
/// values are integrals of the slope from `r_in`, accumulated over fixed
/// panels once and finished with one Gauss–Kronrod panel per query.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaunayProfile<T> {
    pub n: usize,
    pub r_in: T,
    pub r_out: T,
    pub f_out: T,
    nodes: Vec<T>,
    cumulative: Vec<T>,
    /// Sum of the quadrature error estimates over all cached panels.
    pub quadrature_error: T,
}

const PANELS: usize = 256;

impl<T: Real> DelaunayProfile<T> {
    pub fn new(n: usize, r_in: T, r_out: T, f_out: T, tol: T) -> Result<Self, McfError> {
        if n == 0 || !(r_in > T::zero()) || !(r_out > r_in) || !(f_out < T::zero()) {
            return Err(McfError::InvalidProfile(format!(
                "need r_out > r_in > 0, F_out < 0 (r_in = {r_in}, r_out = {r_out}, F_out = {f_out})"
            )));
        }
        let q = -f_out * (r_out.powu(n) - r_in.powu(n)) / r_in.powu(n - 1);
        if !(q < T::one()) {
            return Err(McfError::IllDefined { q_at_r_in: q.to_f64_lossy() });
        }
        let mut p = Self {
            n,
            r_in,
            r_out,
            f_out,
            nodes: Vec::with_capacity(PANELS + 1),
            cumulative: Vec::with_capacity(PANELS + 1),
            quadrature_error: T::zero(),
        };
        let step = (r_out - r_in) / T::lit(PANELS as f64);
        let mut acc = T::zero();
        let panel_tol = tol / T::lit(PANELS as f64);
        for k in 0..=PANELS {
            let node = if k == PANELS { r_out } else { r_in + step * T::lit(k as f64) };
            if k > 0 {
                let a = p.nodes[k - 1];
                let piece = integrate(|r| p.slope_ext(r), a, node, panel_tol, 200).map_err(McfError::Quadrature)?;
                acc = acc + piece.value;
                p.quadrature_error = p.quadrature_error + piece.error;
            }
            p.nodes.push(node);
            p.cumulative.push(acc);
        }
        Ok(p)
    }

    /// `q(r) = |F_out| (r_out^n - r^n) / r^{n-1}`, the sine of the slope angle.
    pub fn q(&self, r: T) -> T {
        -self.f_out * (self.r_out.powu(self.n) - r.powu(self.n)) / r.powu(self.n - 1)
    }

    /// Radial slope, also meaningful slightly outside `[r_in, r_out]` while `|q| < 1`.
    pub fn slope_ext(&self, r: T) -> T {
        let q = self.q(r);
        q / (T::one() - q * q).sqrt()
    }

    /// `w_out_slope`: closed-form slope on `[r_in, r_out]`.
    pub fn slope(&self, r: T) -> Result<T, McfError> {
        if r < self.r_in || r > self.r_out {
            return Err(McfError::OutOfRange {
                r: r.to_f64_lossy(),
                lo: self.r_in.to_f64_lossy(),
                hi: self.r_out.to_f64_lossy(),
            });
        }
        Ok(self.slope_ext(r))
    }

    /// Value via the cached panels; extends smoothly a little past either end.
    pub fn value_ext(&self, r: T) -> T {
        let step = (self.r_out - self.r_in) / T::lit(PANELS as f64);
        let k = ((r - self.r_in) / step).floor().to_f64_lossy();
        let k = if k.is_finite() { k.clamp(0.0, (PANELS - 1) as f64) as usize } else { 0 };
        let a = self.nodes[k];
        self.cumulative[k] + gk15(|s| self.slope_ext(s), a, r)
    }

    /// `w_out_eval` on `[r_in, r_out]`.
    pub fn value(&self, r: T) -> Result<T, McfError> {
        if r < self.r_in || r > self.r_out {
            return Err(McfError::OutOfRange {
                r: r.to_f64_lossy(),
                lo: self.r_in.to_f64_lossy(),
                hi: self.r_out.to_f64_lossy(),
            });
        }
        Ok(self.value_ext(r))
    }

    /// `w_out(r_out)`, the total rise across the annulus.
    pub fn rise(&self) -> T {
        self.cumulative[PANELS]
    }

    /// Second radial derivative from `q' (1 + w'²)^{3/2}`.
    pub fn second_derivative(&self, r: T) -> T {
        let n = T::lit(self.n as f64);
        let dq = self.f_out * (n + (n - T::one()) * (self.r_out.powu(self.n) - r.powu(self.n)) / r.powu(self.n));
        let s = self.slope_ext(r);
        dq * (T::one() + s * s).powf(T::lit(1.5))
    }
}

/// Single 15-point Kronrod panel over `[a, b]` (either orientation).
fn gk15<T: Real>(f: impl Fn(T) -> T, a: T, b: T) -> T {
    if a == b {
        return T::zero();
    }
    match integrate(|x| f(x), a, b, T::infinity(), 1) {
        Ok(r) => r.value,
        Err(_) => T::nan(),
    }
}

/// `g(r_out, c) = q/√(1 - q²)` with `q = c (1 - (r_in/r_out)^n)`: the slope of
/// the outer profile at `r_in` when `F_out = -c r_in^{n-1}/r_out^n`.
pub fn g_scaling<T: Real>(r_out: T, c: T, r_in: T, n: usize) -> Result<T, McfError> {
    let q = c * (T::one() - (r_in / r_out).powu(n));
    if !(q.abs() < T::one()) {
        return Err(McfError::IllDefined { q_at_r_in: q.to_f64_lossy() });
    }
    Ok(q / (T::one() - q * q).sqrt())
}

/// Largest `c` with `g(r_out, c) < c2 · c` for every `r_out` in `[lo, hi]`:
/// `g < c2 c ⇔ c² < A² - 1/c2²` with `A = r_out^n/(r_out^n - r_in^n)`, smallest at `hi`.
pub fn c_max_for(c2: f64, r_in: f64, n: usize, r_out_range: (f64, f64)) -> Option<f64> {
    let hi = r_out_range.1;
    let a = hi.powi(n as i32) / (hi.powi(n as i32) - r_in.powi(n as i32));
    let rad = a * a - 1.0 / (c2 * c2);
    (rad > 0.0).then(|| rad.sqrt())
}

/// Largest `c` with `g(r_out, c) ≤ target`.
pub fn c_for_slope(target: f64, r_out: f64, r_in: f64, n: usize) -> f64 {
    let a = 1.0 - (r_in / r_out).powi(n as i32);
    target / (1.0 + target * target).sqrt() / a
}

/// Cap plus annulus: the MCF local solution.
#[derive(Debug, Clone, PartialEq)]
pub struct McfLocal {
    pub cap: SphericalCap<f64>,
    pub outer: DelaunayProfile<f64>,
}

impl McfLocal {
    /// `w_local(r)`; `+∞` beyond `r_out`.
    pub fn w_local(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= self.cap.r_in {
            self.cap.value_ext(r)
        } else if r <= self.outer.r_out {
            self.outer.value_ext(r)
        } else {
            f64::INFINITY
        }
    }

    /// Piece value continued across `r_in` (used for finite differences that
    /// must not straddle the kink).
    pub fn piece_value(&self, r: f64, inner: bool) -> f64 {
        if inner {
            self.cap.value_ext(r)
        } else {
            self.outer.value_ext(r)
        }
    }

    pub fn piece_slope(&self, r: f64, inner: bool) -> f64 {
        if inner {
            self.cap.slope_ext(r)
        } else {
            self.outer.slope_ext(r)
        }
    }

    pub fn piece_second(&self, r: f64, inner: bool) -> f64 {
        if inner {
            let f = self.cap.f_in;
            f * f / (f * f - r * r).powf(1.5)
        } else {
            self.outer.second_derivative(r)
        }
    }

    /// Bound on second directional derivatives of either piece.
    pub fn curvature_bound(&self) -> f64 {
        let mut m = self.piece_second(self.cap.r_in, true).abs();
        let steps = 512;
        for k in 0..=steps {
            let r = self.outer.r_in + (self.outer.r_out - self.outer.r_in) * k as f64 / steps as f64;
            m = m.max(self.outer.second_derivative(r).abs()).max((self.outer.slope_ext(r) / r).abs());
        }
        m * 1.1
    }
}

impl RadialProfile for McfLocal {
    fn n(&self) -> usize {
        self.outer.n
    }
    fn r_in(&self) -> f64 {
        self.cap.r_in
    }
    fn r_out(&self) -> f64 {
        self.outer.r_out
    }
    fn value(&self, r: f64) -> f64 {
        self.w_local(r)
    }
    fn slope(&self, r: f64, inner: bool) -> f64 {
        self.piece_slope(r, inner)
    }
}
