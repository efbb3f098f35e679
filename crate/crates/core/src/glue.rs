//! Smooth lift of the per-column obstacle heights: constant on each box
//! `Q̄_k`, blended across the gaps of width `d` by a quintic smoothstep in
//! every lateral direction.

use thiserror::Error;

use crate::percolation::{SelectedObstacles, Torus};
use crate::scalar::Real;

/// `max β' = 30/16` for `β(t) = 6t⁵ - 15t⁴ + 10t³`.
pub const BLEND_MAX_SLOPE: f64 = 1.875;
/// `max |β''| = 10/√3`, attained at `t = (3 ± √3)/6`.
pub const BLEND_MAX_CURVATURE: f64 = 5.773_502_691_896_258;

/// `C1` for the gradient bound `‖∇v_glue‖ ≤ C1 h/d` when neighbouring cell
/// values differ by at most `2h` (per axis; the Euclidean norm adds `√n`).
pub fn gradient_constant(n: usize) -> f64 {
    2.0 * BLEND_MAX_SLOPE * (n as f64).sqrt()
}

/// `C1` for `|Δv_glue| ≤ C1 h/d²` under the same hypothesis.
pub fn laplacian_constant(n: usize) -> f64 {
    2.0 * BLEND_MAX_CURVATURE * n as f64
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlueError {
    #[error("cells {a} and {b} differ by {diff}, more than the allowed {limit}")]
    AdjacencyViolation { a: usize, b: usize, diff: f64, limit: f64 },
    #[error("invalid glue layout: {0}")]
    Layout(String),
}

pub fn blend<T: Real>(t: T) -> T {
    let t = t.max(T::zero()).min(T::one());
    t * t * t * (t * (t * T::lit(6.0) - T::lit(15.0)) + T::lit(10.0))
}

pub fn blend_d1<T: Real>(t: T) -> T {
    if t <= T::zero() || t >= T::one() {
        return T::zero();
    }
    let s = t * (T::one() - t);
    T::lit(30.0) * s * s
}

pub fn blend_d2<T: Real>(t: T) -> T {
    if t <= T::zero() || t >= T::one() {
        return T::zero();
    }
    T::lit(60.0) * t * (T::one() - t) * (T::one() - T::lit(2.0) * t)
}

/// Value, gradient and row-major Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueJet<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess: Vec<T>,
}

impl<T: Real> GlueJet<T> {
    pub fn laplacian(&self) -> T {
        let n = self.grad.len();
        (0..n).fold(T::zero(), |s, a| s + self.hess[a * n + a])
    }
}

/// Observed sup-norms over the transition strips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlueNorms {
    pub max_grad: f64,
    pub max_hess: f64,
    pub max_laplacian: f64,
    pub max_jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlueFunction<T> {
    torus: Torus,
    l: T,
    d: T,
    values: Vec<T>,
}

struct AxisBlend<T> {
    cell: usize,
    w: [T; 2],
    dw: [T; 2],
    ddw: [T; 2],
}

impl<T: Real> GlueFunction<T> {
    pub fn new(torus: Torus, l: T, d: T, values: Vec<T>) -> Result<Self, GlueError> {
        if values.len() != torus.len() {
            return Err(GlueError::Layout(format!("{} values for {} cells", values.len(), torus.len())));
        }
        if !(l > T::zero()) || !(d > T::zero()) {
            return Err(GlueError::Layout(format!("need l, d > 0 (l = {l}, d = {d})")));
        }
        Ok(Self { torus, l, d, values })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn period(&self) -> T {
        self.l + self.d
    }

    /// Largest difference between neighbouring cell values.
    pub fn max_jump(&self) -> T {
        let mut m = T::zero();
        for k in 0..self.torus.len() {
            for nb in self.torus.neighbors(k) {
                m = m.max((self.values[k] - self.values[nb]).abs());
            }
        }
        m
    }

    fn axis(&self, a: usize, x: T) -> AxisBlend<T> {
        let p = self.period();
        let m = self.torus.extent()[a];
        let cells = T::lit(m as f64);
        let total = p * cells;
        let xr = x - (x / total).floor() * total;
        let i = (xr / p).floor();
        let s = xr - i * p;
        let cell = (i.to_f64_lossy() as usize).min(m - 1);
        if s <= self.l {
            return AxisBlend { cell, w: [T::one(), T::zero()], dw: [T::zero(); 2], ddw: [T::zero(); 2] };
        }
        let t = (s - self.l) / self.d;
        let b = blend(t);
        let b1 = blend_d1(t) / self.d;
        let b2 = blend_d2(t) / (self.d * self.d);
        AxisBlend { cell, w: [T::one() - b, b], dw: [-b1, b1], ddw: [-b2, b2] }
    }

    /// Value only.
    pub fn value(&self, x: &[T]) -> T {
        let n = self.torus.n();
        let axes: Vec<AxisBlend<T>> = (0..n).map(|a| self.axis(a, x[a])).collect();
        let mut v = T::zero();
        for corner in 0..(1usize << n) {
            let mut w = T::one();
            let mut cell = Vec::with_capacity(n);
            for (a, ax) in axes.iter().enumerate() {
                let c = (corner >> a) & 1;
                w = w * ax.w[c];
                cell.push(ax.cell + c);
            }
            if w != T::zero() {
                v = v + w * self.values[self.torus.index(&cell)];
            }
        }
        v
    }

    pub fn jet(&self, x: &[T]) -> GlueJet<T> {
        let n = self.torus.n();
        let axes: Vec<AxisBlend<T>> = (0..n).map(|a| self.axis(a, x[a])).collect();
        let mut value = T::zero();
        let mut grad = vec![T::zero(); n];
        let mut hess = vec![T::zero(); n * n];
        let mut cell = vec![0usize; n];
        for corner in 0..(1usize << n) {
            for (a, ax) in axes.iter().enumerate() {
                cell[a] = ax.cell + ((corner >> a) & 1);
            }
            let val = self.values[self.torus.index(&cell)];
            let c = |a: usize| (corner >> a) & 1;
            let factor = |a: usize, order: u8| match order {
                0 => axes[a].w[c(a)],
                1 => axes[a].dw[c(a)],
                _ => axes[a].ddw[c(a)],
            };
            let prod_except = |skip: &[usize]| {
                (0..n).filter(|a| !skip.contains(a)).fold(T::one(), |p, a| p * factor(a, 0))
            };
            value = value + val * prod_except(&[]);
            for a in 0..n {
                grad[a] = grad[a] + val * factor(a, 1) * prod_except(&[a]);
                hess[a * n + a] = hess[a * n + a] + val * factor(a, 2) * prod_except(&[a]);
                for b in (a + 1)..n {
                    let m = val * factor(a, 1) * factor(b, 1) * prod_except(&[a, b]);
                    hess[a * n + b] = hess[a * n + b] + m;
                    hess[b * n + a] = hess[b * n + a] + m;
                }
            }
        }
        GlueJet { value, grad, hess }
    }

    /// Whether `x` lies in the gap strips `D̄` (where the gradient can be nonzero).
    pub fn in_transition(&self, x: &[T]) -> bool {
        let p = self.period();
        (0..self.torus.n()).any(|a| {
            let total = p * T::lit(self.torus.extent()[a] as f64);
            let xr = x[a] - (x[a] / total).floor() * total;
            xr - (xr / p).floor() * p > self.l
        })
    }

    /// Scan the gap strips with `samples` points across each gap.
    pub fn measure(&self, samples: usize) -> GlueNorms {
        let n = self.torus.n();
        let p = self.period().to_f64_lossy();
        let l = self.l.to_f64_lossy();
        let d = self.d.to_f64_lossy();
        // per axis: box interior (one point, the blend is flat there) plus the gap samples
        let offsets: Vec<f64> =
            std::iter::once(l / 2.0).chain((0..=samples).map(|i| l + d * i as f64 / samples as f64)).collect();
        let mut norms = GlueNorms { max_grad: 0.0, max_hess: 0.0, max_laplacian: 0.0, max_jump: self.max_jump().to_f64_lossy() };
        for k in 0..self.torus.len() {
            let base = self.torus.coords(k);
            let mut idx = vec![0usize; n];
            loop {
                let x: Vec<T> = (0..n).map(|a| T::lit(base[a] as f64 * p + offsets[idx[a]])).collect();
                let jet = self.jet(&x);
                let g = jet.grad.iter().fold(0.0, |s, v| s + v.to_f64_lossy().powi(2)).sqrt();
                let h = jet.hess.iter().fold(0.0, |s, v| s + v.to_f64_lossy().powi(2)).sqrt();
                norms.max_grad = norms.max_grad.max(g);
                norms.max_hess = norms.max_hess.max(h);
                norms.max_laplacian = norms.max_laplacian.max(jet.laplacian().to_f64_lossy().abs());
                let mut a = 0;
                while a < n {
                    idx[a] += 1;
                    if idx[a] < offsets.len() {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
                if a == n {
                    break;
                }
            }
        }
        norms
    }
}

/// Glue lifting every selected obstacle's column to `y_i + r0`.
///
/// Fails if two neighbouring columns differ by more than `max_jump`.
pub fn build_glue(
    selected: &SelectedObstacles,
    torus: &Torus,
    l: f64,
    d: f64,
    r0: f64,
    max_jump: f64,
) -> Result<GlueFunction<f64>, GlueError> {
    if selected.len() != torus.len() {
        return Err(GlueError::Layout(format!("{} selected obstacles for {} columns", selected.len(), torus.len())));
    }
    let values: Vec<f64> = selected.items.iter().map(|s| s.y + r0).collect();
    for k in 0..torus.len() {
        for nb in torus.neighbors(k) {
            let diff = (values[k] - values[nb]).abs();
            if diff > max_jump * (1.0 + 1e-12) {
                return Err(GlueError::AdjacencyViolation { a: k, b: nb, diff, limit: max_jump });
            }
        }
    }
    GlueFunction::new(torus.clone(), l, d, values)
}

/// Sup-norms of the two-cell glue with values `0` and `2h` (the worst admissible
/// jump) on a line; the basis for the measured glue constants.
pub fn measure_two_cell(n: usize, h: f64, l: f64, d: f64, samples: usize) -> GlueNorms {
    let mut extent = vec![1usize; n];
    extent[0] = 2;
    let torus = Torus::new(extent).expect("nonempty");
    let values: Vec<f64> = (0..torus.len()).map(|k| if torus.coords(k)[0] == 0 { 0.0 } else { 2.0 * h }).collect();
    GlueFunction::new(torus, l, d, values).expect("layout").measure(samples)
}

/// Measured glue constants `(C_grad, C_lap)` with `‖∇v‖ ≤ C_grad h/d` and
/// `|Δv| ≤ C_lap h/d²` for neighbour jumps up to `2h`, from a fine scan of the
/// worst-case checkerboard on the `2^n` torus.
pub fn measured_constants(n: usize) -> (f64, f64) {
    let (h, l, d) = (1.0, 1.0, 1.0);
    let torus = Torus::new(vec![2; n]).expect("nonempty");
    let values: Vec<f64> =
        (0..torus.len()).map(|k| if torus.coords(k).iter().sum::<usize>() % 2 == 0 { 0.0 } else { 2.0 * h }).collect();
    let samples = if n == 1 { 2000 } else { 200 };
    let norms = GlueFunction::new(torus, l, d, values).expect("layout").measure(samples);
    (norms.max_grad * d / h, norms.max_laplacian * d * d / h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_endpoints() {
        assert_eq!(blend(0.0f64), 0.0);
        assert_eq!(blend(1.0f64), 1.0);
        assert!((blend(0.5f64) - 0.5).abs() < 1e-15);
        assert!((blend_d1(0.5f64) - BLEND_MAX_SLOPE).abs() < 1e-15);
        let t = (3.0 - 3f64.sqrt()) / 6.0;
        assert!((blend_d2(t) - BLEND_MAX_CURVATURE).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_differences() {
        let torus = Torus::new(vec![3, 2]).unwrap();
        let g = GlueFunction::new(torus, 2.0f64, 1.0, vec![0.0, 1.0, 0.5, 2.0, 1.5, 0.2]).unwrap();
        let e = 1e-5;
        for x in [[2.3, 2.7], [2.5, 0.4], [5.9, 2.1], [8.6, 5.5]] {
            let j = g.jet(&x);
            for a in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += e;
                xm[a] -= e;
                let fd = (g.value(&xp) - g.value(&xm)) / (2.0 * e);
                assert!((fd - j.grad[a]).abs() < 1e-7, "{fd} {}", j.grad[a]);
                let jp = g.jet(&xp);
                let jm = g.jet(&xm);
                for b in 0..2 {
                    let fd2 = (jp.grad[b] - jm.grad[b]) / (2.0 * e);
                    assert!((fd2 - j.hess[a * 2 + b]).abs() < 1e-6);
                }
            }
            assert!((j.value - g.value(&x)).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_on_boxes_and_periodic() {
        let torus = Torus::new(vec![2]).unwrap();
        let g = GlueFunction::new(torus, 3.0f64, 1.0, vec![1.0, 5.0]).unwrap();
        assert_eq!(g.value(&[0.2]), 1.0);
        assert_eq!(g.value(&[2.9]), 1.0);
        assert_eq!(g.value(&[4.0]), 5.0);
        assert_eq!(g.value(&[8.5]), g.value(&[0.5]));
        assert!(g.in_transition(&[3.5]) && !g.in_transition(&[1.0]));
        assert_eq!(g.jet(&[1.0]).grad, vec![0.0]);
    }

    #[test]
    fn uniform_values_are_flat() {
        let torus = Torus::new(vec![3, 3]).unwrap();
        let g = GlueFunction::new(torus, 1.0f64, 0.5, vec![2.5; 9]).unwrap();
        let norms = g.measure(20);
        assert!(norms.max_grad < 1e-12 && norms.max_hess < 1e-12);
        assert!((g.value(&[1.2, 0.1]) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn two_cell_bounds() {
        let (h, d) = (0.7, 3.0);
        let norms = measure_two_cell(1, h, 2.0, d, 4000);
        assert!(norms.max_grad <= gradient_constant(1) * h / d * (1.0 + 1e-9));
        assert!((norms.max_grad - gradient_constant(1) * h / d).abs() < 1e-6);
        assert!(norms.max_laplacian <= laplacian_constant(1) * h / (d * d) * (1.0 + 1e-9));
        let (cg, cl) = measured_constants(1);
        assert!((cg - 3.75).abs() < 1e-6 && (cl - 11.547).abs() < 1e-2);
    }

    #[test]
    fn f32_matches_f64() {
        let g64 = GlueFunction::new(Torus::new(vec![2]).unwrap(), 2.0f64, 1.0, vec![0.0, 1.0]).unwrap();
        let g32 = GlueFunction::new(Torus::new(vec![2]).unwrap(), 2.0f32, 1.0, vec![0.0, 1.0]).unwrap();
        assert!((g64.value(&[2.3]) as f32 - g32.value(&[2.3f32])).abs() < 1e-6);
    }
}
