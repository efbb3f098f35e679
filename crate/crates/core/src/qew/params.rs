use crate::certificate::InequalityCheck;
use crate::field::{ObstacleShape, StrengthDistribution};
use crate::glue::measured_constants;
use crate::percolation::{critical_probability, BoxGeometry};

use super::{LocalProfileQew, QewError};

/// Knobs of the parameter recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QewRecipe {
    /// `f̄` is the largest threshold with `P(f₁ ≥ f̄)` at least this.
    pub tail_floor: f64,
    /// `F_in = fraction · f̄/2`.
    pub f_in_fraction: f64,
    /// `p_target = 1 - margin · (1 - p_c)`.
    pub percolation_margin: f64,
    /// Factor applied to the measured glue Laplacian constant.
    pub c1_margin: f64,
    /// The jump condition must hold with this factor on its right side.
    pub jump_margin: f64,
    /// `F* = safety · min(-F_out/2, f̄/2)`.
    pub safety: f64,
    pub h_range: (f64, f64),
    pub d_range: (f64, f64),
    /// Points of the log grid over `d`; `h` is solved for by bisection.
    pub grid_points: usize,
}

impl Default for QewRecipe {
    fn default() -> Self {
        Self {
            tail_floor: 0.5,
            f_in_fraction: 0.9,
            percolation_margin: 0.8,
            c1_margin: 1.1,
            jump_margin: 1.1,
            safety: 0.9,
            h_range: (1e-2, 1e2),
            d_range: (1e-1, 1e3),
            grid_points: 241,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QewParams {
    pub n: usize,
    pub r0: f64,
    pub r1: f64,
    pub lambda: f64,
    pub f_bar: f64,
    /// `P(f₁ ≥ f̄)`.
    pub tail: f64,
    pub p_target: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub f_in: f64,
    pub f_out: f64,
    pub h: f64,
    pub d: f64,
    pub l: f64,
    pub c0: f64,
    /// Glue Laplacian constant with margin: `|Δv_glue| ≤ c1 h/d²`.
    pub c1: f64,
    pub f_star: f64,
}

/// `C0` with `1 - exp(-λ C0^n tail) = p_target`.
pub fn percolation_constant(n: usize, lambda: f64, tail: f64, p_target: f64) -> f64 {
    (-(1.0 - p_target).ln() / (lambda * tail)).powf(1.0 / n as f64)
}

/// `l(h) = C0 h^{-1/n} + 2 r1`.
pub fn box_side(c0: f64, h: f64, n: usize, r1: f64) -> f64 {
    c0 * h.powf(-1.0 / n as f64) + 2.0 * r1
}

/// Covering radius `√n (l + d/2 - r1)`.
pub fn covering_radius(n: usize, l: f64, d: f64, r1: f64) -> f64 {
    (n as f64).sqrt() * (l + 0.5 * d - r1)
}

fn log_grid(range: (f64, f64), points: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (range.0.ln(), range.1.ln());
    (0..points).map(move |i| (a + (b - a) * i as f64 / (points - 1).max(1) as f64).exp())
}

impl QewParams {
    pub fn profile(&self) -> LocalProfileQew<f64> {
        LocalProfileQew { n: self.n, r_in: self.r_in, r_out: self.r_out, f_in: self.f_in, f_out: self.f_out }
    }

    pub fn geometry(&self) -> BoxGeometry {
        BoxGeometry { n: self.n, l: self.l, d: self.d, h: self.h, r1: self.r1 }
    }

    /// Lateral period `l + d` of one column.
    pub fn period(&self) -> f64 {
        self.l + self.d
    }

    /// `C' = F_in r_in / (2 C1)`.
    pub fn connection_lhs(&self) -> f64 {
        self.f_in * self.r_in / (2.0 * self.c1)
    }

    /// `(h/d²)(r_out^n / r_in^{n-1} - r_in)`.
    pub fn connection_rhs(&self) -> f64 {
        self.h / (self.d * self.d) * (self.r_out.powi(self.n as i32) / self.r_in.powi(self.n as i32 - 1) - self.r_in)
    }

    /// Every parameter inequality the construction relies on.
    pub fn checks(&self) -> Vec<InequalityCheck> {
        let n = self.n as f64;
        let jump = self.profile().check_jump_condition();
        vec![
            InequalityCheck::le("inner_radius_fits_core", self.r_in, self.r0),
            InequalityCheck::le("inner_depth_fits_core", self.f_in * self.r_in * self.r_in / (2.0 * n), self.r0),
            InequalityCheck::lt("inner_force_below_half_threshold", self.f_in, self.f_bar / 2.0),
            InequalityCheck::le("jump_condition", self.f_in * self.r_in - jump.slack, self.f_in * self.r_in),
            InequalityCheck::le("gluing_bound", 2.0 * self.c1 * self.h / (self.d * self.d), -self.f_out * (1.0 + 1e-12)),
            InequalityCheck::lt("percolation_target", critical_probability(self.n), self.p_target),
            InequalityCheck::le("connection", self.connection_rhs(), self.connection_lhs()),
            InequalityCheck::lt("boxes_exceed_support", 2.0 * self.r1, self.l),
            InequalityCheck::le(
                "covering_radius",
                (covering_radius(self.n, self.l, self.d, self.r1) - self.r_out).abs(),
                1e-9 * self.r_out,
            ),
            InequalityCheck::lt("force_positive", 0.0, self.f_star),
            InequalityCheck::le("force_below_bounds", self.f_star, (-self.f_out / 2.0).min(self.f_bar / 2.0)),
        ]
    }
}

/// Parameter recipe: fix `f̄`, `F_in`, `r_in` and `C0`; then, over a log grid
/// in `d` (zoomed around the best point), take the largest `h` meeting the
/// jump condition with `F_out = -2 C1 h/d²` and keep the pair with the
/// largest `F*`.
pub fn choose_parameters(
    shape: &ObstacleShape<f64>,
    lambda: f64,
    dist: &StrengthDistribution,
    recipe: &QewRecipe,
) -> Result<QewParams, QewError> {
    let n = shape.n();
    let nf = n as f64;
    let (r0, r1) = (shape.r0(), shape.r1());
    let f_bar = dist
        .threshold_for_tail(recipe.tail_floor)
        .filter(|f| *f > 0.0)
        .ok_or_else(|| QewError::Infeasible(format!("no positive threshold with tail >= {}", recipe.tail_floor)))?;
    let tail = dist.tail(f_bar);
    if !(tail > 0.0) || !(lambda > 0.0) {
        return Err(QewError::Infeasible(format!("tail P(f >= {f_bar}) = {tail}, intensity {lambda}")));
    }
    let f_in = recipe.f_in_fraction * f_bar / 2.0;
    let r_in = r0.min((2.0 * nf * r0 / f_in).sqrt());
    let p_c = critical_probability(n);
    let p_target = 1.0 - recipe.percolation_margin * (1.0 - p_c);
    let c0 = percolation_constant(n, lambda, tail, p_target);
    let c1 = measured_constants(n).1 * recipe.c1_margin;

    let slack = |h: f64, d: f64| {
        let r_out = covering_radius(n, box_side(c0, h, n, r1), d, r1);
        let f_out = 2.0 * c1 * h / (d * d);
        f_in * r_in - recipe.jump_margin * f_out * (r_out.powi(n as i32) / r_in.powi(n as i32 - 1) - r_in)
    };
    // for fixed d the jump slack decreases in h: bisect (in log h) for the largest feasible h
    let largest_h = |d: f64| -> Option<f64> {
        let (mut lo, mut hi) = (recipe.h_range.0.ln(), recipe.h_range.1.ln());
        if slack(lo.exp(), d) < 0.0 {
            return None;
        }
        if slack(hi.exp(), d) >= 0.0 {
            return Some(hi.exp());
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slack(mid.exp(), d) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo.exp())
    };
    let score = |h: f64, d: f64| recipe.safety * (c1 * h / (d * d)).min(f_bar / 2.0);
    let scan = |range: (f64, f64), points: usize| {
        let mut best: Option<(f64, f64, f64)> = None;
        for d in log_grid(range, points) {
            let Some(h) = largest_h(d) else { continue };
            let f = score(h, d);
            let better = match best {
                None => true,
                Some((bh, bd, bf)) => {
                    f > bf * (1.0 + 1e-12) || (f >= bf * (1.0 - 1e-12) && box_side(c0, h, n, r1) + d < box_side(c0, bh, n, r1) + bd)
                }
            };
            if better {
                best = Some((h, d, f));
            }
        }
        best
    };
    let mut best = scan(recipe.d_range, recipe.grid_points);
    let closest = log_grid(recipe.d_range, recipe.grid_points)
        .map(|d| slack(recipe.h_range.0, d))
        .fold(f64::NEG_INFINITY, f64::max);
    // zoom around the coarse optimum in d
    let mut ratio = (recipe.d_range.1 / recipe.d_range.0).powf(1.0 / (recipe.grid_points - 1).max(1) as f64);
    for _ in 0..3 {
        let Some((_, d, f)) = best else { break };
        if let Some(r) = scan((d / ratio, d * ratio), 41) {
            if r.2 >= f {
                best = Some(r);
            }
        }
        ratio = ratio.powf(2.0 / 40.0);
    }
    let (h, d, f_star) = best.ok_or_else(|| {
        QewError::Infeasible(format!(
            "jump condition F_in r_in >= |F_out|(r_out^n/r_in^(n-1) - r_in) fails on the whole (h, d) grid; best slack {closest:e}"
        ))
    })?;
    let l = box_side(c0, h, n, r1);
    let r_out = covering_radius(n, l, d, r1);
    Ok(QewParams {
        n,
        r0,
        r1,
        lambda,
        f_bar,
        tail,
        p_target,
        r_in,
        r_out,
        f_in,
        f_out: -2.0 * c1 * h / (d * d),
        h,
        d,
        l,
        c0,
        c1,
        f_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> QewParams {
        let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
        choose_parameters(&shape, 1.0, &StrengthDistribution::Constant { value: 10.0 }, &QewRecipe::default()).unwrap()
    }

    #[test]
    fn fixture_recipe() {
        let p = fixture();
        assert_eq!(p.f_bar, 10.0);
        assert!((p.f_in - 4.5).abs() < 1e-12);
        assert_eq!(p.r_in, 0.25);
        assert!((p.p_target - 0.95).abs() < 1e-12);
        assert!((p.c0 - (-(0.05f64).ln())).abs() < 1e-12);
        assert!(p.f_star > 0.0);
        for c in p.checks() {
            assert!(c.holds, "{c:?}");
        }
        assert!(p.profile().check_jump_condition().holds);
    }

    #[test]
    fn fixture_is_near_the_analytic_optimum() {
        // n = 1: the jump condition reads F_in r_in ≥ m·2C1 (C0 + h (r1 + d/2 - r_in))/d²,
        // so for fixed d the best h is (F_in r_in d²/(2 m C1) - C0)/(r1 + d/2 - r_in).
        let p = fixture();
        let m = 1.1;
        let best = (100..6000)
            .map(|i| i as f64 * 0.01)
            .map(|d| {
                let h = (p.f_in * p.r_in * d * d / (2.0 * m * p.c1) - p.c0) / (p.r1 + d / 2.0 - p.r_in);
                2.0 * p.c1 * h / (d * d)
            })
            .fold(0.0, f64::max);
        assert!(-p.f_out <= best * (1.0 + 1e-9));
        assert!(-p.f_out >= 0.995 * best, "{} vs {best}", -p.f_out);
    }

    #[test]
    fn infeasible_without_strength() {
        let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
        let r = QewRecipe { h_range: (1.0, 1.0001), d_range: (0.1, 0.2), grid_points: 3, ..QewRecipe::default() };
        let e = choose_parameters(&shape, 1.0, &StrengthDistribution::Constant { value: 10.0 }, &r).unwrap_err();
        assert!(matches!(e, QewError::Infeasible(_)));
    }
}
