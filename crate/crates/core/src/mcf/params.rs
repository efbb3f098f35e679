use crate::certificate::InequalityCheck;
use crate::field::{ObstacleShape, StrengthDistribution};
use crate::glue::measured_constants;
use crate::percolation::{critical_probability, BoxGeometry};
use crate::qew::{box_side, covering_radius, percolation_constant};

use super::profile::{c_for_slope, c_max_for, g_scaling, DelaunayProfile, McfLocal, SphericalCap};
use super::McfError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McfRecipe {
    pub tail_floor: f64,
    /// `r_in = fraction · r0`.
    pub r_in_fraction: f64,
    /// Target rim slope `G` of the cap; sets `F_in = r_in √(1 + 1/G²)`.
    pub cap_slope: f64,
    /// Cap curvature is kept below `fraction · f̄/2`.
    pub curvature_fraction: f64,
    pub percolation_margin: f64,
    /// Annulus slope at `r_in` is kept below `G / margin`.
    pub slope_margin: f64,
    /// `-F_out ≥ margin · C h/d` with `C` the measured glue gradient constant.
    pub gradient_margin: f64,
    /// Factor applied to the measured glue Laplacian constant.
    pub c1_margin: f64,
    /// Scaling constant for the `g(r_out, c) < C2 c` companion bound.
    pub c2: f64,
    pub safety: f64,
    pub h_range: (f64, f64),
    pub d_range: (f64, f64),
    pub grid_points: usize,
    pub quad_tol: f64,
}

impl Default for McfRecipe {
    fn default() -> Self {
        Self {
            tail_floor: 0.5,
            r_in_fraction: 0.9,
            cap_slope: 1.0,
            curvature_fraction: 0.9,
            percolation_margin: 0.8,
            slope_margin: 1.1,
            gradient_margin: 1.1,
            c1_margin: 1.1,
            c2: 2.0,
            safety: 0.9,
            h_range: (1e-3, 1e2),
            d_range: (1e-1, 1e4),
            grid_points: 161,
            quad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McfParams {
    pub n: usize,
    pub r0: f64,
    pub r1: f64,
    pub lambda: f64,
    pub f_bar: f64,
    pub tail: f64,
    pub p_target: f64,
    pub r_in: f64,
    /// Sphere radius of the cap.
    pub f_in: f64,
    pub r_out: f64,
    pub f_out: f64,
    /// `F_out = -c r_in^{n-1}/r_out^n`.
    pub c: f64,
    pub c2: f64,
    /// Largest `c` with `g < C2 c` on `[r_out, 10 r_out]`.
    pub c_max: f64,
    pub h: f64,
    pub d: f64,
    pub l: f64,
    pub c0: f64,
    /// Glue gradient constant `C` in `-F_out > C h/d` (with margin applied separately).
    pub c_grad: f64,
    pub gradient_margin: f64,
    /// Glue Laplacian constant with margin.
    pub c_lap: f64,
    pub f_star: f64,
    pub quad_tol: f64,
}

impl McfParams {
    pub fn cap(&self) -> Result<SphericalCap<f64>, McfError> {
        SphericalCap::new(self.r_in, self.f_in)
    }

    pub fn delaunay(&self) -> Result<DelaunayProfile<f64>, McfError> {
        DelaunayProfile::new(self.n, self.r_in, self.r_out, self.f_out, self.quad_tol)
    }

    pub fn local(&self) -> Result<McfLocal, McfError> {
        Ok(McfLocal { cap: self.cap()?, outer: self.delaunay()? })
    }

    pub fn geometry(&self) -> BoxGeometry {
        BoxGeometry { n: self.n, l: self.l, d: self.d, h: self.h, r1: self.r1 }
    }

    pub fn period(&self) -> f64 {
        self.l + self.d
    }

    pub fn cap_rim_slope(&self) -> f64 {
        self.r_in / (self.f_in * self.f_in - self.r_in * self.r_in).sqrt()
    }

    /// Slope of the annulus profile at `r_in` (`∞` when not defined).
    pub fn annulus_rim_slope(&self) -> f64 {
        g_scaling(self.r_out, self.c, self.r_in, self.n).unwrap_or(f64::INFINITY)
    }
}

/// Every condition of the MCF local construction at force `force`.
/// Condition (i) appears twice: with `F_in` read as printed and with the cap
/// curvature `1/F_in`; both are advisory, as is the printed
/// well-definedness bound. The grid residual is the final word.
pub fn check_mcf_conditions(p: &McfParams, f_bar: f64, force: f64) -> Vec<InequalityCheck> {
    let n = p.n as i32;
    let depth = p.f_in - (p.f_in * p.f_in - p.r_in * p.r_in).max(0.0).sqrt();
    let printed_def = (p.r_out - p.r_in).powi(n - 1) / (p.r_out.powi(n) - (p.r_out - p.r_in).powi(n));
    let def = p.r_in.powi(n - 1) / (p.r_out.powi(n) - p.r_in.powi(n));
    let scaled = -p.c * p.r_in.powi(n - 1) / p.r_out.powi(n);
    vec![
        InequalityCheck::lt("inner_radius_below_core", p.r_in, p.r0),
        InequalityCheck::le("cap_radius", p.r_in, p.f_in),
        InequalityCheck::le("condition_i_printed", p.f_in - f_bar + force, 0.0).advisory(),
        InequalityCheck::le("condition_i_curvature", 1.0 / p.f_in - f_bar + force, 0.0).advisory(),
        InequalityCheck::le("condition_ii", p.f_out + force, 0.0),
        InequalityCheck::le("condition_iii_cap_depth", depth, p.r0),
        InequalityCheck::lt("condition_iv_slopes", p.annulus_rim_slope(), p.cap_rim_slope()),
        InequalityCheck::lt("well_defined", -p.f_out, def),
        InequalityCheck::lt("well_defined_printed", -p.f_out, printed_def).advisory(),
        InequalityCheck::le("scaling_identity", (scaled - p.f_out).abs(), 1e-12 * p.f_out.abs()),
        InequalityCheck::le("scaling_c_within_c_max", p.c, p.c_max),
        InequalityCheck::le("gluing_gradient", p.gradient_margin * p.c_grad * p.h / p.d, -p.f_out),
        InequalityCheck::le("gluing_hessian", 2.0 * p.c_lap * p.h / (p.d * p.d), -p.f_out),
        InequalityCheck::lt("percolation_target", critical_probability(p.n), p.p_target),
        InequalityCheck::lt("boxes_exceed_support", 2.0 * p.r1, p.l),
        InequalityCheck::le(
            "covering_radius",
            (covering_radius(p.n, p.l, p.d, p.r1) - p.r_out).abs(),
            1e-9 * p.r_out,
        ),
        InequalityCheck::lt("force_positive", 0.0, p.f_star),
    ]
}

struct Candidate {
    h: f64,
    d: f64,
    c: f64,
    f_out: f64,
}

fn log_grid(range: (f64, f64), points: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (range.0.ln(), range.1.ln());
    (0..points).map(move |i| (a + (b - a) * i as f64 / (points - 1).max(1) as f64).exp())
}

/// Fix the cap (`r_in`, `F_in`, rim slope `G`), then over a log grid in
/// `(h, d)` take the largest `c` with `g(r_out, c) ≤ G/margin` and keep the
/// pair with the largest `|F_out|` meeting both gluing bounds.
pub fn choose_parameters_mcf(
    shape: &ObstacleShape<f64>,
    lambda: f64,
    dist: &StrengthDistribution,
    recipe: &McfRecipe,
) -> Result<McfParams, McfError> {
    let n = shape.n();
    let (r0, r1) = (shape.r0(), shape.r1());
    let f_bar = dist
        .threshold_for_tail(recipe.tail_floor)
        .filter(|f| *f > 0.0)
        .ok_or_else(|| McfError::Infeasible(format!("no positive threshold with tail >= {}", recipe.tail_floor)))?;
    let tail = dist.tail(f_bar);
    if !(tail > 0.0) || !(lambda > 0.0) {
        return Err(McfError::Infeasible(format!("tail P(f >= {f_bar}) = {tail}, intensity {lambda}")));
    }
    let r_in = recipe.r_in_fraction * r0;
    let g = recipe.cap_slope;
    let f_in = (r_in * (1.0 + 1.0 / (g * g)).sqrt()).max(2.0 / (recipe.curvature_fraction * f_bar));
    let cap = SphericalCap::new(r_in, f_in)?;
    if cap.depth() > r0 {
        return Err(McfError::Infeasible(format!("cap depth {} exceeds r0 = {r0}", cap.depth())));
    }
    let rim = cap.rim_slope();
    let slope_cap = rim / recipe.slope_margin;
    let p_c = critical_probability(n);
    let p_target = 1.0 - recipe.percolation_margin * (1.0 - p_c);
    let c0 = percolation_constant(n, lambda, tail, p_target);
    let (c_grad, c_lap) = measured_constants(n);
    let c_lap = c_lap * recipe.c1_margin;

    let candidate = |h: f64, d: f64| -> Option<Candidate> {
        let r_out = covering_radius(n, box_side(c0, h, n, r1), d, r1);
        if !(r_out > r_in) {
            return None;
        }
        let c = c_for_slope(slope_cap, r_out, r_in, n);
        let f_out = -c * r_in.powi(n as i32 - 1) / r_out.powi(n as i32);
        let ok = -f_out >= recipe.gradient_margin * c_grad * h / d && -f_out >= 2.0 * c_lap * h / (d * d);
        ok.then_some(Candidate { h, d, c, f_out })
    };
    let scan = |hr: (f64, f64), dr: (f64, f64), points: usize| {
        let mut best: Option<Candidate> = None;
        for d in log_grid(dr, points) {
            for h in log_grid(hr, points) {
                if let Some(cand) = candidate(h, d) {
                    if best.as_ref().map_or(true, |b| cand.f_out < b.f_out) {
                        best = Some(cand);
                    }
                }
            }
        }
        best
    };
    let mut best = scan(recipe.h_range, recipe.d_range, recipe.grid_points);
    let step = |r: (f64, f64)| (r.1 / r.0).powf(1.0 / (recipe.grid_points - 1).max(1) as f64);
    let (mut rh, mut rd) = (step(recipe.h_range), step(recipe.d_range));
    for _ in 0..3 {
        let Some(b) = best.as_ref() else { break };
        let (h, d, f) = (b.h, b.d, b.f_out);
        if let Some(z) = scan((h / rh, h * rh), (d / rd, d * rd), 41) {
            if z.f_out <= f {
                best = Some(z);
            }
        }
        rh = rh.powf(2.0 / 40.0);
        rd = rd.powf(2.0 / 40.0);
    }
    let Candidate { h, d, c, f_out } = best.ok_or_else(|| {
        McfError::Infeasible(format!(
            "no (h, d) on the grid meets -F_out >= {:.3} h/d and -F_out >= {:.3} h/d^2 with annulus slope <= {slope_cap:.4}",
            recipe.gradient_margin * c_grad,
            2.0 * c_lap
        ))
    })?;
    let l = box_side(c0, h, n, r1);
    let r_out = covering_radius(n, l, d, r1);
    let margin = f_bar - f_in.max(1.0 / f_in);
    let f_star = recipe.safety * (-f_out / 2.0).min(margin).min(f_bar / 2.0);
    let c_max = c_max_for(recipe.c2, r_in, n, (r_out, 10.0 * r_out)).unwrap_or(0.0);
    let p = McfParams {
        n,
        r0,
        r1,
        lambda,
        f_bar,
        tail,
        p_target,
        r_in,
        f_in,
        r_out,
        f_out,
        c,
        c2: recipe.c2,
        c_max,
        h,
        d,
        l,
        c0,
        c_grad,
        gradient_margin: recipe.gradient_margin,
        c_lap,
        f_star,
        quad_tol: recipe.quad_tol,
    };
    let failed: Vec<String> = check_mcf_conditions(&p, f_bar, f_star)
        .into_iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{} ({} vs {})", c.name, c.lhs, c.rhs))
        .collect();
    if !failed.is_empty() {
        return Err(McfError::Infeasible(format!("chosen parameters violate {}", failed.join(", "))));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> McfParams {
        let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
        choose_parameters_mcf(&shape, 1.0, &StrengthDistribution::Constant { value: 10.0 }, &McfRecipe::default())
            .unwrap()
    }

    #[test]
    fn fixture_passes_checklist() {
        let p = fixture();
        for c in check_mcf_conditions(&p, p.f_bar, p.f_star) {
            assert!(c.holds, "{c:?}");
        }
        assert!(-p.f_out >= 1.1 * p.c_grad * p.h / p.d);
        assert!((p.r_in - 0.225).abs() < 1e-15);
        assert!(p.f_star > 0.0 && p.f_star <= -p.f_out / 2.0);
    }

    #[test]
    fn large_strength_passes_strength_conditions() {
        let mut p = fixture();
        p.f_bar = 1e6;
        for c in check_mcf_conditions(&p, 1e6, p.f_star) {
            if c.name.starts_with("condition_i") {
                assert!(c.holds);
            }
        }
    }

    #[test]
    fn condition_iv_is_the_slope_comparison() {
        let mut p = fixture();
        for c in [0.1, 0.5, 0.9, 0.95, 0.99] {
            p.c = c;
            let iv = check_mcf_conditions(&p, p.f_bar, 0.0).into_iter().find(|x| x.name == "condition_iv_slopes").unwrap();
            assert_eq!(iv.holds, p.annulus_rim_slope() < p.cap_rim_slope());
        }
    }

    #[test]
    fn printed_well_definedness_is_advisory() {
        let p = fixture();
        let checks = check_mcf_conditions(&p, p.f_bar, p.f_star);
        let printed = checks.iter().find(|c| c.name == "well_defined_printed").unwrap();
        assert!(printed.advisory);
        let i = checks.iter().filter(|c| c.name.starts_with("condition_i_")).count();
        assert_eq!(i, 2);
    }
}
