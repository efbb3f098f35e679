//! Grid certification reports shared by the QEW and MCF supersolutions, and
//! the ridge (kink) checks common to both.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assembly::{Composite, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Qew,
    Mcf,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Qew => "qew",
            Model::Mcf => "mcf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qew" => Some(Model::Qew),
            "mcf" => Some(Model::Mcf),
            _ => None,
        }
    }
}

/// Uniform lateral grid on the torus `[0, extent_1) × … × [0, extent_n)`;
/// the requested spacing is rounded so each side holds an integer count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn new(extent: Vec<f64>, spacing: f64) -> Self {
        let points = extent.iter().map(|&e| ((e / spacing).ceil() as usize).max(1)).collect();
        Self { extent, points }
    }

    pub fn n(&self) -> usize {
        self.extent.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.points[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.n()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.n()];
        for a in (0..self.n()).rev() {
            m[a] = idx % self.points[a];
            idx /= self.points[a];
        }
        m
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().enumerate().map(|(a, &i)| i as f64 * self.spacing(a)).collect()
    }

    /// Flat index of the neighbour one step along `axis` (wrapping).
    pub fn step(&self, idx: usize, axis: usize) -> usize {
        let mut m = self.multi_index(idx);
        m[axis] = (m[axis] + 1) % self.points[axis];
        m.iter().zip(&self.points).fold(0, |acc, (&i, &p)| acc * p + i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Residual slack on pieces evaluated in closed form.
    pub smooth: f64,
    /// Residual slack inside glue transition strips.
    pub glue: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { smooth: 1e-8, glue: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    pub index: usize,
    pub x: Vec<f64>,
    pub v: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub inner: bool,
    pub in_glue: bool,
}

impl ResidualSample {
    pub fn piece(&self) -> &'static str {
        match (self.inner, self.in_glue) {
            (true, false) => "inner",
            (true, true) => "inner+glue",
            (false, false) => "outer",
            (false, true) => "outer+glue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeKind {
    /// `∂B_{r_in}` around a selected obstacle.
    Circle,
    /// Boundary between the Voronoi cells of two selected obstacles.
    Voronoi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeResult {
    pub kind: RidgeKind,
    pub x: Vec<f64>,
    /// One-sided derivative difference `D⁺ - D⁻` at the smallest step.
    pub jump: f64,
    pub downward: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RidgeSummary {
    pub circles_checked: usize,
    pub voronoi_checked: usize,
    /// Branch switches where one side is at the edge of its support (value jumps, no kink).
    pub support_switches: usize,
    pub failures: usize,
    pub worst: Option<RidgeResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Reported but not part of the pass decision.
    pub advisory: bool,
}

impl InequalityCheck {
    /// `lhs ≤ rhs`.
    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, holds: lhs <= rhs, advisory: false }
    }

    /// `lhs < rhs`.
    pub fn lt(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, holds: lhs < rhs, advisory: false }
    }

    pub fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub model: Model,
    pub force: f64,
    pub f_star: f64,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub points_checked: usize,
    pub max_residual_smooth: f64,
    pub max_residual_glue: f64,
    pub residual_failures: usize,
    /// Largest residuals, worst first (ties by grid index).
    pub worst: Vec<ResidualSample>,
    pub ridges: RidgeSummary,
    pub inequalities: Vec<InequalityCheck>,
    pub pass: bool,
}

impl CertificateReport {
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        model: Model,
        force: f64,
        f_star: f64,
        grid: GridSpec,
        tolerances: Tolerances,
        samples: Vec<ResidualSample>,
        ridges: RidgeSummary,
        inequalities: Vec<InequalityCheck>,
        keep: usize,
    ) -> Self {
        let points_checked = samples.len();
        let mut max_smooth = f64::NEG_INFINITY;
        let mut max_glue = f64::NEG_INFINITY;
        let mut failures = 0;
        for s in &samples {
            if s.in_glue {
                max_glue = max_glue.max(s.residual);
            } else {
                max_smooth = max_smooth.max(s.residual);
            }
            if !(s.residual <= s.tolerance) {
                failures += 1;
            }
        }
        let mut worst = samples;
        worst.sort_by(|a, b| b.residual.total_cmp(&a.residual).then(a.index.cmp(&b.index)));
        worst.truncate(keep);
        let pass = failures == 0 && ridges.failures == 0 && inequalities.iter().all(|c| c.holds || c.advisory);
        Self {
            model,
            force,
            f_star,
            grid,
            tolerances,
            points_checked,
            max_residual_smooth: max_smooth,
            max_residual_glue: max_glue,
            residual_failures: failures,
            worst,
            ridges,
            inequalities,
            pass,
        }
    }

    /// Key-value block followed by the inequality checklist and a table of the
    /// worst residuals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model.as_str());
        let _ = writeln!(s, "force = {:.12e}", self.force);
        let _ = writeln!(s, "f_star = {:.12e}", self.f_star);
        let _ = writeln!(s, "grid_extent = {}", join(&self.grid.extent));
        let _ = writeln!(s, "grid_points = {}", self.grid.points.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "));
        let _ = writeln!(s, "tolerance_smooth = {:e}", self.tolerances.smooth);
        let _ = writeln!(s, "tolerance_glue = {:e}", self.tolerances.glue);
        let _ = writeln!(s, "points_checked = {}", self.points_checked);
        let _ = writeln!(s, "max_residual_smooth = {:.12e}", self.max_residual_smooth);
        let _ = writeln!(s, "max_residual_glue = {:.12e}", self.max_residual_glue);
        let _ = writeln!(s, "residual_failures = {}", self.residual_failures);
        let _ = writeln!(s, "ridge_circles_checked = {}", self.ridges.circles_checked);
        let _ = writeln!(s, "ridge_voronoi_checked = {}", self.ridges.voronoi_checked);
        let _ = writeln!(s, "ridge_support_switches = {}", self.ridges.support_switches);
        let _ = writeln!(s, "ridge_failures = {}", self.ridges.failures);
        if let Some(w) = &self.ridges.worst {
            let kind = if w.kind == RidgeKind::Circle { "circle" } else { "voronoi" };
            let _ = writeln!(s, "ridge_worst = {kind} at {} jump {:.6e}", join(&w.x), w.jump);
        }
        let _ = writeln!(s, "pass = {}", self.pass);
        let _ = writeln!(s, "# inequalities: name lhs rhs holds advisory");
        for c in &self.inequalities {
            let _ = writeln!(s, "{} {:.12e} {:.12e} {} {}", c.name, c.lhs, c.rhs, c.holds, c.advisory);
        }
        let _ = writeln!(s, "# worst residuals: index x v residual tolerance piece");
        for w in &self.worst {
            let _ = writeln!(
                s,
                "{} {} {:.10e} {:.10e} {:e} {}",
                w.index,
                join(&w.x),
                w.v,
                w.residual,
                w.tolerance,
                w.piece()
            );
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(" ")
}

const RIDGE_STEPS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Compare one-sided difference quotients of `v` at `x` along `dir`.
///
/// `curvature` bounds the second derivative of every smooth piece, so a
/// genuine kink must satisfy `D⁺ - D⁻ ≤ curvature · δ` (plus round-off).
fn one_sided_jump<P: RadialProfile>(
    c: &Composite<P>,
    x: &[f64],
    dir: &[f64],
    scale: f64,
    curvature: f64,
) -> (f64, bool) {
    let v0 = c.value(x);
    let mut ok = true;
    let mut last = 0.0;
    for &frac in &RIDGE_STEPS {
        let delta = frac * scale;
        let xp: Vec<f64> = x.iter().zip(dir).map(|(a, u)| a + delta * u).collect();
        let xm: Vec<f64> = x.iter().zip(dir).map(|(a, u)| a - delta * u).collect();
        let vp = c.value(&xp);
        let vm = c.value(&xm);
        let jump = (vp - v0) / delta - (v0 - vm) / delta;
        let roundoff = 8.0 * f64::EPSILON * (v0.abs() + 1.0) / delta;
        if !(jump <= curvature * delta + roundoff) {
            ok = false;
        }
        last = jump;
    }
    (last, ok)
}

fn circle_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..8)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 4.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for a in 0..n {
                for s in [-1.0, 1.0] {
                    let mut u = vec![0.0; n];
                    u[a] = s;
                    out.push(u);
                }
            }
            out
        }
    }
}

fn record(summary: &mut RidgeSummary, r: RidgeResult) {
    if !r.downward {
        summary.failures += 1;
    }
    let replace = match &summary.worst {
        None => true,
        Some(w) => r.jump > w.jump,
    };
    if replace {
        summary.worst = Some(r);
    }
}

/// Kink checks on `∂B_{r_in}` around every selected obstacle and on Voronoi
/// ridges located by bisection along grid edges where the active branch
/// changes.
pub fn check_ridges<P: RadialProfile>(c: &Composite<P>, grid: &GridSpec, curvature: f64) -> RidgeSummary {
    let n = grid.n();
    let scale = grid.max_spacing();
    let r_in = c.profile.r_in();
    let mut summary = RidgeSummary::default();

    let dirs = circle_directions(n);
    let circle: Vec<RidgeResult> = (0..c.assembly.selected.len())
        .into_par_iter()
        .flat_map_iter(|col| {
            let center = c.assembly.selected.get(col).x.clone();
            let analytic_ok = c.profile.slope(r_in, true) >= c.profile.slope(r_in, false);
            dirs.iter()
                .map(|u| {
                    let x: Vec<f64> = center.iter().zip(u).map(|(a, b)| a + r_in * b).collect();
                    let (jump, ok) = one_sided_jump(c, &x, u, scale.min(r_in), curvature);
                    RidgeResult { kind: RidgeKind::Circle, x, jump, downward: ok && analytic_ok }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    summary.circles_checked = circle.len();
    for r in circle {
        record(&mut summary, r);
    }

    let actives: Vec<Option<usize>> =
        (0..grid.len()).into_par_iter().map(|i| c.active(&grid.point(i)).ok().map(|b| b.column)).collect();
    let edges: Vec<Option<RidgeResult>> = (0..grid.len() * n)
        .into_par_iter()
        .map(|e| {
            let (i, a) = (e / n, e % n);
            let j = grid.step(i, a);
            let (ci, cj) = (actives[i]?, actives[j]?);
            if ci == cj {
                return None;
            }
            let x0 = grid.point(i);
            let h = grid.spacing(a);
            let at = |s: f64| {
                let mut x = x0.clone();
                x[a] += s * h;
                x
            };
            let diff = |s: f64| c.branch(&at(s), ci).value - c.branch(&at(s), cj).value;
            let (g0, g1) = (diff(0.0), diff(1.0));
            if !g0.is_finite() || !g1.is_finite() {
                return Some(RidgeResult { kind: RidgeKind::Voronoi, x: at(0.5), jump: f64::NAN, downward: true });
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if diff(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = at(0.5 * (lo + hi));
            let mut u = vec![0.0; n];
            u[a] = 1.0;
            let (jump, ok) = one_sided_jump(c, &x, &u, h, curvature);
            Some(RidgeResult { kind: RidgeKind::Voronoi, x, jump, downward: ok })
        })
        .collect();
    for r in edges.into_iter().flatten() {
        if r.jump.is_nan() {
            summary.support_switches += 1;
        } else {
            summary.voronoi_checked += 1;
            record(&mut summary, r);
        }
    }
    summary
}
