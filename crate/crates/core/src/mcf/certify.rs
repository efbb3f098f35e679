use rayon::prelude::*;

use crate::certificate::{check_ridges, CertificateReport, GridSpec, InequalityCheck, Model, ResidualSample, Tolerances};
use crate::glue::laplacian_constant;

use super::curvature::{breakdown, fd_jet, radial_jet, FdOrder, Jet, TERM_NAMES};
use super::SupersolutionMcf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McfCertifyOptions {
    pub spacing: f64,
    pub tolerances: Tolerances,
    pub keep: usize,
    /// Finite difference step for the curvature.
    pub fd_step: f64,
}

impl Default for McfCertifyOptions {
    fn default() -> Self {
        Self { spacing: 0.02, tolerances: Tolerances::default(), keep: 10, fd_step: 2e-3 }
    }
}

struct Point {
    sample: ResidualSample,
    /// `|κ_fd - κ_closed_form|`.
    fd_gap: f64,
    /// Present for annulus points inside glue strips.
    terms: Option<[f64; 7]>,
}

/// Check `κ(w) + f(x, w) + F ≤ tol` on a grid. `κ` is the fourth-order
/// finite difference curvature of the active piece (continued smoothly across
/// `r_in` so stencils never straddle the kink) plus the glue; a closed-form
/// jet gives the seven-group breakdown reported alongside.
pub fn certify_mcf(s: &SupersolutionMcf, force: f64, opts: &McfCertifyOptions) -> CertificateReport {
    let a = s.assembly();
    let local = s.local();
    let p = &s.params;
    let grid = GridSpec::new(a.extent(), opts.spacing);
    let tol = opts.tolerances;
    let points: Vec<Point> = (0..grid.len())
        .into_par_iter()
        .map(|index| {
            let x = grid.point(index);
            let in_glue = a.glue.in_transition(&x);
            let tolerance = if in_glue { tol.glue } else { tol.smooth };
            let Ok(e) = s.composite.eval(&x) else {
                let sample =
                    ResidualSample { index, x, v: f64::INFINITY, residual: f64::INFINITY, tolerance, inner: false, in_glue };
                return Point { sample, fd_gap: 0.0, terms: None };
            };
            let inner = e.branch.r < p.r_in;
            let column = e.branch.column;
            let u = |y: &[f64]| s.piece_value(y, column, inner);
            let kappa = fd_jet(&u, &x, opts.fd_step, FdOrder::Fourth).mean_curvature();
            let d = a.displacement(&x, column);
            let r = e.branch.r;
            let w = radial_jet(&d, local.piece_slope(r, inner), local.piece_second(r, inner));
            let gj = a.glue.jet(&x);
            let g = Jet { grad: gj.grad, hess: gj.hess };
            let split = breakdown(&w, &g);
            let fd_gap = (kappa - split.total()).abs();
            let f = a.field.eval_f(&x, e.value);
            let residual = if f.complete && kappa.is_finite() { kappa + f.value + force } else { f64::INFINITY };
            let terms = (in_glue && !inner).then_some(split.terms);
            Point { sample: ResidualSample { index, x, v: e.value, residual, tolerance, inner, in_glue }, fd_gap, terms }
        })
        .collect();
    let mut fd_gap = 0.0f64;
    let mut term_max = [0.0f64; 7];
    let mut min_v = f64::INFINITY;
    let mut samples = Vec::with_capacity(points.len());
    for pt in points {
        fd_gap = fd_gap.max(pt.fd_gap);
        if let Some(t) = pt.terms {
            for (m, v) in term_max.iter_mut().zip(t) {
                *m = m.max(v.abs());
            }
        }
        min_v = min_v.min(pt.sample.v);
        samples.push(pt.sample);
    }
    let curvature = local.curvature_bound() + laplacian_constant(p.n) * p.h / (p.d * p.d);
    let ridges = check_ridges(&s.composite, &grid, curvature);
    let mut checks = super::check_mcf_conditions(p, p.f_bar, force);
    checks.push(InequalityCheck::le("supersolution_nonnegative", 0.0, min_v));
    checks.push(InequalityCheck::le("glue_jump_within_2h", a.glue.max_jump(), 2.0 * p.h * (1.0 + 1e-12)));
    checks.push(InequalityCheck::le("force_within_certified", force, p.f_star).advisory());
    checks.push(InequalityCheck::le("fd_vs_closed_form_curvature", fd_gap, 1e-6).advisory());
    for (name, m) in TERM_NAMES.iter().zip(term_max) {
        checks.push(InequalityCheck::le(&format!("glue_term_{name}"), m, -p.f_out * (1.0 + 1e-9)).advisory());
    }
    CertificateReport::assemble(Model::Mcf, force, p.f_star, grid, tol, samples, ridges, checks, opts.keep)
}
