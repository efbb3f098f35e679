use rayon::prelude::*;

use crate::certificate::{check_ridges, CertificateReport, GridSpec, InequalityCheck, Model, ResidualSample, Tolerances};
use crate::glue::laplacian_constant;

use super::SupersolutionQew;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub spacing: f64,
    pub tolerances: Tolerances,
    /// Rows kept in the worst-residual table.
    pub keep: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { spacing: 0.02, tolerances: Tolerances::default(), keep: 10 }
    }
}

/// Check `Δv + f(x, v) + F ≤ tol` on a grid, with `Δv` taken piecewise in
/// closed form (`F_in` or `F_out`) plus the glue Laplacian, then the kink
/// directions on every ridge and the parameter inequalities.
pub fn certify(s: &SupersolutionQew, force: f64, opts: &CertifyOptions) -> CertificateReport {
    let a = s.assembly();
    let grid = GridSpec::new(a.extent(), opts.spacing);
    let tol = opts.tolerances;
    let samples: Vec<ResidualSample> = (0..grid.len())
        .into_par_iter()
        .map(|index| {
            let x = grid.point(index);
            let in_glue = a.glue.in_transition(&x);
            let tolerance = if in_glue { tol.glue } else { tol.smooth };
            let Ok(e) = s.composite.eval(&x) else {
                return ResidualSample { index, x, v: f64::INFINITY, residual: f64::INFINITY, tolerance, inner: false, in_glue };
            };
            let inner = e.branch.r < s.params.r_in;
            let lap = s.profile().laplacian(inner) + a.glue.jet(&x).laplacian();
            let f = a.field.eval_f(&x, e.value);
            let residual = if f.complete { lap + f.value + force } else { f64::INFINITY };
            ResidualSample { index, x, v: e.value, residual, tolerance, inner, in_glue }
        })
        .collect();
    let min_v = samples.iter().map(|r| r.v).fold(f64::INFINITY, f64::min);
    let p = &s.params;
    let curvature = s.profile().curvature_bound() + laplacian_constant(p.n) * p.h / (p.d * p.d);
    let ridges = check_ridges(&s.composite, &grid, curvature);
    let mut checks = p.checks();
    checks.push(InequalityCheck::le("supersolution_nonnegative", 0.0, min_v));
    checks.push(InequalityCheck::le("glue_jump_within_2h", a.glue.max_jump(), 2.0 * p.h * (1.0 + 1e-12)));
    checks.push(InequalityCheck::le("force_within_certified", force, p.f_star).advisory());
    CertificateReport::assemble(Model::Qew, force, p.f_star, grid, tol, samples, ridges, checks, opts.keep)
}
