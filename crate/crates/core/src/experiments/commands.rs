use std::fmt::Write as _;

use crate::certificate::CertificateReport;
use crate::field::{write_field, ObstacleField, Window};
use crate::percolation::{critical_probability, decay_ratio, tail_statistics};
use crate::sim::{
    hysteresis_loop, run_until, write_snapshot, Direction, Grid, HysteresisOptions, HysteresisResult, Outcome, RunResult,
    SimState, Simulation, StopSpec,
};

use super::{f_star_for, shape_of, Command, Construction, ExperimentConfig, ExperimentError, ExperimentReport, FieldSource, Status, Table};

fn sci(v: f64) -> String {
    format!("{v:.12e}")
}

fn config_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

/// Simulation on the configured field, plus the construction when the field
/// comes from one.
pub struct SimSetup {
    pub sim: Simulation,
    pub construction: Option<Construction>,
    /// Top of the field window.
    pub top: f64,
}

impl SimSetup {
    pub fn f_star(&self, cfg: &ExperimentConfig) -> Result<f64, ExperimentError> {
        match &self.construction {
            Some(c) => Ok(c.f_star()),
            None => f_star_for(cfg),
        }
    }

    /// Same grid and window with `f ≡ 0`.
    pub fn empty_twin(&self) -> Result<Simulation, ExperimentError> {
        let f = self.sim.field();
        let field = ObstacleField::empty(f.shape().clone(), f.window().clone(), true);
        Ok(Simulation::new(self.sim.grid.clone(), field, self.sim.model)?)
    }

    /// `M = max |f|` below the escape height, sampled at the grid spacing on
    /// the lattice through the grid nodes. Any `F > M` gives velocity
    /// `≥ F - M` everywhere.
    pub fn field_bound(&self) -> Result<f64, ExperimentError> {
        let field = self.sim.field();
        let g = &self.sim.grid;
        let n = g.n;
        let r1 = field.shape().r1();
        let mut lo = vec![0.0; n];
        lo.push(field.window().lo[n]);
        let mut hi = vec![g.side; n];
        hi.push(self.top - r1);
        field.eval_f_max_local_sum(&Window::new(lo, hi), g.dx()).map_err(config_err)
    }

    /// `max (u - v)` over the grid, if a construction is attached.
    pub fn excess_over_supersolution(&self, u: &[f64]) -> Option<f64> {
        let c = self.construction.as_ref()?;
        let g = &self.sim.grid;
        Some((0..g.len()).map(|k| u[k] - c.value(&g.coords(k))).fold(f64::NEG_INFINITY, f64::max))
    }
}

fn torus_field(cfg: &ExperimentConfig) -> Result<ObstacleField, ExperimentError> {
    let shape = shape_of(cfg)?;
    let n = cfg.n;
    match cfg.field {
        FieldSource::Periodic => ObstacleField::sample_periodic(
            &vec![cfg.side; n],
            (cfg.r1, cfg.band_top),
            cfg.lambda,
            cfg.strength,
            shape,
            cfg.seed,
        )
        .map_err(config_err),
        _ => {
            let mut lo = vec![0.0; n];
            lo.push(cfg.r1);
            let mut hi = vec![cfg.side; n];
            hi.push(cfg.band_top);
            Ok(ObstacleField::empty(shape, Window::new(lo, hi), true))
        }
    }
}

pub fn simulation_for(cfg: &ExperimentConfig) -> Result<SimSetup, ExperimentError> {
    let (field, construction, side) = match cfg.field {
        FieldSource::Construction => {
            let c = Construction::build(cfg)?;
            let side = c.extent()[0];
            (c.field().clone(), Some(c), side)
        }
        _ => (torus_field(cfg)?, None, cfg.side),
    };
    let top = field.window().hi[cfg.n];
    let grid = Grid::new(cfg.n, cfg.grid_points, side)?;
    let sim = Simulation::new(grid, field, cfg.model)?;
    Ok(SimSetup { sim, construction, top })
}

/// Fill in `force` (and the factor it came from).
fn resolve_force(cfg: &mut ExperimentConfig, f_star: impl FnOnce() -> Result<f64, ExperimentError>, factor: f64) -> Result<f64, ExperimentError> {
    if let Some(f) = cfg.force {
        return Ok(f);
    }
    let factor = *cfg.force_factor.get_or_insert(factor);
    let f = factor * f_star()?;
    cfg.force = Some(f);
    Ok(f)
}

fn stop_spec(cfg: &mut ExperimentConfig, force: f64, top: f64) -> StopSpec {
    let h_esc = *cfg.h_esc.get_or_insert(top - cfg.r1);
    let mut stop = StopSpec::with_defaults(force, h_esc, cfg.t_max);
    stop.v_tol = *cfg.v_tol.get_or_insert(stop.v_tol);
    stop.tau = cfg.tau;
    stop.trace_every = cfg.trace_every;
    stop.snapshot_every = cfg.snapshot_every;
    stop
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Free => "free",
        Direction::Up => "up",
        Direction::Down => "down",
    }
}

fn trace_table(name: &str, r: &RunResult) -> Result<Table, ExperimentError> {
    let mut buf = Vec::new();
    r.trace.write_csv(&mut buf)?;
    Ok(Table { name: name.into(), content: String::from_utf8_lossy(&buf).into_owned() })
}

fn mean(u: &[f64]) -> f64 {
    u.iter().sum::<f64>() / u.len() as f64
}

/// Single run from a flat state, with the trace and optional snapshots.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let mut cfg = cfg.clone();
    let setup = simulation_for(&cfg)?;
    let base = cfg.clone();
    let force = resolve_force(&mut cfg, || setup.f_star(&base), 0.5)?;
    let stop = stop_spec(&mut cfg, force, setup.top);
    let grid = setup.sim.grid.clone();
    let r = run_until(&setup.sim, SimState::flat(&grid, cfg.initial_height, force), &stop)?;
    let mut rep = ExperimentReport::new(Command::Simulate, &cfg);
    let scale = force.abs().max(1e-3);
    let (lo, hi) = r.state.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    rep.put("outcome", r.outcome.as_str());
    rep.put("force", sci(force));
    rep.put("t_final", sci(r.state.t));
    rep.put("steps", r.steps);
    rep.put("dt", sci(setup.sim.dt));
    rep.put("cfl_binding", setup.sim.cfl(0.0).binding);
    rep.put("lipschitz_bound", sci(setup.sim.lipschitz));
    rep.put("grid_side", sci(grid.side));
    rep.put("final_mean", sci(mean(&r.state.u)));
    rep.put("final_max", sci(hi));
    rep.put("final_min", sci(lo));
    rep.put("mean_velocity", sci(r.mean_velocity()));
    rep.put("min_step_update", sci(r.min_update));
    rep.put("monotone_tolerance", sci(1e-12 * scale));
    rep.put("monotone", r.monotone(1e-12 * scale));
    if let Some(c) = &setup.construction {
        let excess = setup.excess_over_supersolution(&r.state.u).unwrap_or(f64::NAN);
        rep.put("f_star", sci(c.f_star()));
        rep.put("max_u_minus_v", sci(excess));
        rep.put("below_supersolution", excess <= 0.0);
    }
    if let Some(want) = &cfg.expect_outcome {
        rep.put("expected_outcome", want);
        if want != r.outcome.as_str() {
            rep.status = Status::Fail;
        }
    }
    rep.tables.push(trace_table("trace.csv", &r)?);
    for (i, snap) in r.snapshots.iter().enumerate() {
        let mut buf = Vec::new();
        write_snapshot(&grid, snap, &mut buf)?;
        rep.tables.push(Table { name: format!("snapshot_{i:04}.txt"), content: String::from_utf8_lossy(&buf).into_owned() });
    }
    Ok(rep)
}

fn residual_table(c: &CertificateReport) -> Table {
    let mut s = String::from("index,x,v,residual,tolerance,piece\n");
    for w in &c.worst {
        let x: Vec<String> = w.x.iter().map(|v| format!("{v:.10e}")).collect();
        let _ = writeln!(s, "{},{},{:.12e},{:.12e},{:e},{}", w.index, x.join(" "), w.v, w.residual, w.tolerance, w.piece());
    }
    Table { name: "residuals.csv".into(), content: s }
}

/// Full construction pipeline, then the grid certificate at `force`.
pub fn cmd_verify_certificate(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let mut cfg = cfg.clone();
    let c = Construction::build(&cfg)?;
    let force = resolve_force(&mut cfg, || Ok(c.f_star()), 1.0)?;
    let cert = c.certify(force, cfg.cert_spacing, cfg.cert_keep);
    let mut rep = ExperimentReport::new(Command::VerifyCertificate, &cfg);
    rep.put("f_star", sci(c.f_star()));
    rep.put("force", sci(force));
    rep.put("certificate_pass", cert.pass);
    rep.put("points_checked", cert.points_checked);
    rep.put("max_residual_smooth", sci(cert.max_residual_smooth));
    rep.put("max_residual_glue", sci(cert.max_residual_glue));
    rep.put("residual_failures", cert.residual_failures);
    rep.put("ridge_failures", cert.ridges.failures);
    rep.put("obstacles", c.field().obstacles().len());
    rep.put("extent", c.extent().iter().map(|v| sci(*v)).collect::<Vec<_>>().join(" "));
    rep.sections.push(("certificate".into(), cert.to_text()));
    rep.tables.push(residual_table(&cert));
    if !cert.pass {
        rep.status = Status::Fail;
    }
    Ok(rep)
}

struct Probe {
    force: f64,
    result: RunResult,
}

/// Bisection on `F` between a pinned and an escaped run.
pub fn cmd_critical_force(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let mut cfg = cfg.clone();
    let setup = simulation_for(&cfg)?;
    let grid = setup.sim.grid.clone();
    let m = setup.field_bound()?;
    let mut lo = *cfg.bisect_lo.get_or_insert(0.0);
    let mut hi = *cfg.bisect_hi.get_or_insert(if m > 0.0 { 1.05 * m } else { 1.0 });
    let resolution = *cfg.bisect_resolution.get_or_insert(hi / 256.0);
    let h_esc = *cfg.h_esc.get_or_insert(setup.top - cfg.r1);
    if !(lo >= 0.0 && hi > lo && resolution > 0.0) {
        return Err(ExperimentError::Config(format!("bad bracket [{lo}, {hi}] / resolution {resolution}")));
    }
    let v_tol = cfg.v_tol;
    let run = |force: f64| -> Result<Probe, ExperimentError> {
        let mut stop = StopSpec::with_defaults(force, h_esc, cfg.t_max);
        if let Some(v) = v_tol {
            stop.v_tol = v;
        }
        stop.tau = cfg.tau;
        stop.trace_every = cfg.trace_every;
        let result = run_until(&setup.sim, SimState::flat(&grid, cfg.initial_height, force), &stop)?;
        Ok(Probe { force, result })
    };
    let mut probes: Vec<Probe> = Vec::new();
    let mut conclusive = true;
    let mut note = String::new();
    let (mut lo_idx, mut hi_idx) = (None, None);
    // bracket: lower end must pin, upper end must escape
    for _ in 0..8 {
        let p = run(lo)?;
        let o = p.result.outcome;
        probes.push(p);
        match o {
            Outcome::Pinned => {
                lo_idx = Some(probes.len() - 1);
                break;
            }
            Outcome::Escaped if lo > 0.0 => {
                hi = hi.min(lo);
                lo *= 0.5;
            }
            _ => break,
        }
    }
    if lo_idx.is_some() {
        for _ in 0..8 {
            let p = run(hi)?;
            let o = p.result.outcome;
            probes.push(p);
            match o {
                Outcome::Escaped => {
                    hi_idx = Some(probes.len() - 1);
                    break;
                }
                Outcome::Pinned => {
                    lo = hi;
                    lo_idx = Some(probes.len() - 1);
                }
                Outcome::Timeout => {}
            }
            hi *= 2.0;
        }
    }
    if lo_idx.is_none() || hi_idx.is_none() {
        conclusive = false;
        note = "could not bracket: lower end did not pin or upper end did not escape".into();
    }
    while conclusive && hi - lo > resolution && probes.len() < cfg.bisect_max_probes {
        let mid = 0.5 * (lo + hi);
        let p = run(mid)?;
        let o = p.result.outcome;
        probes.push(p);
        match o {
            Outcome::Pinned => {
                lo = mid;
                lo_idx = Some(probes.len() - 1);
            }
            Outcome::Escaped => {
                hi = mid;
                hi_idx = Some(probes.len() - 1);
            }
            Outcome::Timeout => {
                conclusive = false;
                note = format!("probe at F = {mid:e} timed out");
            }
        }
    }
    let converged = hi - lo <= resolution;
    let mut rep = ExperimentReport::new(Command::CriticalForce, &cfg);
    rep.put("interval_lo", sci(lo));
    rep.put("interval_hi", sci(hi));
    rep.put("width", sci(hi - lo));
    rep.put("resolution", sci(resolution));
    rep.put("probes", probes.len());
    rep.put("conclusive", conclusive);
    rep.put("converged", converged);
    rep.put("field_bound_m", sci(m));
    if !note.is_empty() {
        rep.put("note", note);
    }
    let companion = setup.f_star(&cfg);
    let mut consistent = true;
    match &companion {
        Ok(f) => {
            rep.put("f_star", sci(*f));
            if setup.construction.is_some() {
                consistent = lo >= *f;
                rep.put("lower_end_at_least_f_star", consistent);
            }
        }
        Err(e) => rep.put("f_star", format!("unavailable ({e})")),
    }
    let mut table = String::from("probe,force,outcome,t,steps,mean_velocity,max_u\n");
    for (i, p) in probes.iter().enumerate() {
        let max_u = p.result.state.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            table,
            "{i},{:.12e},{},{:.10e},{},{:.10e},{:.10e}",
            p.force,
            p.result.outcome.as_str(),
            p.result.state.t,
            p.result.steps,
            p.result.mean_velocity(),
            max_u
        );
    }
    rep.tables.push(Table { name: "probes.csv".into(), content: table });
    if let Some(i) = lo_idx {
        rep.tables.push(trace_table("trace_lo.csv", &probes[i].result)?);
    }
    if let Some(i) = hi_idx {
        rep.tables.push(trace_table("trace_hi.csv", &probes[i].result)?);
    }
    if !(conclusive && converged && consistent) {
        rep.status = Status::Fail;
    }
    Ok(rep)
}

fn loop_rows(table: &mut String, label: &str, t: f64, r: &HysteresisResult) {
    for (i, p) in r.plateaus.iter().enumerate() {
        let _ = writeln!(
            table,
            "{label},{t:e},{i},{:.12e},{},{:.12e},{:.10e},{}",
            p.force,
            direction_name(p.direction),
            p.mean_u,
            p.duration,
            p.stationary
        );
    }
}

/// Loading cycle at plateau durations `T` and `2T`, on the configured field
/// and on an obstacle-free control with the same spring.
pub fn cmd_hysteresis(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let mut cfg = cfg.clone();
    let setup = simulation_for(&cfg)?;
    let f_max = match cfg.hyst_f_max {
        Some(f) => f,
        None => 0.9 * setup.f_star(&cfg)?,
    };
    cfg.hyst_f_max = Some(f_max);
    let bottom = setup.sim.field().window().lo[cfg.n];
    let reference = *cfg.hyst_reference.get_or_insert(0.5 * (bottom + setup.top));
    let ceiling = setup.top - cfg.r1;
    let prepare = |sim: Simulation| {
        let mut sim = sim.with_stiffness(cfg.hyst_stiffness, reference);
        sim.bounds = Some((f64::NEG_INFINITY, ceiling));
        sim
    };
    let control = prepare(setup.empty_twin()?);
    let is_empty = cfg.field == FieldSource::Empty;
    let sim = prepare(setup.sim.clone());
    let initial = vec![reference; sim.grid.len()];
    let t = cfg.hyst_t_plateau;
    let opts = |t_plateau| HysteresisOptions { f_max, t_plateau, stationary_tol: cfg.hyst_stationary_tol };
    let a = hysteresis_loop(&sim, &initial, &opts(t))?;
    let b = hysteresis_loop(&sim, &initial, &opts(2.0 * t))?;
    let (ca, cb) = if is_empty {
        (a.clone(), b.clone())
    } else {
        (hysteresis_loop(&control, &initial, &opts(t))?, hysteresis_loop(&control, &initial, &opts(2.0 * t))?)
    };
    let relative = if a.area > 0.0 { (b.area - a.area).abs() / a.area } else { f64::NAN };
    let control_shrinks = cb.area < ca.area;
    let truncated = a.truncated || b.truncated;
    let degenerate = f_max == 0.0;
    let pass = if degenerate {
        a.area == 0.0 && b.area == 0.0
    } else if is_empty {
        control_shrinks
    } else {
        a.area > 0.0 && relative < 0.1 && !truncated && control_shrinks
    };
    let mut rep = ExperimentReport::new(Command::Hysteresis, &cfg);
    rep.put("f_max", sci(f_max));
    rep.put("t_plateau", sci(t));
    rep.put("stiffness", sci(cfg.hyst_stiffness));
    rep.put("reference", sci(reference));
    rep.put("area_t", sci(a.area));
    rep.put("area_2t", sci(b.area));
    rep.put("relative_change", sci(relative));
    rep.put("control_area_t", sci(ca.area));
    rep.put("control_area_2t", sci(cb.area));
    rep.put("control_area_shrinks", control_shrinks);
    rep.put("truncated", truncated);
    if degenerate {
        rep.put("note", "f_max = 0: the loop is a single point");
    }
    let mut table = String::from("loop,t_plateau,plateau,force,direction,mean_u,duration,stationary\n");
    loop_rows(&mut table, "field", t, &a);
    loop_rows(&mut table, "field", 2.0 * t, &b);
    if !is_empty {
        loop_rows(&mut table, "control", t, &ca);
        loop_rows(&mut table, "control", 2.0 * t, &cb);
    }
    rep.tables.push(Table { name: "hysteresis.csv".into(), content: table });
    if !pass {
        rep.status = Status::Fail;
    }
    Ok(rep)
}

/// Survival curve of `L(0)` with the geometric envelope test.
pub fn cmd_percolation_stats(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let curve = tail_statistics(cfg.perc_p, cfg.n, cfg.perc_trials, cfg.seed, cfg.perc_cap);
    let mut rep = ExperimentReport::new(Command::PercolationStats, cfg);
    let env = &curve.envelope;
    rep.put("p", cfg.perc_p);
    rep.put("n", cfg.n);
    rep.put("p_c", sci(critical_probability(cfg.n)));
    rep.put("nu", sci(decay_ratio(cfg.n, cfg.perc_p)));
    rep.put("mode", if curve.bound_claimed { "bound" } else { "informational" });
    rep.put("trials", curve.trials);
    rep.put("torus_side", curve.side);
    rep.put("censored", curve.censored);
    rep.put("anchor_k", env.anchor_k);
    rep.put("amplitude", sci(env.amplitude));
    rep.put("violations", format!("{:?}", env.violations));
    rep.put("fitted_ratio", env.fitted_ratio.map_or("none".into(), sci));
    rep.put("fitted_ratio_ci", env.fitted_ratio_ci.map_or("none".into(), |(a, b)| format!("{} {}", sci(a), sci(b))));
    rep.put("envelope_pass", env.passes);
    rep.put("nonincreasing", curve.is_nonincreasing());
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    rep.tables.push(Table { name: "survival.csv".into(), content: String::from_utf8_lossy(&buf).into_owned() });
    if curve.bound_claimed && !(env.passes && curve.is_nonincreasing()) {
        rep.status = Status::Fail;
    }
    Ok(rep)
}

/// Export the configured field as a text table.
pub fn cmd_sample_field(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let field = match cfg.field {
        FieldSource::Construction => Construction::sample_field(cfg)?,
        _ => torus_field(cfg)?,
    };
    let mut rep = ExperimentReport::new(Command::SampleField, cfg);
    rep.put("obstacles", field.obstacles().len());
    rep.put("window_lo", field.window().lo.iter().map(|v| sci(*v)).collect::<Vec<_>>().join(" "));
    rep.put("window_hi", field.window().hi.iter().map(|v| sci(*v)).collect::<Vec<_>>().join(" "));
    rep.put("periodic", field.is_periodic());
    let mut buf = Vec::new();
    write_field(&field, &mut buf)?;
    rep.tables.push(Table { name: "field.txt".into(), content: String::from_utf8_lossy(&buf).into_owned() });
    Ok(rep)
}
