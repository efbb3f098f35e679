use std::io::{self, Write};

use super::{SimError, SimState, Simulation};

/// Stopping rules for [`run_until`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopSpec {
    /// Pinned once `max |u_t| < v_tol` for a window of duration `tau`.
    pub v_tol: f64,
    pub tau: f64,
    /// Escaped once `max u ≥ h_esc`.
    pub h_esc: f64,
    pub t_max: f64,
    /// Trace row every this many steps (the last step is always recorded).
    pub trace_every: usize,
    /// Snapshot spacing in time, if any.
    pub snapshot_every: Option<f64>,
}

impl StopSpec {
    /// `v_tol = 1e-8 · max(|F|, 1e-3)`, `τ = 10`.
    pub fn with_defaults(force: f64, h_esc: f64, t_max: f64) -> Self {
        Self { v_tol: 1e-8 * force.abs().max(1e-3), tau: 10.0, h_esc, t_max, trace_every: 100, snapshot_every: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pinned,
    Escaped,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pinned => "pinned",
            Outcome::Escaped => "escaped",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub mean_u: f64,
    pub max_u: f64,
    pub min_u: f64,
    /// `max |u_new - u_old| / Δt` over the last step.
    pub max_step_update: f64,
    pub max_grad: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,mean_u,max_u,min_u,max_step_update,max_grad")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.10e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e}",
                r.t, r.mean_u, r.max_u, r.min_u, r.max_step_update, r.max_grad
            )?;
        }
        Ok(())
    }

    fn push(&mut self, row: TraceRow) {
        if self.rows.last().is_none_or(|l| row.t > l.t) {
            self.rows.push(row);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub trace: Trace,
    pub state: SimState,
    pub steps: usize,
    /// Smallest signed per-step update seen (monotonicity diagnostic).
    pub min_update: f64,
    pub initial_mean: f64,
    pub snapshots: Vec<Snapshot>,
}

impl RunResult {
    pub fn mean_velocity(&self) -> f64 {
        if self.state.t > 0.0 {
            (mean(&self.state.u) - self.initial_mean) / self.state.t
        } else {
            0.0
        }
    }

    /// Every per-step update `≥ -tol`.
    pub fn monotone(&self, tol: f64) -> bool {
        self.min_update >= -tol
    }
}

/// Sequential sum, so the value does not depend on the thread count.
pub(crate) fn mean(u: &[f64]) -> f64 {
    u.iter().sum::<f64>() / u.len() as f64
}

fn row(state: &SimState, max_step_update: f64, max_grad: f64) -> TraceRow {
    let (lo, hi) = state.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    TraceRow { t: state.t, mean_u: mean(&state.u), max_u: hi, min_u: lo, max_step_update, max_grad }
}

/// Step until pinned, escaped or `t_max`.
pub fn run_until(sim: &Simulation, mut state: SimState, stop: &StopSpec) -> Result<RunResult, SimError> {
    let mut trace = Trace::default();
    let initial_mean = mean(&state.u);
    trace.push(row(&state, 0.0, sim.max_gradient(&state.u)));
    let mut snapshots = Vec::new();
    let mut next_snap = stop.snapshot_every.map(|_| 0.0);
    let mut quiet_since = state.t;
    let mut steps = 0usize;
    let mut min_update = f64::INFINITY;
    let every = stop.trace_every.max(1);
    let outcome = loop {
        if let (Some(ts), Some(dt)) = (next_snap, stop.snapshot_every) {
            if state.t >= ts {
                snapshots.push(Snapshot { t: state.t, u: state.u.clone() });
                next_snap = Some(ts + dt);
            }
        }
        if state.u.iter().any(|&v| v >= stop.h_esc) {
            break Outcome::Escaped;
        }
        let remaining = stop.t_max - state.t;
        if remaining <= 1e-12 * stop.t_max {
            break Outcome::Timeout;
        }
        // the last step is shortened so the run ends exactly at t_max
        let dt = sim.admissible_dt(&state)?;
        let s = if dt > remaining { sim.step_dt(&mut state, remaining)? } else { sim.step(&mut state)? };
        steps += 1;
        min_update = min_update.min(s.min_update);
        if s.max_velocity >= stop.v_tol {
            quiet_since = state.t;
        }
        let pinned = state.t - quiet_since >= stop.tau;
        let escaped = state.u.iter().any(|&v| v >= stop.h_esc);
        if steps % every == 0 || pinned || escaped || stop.t_max - state.t <= 1e-12 * stop.t_max {
            trace.push(row(&state, s.max_velocity, s.max_grad));
        }
        if pinned {
            break Outcome::Pinned;
        }
    };
    Ok(RunResult { outcome, trace, state, steps, min_update, initial_mean, snapshots })
}

/// Evolve both states with common, admissible steps and report whether
/// `u_low ≤ u_high` holds after every step.
pub fn comparison_check(
    sim: &Simulation,
    u_low: Vec<f64>,
    u_high: Vec<f64>,
    force: f64,
    steps: usize,
) -> Result<bool, SimError> {
    let mut lo = SimState { u: u_low, t: 0.0, force, direction: super::Direction::Free };
    let mut hi = SimState { u: u_high, t: 0.0, force, direction: super::Direction::Free };
    if lo.u.iter().zip(&hi.u).any(|(a, b)| a > b) {
        return Ok(false);
    }
    for _ in 0..steps {
        let dt = sim.admissible_dt(&lo)?.min(sim.admissible_dt(&hi)?);
        sim.step_dt(&mut lo, dt)?;
        sim.step_dt(&mut hi, dt)?;
        if lo.u.iter().zip(&hi.u).any(|(a, b)| a > b) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Flat text dump: one line per node, lateral coordinates then height.
pub fn write_snapshot<W: Write>(grid: &super::Grid, snap: &Snapshot, mut w: W) -> io::Result<()> {
    writeln!(w, "# t = {:.10e}", snap.t)?;
    for (k, v) in snap.u.iter().enumerate() {
        let x: Vec<String> = grid.coords(k).iter().map(|c| format!("{c:.8e}")).collect();
        writeln!(w, "{} {v:.12e}", x.join(" "))?;
    }
    Ok(())
}
