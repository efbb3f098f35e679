//! Explicit Euler integration of the QEW equation `u_t = Δu + f(x, u) + F`
//! and graph mean curvature flow `u_t = ν (κ(u) + f(x, u) + F)` on a
//! periodic grid (`n ∈ {1, 2}`), with pinning/escape stopping rules.

mod hysteresis;
mod run;

use rayon::prelude::*;
use thiserror::Error;

use crate::certificate::Model;
use crate::field::ObstacleField;

pub use hysteresis::{hysteresis_loop, loop_area, HysteresisOptions, HysteresisResult, PlateauRecord};
pub use run::{comparison_check, run_until, write_snapshot, Outcome, RunResult, Snapshot, StopSpec, Trace, TraceRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time step {dt:e} exceeds the stability bound {required:e}")]
    CflViolation { dt: f64, required: f64 },
    #[error("gradient {max_grad} exceeds the cap {cap} at t = {t}")]
    GradientCap { max_grad: f64, cap: f64, t: f64 },
    #[error("field does not match the grid: {0}")]
    FieldMismatch(String),
    #[error("non-finite height at t = {t}")]
    NonFinite { t: f64 },
}

/// Periodic grid with `points` nodes per side on `[0, side)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub points: usize,
    pub side: f64,
}

impl Grid {
    pub fn new(n: usize, points: usize, side: f64) -> Result<Self, SimError> {
        if !(1..=2).contains(&n) || points < 3 || !(side > 0.0) {
            return Err(SimError::InvalidGrid(format!("n = {n}, points = {points}, side = {side}")));
        }
        Ok(Self { n, points, side })
    }

    pub fn dx(&self) -> f64 {
        self.side / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of node `k`, first axis fastest.
    pub fn multi(&self, k: usize) -> Vec<usize> {
        let mut m = Vec::with_capacity(self.n);
        let mut r = k;
        for _ in 0..self.n {
            m.push(r % self.points);
            r /= self.points;
        }
        m
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.multi(k).into_iter().map(|i| i as f64 * self.dx()).collect()
    }

    /// Neighbour of `k` shifted by `s` nodes along `axis`, wrapping around.
    #[inline]
    pub fn shift(&self, k: usize, axis: usize, s: i64) -> usize {
        let stride = if axis == 0 { 1 } else { self.points.pow(axis as u32) };
        let i = if self.n == 1 { k } else { (k / stride) % self.points };
        let j = match s {
            1 => {
                if i + 1 == self.points {
                    0
                } else {
                    i + 1
                }
            }
            -1 => {
                if i == 0 {
                    self.points - 1
                } else {
                    i - 1
                }
            }
            _ => (i as i64 + s).rem_euclid(self.points as i64) as usize,
        };
        k - i * stride + j * stride
    }
}

/// Which one-sided problem is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Unconstrained dynamics.
    Free,
    /// Updates clamped at `≥ 0`.
    Up,
    /// Updates clamped at `≤ 0`, obstacle force reversed so obstacles resist
    /// downward motion.
    Down,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Vec<f64>,
    pub t: f64,
    pub force: f64,
    pub direction: Direction,
}

impl SimState {
    pub fn flat(grid: &Grid, height: f64, force: f64) -> Self {
        Self { u: vec![height; grid.len()], t: 0.0, force, direction: Direction::Free }
    }
}

/// Per-step statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub dt: f64,
    /// `max |u_new - u_old| / dt`.
    pub max_velocity: f64,
    /// Smallest signed update `min (u_new - u_old)`.
    pub min_update: f64,
    /// Largest central-difference gradient of the state before the step.
    pub max_grad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hit {
    y: f64,
    d2: f64,
    strength: f64,
}

/// Stability bounds for the explicit step; `binding` names the smaller one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cfl {
    pub diffusion: f64,
    pub reaction: f64,
    /// Bound under which the step is monotone (comparison principle).
    pub combined: f64,
    pub binding: &'static str,
}

/// Immutable part of a simulation: grid, cached obstacle columns, model and time step.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub grid: Grid,
    pub model: Model,
    field: ObstacleField,
    /// Obstacles reaching each node's vertical line, sorted by height;
    /// node `k` owns `hits[offsets[k]..offsets[k + 1]]`.
    hits: Vec<Hit>,
    offsets: Vec<usize>,
    r1: f64,
    /// Bound on `|∂_y f|` along every grid column.
    pub lipschitz: f64,
    /// Extra restoring term `-k (u - u_ref)` (zero for the plain models).
    pub stiffness: f64,
    pub spring_reference: f64,
    pub dt: f64,
    pub gradient_cap: f64,
    /// Heights are clamped into this range after each step when set.
    pub bounds: Option<(f64, f64)>,
}

pub const GRADIENT_CAP: f64 = 10.0;

/// Nodes per parallel task; small grids run sequentially.
const PAR_MIN_LEN: usize = 2048;

impl Simulation {
    pub fn new(grid: Grid, field: ObstacleField, model: Model) -> Result<Self, SimError> {
        if field.n() != grid.n {
            return Err(SimError::FieldMismatch(format!("field n = {}, grid n = {}", field.n(), grid.n)));
        }
        if let Some(p) = field.period() {
            if p.iter().any(|s| (s - grid.side).abs() > 1e-9 * grid.side) {
                return Err(SimError::FieldMismatch(format!("field period {p:?}, grid side {}", grid.side)));
            }
        }
        let columns = build_columns(&grid, &field);
        let lipschitz = column_lipschitz(&columns, field.shape());
        let mut offsets = Vec::with_capacity(columns.len() + 1);
        offsets.push(0);
        for c in &columns {
            offsets.push(offsets.last().unwrap() + c.len());
        }
        let hits: Vec<Hit> = columns.into_iter().flatten().collect();
        let r1 = field.shape().r1();
        let mut sim = Self {
            grid,
            model,
            field,
            hits,
            offsets,
            r1,
            lipschitz,
            stiffness: 0.0,
            spring_reference: 0.0,
            dt: 0.0,
            gradient_cap: GRADIENT_CAP,
            bounds: None,
        };
        sim.dt = sim.cfl(0.0).combined;
        Ok(sim)
    }

    pub fn field(&self) -> &ObstacleField {
        &self.field
    }

    /// Add the restoring term `-k (u - reference)`.
    pub fn with_stiffness(mut self, k: f64, reference: f64) -> Self {
        self.stiffness = k.max(0.0);
        self.spring_reference = reference;
        self.dt = self.dt.min(self.cfl(0.0).combined);
        self
    }

    /// Use `dt` (must satisfy the flat-state bound).
    pub fn with_dt(mut self, dt: f64) -> Result<Self, SimError> {
        let required = self.cfl(0.0).combined;
        if !(dt > 0.0) || dt > required {
            return Err(SimError::CflViolation { dt, required });
        }
        self.dt = dt;
        Ok(self)
    }

    /// Bounds at gradient size `grad`. QEW: `Δx²/(2n)` and `1/L_f` (each ×0.9)
    /// and the monotone bound `0.9/(2n/Δx² + L_f)`. MCF: `0.9 Δx² n/(2(1+G²))`
    /// and `0.9/(2/Δx² + ν L_f)`.
    pub fn cfl(&self, grad: f64) -> Cfl {
        let dx2 = self.grid.dx().powi(2);
        let n = self.grid.n as f64;
        let l = self.lipschitz + self.stiffness;
        let (diffusion, reaction, monotone) = match self.model {
            Model::Qew => (0.9 * dx2 / (2.0 * n), 0.9 / (l + 1e-300), 0.9 / (2.0 * n / dx2 + l)),
            Model::Mcf => {
                let nu = (1.0 + grad * grad).sqrt();
                (0.9 * dx2 * n / (2.0 * (1.0 + grad * grad)), 0.9 / (nu * l + 1e-300), 0.9 / (2.0 / dx2 + nu * l))
            }
        };
        let combined = diffusion.min(reaction).min(monotone);
        let binding = if combined == monotone {
            "monotone"
        } else if combined == diffusion {
            "diffusion"
        } else {
            "reaction"
        };
        Cfl { diffusion, reaction, combined, binding }
    }

    /// `f(x_k, y)` from the cached column.
    #[inline]
    pub fn force_at(&self, k: usize, y: f64) -> f64 {
        let r1 = self.r1;
        let mut s = 0.0;
        for h in &self.hits[self.offsets[k]..self.offsets[k + 1]] {
            if h.y >= y + r1 {
                break;
            }
            let dy = y - h.y;
            if dy >= r1 {
                continue;
            }
            let rho2 = h.d2 + dy * dy;
            if rho2 < r1 * r1 {
                s += h.strength * self.field.shape().profile(rho2.sqrt());
            }
        }
        s
    }

    fn obstacle_term(&self, k: usize, y: f64, dir: Direction) -> f64 {
        let f = self.force_at(k, y);
        if dir == Direction::Down {
            -f
        } else {
            f
        }
    }

    /// Largest central-difference gradient norm.
    pub fn max_gradient(&self, u: &[f64]) -> f64 {
        let inv = 0.5 / self.grid.dx();
        (0..u.len())
            .map(|k| {
                (0..self.grid.n)
                    .map(|a| ((u[self.grid.shift(k, a, 1)] - u[self.grid.shift(k, a, -1)]) * inv).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// One explicit step of the configured model.
    pub fn step(&self, state: &mut SimState) -> Result<StepStats, SimError> {
        match self.model {
            Model::Qew => step_qew(self, state),
            Model::Mcf => step_mcf(self, state),
        }
    }

    /// Largest admissible step for `state` (the configured `dt`, shortened
    /// for MCF to the bound at the current gradient).
    pub fn admissible_dt(&self, state: &SimState) -> Result<f64, SimError> {
        match self.model {
            Model::Qew => Ok(self.dt),
            Model::Mcf => {
                let grad = self.max_gradient(&state.u);
                if grad > self.gradient_cap {
                    return Err(SimError::GradientCap { max_grad: grad, cap: self.gradient_cap, t: state.t });
                }
                Ok(self.dt.min(self.cfl(grad).combined))
            }
        }
    }

    /// One step of length `dt`, which must not exceed [`Self::admissible_dt`].
    pub fn step_dt(&self, state: &mut SimState, dt: f64) -> Result<StepStats, SimError> {
        let required = self.admissible_dt(state)?;
        if !(dt > 0.0) || dt > required {
            return Err(SimError::CflViolation { dt, required });
        }
        match self.model {
            Model::Qew => advance_qew(self, state, dt),
            Model::Mcf => advance_mcf(self, state, dt),
        }
    }

    /// `next` holds `(new height, squared gradient of the old state)`.
    fn finish(&self, state: &mut SimState, next: Vec<(f64, f64)>, dt: f64) -> Result<StepStats, SimError> {
        let mut max_v: f64 = 0.0;
        let mut min_update = f64::INFINITY;
        let mut max_g2: f64 = 0.0;
        for (a, &(b, g2)) in state.u.iter().zip(&next) {
            max_g2 = max_g2.max(g2);
            if !b.is_finite() {
                return Err(SimError::NonFinite { t: state.t });
            }
            let d = b - a;
            max_v = max_v.max(d.abs() / dt);
            min_update = min_update.min(d);
        }
        state.u = next.into_iter().map(|p| p.0).collect();
        state.t += dt;
        Ok(StepStats { dt, max_velocity: max_v, min_update, max_grad: max_g2.sqrt() })
    }

    fn constrain(&self, old: f64, new: f64, dir: Direction) -> f64 {
        let v = match dir {
            Direction::Free => new,
            Direction::Up => new.max(old),
            Direction::Down => new.min(old),
        };
        match self.bounds {
            Some((lo, hi)) => v.clamp(lo, hi),
            None => v,
        }
    }
}

fn build_columns(grid: &Grid, field: &ObstacleField) -> Vec<Vec<Hit>> {
    let r1 = field.shape().r1();
    let dx = grid.dx();
    let mut columns: Vec<Vec<Hit>> = vec![Vec::new(); grid.len()];
    let reach = (r1 / dx).ceil() as i64 + 1;
    for ob in field.obstacles() {
        let base: Vec<i64> = ob.x.iter().map(|&c| (c / dx).round() as i64).collect();
        let offsets: Vec<i64> = (-reach..=reach).collect();
        let mut stack = vec![Vec::new()];
        for _ in 0..grid.n {
            stack = stack
                .into_iter()
                .flat_map(|p: Vec<i64>| {
                    offsets.iter().map(move |&o| {
                        let mut q = p.clone();
                        q.push(o);
                        q
                    })
                })
                .collect();
        }
        let mut seen = std::collections::BTreeSet::new();
        for off in stack {
            let mut k = 0usize;
            let mut d2 = 0.0;
            for a in 0..grid.n {
                let i = (base[a] + off[a]).rem_euclid(grid.points as i64) as usize;
                k += i * grid.points.pow(a as u32);
                let d = field.lateral_offset(i as f64 * dx, ob.x[a], a);
                d2 += d * d;
            }
            if d2 < r1 * r1 && seen.insert(k) {
                columns[k].push(Hit { y: ob.y, d2, strength: ob.strength });
            }
        }
    }
    for c in &mut columns {
        c.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.d2.total_cmp(&b.d2)));
    }
    columns
}

/// For each column: every hit's largest `|s ∂_y φ|` along the column, summed
/// over hits whose supports can meet (centers closer than `2 r1` in height).
fn column_lipschitz(columns: &[Vec<Hit>], shape: &crate::field::ObstacleShape<f64>) -> f64 {
    let r1 = shape.r1();
    let steps = 256;
    let slope_along = |h: &Hit| {
        let span = (r1 * r1 - h.d2).max(0.0).sqrt();
        (0..=steps)
            .map(|i| {
                let dy = span * i as f64 / steps as f64;
                let rho = (h.d2 + dy * dy).sqrt();
                if rho == 0.0 { 0.0 } else { shape.radial_derivative(rho) * dy / rho }
            })
            .fold(0.0, f64::max)
            * h.strength
    };
    columns
        .par_iter()
        .map(|col| {
            let m: Vec<f64> = col.iter().map(|h| slope_along(h) * 1.05).collect();
            (0..col.len())
                .map(|i| {
                    col.iter()
                        .zip(&m)
                        .filter(|(h, _)| (h.y - col[i].y).abs() < 2.0 * r1)
                        .map(|(_, m)| m)
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// QEW step, written as a monotone combination
/// `(a u_k + Δt f(u_k)) + b Σ neighbours + Δt (F - k (u_k - u_ref))` with `b = Δt/Δx²`.
pub fn step_qew(sim: &Simulation, state: &mut SimState) -> Result<StepStats, SimError> {
    advance_qew(sim, state, sim.dt)
}

fn advance_qew(sim: &Simulation, state: &mut SimState, dt: f64) -> Result<StepStats, SimError> {
    let g = &sim.grid;
    let b = dt / g.dx().powi(2);
    let a = 1.0 - 2.0 * g.n as f64 * b;
    let u = &state.u;
    let (force, dir, k_spring) = (state.force, state.direction, sim.stiffness);
    let inv = 0.5 / g.dx();
    let next: Vec<(f64, f64)> = (0..u.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|k| {
            let uk = u[k];
            let mut nb = 0.0;
            let mut g2 = 0.0;
            for axis in 0..g.n {
                let (l, r) = (u[g.shift(k, axis, -1)], u[g.shift(k, axis, 1)]);
                nb += l + r;
                g2 += ((r - l) * inv).powi(2);
            }
            let new = (a * uk + dt * sim.obstacle_term(k, uk, dir)) + b * nb + dt * (force - k_spring * (uk - sim.spring_reference));
            (sim.constrain(uk, new, dir), g2)
        })
        .collect();
    sim.finish(state, next, dt)
}

/// Graph MCF step: `ν κ = (1/n)(Δu - (D²u ∇u, ∇u)/ν²)` from central
/// differences, forcing multiplied by `ν`. The step is shortened to the
/// stability bound at the current gradient; gradients above the cap abort.
pub fn step_mcf(sim: &Simulation, state: &mut SimState) -> Result<StepStats, SimError> {
    let dt = sim.admissible_dt(state)?;
    advance_mcf(sim, state, dt)
}

fn advance_mcf(sim: &Simulation, state: &mut SimState, dt: f64) -> Result<StepStats, SimError> {
    let g = &sim.grid;
    let dx = g.dx();
    let n = g.n;
    let u = &state.u;
    let (force, dir, k_spring) = (state.force, state.direction, sim.stiffness);
    let next: Vec<(f64, f64)> = (0..u.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|k| {
            let uk = u[k];
            let mut p = [0.0; 2];
            let mut h = [[0.0; 2]; 2];
            for a in 0..n {
                let (l, r) = (u[g.shift(k, a, -1)], u[g.shift(k, a, 1)]);
                p[a] = (r - l) / (2.0 * dx);
                h[a][a] = (l - 2.0 * uk + r) / (dx * dx);
            }
            if n == 2 {
                let pp = u[g.shift(g.shift(k, 0, 1), 1, 1)];
                let mm = u[g.shift(g.shift(k, 0, -1), 1, -1)];
                let pm = u[g.shift(g.shift(k, 0, 1), 1, -1)];
                let mp = u[g.shift(g.shift(k, 0, -1), 1, 1)];
                h[0][1] = (pp - pm - mp + mm) / (4.0 * dx * dx);
                h[1][0] = h[0][1];
            }
            let g2: f64 = p[..n].iter().map(|v| v * v).sum();
            let nu2 = 1.0 + g2;
            let mut lap = 0.0;
            let mut quad = 0.0;
            for i in 0..n {
                lap += h[i][i];
                for j in 0..n {
                    quad += h[i][j] * p[i] * p[j];
                }
            }
            let curv = (lap - quad / nu2) / n as f64;
            let vel = curv + nu2.sqrt() * (sim.obstacle_term(k, uk, dir) + force) - k_spring * (uk - sim.spring_reference);
            (sim.constrain(uk, uk + dt * vel, dir), g2)
        })
        .collect();
    sim.finish(state, next, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ObstacleShape, Window};

    fn empty(n: usize, side: f64) -> ObstacleField {
        let shape = ObstacleShape::new(n, 0.25, 0.5, 0.2).unwrap();
        let mut lo = vec![0.0; n];
        lo.push(0.5);
        let mut hi = vec![side; n];
        hi.push(10.0);
        ObstacleField::empty(shape, Window::new(lo, hi), true)
    }

    #[test]
    fn grid_shift_wraps() {
        let g = Grid::new(2, 4, 1.0).unwrap();
        assert_eq!(g.shift(0, 0, -1), 3);
        assert_eq!(g.shift(0, 1, -1), 12);
        assert_eq!(g.shift(5, 1, 1), 9);
        assert_eq!(g.coords(6), vec![0.5, 0.25]);
        assert!(Grid::new(3, 4, 1.0).is_err());
    }

    #[test]
    fn constant_states() {
        for model in [Model::Qew, Model::Mcf] {
            for n in [1, 2] {
                let g = Grid::new(n, 16, 4.0).unwrap();
                let sim = Simulation::new(g.clone(), empty(n, 4.0), model).unwrap();
                let mut s = SimState::flat(&g, 0.7, 0.0);
                sim.step(&mut s).unwrap();
                assert!(s.u.iter().all(|&v| v == 0.7));
                let mut s = SimState::flat(&g, 0.0, 1.0);
                let mut t = 0.0;
                for _ in 0..10 {
                    t += sim.step(&mut s).unwrap().dt;
                }
                assert!(s.u.iter().all(|&v| (v - t).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn sine_decay_matches_discrete_symbol() {
        let side = 8.0;
        let g = Grid::new(1, 64, side).unwrap();
        for (model, amp) in [(Model::Qew, 1.0), (Model::Mcf, 1e-3)] {
            let sim = Simulation::new(g.clone(), empty(1, side), model).unwrap();
            let k = 2.0 * std::f64::consts::PI / side;
            let dx = g.dx();
            let u0: Vec<f64> = (0..64).map(|i| amp * (k * i as f64 * dx).sin()).collect();
            let mut s = SimState { u: u0, t: 0.0, force: 0.0, direction: Direction::Free };
            while s.t < 2.0 {
                sim.step(&mut s).unwrap();
            }
            let symbol = 4.0 / (dx * dx) * (k * dx / 2.0).sin().powi(2);
            let measured = s.u[16] / amp;
            let exact = (-symbol * s.t).exp();
            let tol = if model == Model::Qew { 0.01 } else { 0.05 };
            assert!((measured / exact - 1.0).abs() < tol, "{model:?}: {measured} vs {exact}");
            let continuum = (-k * k * s.t).exp();
            assert!((measured / continuum - 1.0).abs() < tol);
        }
    }

    #[test]
    fn cfl_rejects_large_steps() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let sim = Simulation::new(g, empty(1, 4.0), Model::Qew).unwrap();
        let req = sim.cfl(0.0).combined;
        assert!(matches!(sim.clone().with_dt(2.0 * req), Err(SimError::CflViolation { .. })));
        assert!(sim.with_dt(0.5 * req).is_ok());
    }

    #[test]
    fn gradient_cap_aborts() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let sim = Simulation::new(g.clone(), empty(1, 4.0), Model::Mcf).unwrap();
        let u: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 0.0 } else { 5.0 }).collect();
        let mut s = SimState { u, t: 0.0, force: 0.0, direction: Direction::Free };
        assert!(s.u.len() == g.len());
        // central differences see zero slope on a period-2 pattern; use a ramp instead
        s.u = (0..32).map(|i| 20.0 * (i % 16) as f64 * g.dx()).collect();
        assert!(matches!(sim.step(&mut s), Err(SimError::GradientCap { .. })));
    }
}
