use super::run::mean;
use super::{Direction, SimError, SimState, Simulation};

/// Ramp `0 → F_max → -F_max → 0` as eight plateaus
/// `{½, 1, ½, 0, -½, -1, -½, 0}·F_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisOptions {
    pub f_max: f64,
    pub t_plateau: f64,
    /// A plateau ends early once `max |u_t| < stationary_tol`.
    pub stationary_tol: f64,
}

pub const PLATEAU_LEVELS: [f64; 8] = [0.5, 1.0, 0.5, 0.0, -0.5, -1.0, -0.5, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauRecord {
    pub force: f64,
    pub direction: Direction,
    pub mean_u: f64,
    pub duration: f64,
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisResult {
    pub plateaus: Vec<PlateauRecord>,
    pub area: f64,
    /// Some height reached the upper clamp.
    pub truncated: bool,
}

/// Shoelace area of the closed polygon through `(F, mean u)` points.
pub fn loop_area(points: &[(f64, f64)]) -> f64 {
    let m = points.len();
    if m < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..m {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % m];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}

/// Run the loading cycle from `initial`. While the force increases (and on
/// the first plateau) updates are clamped at `≥ 0`; while it decreases they
/// are clamped at `≤ 0` and the obstacle force is reversed, so obstacles
/// obstruct motion in either direction. The simulation's `bounds` (if set)
/// flag truncation when the top is reached.
pub fn hysteresis_loop(sim: &Simulation, initial: &[f64], opts: &HysteresisOptions) -> Result<HysteresisResult, SimError> {
    let mut state = SimState { u: initial.to_vec(), t: 0.0, force: 0.0, direction: Direction::Up };
    let mut plateaus = Vec::with_capacity(PLATEAU_LEVELS.len());
    let mut truncated = false;
    let mut prev = 0.0;
    for &level in &PLATEAU_LEVELS {
        let force = level * opts.f_max;
        if force > prev {
            state.direction = Direction::Up;
        } else if force < prev {
            state.direction = Direction::Down;
        }
        prev = force;
        state.force = force;
        let start = state.t;
        let mut stationary = false;
        while state.t - start < opts.t_plateau {
            let dt = sim.admissible_dt(&state)?.min(opts.t_plateau - (state.t - start));
            let s = sim.step_dt(&mut state, dt)?;
            if s.max_velocity < opts.stationary_tol {
                stationary = true;
                break;
            }
        }
        if let Some((_, hi)) = sim.bounds {
            truncated |= state.u.iter().any(|&v| v >= hi);
        }
        plateaus.push(PlateauRecord {
            force,
            direction: state.direction,
            mean_u: mean(&state.u),
            duration: state.t - start,
            stationary,
        });
    }
    let pts: Vec<(f64, f64)> = plateaus.iter().map(|p| (p.force, p.mean_u)).collect();
    Ok(HysteresisResult { area: loop_area(&pts), plateaus, truncated })
}
