use depin::certificate::Model;
use depin::experiments::{cmd_hysteresis, cmd_simulate, simulation_for, ExperimentConfig, FieldSource};
use depin::field::{Obstacle, ObstacleField, ObstacleShape, StrengthDistribution, Window};
use depin::rng::{keyed_rng, StreamTag};
use depin::sim::{comparison_check, run_until, Grid, Outcome, SimState, Simulation, StopSpec};
use rand::Rng;

fn small_periodic(side: f64, seed: u64) -> ObstacleField {
    let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
    let dist = StrengthDistribution::Constant { value: 10.0 };
    ObstacleField::sample_periodic(&[side], (0.4, 12.0), 1.0, dist, shape, seed).unwrap()
}

#[test]
fn pinned_below_the_supersolution() {
    let cfg = ExperimentConfig { seed: 2, ..Default::default() };
    let rep = cmd_simulate(&cfg).unwrap();
    assert_eq!(rep.result("outcome"), Some("pinned"));
    assert_eq!(rep.result("monotone"), Some("true"));
    assert_eq!(rep.result("below_supersolution"), Some("true"));
}

#[test]
fn escapes_above_the_field_bound() {
    let setup = simulation_for(&ExperimentConfig::default()).unwrap();
    let m = setup.field_bound().unwrap();
    assert!(m > 1.0);
    let f = 1.5 * m;
    let grid = setup.sim.grid.clone();
    let stop = StopSpec::with_defaults(f, setup.top - 0.4, 100.0);
    let r = run_until(&setup.sim, SimState::flat(&grid, 0.0, f), &stop).unwrap();
    assert_eq!(r.outcome, Outcome::Escaped);
    assert!(r.mean_velocity() >= (f - m) * 0.95, "{} vs {}", r.mean_velocity(), f - m);
}

fn smooth_random(grid: &Grid, rng: &mut impl Rng, amplitude: f64) -> Vec<f64> {
    let modes: Vec<(f64, f64, f64)> =
        (1..=4).map(|k| (k as f64, rng.random_range(-1.0..1.0) * amplitude / k as f64, rng.random_range(0.0..6.3))).collect();
    let base = rng.random_range(0.0..3.0);
    (0..grid.len())
        .map(|i| {
            let x = grid.coords(i)[0] / grid.side * std::f64::consts::TAU;
            base + modes.iter().map(|(k, a, ph)| a * (k * x + ph).sin()).sum::<f64>()
        })
        .collect()
}

#[test]
fn random_ordered_pairs_stay_ordered() {
    let side = 16.0;
    let grid = Grid::new(1, 128, side).unwrap();
    let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
    let empty = ObstacleField::empty(shape, Window::new(vec![0.0, 0.4], vec![side, 12.0]), true);
    for (label, field) in [("field", small_periodic(side, 3)), ("empty", empty)] {
        let sim = Simulation::new(grid.clone(), field, Model::Qew).unwrap();
        for i in 0..20u64 {
            let mut rng = keyed_rng(5, StreamTag::RandomPair, &[i as i64]);
            let low = smooth_random(&grid, &mut rng, 1.0);
            let high: Vec<f64> = low.iter().map(|v| v + rng.random_range(0.0..0.5) * rng.random_range(0..2) as f64).collect();
            let force = rng.random_range(-2.0..6.0);
            assert!(comparison_check(&sim, low, high, force, 200).unwrap(), "{label} pair {i}");
        }
    }
}

#[test]
fn obstacle_below_the_interface_breaks_monotonicity() {
    let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
    let window = Window::new(vec![0.0, -1.0], vec![8.0, 4.0]);
    let bad = Obstacle { x: vec![4.0], y: -0.1, strength: 10.0 };
    let field = ObstacleField::from_obstacles_unchecked(shape, vec![bad], window, true);
    let grid = Grid::new(1, 64, 8.0).unwrap();
    let sim = Simulation::new(grid.clone(), field, Model::Qew).unwrap();
    let mut stop = StopSpec::with_defaults(0.01, 3.0, 1.0);
    stop.tau = 1e9;
    let r = run_until(&sim, SimState::flat(&grid, 0.0, 0.01), &stop).unwrap();
    assert!(!r.monotone(1e-12 * 0.01), "min update {}", r.min_update);
}

fn hysteresis_config(field: FieldSource) -> ExperimentConfig {
    ExperimentConfig { field, grid_points: 256, side: 32.0, band_top: 40.0, seed: 7, ..Default::default() }
}

#[test]
fn hysteresis_loop_is_rate_independent_and_control_is_not() {
    let rep = cmd_hysteresis(&hysteresis_config(FieldSource::Periodic)).unwrap();
    let area: f64 = rep.result("area_t").unwrap().parse().unwrap();
    let rel: f64 = rep.result("relative_change").unwrap().parse().unwrap();
    assert!(area > 0.0);
    assert!(rel < 0.1, "relative change {rel}");
    assert_eq!(rep.result("control_area_shrinks"), Some("true"));
    assert!(rep.passed());
}

#[test]
fn hysteresis_degenerate_amplitude_has_zero_area() {
    let mut cfg = hysteresis_config(FieldSource::Empty);
    cfg.hyst_f_max = Some(0.0);
    cfg.hyst_t_plateau = 1.0;
    let rep = cmd_hysteresis(&cfg).unwrap();
    assert_eq!(rep.result("area_t"), Some("0.000000000000e0"));
    assert!(rep.passed());
}
