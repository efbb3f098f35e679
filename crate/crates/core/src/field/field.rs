use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::{FieldError, ObstacleShape, StrengthDistribution};
use crate::rng::{keyed_rng, StreamTag};

/// Side of the fixed cells that partition space for Poisson sampling.
pub const POISSON_CELL: f64 = 1.0;

/// Axis-aligned box in ℝ^n × ℝ; the last coordinate is the height `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    /// Lateral dimension `n`.
    pub fn n(&self) -> usize {
        self.lo.len().saturating_sub(1)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&c, (&a, &b))| c >= a && c < b)
    }

    fn validate(&self) -> Result<(), FieldError> {
        if self.lo.len() != self.hi.len() || self.lo.len() < 2 {
            return Err(FieldError::InvalidWindow("lo/hi must both have n+1 >= 2 entries".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(FieldError::InvalidWindow(format!("empty or unbounded window {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub x: Vec<f64>,
    pub y: f64,
    pub strength: f64,
}

/// How the obstacle list was produced; echoed in exports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    Poisson { intensity: f64 },
    Lattice { spacing: f64 },
    Explicit,
}

/// Value of `f` at a point, with a flag telling whether every obstacle that
/// could reach the point lies inside the sampled window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub complete: bool,
}

/// Quenched heterogeneity `f(x, y) = Σ_i f_i φ(x - x_i, y - y_i)` over a window.
///
/// When `periodic` is set the lateral coordinates live on the torus
/// `[0, hi_1) × … × [0, hi_n)` and distances use the minimal image.
#[derive(Debug, Clone)]
pub struct ObstacleField {
    shape: ObstacleShape<f64>,
    obstacles: Vec<Obstacle>,
    window: Window,
    periodic: bool,
    kind: FieldKind,
    dist: Option<StrengthDistribution>,
    seed: u64,
    index: HashGrid,
}

impl ObstacleField {
    /// Poisson process of intensity `lambda` restricted to `window`.
    ///
    /// Space is cut into fixed unit cells anchored at `x = 0`, `y = r1`; each
    /// cell draws its count and points from a stream keyed on `(seed, cell)`,
    /// so overlapping windows agree on their intersection.
    pub fn sample(
        window: Window,
        lambda: f64,
        dist: StrengthDistribution,
        shape: ObstacleShape<f64>,
        seed: u64,
    ) -> Result<Self, FieldError> {
        validate_process(&window, lambda, &dist, &shape)?;
        let n = shape.n();
        let r1 = shape.r1();
        let mut ranges = Vec::with_capacity(n + 1);
        for i in 0..n {
            ranges.push(cell_range(window.lo[i], window.hi[i], 0.0, POISSON_CELL));
        }
        ranges.push(cell_range(window.lo[n], window.hi[n], r1, POISSON_CELL));
        let widths = vec![POISSON_CELL; n + 1];
        let mut origin = vec![0.0; n + 1];
        origin[n] = r1;
        let cells = cartesian(&ranges);
        let obstacles = draw_cells(&cells, &origin, &widths, lambda, &dist, seed, StreamTag::PoissonCell, &window);
        Ok(Self::assemble(shape, obstacles, window, false, FieldKind::Poisson { intensity: lambda }, Some(dist), seed))
    }

    /// Poisson process on the torus `[0, period_1) × … × [0, period_n)` in the
    /// lateral directions and `[y_lo, y_hi)` in height.
    ///
    /// Each lateral axis is cut into `round(period)` equal cells (at least one),
    /// so the cell decomposition tiles the torus exactly.
    pub fn sample_periodic(
        period: &[f64],
        y_range: (f64, f64),
        lambda: f64,
        dist: StrengthDistribution,
        shape: ObstacleShape<f64>,
        seed: u64,
    ) -> Result<Self, FieldError> {
        let n = shape.n();
        if period.len() != n {
            return Err(FieldError::InvalidWindow(format!("period needs {n} entries")));
        }
        let mut lo = vec![0.0; n + 1];
        let mut hi = period.to_vec();
        lo[n] = y_range.0;
        hi.push(y_range.1);
        let window = Window::new(lo, hi);
        validate_process(&window, lambda, &dist, &shape)?;
        let r1 = shape.r1();
        let mut ranges = Vec::with_capacity(n + 1);
        let mut widths = Vec::with_capacity(n + 1);
        for &p in period {
            let m = (p / POISSON_CELL).round().max(1.0) as i64;
            ranges.push((0, m));
            widths.push(p / m as f64);
        }
        ranges.push(cell_range(y_range.0, y_range.1, r1, POISSON_CELL));
        widths.push(POISSON_CELL);
        let mut origin = vec![0.0; n + 1];
        origin[n] = r1;
        let cells = cartesian(&ranges);
        let obstacles = draw_cells(&cells, &origin, &widths, lambda, &dist, seed, StreamTag::PeriodicCell, &window);
        Ok(Self::assemble(shape, obstacles, window, true, FieldKind::Poisson { intensity: lambda }, Some(dist), seed))
    }

    /// Obstacles on the lattice `(i·s, (j + 1/2)·s)`, `i ∈ ℤ^n`, `j ≥ 0`, with iid strengths.
    pub fn sample_lattice(
        spacing: f64,
        dist: StrengthDistribution,
        shape: ObstacleShape<f64>,
        seed: u64,
        window: Window,
        periodic: bool,
    ) -> Result<Self, FieldError> {
        window.validate()?;
        dist.validate()?;
        let n = shape.n();
        if window.n() != n {
            return Err(FieldError::InvalidWindow(format!("window must have {} coordinates", n + 1)));
        }
        if !(spacing > 2.0 * shape.r1()) {
            return Err(FieldError::LatticeTooDense { spacing, min: 2.0 * shape.r1() });
        }
        if window.lo[n] < shape.r1() {
            return Err(FieldError::BelowSupport { y_lo: window.lo[n], r1: shape.r1() });
        }
        if periodic {
            for i in 0..n {
                let m = window.hi[i] / spacing;
                if window.lo[i] != 0.0 || (m - m.round()).abs() > 1e-9 {
                    return Err(FieldError::InvalidWindow(
                        "periodic lattice window must be [0, m·spacing) laterally".into(),
                    ));
                }
            }
        }
        let mut ranges = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = (window.lo[i] / spacing).ceil() as i64;
            let b = (window.hi[i] / spacing).ceil() as i64;
            ranges.push((a, b));
        }
        let a = ((window.lo[n] / spacing) - 0.5).ceil().max(0.0) as i64;
        let b = ((window.hi[n] / spacing) - 0.5).ceil().max(0.0) as i64;
        ranges.push((a, b));
        let mut obstacles = Vec::new();
        for site in cartesian(&ranges) {
            let x: Vec<f64> = site[..n].iter().map(|&i| i as f64 * spacing).collect();
            let y = (site[n] as f64 + 0.5) * spacing;
            let mut p = x.clone();
            p.push(y);
            if !window.contains(&p) {
                continue;
            }
            let mut rng = keyed_rng(seed, StreamTag::LatticeSite, &site);
            let strength = dist.sample(&mut rng);
            obstacles.push(Obstacle { x, y, strength });
        }
        Ok(Self::assemble(shape, obstacles, window, periodic, FieldKind::Lattice { spacing }, Some(dist), seed))
    }

    /// Field from an explicit obstacle list. Centers must lie in the window
    /// and at height at least `r1`.
    pub fn from_obstacles(
        shape: ObstacleShape<f64>,
        obstacles: Vec<Obstacle>,
        window: Window,
        periodic: bool,
    ) -> Result<Self, FieldError> {
        window.validate()?;
        let n = shape.n();
        if window.lo[n] < shape.r1() {
            return Err(FieldError::BelowSupport { y_lo: window.lo[n], r1: shape.r1() });
        }
        for ob in &obstacles {
            let mut p = ob.x.clone();
            p.push(ob.y);
            if ob.x.len() != n || !window.contains(&p) || !(ob.strength > 0.0) {
                return Err(FieldError::InvalidObstacle(format!("{ob:?}")));
            }
        }
        Ok(Self::assemble(shape, obstacles, window, periodic, FieldKind::Explicit, None, 0))
    }

    /// Like [`ObstacleField::from_obstacles`] but without any placement checks;
    /// used to build fields that deliberately break the half-space contract.
    pub fn from_obstacles_unchecked(
        shape: ObstacleShape<f64>,
        obstacles: Vec<Obstacle>,
        window: Window,
        periodic: bool,
    ) -> Self {
        Self::assemble(shape, obstacles, window, periodic, FieldKind::Explicit, None, 0)
    }

    pub fn empty(shape: ObstacleShape<f64>, window: Window, periodic: bool) -> Self {
        Self::assemble(shape, Vec::new(), window, periodic, FieldKind::Explicit, None, 0)
    }

    fn assemble(
        shape: ObstacleShape<f64>,
        obstacles: Vec<Obstacle>,
        window: Window,
        periodic: bool,
        kind: FieldKind,
        dist: Option<StrengthDistribution>,
        seed: u64,
    ) -> Self {
        let index = HashGrid::build(&shape, &obstacles, &window, periodic);
        Self { shape, obstacles, window, periodic, kind, dist, seed, index }
    }

    /// Same centers, strengths multiplied by `factor`.
    pub fn scale_strengths(&self, factor: f64) -> Self {
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| Obstacle { x: o.x.clone(), y: o.y, strength: o.strength * factor })
            .collect();
        let dist = self.dist.map(|d| d.scaled(factor));
        Self::assemble(self.shape.clone(), obstacles, self.window.clone(), self.periodic, self.kind, dist, self.seed)
    }

    pub fn shape(&self) -> &ObstacleShape<f64> {
        &self.shape
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn distribution(&self) -> Option<StrengthDistribution> {
        self.dist
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.shape.n()
    }

    /// Lateral period (torus side lengths) of a periodic field.
    pub fn period(&self) -> Option<Vec<f64>> {
        self.periodic.then(|| self.window.hi[..self.n()].to_vec())
    }

    /// Signed lateral displacement `x - c`, using the minimal image on a torus.
    pub fn lateral_offset(&self, x: f64, c: f64, axis: usize) -> f64 {
        let d = x - c;
        if self.periodic {
            let p = self.window.hi[axis];
            d - p * (d / p).round()
        } else {
            d
        }
    }

    /// `f(x, y)`.
    pub fn value(&self, x: &[f64], y: f64) -> f64 {
        let r1 = self.shape.r1();
        let mut sum = 0.0;
        self.index.for_each_candidate(x, y, self.periodic, |i| {
            let ob = &self.obstacles[i];
            let dy = y - ob.y;
            if dy.abs() >= r1 {
                return;
            }
            let mut rho2 = dy * dy;
            for (a, (&xa, &ca)) in x.iter().zip(&ob.x).enumerate() {
                let d = self.lateral_offset(xa, ca, a);
                rho2 += d * d;
            }
            if rho2 < r1 * r1 {
                sum += ob.strength * self.shape.profile(rho2.sqrt());
            }
        });
        sum
    }

    /// `f(x, y)` together with the completeness flag of the query.
    pub fn eval_f(&self, x: &[f64], y: f64) -> FieldSample {
        FieldSample { value: self.value(x, y), complete: self.is_complete(x, y) }
    }

    /// Whether every obstacle of the underlying process that can reach `(x, y)`
    /// has its center inside the window.
    pub fn is_complete(&self, x: &[f64], y: f64) -> bool {
        let n = self.n();
        let r1 = self.shape.r1();
        if !self.periodic {
            for i in 0..n {
                if x[i] < self.window.lo[i] + r1 || x[i] > self.window.hi[i] - r1 {
                    return false;
                }
            }
        }
        if y <= 0.0 {
            return true;
        }
        let bottom_ok = self.window.lo[n] <= r1 + 1e-12 || y >= self.window.lo[n] + r1;
        bottom_ok && y <= self.window.hi[n] - r1
    }

    /// Largest `|f|` over the grid of the given spacing (anchored at the
    /// origin) inside `region`. Only grid points within `r1` of an obstacle
    /// are visited; elsewhere `f` vanishes.
    pub fn eval_f_max_local_sum(&self, region: &Window, spacing: f64) -> Result<f64, FieldError> {
        let n = self.n();
        if region.lo.len() != n + 1 || region.hi.len() != n + 1 || !(spacing > 0.0) {
            return Err(FieldError::InvalidWindow(format!("bad region {region:?} / spacing {spacing}")));
        }
        let mut corner_lo = region.lo[..n].to_vec();
        corner_lo.push(region.lo[n].max(0.0));
        let mut corner_hi = region.hi[..n].to_vec();
        corner_hi.push(region.hi[n]);
        if !self.is_complete(&corner_lo[..n], corner_lo[n]) || !self.is_complete(&corner_hi[..n], corner_hi[n]) {
            return Err(FieldError::Incomplete(format!("{region:?}")));
        }
        let r1 = self.shape.r1();
        let best = self
            .obstacles
            .par_iter()
            .map(|ob| {
                let mut ranges = Vec::with_capacity(n + 1);
                for a in 0..n {
                    let lo = (ob.x[a] - r1).max(region.lo[a]);
                    let hi = (ob.x[a] + r1).min(region.hi[a]);
                    ranges.push(((lo / spacing).ceil() as i64, (hi / spacing).floor() as i64 + 1));
                }
                let lo = (ob.y - r1).max(region.lo[n]);
                let hi = (ob.y + r1).min(region.hi[n]);
                ranges.push(((lo / spacing).ceil() as i64, (hi / spacing).floor() as i64 + 1));
                let mut local: f64 = 0.0;
                let mut x = vec![0.0; n];
                for idx in cartesian(&ranges) {
                    for a in 0..n {
                        x[a] = idx[a] as f64 * spacing;
                    }
                    local = local.max(self.value(&x, idx[n] as f64 * spacing).abs());
                }
                local
            })
            .reduce(|| 0.0, f64::max);
        Ok(best)
    }

    /// Largest total strength of obstacles whose supports can overlap at a
    /// single point: for each obstacle, the strengths within `2 r1` of it.
    pub fn max_overlap_strength(&self) -> f64 {
        let r1 = self.shape.r1();
        let n = self.n();
        self.obstacles
            .iter()
            .map(|ob| {
                let mut s = 0.0;
                self.index.for_each_candidate(&ob.x, ob.y, self.periodic, |j| {
                    let other = &self.obstacles[j];
                    let mut d2 = (other.y - ob.y).powi(2);
                    for a in 0..n {
                        d2 += self.lateral_offset(other.x[a], ob.x[a], a).powi(2);
                    }
                    if d2 <= 4.0 * r1 * r1 {
                        s += other.strength;
                    }
                });
                s
            })
            .fold(0.0, f64::max)
    }

    /// Indices of obstacles whose support reaches the vertical line through `x`.
    pub fn obstacles_over(&self, x: &[f64]) -> Vec<usize> {
        let r1 = self.shape.r1();
        let mut out: Vec<usize> = self
            .obstacles
            .iter()
            .enumerate()
            .filter(|(_, ob)| {
                let d2: f64 = (0..self.n()).map(|a| self.lateral_offset(x[a], ob.x[a], a).powi(2)).sum();
                d2 < r1 * r1
            })
            .map(|(i, _)| i)
            .collect();
        out.sort_by(|&a, &b| self.obstacles[a].y.total_cmp(&self.obstacles[b].y));
        out
    }
}

fn validate_process(
    window: &Window,
    lambda: f64,
    dist: &StrengthDistribution,
    shape: &ObstacleShape<f64>,
) -> Result<(), FieldError> {
    window.validate()?;
    dist.validate()?;
    if window.n() != shape.n() {
        return Err(FieldError::InvalidWindow(format!("window must have {} coordinates", shape.n() + 1)));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(FieldError::InvalidIntensity(lambda));
    }
    let n = shape.n();
    if window.lo[n] < shape.r1() {
        return Err(FieldError::BelowSupport { y_lo: window.lo[n], r1: shape.r1() });
    }
    Ok(())
}

fn cell_range(lo: f64, hi: f64, origin: f64, width: f64) -> (i64, i64) {
    (((lo - origin) / width).floor() as i64, ((hi - origin) / width).ceil() as i64)
}

/// All integer tuples in the product of half-open ranges, last axis fastest.
pub(crate) fn cartesian(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(ranges.len())];
    for &(a, b) in ranges {
        let mut next = Vec::with_capacity(out.len() * (b - a).max(0) as usize);
        for prefix in &out {
            for v in a..b {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn draw_cells(
    cells: &[Vec<i64>],
    origin: &[f64],
    widths: &[f64],
    lambda: f64,
    dist: &StrengthDistribution,
    seed: u64,
    tag: StreamTag,
    window: &Window,
) -> Vec<Obstacle> {
    let volume: f64 = widths.iter().product();
    let n = widths.len() - 1;
    let per_cell: Vec<Vec<Obstacle>> = cells
        .par_iter()
        .map(|cell| {
            let mut rng = keyed_rng(seed, tag, cell);
            let count = Poisson::new(lambda * volume).expect("positive mean").sample(&mut rng) as usize;
            let mut points = Vec::with_capacity(count);
            for _ in 0..count {
                let p: Vec<f64> = (0..=n)
                    .map(|a| origin[a] + (cell[a] as f64 + rng.random::<f64>()) * widths[a])
                    .collect();
                points.push(p);
            }
            let mut out = Vec::with_capacity(count);
            for p in points {
                let strength = dist.sample(&mut rng);
                if window.contains(&p) {
                    out.push(Obstacle { x: p[..n].to_vec(), y: p[n], strength });
                }
            }
            out
        })
        .collect();
    per_cell.into_iter().flatten().collect()
}

/// Uniform bucket grid with cells at least `2 r1` wide.
#[derive(Debug, Clone)]
struct HashGrid {
    origin: Vec<f64>,
    width: Vec<f64>,
    /// Cells per axis on periodic axes; `None` for unbounded axes.
    wrap: Vec<Option<i64>>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl HashGrid {
    fn build(shape: &ObstacleShape<f64>, obstacles: &[Obstacle], window: &Window, periodic: bool) -> Self {
        let n = shape.n();
        let min_w = 2.0 * shape.r1();
        let mut origin = window.lo.clone();
        origin.resize(n + 1, 0.0);
        let mut width = vec![min_w; n + 1];
        let mut wrap = vec![None; n + 1];
        if periodic {
            for a in 0..n {
                let p = window.hi[a];
                let m = ((p / min_w).floor() as i64).max(1);
                origin[a] = 0.0;
                width[a] = p / m as f64;
                wrap[a] = Some(m);
            }
        }
        let mut grid = Self { origin, width, wrap, buckets: HashMap::new() };
        for (i, ob) in obstacles.iter().enumerate() {
            let key = grid.cell_of(&ob.x, ob.y);
            grid.buckets.entry(key).or_default().push(i);
        }
        grid
    }

    fn cell_of(&self, x: &[f64], y: f64) -> Vec<i64> {
        let n = x.len();
        let mut key = Vec::with_capacity(n + 1);
        for a in 0..=n {
            let c = if a < n { x[a] } else { y };
            let mut k = ((c - self.origin[a]) / self.width[a]).floor() as i64;
            if let Some(m) = self.wrap[a] {
                k = k.rem_euclid(m);
            }
            key.push(k);
        }
        key
    }

    fn for_each_candidate(&self, x: &[f64], y: f64, _periodic: bool, mut visit: impl FnMut(usize)) {
        if self.buckets.is_empty() {
            return;
        }
        let base = self.cell_of(x, y);
        let dims = base.len();
        let offsets = cartesian(&vec![(-1, 2); dims]);
        let mut keys: Vec<Vec<i64>> = offsets
            .into_iter()
            .map(|off| {
                base.iter()
                    .zip(&off)
                    .enumerate()
                    .map(|(a, (&b, &o))| match self.wrap[a] {
                        Some(m) => (b + o).rem_euclid(m),
                        None => b + o,
                    })
                    .collect()
            })
            .collect();
        keys.sort();
        keys.dedup();
        for key in keys {
            if let Some(list) = self.buckets.get(&key) {
                for &i in list {
                    visit(i);
                }
            }
        }
    }
}
