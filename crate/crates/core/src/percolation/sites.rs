use rand::Rng;

use super::{BoxGeometry, PercolationError, Torus};
use crate::field::ObstacleField;
use crate::rng::{keyed_rng, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub enum SiteOrigin {
    Bernoulli { p: f64, seed: u64 },
    Obstacles { geometry: BoxGeometry, f_bar: f64 },
    Explicit,
}

/// Open/closed indicator over `torus × {1, …, height_cap}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteField {
    torus: Torus,
    height_cap: usize,
    open: Vec<bool>,
    origin: SiteOrigin,
}

impl SiteField {
    pub fn from_fn(torus: Torus, height_cap: usize, mut is_open: impl FnMut(usize, usize) -> bool) -> Self {
        let mut open = Vec::with_capacity(torus.len() * height_cap);
        for k in 0..torus.len() {
            for j in 1..=height_cap {
                open.push(is_open(k, j));
            }
        }
        Self { torus, height_cap, open, origin: SiteOrigin::Explicit }
    }

    /// Independent sites, open with probability `p`; column `k` draws its
    /// states from the stream keyed on `(seed, k)`.
    pub fn bernoulli(torus: Torus, height_cap: usize, p: f64, seed: u64) -> Self {
        let mut open = Vec::with_capacity(torus.len() * height_cap);
        for k in 0..torus.len() {
            let mut rng = keyed_rng(seed, StreamTag::BernoulliColumn, &[k as i64]);
            for _ in 0..height_cap {
                open.push(rng.random::<f64>() < p);
            }
        }
        Self { torus, height_cap, open, origin: SiteOrigin::Bernoulli { p, seed } }
    }

    /// Independent sites drawn column by column from one generator.
    pub fn bernoulli_with<R: Rng + ?Sized>(torus: Torus, height_cap: usize, p: f64, rng: &mut R) -> Self {
        let open = (0..torus.len() * height_cap).map(|_| rng.random::<f64>() < p).collect();
        Self { torus, height_cap, open, origin: SiteOrigin::Explicit }
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn height_cap(&self) -> usize {
        self.height_cap
    }

    pub fn origin(&self) -> &SiteOrigin {
        &self.origin
    }

    /// Whether site `(k, j)` is open; heights outside `1..=height_cap` are closed.
    pub fn is_open(&self, k: usize, j: usize) -> bool {
        j >= 1 && j <= self.height_cap && self.open[k * self.height_cap + j - 1]
    }

    pub fn open_fraction(&self) -> f64 {
        self.open.iter().filter(|&&o| o).count() as f64 / self.open.len().max(1) as f64
    }

    /// Smallest open height `≥ from` in column `k`.
    pub fn next_open(&self, k: usize, from: usize) -> Option<usize> {
        (from.max(1)..=self.height_cap).find(|&j| self.is_open(k, j))
    }
}

/// Site field obtained from an obstacle field together with the qualifying
/// obstacles of every cuboid.
#[derive(Debug, Clone)]
pub struct OpennessReport {
    pub sites: SiteField,
    /// Obstacle indices with strength `≥ f̄` centered in `Q̃_{k,j}`, indexed by `k * cap + j - 1`.
    pub candidates: Vec<Vec<usize>>,
    pub empirical_open_fraction: f64,
    /// `1 - exp(-λ |A| P(f₁ ≥ f̄))`, when the field is a Poisson process.
    pub theoretical_marginal: Option<f64>,
}

impl OpennessReport {
    pub fn candidates_at(&self, k: usize, j: usize) -> &[usize] {
        &self.candidates[k * self.sites.height_cap + j - 1]
    }
}

/// Mark `(k, j)` open iff an obstacle of strength `≥ f_bar` has its center in
/// the cuboid `Q̃_{k,j}`.
pub fn openness_from_field(
    field: &ObstacleField,
    geometry: BoxGeometry,
    f_bar: f64,
    torus: Torus,
    height_cap: usize,
) -> Result<OpennessReport, PercolationError> {
    if geometry.n != field.n() || torus.n() != field.n() {
        return Err(PercolationError::InvalidGeometry("dimension mismatch between field, boxes and torus".into()));
    }
    check_coverage(field, &geometry, &torus, height_cap)?;
    let cap = height_cap;
    let mut candidates = vec![Vec::new(); torus.len() * cap];
    for (i, ob) in field.obstacles().iter().enumerate() {
        if ob.strength < f_bar {
            continue;
        }
        let Some(k) = geometry.reduced_column(&torus, &ob.x) else { continue };
        for j in geometry.slabs_containing(ob.y) {
            if j >= 1 && j <= cap {
                candidates[k * cap + j - 1].push(i);
            }
        }
    }
    let sites = SiteField {
        torus,
        height_cap: cap,
        open: candidates.iter().map(|c| !c.is_empty()).collect(),
        origin: SiteOrigin::Obstacles { geometry, f_bar },
    };
    let theoretical_marginal = match (field.kind(), field.distribution()) {
        (crate::field::FieldKind::Poisson { intensity }, Some(dist)) => {
            Some(1.0 - (-intensity * geometry.cuboid_volume() * dist.tail(f_bar)).exp())
        }
        _ => None,
    };
    Ok(OpennessReport { empirical_open_fraction: sites.open_fraction(), sites, candidates, theoretical_marginal })
}

fn check_coverage(
    field: &ObstacleField,
    geometry: &BoxGeometry,
    torus: &Torus,
    cap: usize,
) -> Result<(), PercolationError> {
    let n = geometry.n;
    let w = field.window();
    let mut missing = Vec::new();
    let top = geometry.slab(cap).1;
    if w.lo[n] > geometry.r1 + 1e-12 || w.hi[n] < top {
        missing.push(format!("heights [{}, {top}] vs window [{}, {})", geometry.r1, w.lo[n], w.hi[n]));
    }
    for a in 0..n {
        let span = torus.extent()[a] as f64 * geometry.period();
        if field.is_periodic() {
            if (w.hi[a] - span).abs() > 1e-9 * span.max(1.0) {
                missing.push(format!("axis {a}: torus period {} != {} columns x {}", w.hi[a], torus.extent()[a], geometry.period()));
            }
        } else if w.lo[a] > geometry.r1 || w.hi[a] < span - geometry.d - geometry.r1 {
            missing.push(format!("axis {a}: reduced boxes span [{}, {}] vs window [{}, {})", geometry.r1, span - geometry.d - geometry.r1, w.lo[a], w.hi[a]));
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(PercolationError::WindowTooSmall { missing })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Obstacle, ObstacleShape, StrengthDistribution, Window};

    fn shape() -> ObstacleShape<f64> {
        ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap()
    }

    #[test]
    fn empty_field_all_closed() {
        let g = BoxGeometry::new(1, 4.0, 2.0, 1.0, 0.4).unwrap();
        let f = ObstacleField::empty(shape(), Window::new(vec![0.0, 0.4], vec![18.0, 6.0]), true);
        let rep = openness_from_field(&f, g, 1.0, Torus::new(vec![3]).unwrap(), 5).unwrap();
        assert_eq!(rep.empirical_open_fraction, 0.0);
    }

    #[test]
    fn single_obstacle_opens_one_site() {
        let g = BoxGeometry::new(1, 4.0, 2.0, 1.0, 0.4).unwrap();
        // Q̃_{0,3} = [0.4, 3.6] × [2.4, 3.4]
        let ob = Obstacle { x: vec![2.0], y: 2.9, strength: 5.0 };
        let f = ObstacleField::from_obstacles(shape(), vec![ob], Window::new(vec![0.0, 0.4], vec![18.0, 6.0]), true)
            .unwrap();
        let rep = openness_from_field(&f, g, 5.0, Torus::new(vec![3]).unwrap(), 5).unwrap();
        let open: Vec<usize> = (1..=5).filter(|&j| rep.sites.is_open(0, j)).collect();
        assert_eq!(open, vec![3]);
        assert!((1..=5).all(|j| !rep.sites.is_open(1, j) && !rep.sites.is_open(2, j)));
        // too weak for a higher threshold
        let rep = openness_from_field(&f, g, 5.5, Torus::new(vec![3]).unwrap(), 5).unwrap();
        assert!(!rep.sites.is_open(0, 3));
    }

    #[test]
    fn rejects_short_window() {
        let g = BoxGeometry::new(1, 4.0, 2.0, 1.0, 0.4).unwrap();
        let f = ObstacleField::empty(shape(), Window::new(vec![0.0, 0.4], vec![18.0, 3.0]), true);
        let err = openness_from_field(&f, g, 1.0, Torus::new(vec![3]).unwrap(), 5).unwrap_err();
        assert!(matches!(err, PercolationError::WindowTooSmall { .. }));
        let f = ObstacleField::empty(shape(), Window::new(vec![0.0, 0.4], vec![17.0, 6.0]), true);
        assert!(openness_from_field(&f, g, 1.0, Torus::new(vec![3]).unwrap(), 5).is_err());
    }

    #[test]
    fn open_fraction_matches_void_probability() {
        // |A| = (l - 2 r1) h = 2.6 · 1 with λ = 1.152, tail 1 gives 1 - e^{-3.0} ≈ 0.95
        let r1 = 0.4;
        let h = 1.0;
        let l = 2.6 + 2.0 * r1;
        let target: f64 = 0.95;
        let lambda = -(1.0 - target).ln() / ((l - 2.0 * r1) * h);
        let g = BoxGeometry::new(1, l, 0.6, h, r1).unwrap();
        let cols = 500;
        let cap = 20;
        let field = ObstacleField::sample_periodic(
            &[cols as f64 * g.period()],
            (r1, g.slab(cap).1 + 0.5),
            lambda,
            StrengthDistribution::Constant { value: 1.0 },
            shape(),
            2024,
        )
        .unwrap();
        let rep = openness_from_field(&field, g, 1.0, Torus::new(vec![cols]).unwrap(), cap).unwrap();
        let oracle = 1.0 - (-lambda * (l - 2.0 * r1) * h).exp();
        assert!((rep.theoretical_marginal.unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.95).abs() < 1e-12);
        assert!((rep.empirical_open_fraction - 0.95).abs() < 0.01, "{}", rep.empirical_open_fraction);
    }
}
