use std::cmp::Ordering;

use super::{LipschitzSurface, OpennessReport, PercolationError};
use crate::field::{Obstacle, ObstacleField};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedObstacle {
    pub column: usize,
    /// Index into the field's obstacle list.
    pub index: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub strength: f64,
}

/// One pinning obstacle per torus column, in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedObstacles {
    pub f_bar: f64,
    pub items: Vec<SelectedObstacle>,
}

impl SelectedObstacles {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, column: usize) -> &SelectedObstacle {
        &self.items[column]
    }
}

fn lower_first(a: &Obstacle, b: &Obstacle) -> Ordering {
    a.y.total_cmp(&b.y).then_with(|| {
        a.x.iter().zip(&b.x).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    })
}

/// For every column `k` pick, among obstacles of strength `≥ f̄` centered in
/// `Q̃_{k, L(k)}`, the lowest one (ties broken by lexicographic center).
pub fn select_obstacles(
    field: &ObstacleField,
    report: &OpennessReport,
    surface: &LipschitzSurface,
) -> Result<SelectedObstacles, PercolationError> {
    let f_bar = match report.sites.origin() {
        super::SiteOrigin::Obstacles { f_bar, .. } => *f_bar,
        _ => return Err(PercolationError::Mismatch("site field was not derived from obstacles".into())),
    };
    if surface.torus() != report.sites.torus() {
        return Err(PercolationError::Mismatch("torus differs".into()));
    }
    let obs = field.obstacles();
    let mut items = Vec::with_capacity(surface.torus().len());
    for k in 0..surface.torus().len() {
        let j = surface.height(k);
        let best = report
            .candidates_at(k, j)
            .iter()
            .copied()
            .filter(|&i| obs[i].strength >= f_bar)
            .min_by(|&a, &b| lower_first(&obs[a], &obs[b]))
            .ok_or(PercolationError::NoQualifyingObstacle { column: k, height: j })?;
        let o = &obs[best];
        items.push(SelectedObstacle { column: k, index: best, x: o.x.clone(), y: o.y, strength: o.strength });
    }
    Ok(SelectedObstacles { f_bar, items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ObstacleShape, Window};
    use crate::percolation::{minimal_lipschitz_surface, openness_from_field, BoxGeometry, Torus};

    fn pick(obstacles: Vec<Obstacle>) -> SelectedObstacle {
        let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
        let g = BoxGeometry::new(1, 4.0, 2.0, 2.0, 0.4).unwrap();
        let f = ObstacleField::from_obstacles(shape, obstacles, Window::new(vec![0.0, 0.4], vec![6.0, 8.0]), true)
            .unwrap();
        let rep = openness_from_field(&f, g, 1.0, Torus::new(vec![1]).unwrap(), 3).unwrap();
        let s = minimal_lipschitz_surface(&rep.sites).unwrap();
        select_obstacles(&f, &rep, &s).unwrap().items.remove(0)
    }

    #[test]
    fn lowest_wins_regardless_of_order() {
        // slab 2 is [2.4, 4.4]
        let a = Obstacle { x: vec![1.0], y: 3.0, strength: 2.0 };
        let b = Obstacle { x: vec![2.0], y: 2.5, strength: 2.0 };
        let weak = Obstacle { x: vec![3.0], y: 2.45, strength: 0.5 };
        let s1 = pick(vec![a.clone(), b.clone(), weak.clone()]);
        let s2 = pick(vec![weak, b, a]);
        assert_eq!((s1.x.clone(), s1.y), (vec![2.0], 2.5));
        assert_eq!((s1.x, s1.y), (s2.x, s2.y));
    }

    #[test]
    fn tie_goes_to_lexicographic_center() {
        let a = Obstacle { x: vec![2.0], y: 3.0, strength: 2.0 };
        let b = Obstacle { x: vec![1.5], y: 3.0, strength: 2.0 };
        assert_eq!(pick(vec![a, b]).x, vec![1.5]);
    }
}
