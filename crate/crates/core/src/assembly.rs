//! Shared assembly of the flat supersolution: the pipeline from an obstacle
//! field to one selected obstacle per column plus a glue function, and the
//! pointwise minimum of shifted radial profiles over those obstacles.

use thiserror::Error;

use crate::field::ObstacleField;
use crate::glue::{build_glue, GlueError, GlueFunction};
use crate::percolation::{
    minimal_lipschitz_surface, openness_from_field, select_obstacles, BoxGeometry, LipschitzSurface, OpennessReport,
    PercolationError, SelectedObstacles, Torus,
};

/// A radially symmetric local profile with an inner and an outer piece.
pub trait RadialProfile: Sync {
    fn n(&self) -> usize;
    fn r_in(&self) -> f64;
    fn r_out(&self) -> f64;
    /// Profile value at radius `r`; `+∞` beyond `r_out`.
    fn value(&self, r: f64) -> f64;
    /// Radial derivative at `r`, from the inner piece when `inner` is set.
    fn slope(&self, r: f64, inner: bool) -> f64;
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("percolation stage: {0}")]
    Percolation(#[from] PercolationError),
    #[error("glue stage: {0}")]
    Glue(#[from] GlueError),
    #[error("field stage: {0}")]
    Field(String),
    #[error("covering violated at {x:?}: no selected obstacle within r_out")]
    Uncovered { x: Vec<f64> },
}

impl AssemblyError {
    /// Short tag naming the pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            AssemblyError::Percolation(_) => "percolation",
            AssemblyError::Glue(_) => "glue",
            AssemblyError::Field(_) => "field",
            AssemblyError::Uncovered { .. } => "covering",
        }
    }
}

/// Selected obstacles, their Lipschitz surface and the glue lifting them.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub field: ObstacleField,
    pub geometry: BoxGeometry,
    pub torus: Torus,
    pub openness: OpennessReport,
    pub surface: LipschitzSurface,
    pub selected: SelectedObstacles,
    pub glue: GlueFunction<f64>,
    pub r0: f64,
}

impl Assembly {
    /// openness → minimal surface → selection → glue, on a periodic field whose
    /// lateral period is `columns · (l + d)`.
    pub fn build(
        field: ObstacleField,
        geometry: BoxGeometry,
        f_bar: f64,
        columns: Vec<usize>,
        height_cap: usize,
    ) -> Result<Self, AssemblyError> {
        if !field.is_periodic() {
            return Err(AssemblyError::Field("supersolution assembly needs a periodic field".into()));
        }
        let torus = Torus::new(columns)?;
        let openness = openness_from_field(&field, geometry, f_bar, torus.clone(), height_cap)?;
        let surface = minimal_lipschitz_surface(&openness.sites)?;
        let selected = select_obstacles(&field, &openness, &surface)?;
        let r0 = field.shape().r0();
        let glue = build_glue(&selected, &torus, geometry.l, geometry.d, r0, 2.0 * geometry.h)?;
        Ok(Self { field, geometry, torus, openness, surface, selected, glue, r0 })
    }

    pub fn n(&self) -> usize {
        self.torus.n()
    }

    /// Lateral side lengths of the torus.
    pub fn extent(&self) -> Vec<f64> {
        self.torus.extent().iter().map(|&m| m as f64 * self.geometry.period()).collect()
    }

    /// Minimal-image displacement `x - x_i` for the obstacle selected in `column`.
    pub fn displacement(&self, x: &[f64], column: usize) -> Vec<f64> {
        let c = &self.selected.get(column).x;
        (0..self.n()).map(|a| self.field.lateral_offset(x[a], c[a], a)).collect()
    }

    /// Columns whose selected obstacle may lie within `reach` of `x`.
    pub fn nearby_columns(&self, x: &[f64], reach: f64) -> Vec<usize> {
        let n = self.n();
        let p = self.geometry.period();
        let k = (reach / p).ceil() as i64 + 1;
        let mut ranges = Vec::with_capacity(n);
        for a in 0..n {
            let m = self.torus.extent()[a] as i64;
            let c = (x[a] / p).floor() as i64;
            let lo = c - k;
            let hi = c + k;
            if hi - lo + 1 >= m {
                ranges.push((0..m).collect::<Vec<i64>>());
            } else {
                ranges.push((lo..=hi).map(|v| v.rem_euclid(m)).collect());
            }
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            let coords: Vec<usize> = (0..n).map(|a| ranges[a][idx[a]] as usize).collect();
            out.push(self.torus.index(&coords));
            let mut a = 0;
            while a < n {
                idx[a] += 1;
                if idx[a] < ranges[a].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == n {
                break;
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// One term of the minimum defining the flat part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub column: usize,
    pub r: f64,
    pub value: f64,
}

/// `v(x) = min_i profile(|x - x_i|) + v_glue(x)` and its active branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatEval {
    pub value: f64,
    pub flat: f64,
    pub glue: f64,
    pub branch: Branch,
}

impl FlatEval {
    pub fn inner(&self, r_in: f64) -> bool {
        self.branch.r < r_in
    }
}

/// Assembly plus a radial profile: the composite supersolution.
#[derive(Debug, Clone)]
pub struct Composite<P> {
    pub assembly: Assembly,
    pub profile: P,
}

impl<P: RadialProfile> Composite<P> {
    pub fn new(assembly: Assembly, profile: P) -> Self {
        Self { assembly, profile }
    }

    pub fn branch(&self, x: &[f64], column: usize) -> Branch {
        let d = self.assembly.displacement(x, column);
        let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        Branch { column, r, value: self.profile.value(r) }
    }

    /// Finite branches near `x` (those within `r_out`).
    pub fn branches(&self, x: &[f64]) -> Vec<Branch> {
        self.assembly
            .nearby_columns(x, self.profile.r_out())
            .into_iter()
            .map(|c| self.branch(x, c))
            .filter(|b| b.value.is_finite())
            .collect()
    }

    /// Active branch: smallest value, ties by lower column index.
    pub fn active(&self, x: &[f64]) -> Result<Branch, AssemblyError> {
        self.branches(x)
            .into_iter()
            .min_by(|a, b| a.value.total_cmp(&b.value).then(a.column.cmp(&b.column)))
            .ok_or_else(|| AssemblyError::Uncovered { x: x.to_vec() })
    }

    pub fn eval(&self, x: &[f64]) -> Result<FlatEval, AssemblyError> {
        let branch = self.active(x)?;
        let glue = self.assembly.glue.value(x);
        Ok(FlatEval { value: branch.value + glue, flat: branch.value, glue, branch })
    }

    /// `v(x)`, `+∞` where uncovered.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).map_or(f64::INFINITY, |e| e.value)
    }

    /// Minimum over every selected obstacle (no neighbourhood pruning).
    pub fn brute_force_flat(&self, x: &[f64]) -> f64 {
        (0..self.assembly.torus.len()).map(|c| self.branch(x, c).value).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Obstacle, ObstacleShape, Window};

    struct Cone;
    impl RadialProfile for Cone {
        fn n(&self) -> usize {
            1
        }
        fn r_in(&self) -> f64 {
            0.1
        }
        fn r_out(&self) -> f64 {
            4.0
        }
        fn value(&self, r: f64) -> f64 {
            if r <= 4.0 {
                r
            } else {
                f64::INFINITY
            }
        }
        fn slope(&self, _r: f64, _inner: bool) -> f64 {
            1.0
        }
    }

    fn assembly() -> Assembly {
        let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
        // boxes of side 4 with gaps 2; slab height 1
        let g = BoxGeometry::new(1, 4.0, 2.0, 1.0, 0.4).unwrap();
        let obs = vec![
            Obstacle { x: vec![1.0], y: 0.9, strength: 3.0 },
            Obstacle { x: vec![8.0], y: 1.6, strength: 3.0 },
            Obstacle { x: vec![15.0], y: 0.5, strength: 3.0 },
        ];
        let field = ObstacleField::from_obstacles(shape, obs, Window::new(vec![0.0, 0.4], vec![18.0, 6.0]), true)
            .unwrap();
        Assembly::build(field, g, 2.0, vec![3], 4).unwrap()
    }

    #[test]
    fn pipeline_selects_each_column() {
        let a = assembly();
        assert_eq!(a.surface.heights(), &[1, 2, 1]);
        let ys: Vec<f64> = a.selected.items.iter().map(|s| s.y).collect();
        assert_eq!(ys, vec![0.9, 1.6, 0.5]);
        assert_eq!(a.glue.value(&[1.0]), 0.9 + 0.25);
    }

    #[test]
    fn minimum_matches_brute_force_and_wraps() {
        let c = Composite::new(assembly(), Cone);
        for i in 0..360 {
            let x = [i as f64 * 0.05];
            let e = c.eval(&x).unwrap();
            assert_eq!(e.flat, c.brute_force_flat(&x));
        }
        // x = 17.5 is 3.5 from the obstacle at 1.0 through the seam
        let b = c.active(&[17.5]).unwrap();
        assert_eq!(b.column, 0);
        assert!((c.branch(&[17.5], 0).r - 1.5).abs() < 1e-12);
    }
}
