use std::collections::VecDeque;

use super::{PercolationError, SiteField, Torus};

/// Integer heights over a torus, 1-Lipschitz in the `ℓ¹`-neighbour sense, every
/// `(k, L(k))` open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LipschitzSurface {
    torus: Torus,
    heights: Vec<usize>,
    iterations: usize,
}

impl LipschitzSurface {
    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn heights(&self) -> &[usize] {
        &self.heights
    }

    pub fn height(&self, k: usize) -> usize {
        self.heights[k]
    }

    pub fn max_height(&self) -> usize {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    /// Number of single-column updates performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Checks openness and the Lipschitz bound against `sites`.
    pub fn validate(&self, sites: &SiteField) -> Result<(), PercolationError> {
        if sites.torus() != &self.torus {
            return Err(PercolationError::Mismatch("torus differs".into()));
        }
        for k in 0..self.torus.len() {
            if !sites.is_open(k, self.heights[k]) {
                return Err(PercolationError::Mismatch(format!("site ({k}, {}) closed", self.heights[k])));
            }
            for nb in self.torus.neighbors(k) {
                if self.heights[k].abs_diff(self.heights[nb]) > 1 {
                    return Err(PercolationError::Mismatch(format!("columns {k} and {nb} differ by more than 1")));
                }
            }
        }
        Ok(())
    }

    /// Lines `k_1 ... k_n L`.
    pub fn write_table<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, &l) in self.heights.iter().enumerate() {
            for c in self.torus.coords(k) {
                write!(out, "{c} ")?;
            }
            writeln!(out, "{l}")?;
        }
        Ok(())
    }
}

fn raise(sites: &SiteField, heights: &[usize], k: usize) -> Result<Option<usize>, PercolationError> {
    let torus = sites.torus();
    let mut need = heights[k];
    for nb in torus.neighbors(k) {
        need = need.max(heights[nb].saturating_sub(1));
    }
    if need == heights[k] && sites.is_open(k, need) {
        return Ok(None);
    }
    match sites.next_open(k, need) {
        Some(j) if j == heights[k] => Ok(None),
        Some(j) => Ok(Some(j)),
        None => Err(PercolationError::CapExceeded { column: k, cap: sites.height_cap() }),
    }
}

/// Monotone value iteration from `L ≡ 1`: each column is lifted to the lowest
/// open height not below `max(L(k), max_nb L - 1)` until nothing moves.
///
/// Heights only increase and every intermediate `L` stays below the minimal
/// surface, so the fixed point is that surface.
pub fn minimal_lipschitz_surface(sites: &SiteField) -> Result<LipschitzSurface, PercolationError> {
    let torus = sites.torus().clone();
    let len = torus.len();
    let mut heights = vec![1usize; len];
    let mut queued = vec![true; len];
    let mut queue: VecDeque<usize> = (0..len).collect();
    let mut iterations = 0;
    while let Some(k) = queue.pop_front() {
        queued[k] = false;
        if let Some(j) = raise(sites, &heights, k)? {
            heights[k] = j;
            iterations += 1;
            for nb in torus.neighbors(k) {
                if !queued[nb] {
                    queued[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    Ok(LipschitzSurface { torus, heights, iterations })
}

/// Gauss–Seidel sweeps over the columns in the given order until a sweep
/// changes nothing. Same fixed point as [`minimal_lipschitz_surface`].
pub fn minimal_lipschitz_surface_with_order(
    sites: &SiteField,
    order: &[usize],
) -> Result<LipschitzSurface, PercolationError> {
    let torus = sites.torus().clone();
    let mut heights = vec![1usize; torus.len()];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for &k in order {
            if let Some(j) = raise(sites, &heights, k)? {
                heights[k] = j;
                iterations += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(LipschitzSurface { torus, heights, iterations })
}
