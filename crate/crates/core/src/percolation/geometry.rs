use super::PercolationError;

/// Periodic box `ℤ^n / (extent_1 ℤ × … × extent_n ℤ)` with row-major indexing
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Torus {
    extent: Vec<usize>,
}

impl Torus {
    pub fn new(extent: Vec<usize>) -> Result<Self, PercolationError> {
        if extent.is_empty() || extent.iter().any(|&e| e == 0) {
            return Err(PercolationError::InvalidGeometry(format!("bad torus extent {extent:?}")));
        }
        Ok(Self { extent })
    }

    pub fn n(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent
    }

    pub fn len(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.n()];
        for a in (0..self.n()).rev() {
            c[a] = idx % self.extent[a];
            idx /= self.extent[a];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.extent).fold(0, |acc, (&c, &e)| acc * e + c % e)
    }

    /// Index of the site displaced by `delta` (wrapping).
    pub fn offset(&self, idx: usize, delta: &[i64]) -> usize {
        let c = self.coords(idx);
        let moved: Vec<usize> = c
            .iter()
            .zip(delta)
            .zip(&self.extent)
            .map(|((&ci, &d), &e)| (ci as i64 + d).rem_euclid(e as i64) as usize)
            .collect();
        self.index(&moved)
    }

    /// Distinct `‖·‖₁ = 1` neighbours (fewer than `2n` on sides of length 1 or 2).
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.n());
        let mut delta = vec![0i64; self.n()];
        for a in 0..self.n() {
            for s in [-1i64, 1] {
                delta[a] = s;
                let j = self.offset(idx, &delta);
                if j != idx && !out.contains(&j) {
                    out.push(j);
                }
            }
            delta[a] = 0;
        }
        out
    }
}

/// Rescaled boxes: `Q̄_k` of side `l` separated by gaps of width `d`, reduced
/// boxes `Q̃_k` shrunk by `r1` on each side, and height slabs of thickness `h`
/// starting at `y = r1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGeometry {
    pub n: usize,
    pub l: f64,
    pub d: f64,
    pub h: f64,
    pub r1: f64,
}

impl BoxGeometry {
    pub fn new(n: usize, l: f64, d: f64, h: f64, r1: f64) -> Result<Self, PercolationError> {
        if !(l > 2.0 * r1) || !(d > 0.0) || !(h > 0.0) || n == 0 {
            return Err(PercolationError::InvalidGeometry(format!(
                "need l > 2 r1, d > 0, h > 0 (l = {l}, d = {d}, h = {h}, r1 = {r1})"
            )));
        }
        Ok(Self { n, l, d, h, r1 })
    }

    /// Lateral period `l + d` of the box pattern.
    pub fn period(&self) -> f64 {
        self.l + self.d
    }

    /// `(j-1) h + r1 ..= j h + r1`.
    pub fn slab(&self, j: usize) -> (f64, f64) {
        ((j as f64 - 1.0) * self.h + self.r1, j as f64 * self.h + self.r1)
    }

    /// Per-axis interval of the reduced box `Q̃_k`.
    pub fn reduced_box(&self, k: &[usize]) -> Vec<(f64, f64)> {
        k.iter()
            .map(|&ki| {
                let o = ki as f64 * self.period();
                (o + self.r1, o + self.l - self.r1)
            })
            .collect()
    }

    /// Per-axis interval of the full box `Q̄_k`.
    pub fn full_box(&self, k: &[usize]) -> Vec<(f64, f64)> {
        k.iter()
            .map(|&ki| {
                let o = ki as f64 * self.period();
                (o, o + self.l)
            })
            .collect()
    }

    /// Base volume `|A| = (l - 2 r1)^n h` of a site cuboid.
    pub fn cuboid_volume(&self) -> f64 {
        (self.l - 2.0 * self.r1).powi(self.n as i32) * self.h
    }

    /// Column of the reduced box containing the lateral point `x`, if any.
    pub fn reduced_column(&self, torus: &Torus, x: &[f64]) -> Option<usize> {
        let p = self.period();
        let mut k = Vec::with_capacity(self.n);
        for (a, &xa) in x.iter().enumerate() {
            let ka = (xa / p).floor();
            let local = xa - ka * p;
            if local < self.r1 || local > self.l - self.r1 {
                return None;
            }
            k.push((ka as i64).rem_euclid(torus.extent()[a] as i64) as usize);
        }
        Some(torus.index(&k))
    }

    /// Slabs `j ≥ 1` whose closed height interval contains `y`.
    pub fn slabs_containing(&self, y: f64) -> Vec<usize> {
        let s = (y - self.r1) / self.h;
        if s < 0.0 {
            return Vec::new();
        }
        let j = s.floor() as usize + 1;
        if s == s.floor() && j > 1 {
            vec![j - 1, j]
        } else {
            vec![j]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_indexing_roundtrip() {
        let t = Torus::new(vec![3, 4]).unwrap();
        for i in 0..t.len() {
            assert_eq!(t.index(&t.coords(i)), i);
        }
        assert_eq!(t.neighbors(0).len(), 4);
        let line = Torus::new(vec![2]).unwrap();
        assert_eq!(line.neighbors(0), vec![1]);
    }

    #[test]
    fn boxes_and_slabs() {
        let g = BoxGeometry::new(1, 4.0, 2.0, 0.5, 0.4).unwrap();
        let t = Torus::new(vec![3]).unwrap();
        assert_eq!(g.reduced_box(&[1]), vec![(6.4, 9.6)]);
        assert_eq!(g.reduced_column(&t, &[7.0]), Some(1));
        assert_eq!(g.reduced_column(&t, &[10.0]), None);
        assert_eq!(g.slabs_containing(0.5), vec![1]);
        assert_eq!(g.slabs_containing(0.9), vec![1, 2]);
        assert!(BoxGeometry::new(1, 0.7, 1.0, 1.0, 0.4).is_err());
    }
}
