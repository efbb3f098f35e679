#![allow(dead_code)]

use depin::percolation::SiteField;

/// Pointwise minimum over every admissible height vector, found by exhaustive
/// enumeration; `None` when no admissible surface fits under the cap.
pub fn brute_force_minimal(sites: &SiteField) -> Option<Vec<usize>> {
    let torus = sites.torus();
    let len = torus.len();
    let cap = sites.height_cap();
    let neighbors: Vec<Vec<usize>> = (0..len).map(|k| torus.neighbors(k)).collect();
    let mut h = vec![1usize; len];
    let mut best: Option<Vec<usize>> = None;
    loop {
        let ok = (0..len).all(|k| sites.is_open(k, h[k]) && neighbors[k].iter().all(|&nb| h[k].abs_diff(h[nb]) <= 1));
        if ok {
            best = Some(match best {
                None => h.clone(),
                Some(b) => b.iter().zip(&h).map(|(a, c)| *a.min(c)).collect(),
            });
        }
        // odometer over {1..=cap}^len
        let mut i = 0;
        loop {
            if i == len {
                return best;
            }
            if h[i] < cap {
                h[i] += 1;
                break;
            }
            h[i] = 1;
            i += 1;
        }
    }
}

/// Second-order central Laplacian of `u` at `x` with step `s`.
pub fn fd_laplacian(u: &dyn Fn(&[f64]) -> f64, x: &[f64], s: f64) -> f64 {
    let mut lap = 0.0;
    let c = u(x);
    for a in 0..x.len() {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[a] += s;
        m[a] -= s;
        lap += (u(&p) - 2.0 * c + u(&m)) / (s * s);
    }
    lap
}
