//! Mean curvature `κ(u) = (1/n) div(∇u/√(1+|∇u|²))` from derivative jets,
//! either by central finite differences or in closed form for radial pieces.

/// Gradient and Hessian at a point (Hessian row-major, `n × n`).
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn zero(n: usize) -> Self {
        Self { grad: vec![0.0; n], hess: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.grad.len()
    }

    pub fn add(&self, other: &Jet) -> Jet {
        Jet {
            grad: self.grad.iter().zip(&other.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&other.hess).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn laplacian(&self) -> f64 {
        let n = self.n();
        (0..n).map(|i| self.hess[i * n + i]).sum()
    }

    pub fn nu(&self) -> f64 {
        (1.0 + self.grad.iter().map(|g| g * g).sum::<f64>()).sqrt()
    }

    /// `(H a, b)` for this jet's Hessian.
    pub fn quad(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.hess[i * n + j] * a[i] * b[j];
            }
        }
        s
    }

    pub fn mean_curvature(&self) -> f64 {
        let nu = self.nu();
        (self.laplacian() / nu - self.quad(&self.grad, &self.grad) / nu.powi(3)) / self.n() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    Second,
    Fourth,
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, s) in moves {
        y[i] += s;
    }
    y
}

/// Central difference jet of `u` at `x` with step `s`.
pub fn fd_jet(u: &dyn Fn(&[f64]) -> f64, x: &[f64], s: f64, order: FdOrder) -> Jet {
    let n = x.len();
    let mut jet = Jet::zero(n);
    let u0 = u(x);
    // first-derivative weights at offsets k·s
    let w1: &[(f64, f64)] = match order {
        FdOrder::Second => &[(1.0, 0.5), (-1.0, -0.5)],
        FdOrder::Fourth => &[(2.0, -1.0 / 12.0), (1.0, 8.0 / 12.0), (-1.0, -8.0 / 12.0), (-2.0, 1.0 / 12.0)],
    };
    for i in 0..n {
        let at = |k: f64| u(&shifted(x, &[(i, k * s)]));
        jet.grad[i] = w1.iter().map(|&(k, w)| w * at(k)).sum::<f64>() / s;
        jet.hess[i * n + i] = match order {
            FdOrder::Second => (at(1.0) - 2.0 * u0 + at(-1.0)) / (s * s),
            FdOrder::Fourth => {
                (-at(2.0) + 16.0 * at(1.0) - 30.0 * u0 + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * s * s)
            }
        };
        for j in 0..i {
            let mut m = 0.0;
            for &(ki, wi) in w1 {
                for &(kj, wj) in w1 {
                    m += wi * wj * u(&shifted(x, &[(i, ki * s), (j, kj * s)]));
                }
            }
            m /= s * s;
            jet.hess[i * n + j] = m;
            jet.hess[j * n + i] = m;
        }
    }
    jet
}

/// `κ(u)(x)` by finite differences.
pub fn mean_curvature_fd(u: &dyn Fn(&[f64]) -> f64, x: &[f64], s: f64, order: FdOrder) -> f64 {
    fd_jet(u, x, s, order).mean_curvature()
}

/// Jet of `x ↦ w(|x|)` at displacement `d` from the center given `w'(r)` and `w''(r)`.
pub fn radial_jet(d: &[f64], slope: f64, second: f64) -> Jet {
    let n = d.len();
    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut jet = Jet::zero(n);
    if r == 0.0 {
        for i in 0..n {
            jet.hess[i * n + i] = second;
        }
        return jet;
    }
    let e: Vec<f64> = d.iter().map(|v| v / r).collect();
    for i in 0..n {
        jet.grad[i] = slope * e[i];
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            jet.hess[i * n + j] = second * e[i] * e[j] + slope / r * (id - e[i] * e[j]);
        }
    }
    jet
}

pub const TERM_NAMES: [&str; 7] = [
    "kappa_w",
    "glue_laplacian",
    "laplacian_nu_change",
    "w_hessian_nu_change",
    "glue_hessian",
    "cross_gradient",
    "glue_gradient_quadratic",
];

/// `κ(w + g)` split into the seven groups obtained by expanding the
/// divergence around `κ(w)`; the groups sum to `κ(w + g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermBreakdown {
    pub terms: [f64; 7],
}

impl TermBreakdown {
    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        TERM_NAMES.iter().copied().zip(self.terms.iter().copied())
    }
}

pub fn breakdown(w: &Jet, g: &Jet) -> TermBreakdown {
    let n = w.n() as f64;
    let u = w.add(g);
    let (nw, nu) = (w.nu(), u.nu());
    let hww = w.quad(&w.grad, &w.grad);
    let terms = [
        w.mean_curvature() * n,
        g.laplacian() / nu,
        w.laplacian() * (1.0 / nu - 1.0 / nw),
        -hww * (1.0 / nu.powi(3) - 1.0 / nw.powi(3)),
        -g.quad(&u.grad, &u.grad) / nu.powi(3),
        -2.0 * w.quad(&w.grad, &g.grad) / nu.powi(3),
        -w.quad(&g.grad, &g.grad) / nu.powi(3),
    ];
    TermBreakdown { terms: terms.map(|t| t / n) }
}
