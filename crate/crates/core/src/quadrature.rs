//! Adaptive Gauss–Kronrod (7, 15) quadrature.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature did not reach tolerance {tolerance:e}; achieved error bound {achieved:e}")]
pub struct QuadratureError {
    pub tolerance: f64,
    pub achieved: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid);
    let mut gauss = fc * T::lit(WG[3]);
    let mut kron = fc * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kron = kron + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * T::lit(WG[j / 2]);
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// `∫_a^b f` to absolute tolerance `tol` by bisecting the interval with the
/// largest Kronrod–Gauss discrepancy, up to `max_intervals` pieces.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    tol: T,
    max_intervals: usize,
) -> Result<Integral<T>, QuadratureError> {
    if a == b {
        return Ok(Integral { value: T::zero(), error: T::zero(), evaluations: 0 });
    }
    let (v, e) = kronrod(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total_err = pieces.iter().fold(T::zero(), |s, p| s + p.3);
        // the floor keeps round-off from stalling the loop on tiny targets
        let floor = pieces.iter().fold(T::zero(), |s, p| s + p.2.abs()) * T::epsilon() * T::lit(50.0);
        if total_err <= tol.max(floor) {
            let value = pieces.iter().fold(T::zero(), |s, p| s + p.2);
            return Ok(Integral { value, error: total_err, evaluations });
        }
        if pieces.len() >= max_intervals {
            return Err(QuadratureError { tolerance: tol.to_f64_lossy(), achieved: total_err.to_f64_lossy() });
        }
        let worst = (0..pieces.len()).max_by(|&i, &j| pieces[i].3.partial_cmp(&pieces[j].3).unwrap()).unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = (lo + hi) * T::lit(0.5);
        let (v1, e1) = kronrod(&mut f, lo, mid);
        let (v2, e2) = kronrod(&mut f, mid, hi);
        evaluations += 30;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}
