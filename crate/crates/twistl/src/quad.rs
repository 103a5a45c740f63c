//! One-dimensional quadrature for complex-valued integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

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

/// One 15-point Kronrod panel; returns (estimate, |K15 - G7|).
pub fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Panels [`adaptive_gk`] may visit before giving up.
pub const MAX_PANELS: usize = 200_000;

/// Adaptive Gauss-Kronrod integration with a global absolute tolerance.
/// Panels are bisected depth-first and summed in left-to-right order.
pub fn adaptive_gk<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<Complex64> {
    let mut acc = CompensatedSum::new();
    let mut stack = vec![(a, b, 0u32)];
    let width = (b - a).abs();
    let mut failed = false;
    let mut panels = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(Error::Quadrature(format!("more than {MAX_PANELS} panels on [{a}, {b}] for tolerance {tol:e}")));
        }
        let (v, err) = gk15(&f, lo, hi);
        let local_tol = tol * ((hi - lo).abs() / width).max(1e-3);
        if err <= local_tol || depth >= max_depth {
            if err > local_tol {
                failed = true;
            }
            acc.add(v);
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    if failed {
        return Err(Error::Quadrature(format!("tolerance {tol:e} not reached on [{a}, {b}]")));
    }
    Ok(acc.value())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_exponential() {
        let v = adaptive_gk(|x| Complex64::new(x.exp(), x.sin()), 0.0, 2.0, 1e-13, 40).unwrap();
        assert!((v.re - (2f64.exp() - 1.0)).abs() < 1e-12);
        assert!((v.im - (1.0 - 2f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }
}
