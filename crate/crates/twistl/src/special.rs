//! Special functions: the K-Bessel function of imaginary order and the
//! complex Gamma function.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest order parameter accepted by [`bessel_k_ir`].
pub const MAX_BESSEL_ORDER: f64 = 100.0;

/// `K_{ir}(y)` for real `r` and `y > 0`.
pub fn bessel_k_ir(r: f64, y: f64) -> Result<f64> {
    Ok(bessel_k_ir_derivatives(r, y, 0)?[0])
}

/// Derivatives `d^m/dy^m K_{ir}(y)` for `m = 0..=order`, from
/// `K_{ir}(y) = int_0^inf exp(-y cosh t) cos(r t) dt`.
///
/// The integrand is entire and decays double exponentially, so the
/// trapezoidal rule converges geometrically in the step. For `y < |r|` the
/// value is of size `exp(-pi |r| / 2)` against an O(1) integrand, and for
/// `y > |r|` the endpoint value overshoots the saddle, so the contour is
/// moved to `t + i theta`, where
/// `K = exp(-|r| theta) int_0^inf Re exp(-y cosh(t + i theta) + i |r| t) dt`.
pub fn bessel_k_ir_derivatives(r: f64, y: f64, order: usize) -> Result<Vec<f64>> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("K_ir needs y > 0, got {y}")));
    }
    if r.abs() > MAX_BESSEL_ORDER {
        return Err(Error::Domain(format!("|r| = {} exceeds {MAX_BESSEL_ORDER}", r.abs())));
    }
    let r = r.abs();
    // for y < r leave a strip of width delta below pi/2, where the integrand
    // exceeds the result by about exp(r delta); for y > r pass through the
    // saddle at i asin(r / y)
    let delta_min = (8.0 / r.max(1e-300)).min(PI / 2.0);
    let theta = if y < r { PI / 2.0 - delta_min } else { (r / y).asin().min(PI / 2.0 - delta_min) };
    let delta = PI / 2.0 - theta;
    // cut where y cos(theta) cosh t exceeds ~750 plus polynomial growth of (cosh t)^m
    let cut = (750.0 + 2.0 * order as f64 * 10.0) / (y * theta.cos());
    if cut <= 1.0 {
        // every term underflows
        return Ok(vec![0.0; order + 1]);
    }
    let t_max = cut.acosh();
    let h = [0.1, delta / 12.0, 0.7 / (y * theta.cos()).sqrt(), 2.0 * PI / (r + 50.0)].into_iter().fold(f64::INFINITY, f64::min);
    let n = (t_max / h).ceil() as usize;
    let h = t_max / n as f64;
    let rot = Complex64::new(theta.cos(), theta.sin());
    let rot_inv = rot.conj();
    let mut out = vec![0.0; order + 1];
    for i in 0..=n {
        let t = i as f64 * h;
        let w = if i == 0 { 0.5 } else { 1.0 };
        let (et, emt) = (t.exp(), (-t).exp());
        // cosh(t + i theta)
        let ch = (rot * et + rot_inv * emt) * 0.5;
        if y * ch.re > 760.0 + 20.0 * order as f64 {
            break;
        }
        let base = (-y * ch + Complex64::new(0.0, r * t)).exp() * w;
        let mut p = base;
        for o in out.iter_mut() {
            *o += p.re;
            p *= -ch;
        }
    }
    let scale = h * (-r * theta).exp();
    for o in out.iter_mut() {
        *o *= scale;
    }
    Ok(out)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(z)` on the principal branch, Lanczos approximation with the
/// reflection formula for `Re z < 1/2`.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::GammaPole(format!("{z}")));
    }
    if z.re < 0.5 {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let s = (z * PI).sin();
        return Ok(Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(Complex64::new(1.0, 0.0) - z)?);
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok(Complex64::new(0.5 * (2.0 * PI).ln(), 0.0) + (z + 0.5) * t.ln() - t + x.ln())
}

pub fn gamma(z: Complex64) -> Result<Complex64> {
    Ok(ln_gamma(z)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gk;

    #[test]
    fn k0_at_one_matches_integral() {
        // oracle: adaptive Gauss-Kronrod on the integral representation
        let oracle = adaptive_gk(|t| Complex64::new((-t.cosh()).exp(), 0.0), 0.0, 10.0, 1e-14, 60)
            .unwrap()
            .re;
        let k = bessel_k_ir(0.0, 1.0).unwrap();
        assert!((k - oracle).abs() < 1e-10);
        // known value K_0(1) = 0.42102443824070833
        assert!((k - 0.421_024_438_240_708_3).abs() < 1e-12);
    }

    #[test]
    fn imaginary_order_decay() {
        let a = bessel_k_ir(5.0, 10.0).unwrap();
        let b = bessel_k_ir(5.0, 20.0).unwrap();
        assert!(b / a < (-9.0f64).exp());
    }

    #[test]
    fn imaginary_order_against_quadrature() {
        for &(r, y) in &[(9.533_695, 0.5), (3.0, 2.0), (9.533_695, 6.0), (1.0, 0.01)] {
            let oracle = adaptive_gk(
                |t| Complex64::new((-y * t.cosh()).exp() * (r * t).cos(), 0.0),
                0.0,
                ((800.0f64) / y).acosh(),
                1e-15,
                80,
            )
            .unwrap()
            .re;
            let k = bessel_k_ir(r, y).unwrap();
            assert!((k - oracle).abs() < 1e-10 * oracle.abs().max(1.0), "r={r} y={y}: {k} vs {oracle}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (r, y) = (2.5, 1.3);
        let d = bessel_k_ir_derivatives(r, y, 2).unwrap();
        let h = 1e-4;
        let fd1 = (bessel_k_ir(r, y + h).unwrap() - bessel_k_ir(r, y - h).unwrap()) / (2.0 * h);
        let fd2 = (bessel_k_ir(r, y + h).unwrap() - 2.0 * d[0] + bessel_k_ir(r, y - h).unwrap()) / (h * h);
        assert!((d[1] - fd1).abs() < 1e-8);
        assert!((d[2] - fd2).abs() < 1e-5);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_k_ir(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k_ir(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_values() {
        let g = gamma(Complex64::new(5.0, 0.0)).unwrap();
        assert!((g.re - 24.0).abs() < 1e-12 && g.im.abs() < 1e-12);
        let g = gamma(Complex64::new(0.5, 0.0)).unwrap();
        assert!((g.re - PI.sqrt()).abs() < 1e-14);
        // |Gamma(1/2 + i t)|^2 = pi / cosh(pi t)
        let t = 3.7;
        let g = gamma(Complex64::new(0.5, t)).unwrap();
        assert!((g.norm_sqr() / (PI / (PI * t).cosh()) - 1.0).abs() < 1e-12);
        // reflection branch
        let g = gamma(Complex64::new(-1.5, 0.0)).unwrap();
        assert!((g.re - 4.0 * PI.sqrt() / 3.0).abs() < 1e-12);
        assert!(matches!(gamma(Complex64::new(-2.0, 0.0)), Err(Error::GammaPole(_))));
    }
}
