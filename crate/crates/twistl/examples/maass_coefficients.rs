//! Fourier coefficients of the first even Maass cusp form for SL(2, Z)
//! (r = 13.7797...) by Hejhal's collocation method, written in the format
//! `--form maass:<path>` reads. The smallest eigenvalue, r = 9.5336..., has
//! an odd form and is not usable here.
//!
//! cargo run --release --example maass_coefficients -- /tmp/maass.txt

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use twistl::forms::{write_maass, CuspForm};
use twistl::special::bessel_k_ir;

const R: f64 = 13.779_751_351_890_738_6;
/// Unknowns and collocation points.
const M: usize = 70;
const Q: usize = 80;
const HEIGHTS: (f64, f64) = (0.18, 0.165);
/// Coefficients are kept while the two heights agree to this.
const AGREE: f64 = 1e-9;

fn kernel(y: f64) -> f64 {
    y.sqrt() * bessel_k_ir(R, 2.0 * PI * y).expect("K_ir")
}

/// Move `z` into the standard fundamental domain.
fn pullback(mut x: f64, mut y: f64) -> (f64, f64) {
    loop {
        x -= x.round();
        let n2 = x * x + y * y;
        if n2 >= 1.0 - 1e-15 {
            return (x, y);
        }
        x = -x / n2;
        y /= n2;
    }
}

/// Hecke-normalised `lambda(1..=M)` from collocation at height `y0`, with
/// `f = sum_n lambda(n) sqrt(y) K_ir(2 pi n y) cos(2 pi n x)`.
fn solve(m: usize, q: usize, y0: f64) -> Vec<f64> {
    let xs: Vec<f64> = (1..=q).map(|j| (2 * j - 1) as f64 / (4 * q) as f64).collect();
    let pulled: Vec<(f64, f64)> = xs.iter().map(|&x| pullback(x, y0)).collect();
    let w = |n: usize, y: f64| kernel(n as f64 * y) / (n as f64).sqrt();
    // pulled[j] terms, one row per l
    let table: Vec<Vec<f64>> = (1..=m)
        .map(|l| pulled.iter().map(|&(xp, yp)| w(l, yp) * (2.0 * PI * l as f64 * xp).cos()).collect())
        .collect();
    let mut v = DMatrix::<f64>::zeros(m, m);
    for n in 1..=m {
        let c: Vec<f64> = xs.iter().map(|&x| (2.0 * PI * n as f64 * x).cos()).collect();
        for l in 1..=m {
            let acc: f64 = table[l - 1].iter().zip(&c).map(|(t, c)| t * c).sum();
            v[(n - 1, l - 1)] = 2.0 * acc / q as f64 - if n == l { w(n, y0) } else { 0.0 };
        }
    }
    let a = v.view((1, 1), (m - 1, m - 1)).into_owned();
    let b = -DVector::from_iterator(m - 1, (1..m).map(|n| v[(n, 0)]));
    let sol = a.lu().solve(&b).expect("nonsingular collocation system");
    std::iter::once(1.0).chain(sol.iter().copied()).collect()
}

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "maass_13.7798.txt".into());
    let a = solve(M, Q, HEIGHTS.0);
    let b = solve(M, Q, HEIGHTS.1);
    let keep = a.iter().zip(&b).take_while(|(x, y)| (*x - *y).abs() < AGREE).count();
    println!("r = {R}");
    for n in 1..=8 {
        println!("lambda({n}) = {:+.12}", a[n - 1]);
    }
    println!("heights {} and {} agree to {AGREE:.0e} on n <= {keep}", HEIGHTS.0, HEIGHTS.1);
    println!("Hecke: lambda(4) - (lambda(2)^2 - 1) = {:.1e}", a[3] - (a[1] * a[1] - 1.0));
    println!("Hecke: lambda(6) - lambda(2) lambda(3) = {:.1e}", a[5] - a[1] * a[2]);

    let coeffs = a.iter().take(keep).map(|&c| Complex64::new(c, 0.0)).collect();
    let form = CuspForm::maass_even(R, coeffs).expect("valid form");
    write_maass(&form, std::path::Path::new(&path)).expect("writable path");
    println!("wrote {path}");
}
