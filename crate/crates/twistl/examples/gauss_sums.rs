//! Gauss sums of Dirichlet characters: the CRT product formula against the
//! direct sum, and `|tau| = sqrt(q)` for primitive characters.
//!
//! cargo run --example gauss_sums -- 60

use twistl::dirichlet::DirichletCharacter;
use twistl::arith::gcd;

fn main() {
    let q: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);
    println!("{:>8} {:>5} {:>6} {:>26} {:>10}", "label", "prim", "parity", "tau", "|crt-dir|");
    for label in (1..q.max(2)).filter(|&l| gcd(l as i64, q as i64) == 1) {
        let chi = DirichletCharacter::from_label(q, label).expect("unit label");
        let tau = chi.gauss_sum();
        let gap = (tau - chi.gauss_sum_direct()).norm();
        println!(
            "{:>8} {:>5} {:>6} {:>12.6} {:+12.6}i {:>10.1e}",
            chi.to_string(),
            chi.is_primitive(),
            chi.parity(),
            tau.re,
            tau.im,
            gap
        );
        if chi.is_primitive() {
            assert!((tau.norm() - (q as f64).sqrt()).abs() < 1e-9);
        }
    }
}
