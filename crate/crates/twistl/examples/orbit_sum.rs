//! One twisted orbit sum `sum_j psi(j) d^l F(n(j/q) a(t))`, by Taylor
//! transfer over boxes and by direct summation.
//!
//! cargo run --release --example orbit_sum -- 1296:5 6x216

use twistl::counter::EvalCounter;
use twistl::dirichlet::{split_character, DirichletCharacter};
use twistl::forms::{CuspForm, EvalConfig};
use twistl::orbit_sum::{fast_orbit_sums, naive_orbit_sums, SumKind, SumOptions, SumRequest};

fn main() {
    let mut args = std::env::args().skip(1);
    let chi: DirichletCharacter = args.next().unwrap_or_else(|| "1296:5".into()).parse().expect("q:label");
    let split = args.next().unwrap_or_else(|| "6x216".into());
    let (m, n) = split.split_once('x').expect("MxN");
    let (m, n): (u64, u64) = (m.parse().unwrap(), n.parse().unwrap());

    let f = CuspForm::delta(4000);
    let psi = chi.conj();
    let sp = split_character(&psi, m, n).expect("admissible split");
    let (t, l_max) = (-0.5, 3);

    let fast_counter = EvalCounter::new();
    let req = SumRequest { form: &f, split: &sp, t, l_max, kind: SumKind::Standard, options: SumOptions::default() };
    let rep = fast_orbit_sums(&req, &fast_counter).unwrap();
    let naive_counter = EvalCounter::new();
    let naive = naive_orbit_sums(&f, &psi, t, l_max, SumKind::Standard, &EvalConfig::default(), &naive_counter).unwrap();

    println!("q = {}, split {m}x{n}, degree {}, {} boxes over {} points", chi.modulus(), rep.degree, rep.boxes, rep.points);
    for (l, want) in naive.iter().enumerate() {
        let got = rep.value(l as u32);
        println!("l = {l}: {:+.10e} {:+.10e}i  |fast-naive| = {:.1e}", got.re, got.im, (got - want).norm());
    }
    let (fs, ns) = (fast_counter.snapshot(), naive_counter.snapshot());
    println!("lift evaluations: fast {} (+{} jets), naive {}", fs.lift_evals, fs.lift_deriv_evals, ns.lift_evals + ns.lift_deriv_evals);
}
