//! `L(s, Delta x chi)` on the critical line from the fast engine, the naive
//! engine and the direct Mellin integral.
//!
//! cargo run --release --example l_value -- 16:3 4x4 0.5 3.0

use num_complex::Complex64;
use twistl::assembly::{assemble_l, Anchor, AssemblyOptions, PrecisionConfig};
use twistl::counter::EvalCounter;
use twistl::dirichlet::DirichletCharacter;
use twistl::forms::CuspForm;
use twistl::oracle::direct_integral_l;

fn main() {
    let mut args = std::env::args().skip(1);
    let chi: DirichletCharacter = args.next().unwrap_or_else(|| "16:3".into()).parse().expect("q:label");
    let split = args.next().unwrap_or_else(|| "4x4".into());
    let (m, n) = split.split_once('x').expect("MxN");
    let split = Some((m.parse().unwrap(), n.parse().unwrap()));
    let re: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let im: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3.0);
    let s = Complex64::new(re, im);
    let f = CuspForm::delta(4000);
    // at eps = 1 the geodesic order leaves room for a box transfer of degree >= 1
    let pc = PrecisionConfig::new(s, 1.0, 8.0).unwrap();

    let oracle = direct_integral_l(&f, &chi, s, 10.0).unwrap().value();
    println!("oracle            {:+.12} {:+.12}i", oracle.re, oracle.im);
    for (name, opts) in [
        ("naive", AssemblyOptions::naive()),
        ("fast", AssemblyOptions { split, ..AssemblyOptions::default() }),
        ("fast, midpoint", AssemblyOptions { split, anchor: Anchor::Midpoint, ..AssemblyOptions::default() }),
    ] {
        let counter = EvalCounter::new();
        let v = assemble_l(&f, &chi, &pc, &opts, &counter).unwrap();
        println!(
            "{name:<16}  {:+.12} {:+.12}i  rel dev {:.1e}  est {:.1e}  lifts {} + {} jets",
            v.value.re,
            v.value.im,
            (v.value - oracle).norm() / oracle.norm(),
            v.err_estimate,
            v.counters.lift_evals,
            v.counters.lift_deriv_evals
        );
    }
}
