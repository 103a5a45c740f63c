//! Lift evaluations per orbit sum as `q` grows through `6^j`, written as CSV.
//!
//! cargo run --release --example scaling_bench > bench.csv

use twistl::forms::CuspForm;
use twistl::oracle::{default_bench_cases, scaling_report, BenchConfig};

fn main() {
    let f = CuspForm::delta(4000);
    let report = scaling_report(&f, &default_bench_cases(), &BenchConfig::default()).expect("bench runs");
    print!("{}", report.to_csv());
    for r in &report.rows {
        eprintln!("q = {:>5}  {}x{}  lifts per sum / q = {:.4}", r.q, r.m, r.n, r.lifts_per_q());
    }
    let (c, fits) = report.complexity_fit();
    eprintln!("C = {c:.3e}, bound holds on every row: {fits}");
}
