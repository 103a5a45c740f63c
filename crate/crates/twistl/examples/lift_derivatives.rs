//! The lift of Delta to SL(2, R): reduction to the fundamental domain,
//! left invariance, and ordered Lie derivatives from jets against finite
//! differences.
//!
//! cargo run --example lift_derivatives

use twistl::forms::{lift_derivative, lift_derivative_fd, lift_eval, CuspForm, EvalConfig, MultiIndex};
use twistl::sl2::{reduce, GroupElement};

fn main() {
    let f = CuspForm::delta(2000);
    let cfg = EvalConfig::default();
    // a point low in the upper half-plane
    let g = GroupElement::n(0.137).mul(&GroupElement::a(-3.0)).mul(&GroupElement::k(0.4));
    let red = reduce(&g).expect("unimodular");
    let (z0, z1) = (g.point(), red.x.point());
    println!("z = {:.6}{:+.6}i reduces to {:.6}{:+.6}i via {:?}", z0.re, z0.im, z1.re, z1.im, red.gamma);

    let v = lift_eval(&f, &g, &cfg).unwrap();
    let moved = lift_eval(&f, &GroupElement::new(1.0, 3.0, 2.0, 7.0).mul(&g), &cfg).unwrap();
    println!("F(g) = {v:.6e}, F(gamma g) - F(g) = {:.1e}", (moved - v).norm());

    let fd_cfg = EvalConfig { fd_step: 1e-3, ..cfg };
    let g = GroupElement::n(0.2).mul(&GroupElement::a(0.1));
    println!("{:>9} {:>3} {:>24} {:>10}", "beta", "l", "jet", "|jet-fd|");
    for (beta, l) in [(MultiIndex(0, 0, 0), 1), (MultiIndex(1, 0, 0), 0), (MultiIndex(1, 1, 0), 1), (MultiIndex(2, 0, 1), 2)] {
        let exact = lift_derivative(&f, &g, beta, l, &cfg).unwrap();
        let fd = lift_derivative_fd(&f, &g, beta, l, &fd_cfg).unwrap();
        let b = format!("({},{},{})", beta.0, beta.1, beta.2);
        println!("{b:>9} {l:>3} {:>11.4e} {:+11.4e}i {:>10.1e}", exact.re, exact.im, (exact - fd).norm());
    }
}
