//! How SL(2, Z) permutes the Hecke cosets `T(L)`: build the permutation for
//! a few random matrices and certify each one with exact integer cofactors.
//!
//! cargo run --example hecke_orbits -- 12

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twistl::hecke::{certify, permutation, random_sl2z, IndexSet};

fn main() {
    let l: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(12);
    let set = IndexSet::new(l);
    println!("T({l}) has {} cosets", set.len());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..4 {
        let a = random_sl2z(&mut rng, 20);
        let p = permutation(l, &a);
        let moved = (0..set.len()).filter(|&i| p.apply(i) != i).count();
        println!("a = {a:?}: key {:?}, moves {moved}, certified {}", p.key, certify(&p));
        for (i, e) in set.entries().iter().enumerate().take(6) {
            let img = set.entries()[p.apply(i)];
            print!("  ({},{})->({},{})", e.m, e.k, img.m, img.k);
        }
        println!();
    }
}
