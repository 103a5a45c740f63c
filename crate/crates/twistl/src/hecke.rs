//! Hecke cosets `T(L)` and the permutation action of `SL(2, Z)` on them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::arith::{divisors, ext_gcd};
use crate::error::{Error, Result};
use crate::sl2::{int_det, int_mul, GroupElement, IntMatrix, INT_IDENTITY};

/// `(m, k)` with `m | L` and `0 <= k < L / m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeckeIndex {
    pub m: u64,
    pub k: u64,
}

impl HeckeIndex {
    pub fn new(m: u64, k: u64) -> Self {
        HeckeIndex { m, k }
    }
}

/// `T(L)` in lexicographic order, with constant-time position lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    l: u64,
    entries: Vec<HeckeIndex>,
    /// `(m, position of (m, 0))`
    starts: Vec<(u64, usize)>,
}

impl IndexSet {
    pub fn new(l: u64) -> Self {
        assert!(l >= 1, "T(L) needs L >= 1");
        let mut entries = Vec::new();
        let mut starts = Vec::new();
        for m in divisors(l) {
            starts.push((m, entries.len()));
            entries.extend((0..l / m).map(|k| HeckeIndex { m, k }));
        }
        IndexSet { l, entries, starts }
    }

    pub fn level(&self) -> u64 {
        self.l
    }

    pub fn entries(&self) -> &[HeckeIndex] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, idx: HeckeIndex) -> Option<usize> {
        let i = self.starts.binary_search_by_key(&idx.m, |&(m, _)| m).ok()?;
        (idx.k < self.l / idx.m).then(|| self.starts[i].1 + idx.k as usize)
    }
}

pub fn index_set(l: u64) -> Vec<HeckeIndex> {
    IndexSet::new(l).entries
}

fn check_index(l: u64, idx: HeckeIndex) -> Result<()> {
    if l == 0 || idx.m == 0 || l % idx.m != 0 || idx.k >= l / idx.m {
        return Err(Error::InvalidIndex { l, m: idx.m, k: idx.k });
    }
    Ok(())
}

/// `A(L, m, k) = L^{-1/2} [[m, k], [0, L/m]]`.
pub fn hecke_matrix(l: u64, idx: HeckeIndex) -> Result<GroupElement> {
    check_index(l, idx)?;
    let s = 1.0 / (l as f64).sqrt();
    Ok(GroupElement::new(idx.m as f64 * s, idx.k as f64 * s, 0.0, (l / idx.m) as f64 * s))
}

/// The integer matrix `[[m, k], [0, L/m]]`.
pub fn hecke_int(l: u64, idx: HeckeIndex) -> IntMatrix {
    [[idx.m as i64, idx.k as i64], [0, (l / idx.m) as i64]]
}

/// Left-reduce `[[m, k], [0, L/m]] a` to Hermite normal form. Returns the
/// new index and `c` in `SL(2, Z)` with `c [[m,k],[0,L/m]] a = [[m1,k1],[0,L/m1]]`.
pub fn act_and_normalize(l: u64, idx: HeckeIndex, a: &IntMatrix) -> (HeckeIndex, IntMatrix) {
    debug_assert_eq!(int_det(a), 1);
    let p = int_mul(&hecke_int(l, idx), a);
    let (top, bottom) = (p[0], p[1]);
    let (g, x, y) = ext_gcd(top[0], bottom[0]);
    let c: IntMatrix = [[x, y], [-bottom[0] / g, top[0] / g]];
    let k_raw = (x as i128 * top[1] as i128 + y as i128 * bottom[1] as i128) as i64;
    let d = l as i64 / g;
    let t = k_raw.div_euclid(d);
    let cofactor = int_mul(&[[1, -t], [0, 1]], &c);
    (HeckeIndex { m: g as u64, k: k_raw.rem_euclid(d) as u64 }, cofactor)
}

/// `a -> sigma_a` on `T(L)`, with `sigma_{ab} = sigma_b o sigma_a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitPermutation {
    pub l: u64,
    /// `a mod L`
    pub key: IntMatrix,
    /// `map[i]` is the position of `sigma(entries[i])`
    pub map: Vec<usize>,
    /// certifying cofactors for the representative `a` that built the table
    pub cofactors: Vec<IntMatrix>,
    pub witness: IntMatrix,
}

impl OrbitPermutation {
    pub fn build(set: &IndexSet, a: &IntMatrix) -> Self {
        let l = set.level();
        let (map, cofactors) = set
            .entries()
            .iter()
            .map(|&idx| {
                let (img, c) = act_and_normalize(l, idx, a);
                (set.position(img).expect("normal form lies in T(L)"), c)
            })
            .unzip();
        OrbitPermutation { l, key: reduce_key(a, l), map, cofactors, witness: *a }
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }
}

pub fn reduce_key(a: &IntMatrix, l: u64) -> IntMatrix {
    let l = l as i64;
    [[a[0][0].rem_euclid(l), a[0][1].rem_euclid(l)], [a[1][0].rem_euclid(l), a[1][1].rem_euclid(l)]]
}

type PermCache = Mutex<HashMap<(u64, IntMatrix), Arc<OrbitPermutation>>>;

fn cache() -> &'static PermCache {
    static CACHE: OnceLock<PermCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoised [`OrbitPermutation`] keyed by `a mod L`.
pub fn permutation(l: u64, a: &IntMatrix) -> Arc<OrbitPermutation> {
    let key = (l, reduce_key(a, l));
    if let Some(p) = cache().lock().unwrap().get(&key) {
        return p.clone();
    }
    let perm = Arc::new(OrbitPermutation::build(&IndexSet::new(l), a));
    cache().lock().unwrap().entry(key).or_insert(perm).clone()
}

/// Number of memoised tables for level `L`.
pub fn cached_permutations(l: u64) -> usize {
    cache().lock().unwrap().keys().filter(|(ll, _)| *ll == l).count()
}

pub fn identity_permutation(l: u64) -> Arc<OrbitPermutation> {
    permutation(l, &INT_IDENTITY)
}

/// Check every cofactor of `p`: `c_i A(L, i) a = A(L, sigma(i))` with
/// `det c_i = 1`, in exact integers, and that `sigma` is a bijection.
pub fn certify(p: &OrbitPermutation) -> bool {
    let set = IndexSet::new(p.l);
    let mut seen = vec![false; set.len()];
    for (i, &j) in p.map.iter().enumerate() {
        if seen[j] {
            return false;
        }
        seen[j] = true;
        let c = p.cofactors[i];
        let lhs = int_mul(&int_mul(&c, &hecke_int(p.l, set.entries()[i])), &p.witness);
        if int_det(&c) != 1 || lhs != hecke_int(p.l, set.entries()[j]) {
            return false;
        }
    }
    true
}

/// A random element of `SL(2, Z)` with entries of size about `bound^2`.
pub fn random_sl2z(rng: &mut impl rand::Rng, bound: i64) -> IntMatrix {
    loop {
        let a = rng.gen_range(-bound..=bound);
        let c = rng.gen_range(-bound..=bound);
        let (g, x, y) = ext_gcd(a, c);
        if g != 1 {
            continue;
        }
        // a x + c y = 1, so [[a, -y], [c, x]] has det 1; shift by a random n(t)
        let t = rng.gen_range(-bound..=bound);
        return int_mul(&[[a, -y], [c, x]], &[[1, t], [0, 1]]);
    }
}
