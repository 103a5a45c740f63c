//! Dirichlet characters with Conrey labels.
//!
//! `chi_q(label, .)` is the product over prime powers `p^e || q` of the
//! local characters `chi_{p^e}(label mod p^e, .)`. For odd `p` the local
//! character is `e(ind(label) ind(n) / phi(p^e))` with discrete logs to the
//! least primitive root; for `p = 2` both arguments are written as
//! `+-5^a` and the signs and exponents pair separately.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::arith::{euler_phi, factorize, gcd, pow_mod};
use crate::error::{Error, Result};

/// `exp(2 pi i num / den)`.
fn root_of_unity(num: u64, den: u64) -> Complex64 {
    let r = num % den;
    // exact values at the quarter points keep small-modulus sums clean
    if 4 * r % den == 0 {
        return match 4 * r / den {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    let (s, c) = (2.0 * PI * r as f64 / den as f64).sin_cos();
    Complex64::new(c, s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Component {
    p: u64,
    e: u32,
    pe: u64,
    /// least primitive root (odd p), 5 for p = 2
    generator: u64,
    /// values live in the group of `order`-th roots of unity
    order: u64,
    /// `exps[n] = Some(a)` with `chi(n) = e(a / order)`
    exps: Vec<Option<u64>>,
    label: u64,
}

/// Least primitive root modulo `p^e`, `p` odd.
fn primitive_root(p: u64, e: u32) -> u64 {
    let pe = p.pow(e);
    let phi = pe / p * (p - 1);
    let primes: Vec<u64> = factorize(phi).into_iter().map(|(r, _)| r).collect();
    (2..pe)
        .find(|&g| g % p != 0 && primes.iter().all(|&r| pow_mod(g, phi / r, pe) != 1))
        .expect("odd prime powers have primitive roots")
}

impl Component {
    fn new(p: u64, e: u32, label: u64) -> Self {
        let pe = p.pow(e);
        let label = label % pe;
        if p == 2 {
            return Self::two_power(e, label);
        }
        let g = primitive_root(p, e);
        let phi = pe / p * (p - 1);
        let mut log = vec![None; pe as usize];
        let mut x = 1u64;
        for k in 0..phi {
            log[x as usize] = Some(k);
            x = x * g % pe;
        }
        let a = log[label as usize].expect("label is a unit");
        let exps = log.iter().map(|l| l.map(|k| (a as u128 * k as u128 % phi as u128) as u64)).collect();
        Component { p, e, pe, generator: g, order: phi, exps, label }
    }

    fn two_power(e: u32, label: u64) -> Self {
        let pe = 1u64 << e;
        let order = if e <= 1 { 1 } else { pe / 2 };
        // (sign, exponent of 5)
        let mut rep = vec![None; pe as usize];
        if e <= 1 {
            rep[1 % pe as usize] = Some((0u64, 0u64));
        } else {
            let half = if e >= 3 { pe / 4 } else { 1 };
            let mut x = 1u64;
            for a in 0..half {
                rep[x as usize] = Some((0, a));
                rep[((pe - x) % pe) as usize] = Some((1, a));
                x = x * 5 % pe;
            }
        }
        let (sm, am) = rep[label as usize].expect("label is odd");
        let exps = rep
            .iter()
            .map(|r| {
                r.map(|(sn, an)| {
                    if e <= 1 {
                        return 0;
                    }
                    // e((1-eps_m)(1-eps_n)/8 + a_m a_n / 2^{e-2}) over denominator 2^{e-1}
                    let sign = sm * sn * (order / 2);
                    let expo = if e >= 3 { 2 * am * an } else { 0 };
                    (sign + expo) % order
                })
            })
            .collect();
        Component { p: 2, e, pe, generator: 5, order, exps, label }
    }

    fn exponent(&self, n: i64) -> Option<u64> {
        self.exps[n.rem_euclid(self.pe as i64) as usize]
    }

    fn is_primitive(&self) -> bool {
        match (self.p, self.e) {
            (2, 1) => false,
            (_, 1) => self.exps.iter().any(|x| matches!(x, Some(a) if *a != 0)),
            // not induced from p^{e-1}: nontrivial on 1 + p^{e-1}
            _ => self.exponent((1 + self.pe / self.p) as i64) != Some(0),
        }
    }

    fn gauss_sum(&self) -> Complex64 {
        let mut acc = crate::sum::CompensatedSum::new();
        for k in 0..self.pe {
            if let Some(a) = self.exps[k as usize] {
                // chi(k) e(k / p^e) with a common denominator
                let den = self.order * self.pe;
                let num = (a as u128 * self.pe as u128 + k as u128 * self.order as u128) % den as u128;
                acc.add(root_of_unity(num as u64, den));
            }
        }
        acc.value()
    }
}

/// A Dirichlet character `chi_q(label, .)`.
#[derive(Clone, PartialEq, Eq)]
pub struct DirichletCharacter {
    modulus: u64,
    label: u64,
    components: Vec<Component>,
    primitive: bool,
}

impl fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DirichletCharacter({}:{})", self.modulus, self.label)
    }
}

impl fmt::Display for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.modulus, self.label)
    }
}

impl DirichletCharacter {
    /// The Conrey character `chi_q(label, .)`.
    pub fn from_label(q: u64, label: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidLabel { modulus: q, label });
        }
        let label = label % q;
        if gcd(label as i64, q as i64) != 1 && q != 1 {
            return Err(Error::InvalidLabel { modulus: q, label });
        }
        let components: Vec<Component> = factorize(q).into_iter().map(|(p, e)| Component::new(p, e, label)).collect();
        let primitive = components.iter().all(Component::is_primitive);
        Ok(DirichletCharacter { modulus: q, label: if q == 1 { 1 } else { label }, components, primitive })
    }

    pub fn principal(q: u64) -> Self {
        Self::from_label(q, 1).expect("1 is a unit")
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn label(&self) -> u64 {
        self.label
    }

    pub fn is_primitive(&self) -> bool {
        self.primitive
    }

    pub fn is_principal(&self) -> bool {
        self.components.iter().all(|c| c.exps.iter().all(|x| x.map_or(true, |a| a == 0)))
    }

    /// `(p, e, generator)` for each prime power factor.
    pub fn components(&self) -> Vec<(u64, u32, u64)> {
        self.components.iter().map(|c| (c.p, c.e, c.generator)).collect()
    }

    fn common_order(&self) -> u64 {
        self.components.iter().fold(1u64, |acc, c| acc / gcd(acc as i64, c.order as i64) as u64 * c.order)
    }

    /// `chi(n) = e(a / order)`, or `None` when `gcd(n, q) > 1`.
    pub fn exponent(&self, n: i64) -> Option<(u64, u64)> {
        let order = self.common_order();
        let mut num: u128 = 0;
        for c in &self.components {
            let a = c.exponent(n)?;
            num += a as u128 * (order / c.order) as u128;
        }
        Some(((num % order as u128) as u64, order))
    }

    pub fn eval(&self, n: i64) -> Complex64 {
        match self.exponent(n) {
            Some((a, order)) => root_of_unity(a, order),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `chi(-1)`.
    pub fn parity(&self) -> i32 {
        if self.eval(-1).re > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn is_even(&self) -> bool {
        self.parity() == 1
    }

    /// Order of the character in the character group.
    pub fn order(&self) -> u64 {
        let order = self.common_order();
        let mut g = order;
        // the image is generated by the values on the local generators
        for c in &self.components {
            for &a in c.exps.iter().flatten() {
                let scaled = a * (order / c.order);
                g = gcd(g as i64, scaled as i64) as u64;
            }
        }
        order / g.max(1)
    }

    pub fn conj(&self) -> Self {
        let inv = crate::arith::inv_mod(self.label as i64, self.modulus as i64).unwrap_or(0) as u64;
        Self::from_label(self.modulus, if self.modulus == 1 { 1 } else { inv }).expect("inverse of a unit")
    }

    /// Pointwise product with another character of the same modulus.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.modulus != other.modulus {
            return Err(Error::Domain("characters have different moduli".into()));
        }
        let label = (self.label as u128 * other.label as u128 % self.modulus.max(1) as u128) as u64;
        Self::from_label(self.modulus, label)
    }

    /// `tau(chi) = sum_k chi(k) e(k / q)` via the CRT factorisation
    /// `tau(chi_1 chi_2) = chi_1(q_2) chi_2(q_1) tau(chi_1) tau(chi_2)`.
    pub fn gauss_sum(&self) -> Complex64 {
        let mut out = Complex64::new(1.0, 0.0);
        for c in &self.components {
            let rest = self.modulus / c.pe;
            let twist = match c.exponent(rest as i64) {
                Some(a) => root_of_unity(a, c.order),
                None => Complex64::new(0.0, 0.0),
            };
            out *= twist * c.gauss_sum();
        }
        out
    }

    /// Direct `O(q)` Gauss sum.
    pub fn gauss_sum_direct(&self) -> Complex64 {
        let q = self.modulus;
        let mut acc = crate::sum::CompensatedSum::new();
        for k in 0..q {
            if let Some((a, order)) = self.exponent(k as i64) {
                let den = order * q;
                let num = (a as u128 * q as u128 + k as u128 * order as u128) % den as u128;
                acc.add(root_of_unity(num as u64, den));
            }
        }
        acc.value()
    }

    /// Restriction to a divisor `d` of `q` with `gcd(d, q/d) = 1`.
    pub fn restrict(&self, d: u64) -> Result<Self> {
        if d == 0 || self.modulus % d != 0 || gcd(d as i64, (self.modulus / d) as i64) != 1 {
            return Err(Error::InvalidSplit(format!("{d} is not a unitary divisor of {}", self.modulus)));
        }
        Self::from_label(d, if d == 1 { 1 } else { self.label % d })
    }
}

impl FromStr for DirichletCharacter {
    type Err = Error;

    /// `"q:label"`, e.g. `"16:3"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("expected a character as 'q:label', got '{s}'"));
        let (q, l) = s.split_once(':').ok_or_else(bad)?;
        let q: u64 = q.trim().parse().map_err(|_| bad())?;
        let l: u64 = l.trim().parse().map_err(|_| bad())?;
        Self::from_label(q, l)
    }
}

/// `chi_q = chi_{M_2} chi_{M_1 N}` for a factorisation `q = M N`, where
/// `M = M_1 M_2`, `M_1 | N` and `gcd(M_2, N) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterSplit {
    pub chi: DirichletCharacter,
    pub m: u64,
    pub n: u64,
    pub m1: u64,
    pub m2: u64,
    pub chi_m2: DirichletCharacter,
    pub chi_m1n: DirichletCharacter,
    /// `chi_{M_1 N}(1 + k N) = e(b k / M_1)`
    pub b: u64,
}

impl CharacterSplit {
    /// `h`-weights need `chi_M` and the outer factor `chi_N` in the coprime
    /// case; these are the two restrictions.
    pub fn is_coprime(&self) -> bool {
        self.m1 == 1
    }
}

pub fn split_character(chi: &DirichletCharacter, m: u64, n: u64) -> Result<CharacterSplit> {
    let q = chi.modulus();
    if m == 0 || n == 0 || m.checked_mul(n) != Some(q) {
        return Err(Error::InvalidSplit(format!("{m} x {n} != {q}")));
    }
    let mut m1 = 1u64;
    for (p, e) in factorize(m) {
        if n % p == 0 {
            m1 *= p.pow(e);
        }
    }
    let m2 = m / m1;
    if n % m1 != 0 {
        return Err(Error::NonFactorable { m, n });
    }
    let chi_m2 = chi.restrict(m2)?;
    let chi_m1n = chi.restrict(m1 * n)?;
    let b = match chi_m1n.exponent(1 + n as i64) {
        Some((a, order)) => {
            let scaled = a as u128 * m1 as u128;
            if scaled % order as u128 != 0 {
                return Err(Error::Domain(format!("chi(1 + N) is not an {m1}-th root of unity")));
            }
            (scaled / order as u128) as u64 % m1
        }
        None => 0,
    };
    for k in 0..m1 {
        let lhs = chi_m1n.eval(1 + (k * n) as i64);
        let rhs = root_of_unity(b * k % m1, m1);
        if (lhs - rhs).norm() > 1e-12 {
            return Err(Error::Domain(format!("b-identity fails at k = {k}")));
        }
    }
    Ok(CharacterSplit { chi: chi.clone(), m, n, m1, m2, chi_m2, chi_m1n, b })
}

/// The admissible split with `M <= N` minimising `M^5 + N`; `M = 1` always
/// qualifies.
pub fn auto_split(chi: &DirichletCharacter) -> Result<CharacterSplit> {
    let q = chi.modulus();
    let mut best: Option<(u128, CharacterSplit)> = None;
    for m in crate::arith::divisors(q) {
        if m * m > q {
            break;
        }
        let cost = (m as u128).pow(5) + (q / m) as u128;
        if best.as_ref().is_some_and(|(c, _)| *c <= cost) {
            continue;
        }
        if let Ok(s) = split_character(chi, m, q / m) {
            best = Some((cost, s));
        }
    }
    best.map(|(_, s)| s).ok_or_else(|| Error::InvalidSplit(format!("no admissible split of {q}")))
}

/// Number of Dirichlet characters of modulus `q`.
pub fn character_count(q: u64) -> u64 {
    euler_phi(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::e;

    fn approx(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn small_examples() {
        let p = DirichletCharacter::from_label(5, 1).unwrap();
        assert!(p.is_principal());
        for n in 1..5 {
            assert_eq!(p.eval(n), Complex64::new(1.0, 0.0));
        }
        let odd4 = DirichletCharacter::from_label(4, 3).unwrap();
        assert_eq!(odd4.eval(1), Complex64::new(1.0, 0.0));
        assert_eq!(odd4.eval(3), Complex64::new(-1.0, 0.0));
        assert_eq!(odd4.parity(), -1);
        let c5 = DirichletCharacter::from_label(5, 2).unwrap();
        assert_eq!(c5.eval(2), Complex64::new(0.0, 1.0));
        assert_eq!(c5.eval(4), Complex64::new(-1.0, 0.0));
        assert_eq!(c5.order(), 4);
        assert!(matches!(DirichletCharacter::from_label(6, 3), Err(Error::InvalidLabel { .. })));
        assert_eq!("16:3".parse::<DirichletCharacter>().unwrap().modulus(), 16);
        assert!("16-3".parse::<DirichletCharacter>().is_err());
    }

    #[test]
    fn values_vanish_off_units_and_multiply() {
        for q in [1u64, 2, 8, 9, 12, 16, 36, 48, 60, 97] {
            for label in (1..q.max(2)).filter(|&l| gcd(l as i64, q as i64) == 1) {
                let chi = DirichletCharacter::from_label(q, label).unwrap();
                assert_eq!(chi.eval(1), Complex64::new(1.0, 0.0));
                for m in 0..q as i64 {
                    let vm = chi.eval(m);
                    if gcd(m, q as i64) > 1 {
                        assert_eq!(vm, Complex64::new(0.0, 0.0));
                        continue;
                    }
                    assert!((vm.norm() - 1.0).abs() < 1e-14);
                    for n in [1i64, 5, 7, 11, q as i64 - 1] {
                        assert!(approx(chi.eval(m * n), vm * chi.eval(n), 1e-12));
                    }
                }
                assert!(approx(chi.eval(-1).powu(2), Complex64::new(1.0, 0.0), 1e-14));
            }
        }
    }

    #[test]
    fn labels_enumerate_distinct_characters() {
        for q in [8u64, 15, 16, 24, 45] {
            let chars: Vec<_> = (1..q)
                .filter(|&l| gcd(l as i64, q as i64) == 1)
                .map(|l| DirichletCharacter::from_label(q, l).unwrap())
                .collect();
            assert_eq!(chars.len() as u64, character_count(q));
            for (i, a) in chars.iter().enumerate() {
                for b in &chars[i + 1..] {
                    assert!((1..q as i64).any(|n| !approx(a.eval(n), b.eval(n), 1e-9)));
                }
                // conj inverts
                let c = a.conj();
                for n in 1..q as i64 {
                    assert!(approx(c.eval(n), a.eval(n).conj(), 1e-12));
                }
            }
        }
    }

    #[test]
    fn primitivity_matches_definition() {
        // primitive iff no proper divisor d of q makes chi trivial on units = 1 mod d
        for q in 2u64..=64 {
            for l in (1..q).filter(|&l| gcd(l as i64, q as i64) == 1) {
                let chi = DirichletCharacter::from_label(q, l).unwrap();
                let induced = crate::arith::divisors(q).into_iter().filter(|&d| d < q).any(|d| {
                    (0..q as i64)
                        .filter(|&n| gcd(n, q as i64) == 1 && n % d as i64 == 1 % d as i64)
                        .all(|n| approx(chi.eval(n), Complex64::new(1.0, 0.0), 1e-9))
                });
                assert_eq!(chi.is_primitive(), !induced, "{q}:{l}");
            }
        }
    }

    #[test]
    fn gauss_sums() {
        assert_eq!(DirichletCharacter::principal(1).gauss_sum(), Complex64::new(1.0, 0.0));
        let odd4 = DirichletCharacter::from_label(4, 3).unwrap();
        assert!(approx(odd4.gauss_sum(), Complex64::new(0.0, 2.0), 1e-14));
        for q in 1u64..=200 {
            for l in (1..q.max(2)).filter(|&l| gcd(l as i64, q as i64) == 1).step_by(3) {
                let chi = DirichletCharacter::from_label(q, l).unwrap();
                let tol = 1e-10 * (q as f64).sqrt();
                assert!(approx(chi.gauss_sum(), chi.gauss_sum_direct(), tol), "{q}:{l}");
                if chi.is_primitive() {
                    assert!((chi.gauss_sum().norm() - (q as f64).sqrt()).abs() < tol);
                }
            }
        }
    }

    #[test]
    fn orthogonality_uses_conjugate() {
        // sum_k chi(k) e(nk/q) = tau(chi) conj(chi(n)) for primitive chi
        for q in [3u64, 4, 5, 7, 8, 9, 12, 16, 25, 36, 60, 97, 100] {
            for l in (1..q).filter(|&l| gcd(l as i64, q as i64) == 1) {
                let chi = DirichletCharacter::from_label(q, l).unwrap();
                if !chi.is_primitive() {
                    continue;
                }
                let tau = chi.gauss_sum();
                for n in 0..q as i64 {
                    let s: Complex64 = (0..q as i64).map(|k| chi.eval(k) * e(Complex64::new((n * k) as f64 / q as f64, 0.0))).sum();
                    assert!(approx(s, tau * chi.eval(n).conj(), 1e-9 * (q as f64).sqrt()));
                }
            }
        }
    }

    #[test]
    fn split_examples() {
        let chi = DirichletCharacter::from_label(15, 2).unwrap();
        let s = split_character(&chi, 3, 5).unwrap();
        assert_eq!((s.m1, s.m2), (1, 3));
        for n in (1..15).filter(|&n| gcd(n, 15) == 1) {
            assert!(approx(s.chi_m2.eval(n) * s.chi_m1n.eval(n), chi.eval(n), 1e-12));
        }
        let p4 = DirichletCharacter::principal(4);
        let s = split_character(&p4, 2, 2).unwrap();
        assert_eq!((s.m1, s.m2, s.b), (2, 1, 0));
        let prim16 = DirichletCharacter::from_label(16, 3).unwrap();
        assert!(prim16.is_primitive());
        let s = split_character(&prim16, 4, 4).unwrap();
        for k in 0..4u64 {
            let lhs = prim16.eval(1 + 4 * k as i64);
            assert!(approx(lhs, root_of_unity(s.b * k, 4), 1e-12));
        }
        assert!(matches!(split_character(&chi, 2, 5), Err(Error::InvalidSplit(_))));
        // 4 | 24 but M = 4, N = 6: 4 does not divide 6
        let c24 = DirichletCharacter::from_label(24, 5).unwrap();
        assert!(matches!(split_character(&c24, 4, 6), Err(Error::NonFactorable { .. })));
    }

    #[test]
    fn splits_multiply_back() {
        for (q, m, n) in [(48u64, 4u64, 12u64), (36, 6, 6), (45, 3, 15), (60, 6, 10), (72, 6, 12), (1000, 10, 100)] {
            for l in (1..q).filter(|&l| gcd(l as i64, q as i64) == 1).step_by(5) {
                let chi = DirichletCharacter::from_label(q, l).unwrap();
                let s = split_character(&chi, m, n).unwrap();
                assert_eq!(s.m1 * s.m2, m);
                for r in (0..q as i64).filter(|&r| gcd(r, q as i64) == 1) {
                    assert!(approx(s.chi_m2.eval(r) * s.chi_m1n.eval(r), chi.eval(r), 1e-12));
                }
            }
        }
        let chi = DirichletCharacter::from_label(36, 5).unwrap();
        assert_eq!(auto_split(&chi).unwrap().m, 1);
        let chi = DirichletCharacter::from_label(1296, 5).unwrap();
        assert!(chi.is_primitive());
        // 3^5 + 432 beats 2^5 + 648 and 4^5 + 324
        assert_eq!(auto_split(&chi).unwrap().m, 3);
    }
}
