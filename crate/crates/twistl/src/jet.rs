//! Truncated multivariate power series ("jets").
//!
//! A [`JetSpace`] fixes the number of variables, a total-degree bound and
//! optional per-variable degree caps. Jets are plain coefficient vectors
//! indexed by the space's monomial table; monomials are graded, so index 0
//! is always the constant term.

use num_complex::Complex64;

pub type Jet = Vec<Complex64>;

const ABSENT: u32 = u32::MAX;

#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    degree: u32,
    caps: Vec<u32>,
    exps: Vec<u8>,
    strides: Vec<usize>,
    dense: Vec<u32>,
    pairs: Vec<(u32, u32, u32)>,
}

impl JetSpace {
    /// Space of polynomials in `caps.len()` variables with total degree at
    /// most `degree` and degree in variable `i` at most `caps[i]`.
    pub fn new(degree: u32, caps: &[u32]) -> Self {
        let nvars = caps.len();
        assert!(nvars > 0 && degree < 64);
        let caps: Vec<u32> = caps.iter().map(|&c| c.min(degree)).collect();
        let mut strides = vec![1usize; nvars];
        for i in 1..nvars {
            strides[i] = strides[i - 1] * (caps[i - 1] as usize + 1);
        }
        let dense_len = strides[nvars - 1] * (caps[nvars - 1] as usize + 1);
        let mut dense = vec![ABSENT; dense_len];
        let mut exps = Vec::new();
        let mut count = 0u32;
        for deg in 0..=degree {
            let mut cur = vec![0u32; nvars];
            enumerate(&caps, deg, 0, &mut cur, &mut |e| {
                let key: usize = e.iter().zip(&strides).map(|(&x, &s)| x as usize * s).sum();
                dense[key] = count;
                exps.extend(e.iter().map(|&x| x as u8));
                count += 1;
            });
        }
        let n = count as usize;
        let mut pairs = Vec::new();
        for i in 0..n {
            let ei = &exps[i * nvars..(i + 1) * nvars];
            let di: u32 = ei.iter().map(|&x| x as u32).sum();
            for j in 0..n {
                let ej = &exps[j * nvars..(j + 1) * nvars];
                let dj: u32 = ej.iter().map(|&x| x as u32).sum();
                if di + dj > degree {
                    // graded order: every later j has degree >= dj
                    break;
                }
                let mut key = 0usize;
                let mut ok = true;
                for v in 0..nvars {
                    let s = ei[v] as u32 + ej[v] as u32;
                    if s > caps[v] {
                        ok = false;
                        break;
                    }
                    key += s as usize * strides[v];
                }
                if ok {
                    pairs.push((i as u32, j as u32, dense[key]));
                }
            }
        }
        JetSpace { nvars, degree, caps, exps, strides, dense, pairs }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn len(&self) -> usize {
        self.exps.len() / self.nvars
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exps[idx * self.nvars..(idx + 1) * self.nvars]
    }

    pub fn index_of(&self, e: &[u32]) -> Option<usize> {
        if e.len() != self.nvars {
            return None;
        }
        let mut key = 0usize;
        for v in 0..self.nvars {
            if e[v] > self.caps[v] {
                return None;
            }
            key += e[v] as usize * self.strides[v];
        }
        match self.dense[key] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    pub fn zero(&self) -> Jet {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }

    pub fn constant(&self, c: Complex64) -> Jet {
        let mut j = self.zero();
        j[0] = c;
        j
    }

    /// The jet `c0 + x_var`.
    pub fn variable(&self, var: usize, c0: Complex64) -> Jet {
        let mut j = self.constant(c0);
        let mut e = vec![0u32; self.nvars];
        e[var] = 1;
        if let Some(i) = self.index_of(&e) {
            j[i] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn mul(&self, a: &[Complex64], b: &[Complex64]) -> Jet {
        let mut out = self.zero();
        for &(i, j, k) in &self.pairs {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
        out
    }

    pub fn add(&self, a: &[Complex64], b: &[Complex64]) -> Jet {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn scale(&self, a: &[Complex64], s: Complex64) -> Jet {
        a.iter().map(|x| x * s).collect()
    }

    /// `acc += s * a`
    pub fn axpy(&self, acc: &mut [Complex64], s: Complex64, a: &[Complex64]) {
        for (o, x) in acc.iter_mut().zip(a) {
            *o += s * x;
        }
    }

    /// Evaluate `sum_n coeffs[n] * (x - x(0))^n` by Horner's rule.
    pub fn compose(&self, coeffs: &[Complex64], x: &[Complex64]) -> Jet {
        let mut dx = x.to_vec();
        dx[0] = Complex64::new(0.0, 0.0);
        let top = coeffs.len().min(self.degree as usize + 1);
        let mut acc = self.zero();
        for n in (0..top).rev() {
            acc = self.mul(&acc, &dx);
            acc[0] += coeffs[n];
        }
        acc
    }

    pub fn exp(&self, x: &[Complex64]) -> Jet {
        let d = self.degree as usize;
        let e0 = x[0].exp();
        let mut c = Vec::with_capacity(d + 1);
        let mut f = 1.0;
        for n in 0..=d {
            if n > 0 {
                f *= n as f64;
            }
            c.push(e0 / f);
        }
        self.compose(&c, x)
    }

    pub fn recip(&self, x: &[Complex64]) -> Jet {
        let d = self.degree as usize;
        let inv = 1.0 / x[0];
        let mut c = Vec::with_capacity(d + 1);
        let mut p = inv;
        for _ in 0..=d {
            c.push(p);
            p *= -inv;
        }
        self.compose(&c, x)
    }

    /// `x^p` for integer `p` (negative powers through the reciprocal).
    pub fn powi(&self, x: &[Complex64], p: i32) -> Jet {
        let base = if p < 0 { self.recip(x) } else { x.to_vec() };
        let mut e = p.unsigned_abs();
        let mut result = self.constant(Complex64::new(1.0, 0.0));
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(&result, &b);
            }
            e >>= 1;
            if e > 0 {
                b = self.mul(&b, &b);
            }
        }
        result
    }

    pub fn cos(&self, x: &[Complex64]) -> Jet {
        let (s0, c0) = (x[0].sin(), x[0].cos());
        let d = self.degree as usize;
        let mut c = Vec::with_capacity(d + 1);
        let mut f = 1.0;
        for n in 0..=d {
            if n > 0 {
                f *= n as f64;
            }
            let v = match n % 4 {
                0 => c0,
                1 => -s0,
                2 => -c0,
                _ => s0,
            };
            c.push(v / f);
        }
        self.compose(&c, x)
    }

    pub fn sin(&self, x: &[Complex64]) -> Jet {
        let (s0, c0) = (x[0].sin(), x[0].cos());
        let d = self.degree as usize;
        let mut c = Vec::with_capacity(d + 1);
        let mut f = 1.0;
        for n in 0..=d {
            if n > 0 {
                f *= n as f64;
            }
            let v = match n % 4 {
                0 => s0,
                1 => c0,
                2 => -s0,
                _ => -c0,
            };
            c.push(v / f);
        }
        self.compose(&c, x)
    }

    /// Partial derivative `d^e f(0)` read off a jet: coefficient times `e!`.
    pub fn derivative(&self, jet: &[Complex64], e: &[u32]) -> Option<Complex64> {
        let i = self.index_of(e)?;
        let f: f64 = e.iter().map(|&k| factorial(k)).product();
        Some(jet[i] * f)
    }

    /// Evaluate the polynomial at a point.
    pub fn eval(&self, jet: &[Complex64], at: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, c) in jet.iter().enumerate() {
            let mut m = *c;
            for (v, &e) in self.exponents(i).iter().enumerate() {
                m *= at[v].powu(e as u32);
            }
            acc += m;
        }
        acc
    }
}

fn enumerate(caps: &[u32], remaining: u32, pos: usize, cur: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if pos == caps.len() - 1 {
        if remaining <= caps[pos] {
            cur[pos] = remaining;
            f(cur);
        }
        return;
    }
    // highest power of the earliest variable first
    let top = remaining.min(caps[pos]);
    for e in (0..=top).rev() {
        cur[pos] = e;
        enumerate(caps, remaining - e, pos + 1, cur, f);
    }
    cur[pos] = 0;
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}
