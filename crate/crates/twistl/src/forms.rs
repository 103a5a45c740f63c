//! Level-one cusp forms: Fourier expansions, the lift to SL(2, R), and
//! ordered Lie derivatives of the lift.
//!
//! Derivatives are computed exactly (up to Fourier truncation) by jet
//! arithmetic. For `w = exp(s_1 X_1) ... exp(s_r X_r)` a product of
//! one-parameter flows,
//!
//! ```text
//! F(g w) = j(w, i)^{-k} * Phi_g(w . i),   Phi_g(z) = j(g, z)^{-k} f(g . z)
//! ```
//!
//! so the multivariate Taylor expansion of `s -> F(g w(s))` is a fixed
//! linear combination of the "frame" jets `j(w,i)^{-k} (w.i - i)^n`, with
//! coefficients given by the one-variable Taylor series of `Phi_g` at `i`.
//! The frame depends only on the flows and the weight and is cached. Even
//! Maass forms are not holomorphic, so their expansion uses the two
//! variables `w.i` and `w.(-i)`.
//!
//! A finite-difference route ([`lift_derivative_fd`]) is kept as an
//! independent check.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::counter::EvalCounter;
use crate::error::{Error, Result};
use crate::jet::{factorial, Jet, JetSpace};
use crate::sl2::{reduce, GroupElement};
use crate::special::bessel_k_ir_derivatives;

/// Largest total derivative order `|beta| + l` supported.
pub const MAX_ORDER: u32 = 12;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c64(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `e(x) = exp(2 pi i x)`.
pub fn e(x: Complex64) -> Complex64 {
    (x * (2.0 * PI) * I).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormKind {
    Holomorphic { weight: u32 },
    MaassEven { r: f64 },
}

/// A level-one cusp form given by its Fourier coefficients `f^(n)`, `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspForm {
    kind: FormKind,
    /// `coefficients[n - 1] = f^(n)`
    coefficients: Vec<Complex64>,
    growth_exponent: f64,
    growth_constant: f64,
    derivative_bound: f64,
}

impl CuspForm {
    pub fn holomorphic(weight: u32, coefficients: Vec<Complex64>) -> Result<Self> {
        if weight < 12 || weight % 2 != 0 {
            return Err(Error::Domain(format!("holomorphic level-one cusp forms need even weight >= 12, got {weight}")));
        }
        Self::build(FormKind::Holomorphic { weight }, coefficients, (weight as f64 - 1.0) / 2.0 + 0.5)
    }

    pub fn maass_even(r: f64, coefficients: Vec<Complex64>) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::MissingSpectralParameter);
        }
        Self::build(FormKind::MaassEven { r }, coefficients, 0.5)
    }

    fn build(kind: FormKind, coefficients: Vec<Complex64>, growth_exponent: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Parse { line: 0, msg: "no Fourier coefficients".into() });
        }
        let growth_constant = coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm() / ((i + 1) as f64).powf(growth_exponent))
            .fold(0.0f64, f64::max)
            .max(1e-300);
        Ok(CuspForm { kind, coefficients, growth_exponent, growth_constant, derivative_bound: 2.0 * PI })
    }

    /// Ramanujan's Delta, the weight 12 cusp form.
    pub fn delta(coefficient_count: usize) -> Self {
        let c = delta_coefficients(coefficient_count).into_iter().map(|t| c64(t as f64)).collect();
        CuspForm::holomorphic(12, c).expect("Delta is a valid weight 12 form")
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn weight(&self) -> u32 {
        match self.kind {
            FormKind::Holomorphic { weight } => weight,
            FormKind::MaassEven { .. } => 0,
        }
    }

    pub fn spectral_parameter(&self) -> Option<f64> {
        match self.kind {
            FormKind::MaassEven { r } => Some(r),
            _ => None,
        }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficient(&self, n: usize) -> Complex64 {
        self.coefficients[n - 1]
    }

    pub fn coefficient_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    pub fn with_derivative_bound(mut self, r: f64) -> Self {
        self.derivative_bound = r;
        self
    }

    /// Number of Fourier terms needed at height `y` for an absolute error
    /// below `tol` in Taylor data of degree `order`.
    pub fn terms_needed(&self, y: f64, order: u32, tol: f64) -> Result<usize> {
        let lam = 2.0 * PI * y;
        let alpha = self.growth_exponent;
        let bound = |n: f64| {
            let x = lam * n;
            self.growth_constant * n.powf(alpha) * (1.0 + x).powi(order as i32) * (-x).exp()
        };
        let mut n = 1usize;
        loop {
            let nf = n as f64;
            // past the maximum of n^alpha (1 + x)^order e^{-x}, and small
            if lam * nf > alpha + order as f64 + 1.0 && bound(nf) < tol * 1e-2 * (1.0 - (-lam).exp()) {
                let needed = n - 1;
                if needed > self.coefficients.len() {
                    return Err(Error::InsufficientCoefficients { needed, available: self.coefficients.len() });
                }
                return Ok(needed);
            }
            n += 1;
            if n > 50_000_000 {
                return Err(Error::InsufficientCoefficients { needed: n, available: self.coefficients.len() });
            }
        }
    }
}

/// Ramanujan tau(n) for `1 <= n <= n_max`, from `x prod (1 - x^m)^24`.
pub fn delta_coefficients(n_max: usize) -> Vec<i128> {
    if n_max == 0 {
        return Vec::new();
    }
    let len = n_max; // coefficients of x^0 .. x^{n_max - 1} of prod (1 - x^m)^24
    let mut euler = vec![0i128; len];
    // pentagonal number theorem
    let mut k: i64 = 0;
    loop {
        let mut any = false;
        for kk in if k == 0 { vec![0] } else { vec![k, -k] } {
            let p = kk * (3 * kk - 1) / 2;
            if (p as usize) < len {
                euler[p as usize] += if kk.rem_euclid(2) == 0 { 1 } else { -1 };
                any = true;
            }
        }
        if !any && k > 0 {
            break;
        }
        k += 1;
    }
    let mul = |a: &[i128], b: &[i128]| -> Vec<i128> {
        let mut out = vec![0i128; len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b[..len - i].iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    let e2 = mul(&euler, &euler);
    let e4 = mul(&e2, &e2);
    let e8 = mul(&e4, &e4);
    let e16 = mul(&e8, &e8);
    mul(&e16, &e8)
}

/// Knobs for Fourier truncation and the finite-difference route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub target_abs_error: f64,
    pub max_terms: usize,
    /// Spacing of the finite-difference stencils.
    pub fd_step: f64,
    /// Move points into the fundamental domain before evaluating. Only valid
    /// for genuinely automorphic input.
    pub reduce: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { target_abs_error: 1e-15, max_terms: 1_000_000, fd_step: 2e-3, reduce: true }
    }
}

impl EvalConfig {
    pub fn unreduced(self) -> Self {
        EvalConfig { reduce: false, ..self }
    }

    fn check(&self) -> Result<()> {
        if !(self.target_abs_error >= 1e-16) {
            return Err(Error::Domain("target_abs_error must be at least 1e-16".into()));
        }
        Ok(())
    }
}

fn term_count(form: &CuspForm, y: f64, order: u32, cfg: &EvalConfig) -> Result<usize> {
    let n = form.terms_needed(y, order, cfg.target_abs_error)?;
    if n > cfg.max_terms {
        return Err(Error::InsufficientCoefficients { needed: n, available: cfg.max_terms });
    }
    Ok(n)
}

/// Evaluate the truncated Fourier expansion at `z` in the upper half-plane.
pub fn eval_point(form: &CuspForm, z: Complex64, cfg: &EvalConfig) -> Result<Complex64> {
    cfg.check()?;
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("point {z} is not in the upper half-plane")));
    }
    if 2.0 * PI * z.im > 745.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let n = term_count(form, z.im, 0, cfg)?;
    match form.kind {
        FormKind::Holomorphic { .. } => {
            let q = e(z);
            let mut qn = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 1..=n {
                qn *= q;
                acc += form.coefficients[k - 1] * qn;
            }
            Ok(acc)
        }
        FormKind::MaassEven { r } => {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 1..=n {
                let kf = k as f64;
                let kv = bessel_k_ir_derivatives(r, 2.0 * PI * kf * z.im, 0)?[0];
                let w = 2.0 * z.im.sqrt() * kv * (2.0 * PI * kf * z.re).cos();
                acc += form.coefficients[k - 1] * w;
            }
            Ok(acc)
        }
    }
}

/// `x` if reduction is disabled, otherwise the reduced representative.
fn base_point(g: &GroupElement, cfg: &EvalConfig) -> Result<GroupElement> {
    if cfg.reduce {
        Ok(reduce(g)?.x)
    } else {
        crate::sl2::iwasawa_decompose(g)?;
        Ok(*g)
    }
}

/// The lift `F(g) = (ci + d)^{-k} f(g . i)`.
pub fn lift_eval(form: &CuspForm, g: &GroupElement, cfg: &EvalConfig) -> Result<Complex64> {
    let x = base_point(g, cfg)?;
    let z = x.point();
    let val = eval_point(form, z, cfg)?;
    let k = form.weight() as i32;
    Ok(x.j(I).powi(-k) * val)
}

/// One-parameter subgroups generating the Lie derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flow {
    /// `n(s)`: the first derivative direction
    Horocycle,
    /// `a(s)`: the second (geodesic) direction
    Geodesic,
    /// `K(s)`: the third (rotation) direction
    Rotation,
}

impl Flow {
    pub fn matrix(self, s: f64) -> GroupElement {
        match self {
            Flow::Horocycle => GroupElement::n(s),
            Flow::Geodesic => GroupElement::a(s),
            Flow::Rotation => GroupElement::k(s),
        }
    }
}

/// Variables of a multivariate expansion `s -> F(g exp(s_1 X_1) ... )`,
/// each with its own degree cap, plus a total-degree bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameSpec {
    pub flows: Vec<(Flow, u32)>,
    pub degree: u32,
}

impl FrameSpec {
    /// `(t, v, theta, u)` for `F(g n(t) a(v) K(theta) a(u))`: all `|beta| <= d`
    /// and geodesic orders `l <= l_max`.
    pub fn taylor(d: u32, l_max: u32) -> Self {
        FrameSpec {
            flows: vec![(Flow::Horocycle, d), (Flow::Geodesic, d), (Flow::Rotation, d), (Flow::Geodesic, l_max)],
            degree: d + l_max,
        }
    }

    /// `u` for `F(g a(u))`.
    pub fn geodesic(l_max: u32) -> Self {
        FrameSpec { flows: vec![(Flow::Geodesic, l_max)], degree: l_max }
    }

    /// Append one innermost horocycle derivative.
    pub fn with_horocycle_tail(mut self) -> Self {
        self.flows.push((Flow::Horocycle, 1));
        self.degree += 1;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.degree > MAX_ORDER + 1 {
            return Err(Error::OrderTooHigh(self.degree));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Flavor {
    Holomorphic(u32),
    Maass,
}

/// Precomputed frame jets for one [`FrameSpec`] and form flavour.
#[derive(Debug)]
pub struct LiftFrame {
    spec: FrameSpec,
    space: JetSpace,
    /// univariate (holomorphic) or bivariate (Maass) point-series space
    point_space: JetSpace,
    basis: Vec<Jet>,
}

fn frame_cache() -> &'static Mutex<HashMap<(FrameSpec, Flavor), Arc<LiftFrame>>> {
    static CACHE: OnceLock<Mutex<HashMap<(FrameSpec, Flavor), Arc<LiftFrame>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn flavor(form: &CuspForm) -> Flavor {
    match form.kind {
        FormKind::Holomorphic { weight } => Flavor::Holomorphic(weight),
        FormKind::MaassEven { .. } => Flavor::Maass,
    }
}

fn frame_for(spec: &FrameSpec, fl: Flavor) -> Arc<LiftFrame> {
    let key = (spec.clone(), fl);
    if let Some(f) = frame_cache().lock().unwrap().get(&key) {
        return f.clone();
    }
    // built outside the lock; a concurrent duplicate build is harmless
    let frame = Arc::new(build_frame(spec, fl));
    frame_cache().lock().unwrap().entry(key).or_insert(frame).clone()
}

type JetMatrix = [[Jet; 2]; 2];

fn jet_matmul(s: &JetSpace, x: &JetMatrix, y: &JetMatrix) -> JetMatrix {
    let entry = |i: usize, j: usize| s.add(&s.mul(&x[i][0], &y[0][j]), &s.mul(&x[i][1], &y[1][j]));
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

fn build_frame(spec: &FrameSpec, fl: Flavor) -> LiftFrame {
    let caps: Vec<u32> = spec.flows.iter().map(|&(_, c)| c).collect();
    let space = JetSpace::new(spec.degree, &caps);
    let d = spec.degree;
    let one = space.constant(c64(1.0));
    let zero = space.zero();
    let mut w: JetMatrix = [[one.clone(), zero.clone()], [zero.clone(), one.clone()]];
    for (var, &(flow, _)) in spec.flows.iter().enumerate() {
        let s = space.variable(var, c64(0.0));
        let factor: JetMatrix = match flow {
            Flow::Horocycle => [[one.clone(), s], [zero.clone(), one.clone()]],
            Flow::Geodesic => {
                let half = space.scale(&s, c64(0.5));
                let ep = space.exp(&half);
                let em = space.exp(&space.scale(&half, c64(-1.0)));
                [[ep, zero.clone()], [zero.clone(), em]]
            }
            Flow::Rotation => {
                let (c, sn) = (space.cos(&s), space.sin(&s));
                let msn = space.scale(&sn, c64(-1.0));
                [[c.clone(), sn], [msn, c]]
            }
        };
        w = jet_matmul(&space, &w, &factor);
    }
    let image = |z: Complex64| {
        let num = space.add(&space.scale(&w[0][0], z), &w[0][1]);
        let den = space.add(&space.scale(&w[1][0], z), &w[1][1]);
        (space.mul(&num, &space.recip(&den)), den)
    };
    let (zeta, j_w) = image(I);
    let mut dz = zeta;
    dz[0] -= I;
    match fl {
        Flavor::Holomorphic(k) => {
            let mut p = space.powi(&j_w, -(k as i32));
            let mut basis = Vec::with_capacity(d as usize + 1);
            for _ in 0..=d {
                basis.push(p.clone());
                p = space.mul(&p, &dz);
            }
            LiftFrame { spec: spec.clone(), space, point_space: JetSpace::new(d, &[d]), basis }
        }
        Flavor::Maass => {
            let (xi, _) = image(-I);
            let mut dxi = xi;
            dxi[0] += I;
            let point_space = JetSpace::new(d, &[d, d]);
            let mut zpow = vec![space.constant(c64(1.0))];
            let mut xpow = vec![space.constant(c64(1.0))];
            for n in 1..=d as usize {
                zpow.push(space.mul(&zpow[n - 1], &dz));
                xpow.push(space.mul(&xpow[n - 1], &dxi));
            }
            let basis = (0..point_space.len())
                .map(|idx| {
                    let ex = point_space.exponents(idx);
                    space.mul(&zpow[ex[0] as usize], &xpow[ex[1] as usize])
                })
                .collect();
            LiftFrame { spec: spec.clone(), space, point_space, basis }
        }
    }
}

/// Taylor data of `s -> F(x exp(s_1 X_1) ...)` at one point.
#[derive(Debug, Clone)]
pub struct LiftJet {
    frame: Arc<LiftFrame>,
    coeffs: Jet,
}

impl LiftJet {
    /// Mixed partial `d^e/ds^e` at `s = 0`, i.e. the ordered Lie derivative
    /// with the first flow outermost.
    pub fn derivative(&self, e: &[u32]) -> Result<Complex64> {
        self.frame
            .space
            .derivative(&self.coeffs, e)
            .ok_or_else(|| Error::MissingOrder(e.iter().sum()))
    }

    /// Raw Taylor coefficient (derivative divided by `e!`).
    pub fn coefficient(&self, e: &[u32]) -> Option<Complex64> {
        self.frame.space.index_of(e).map(|i| self.coeffs[i])
    }

    pub fn space(&self) -> &JetSpace {
        &self.frame.space
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.frame.spec
    }
}

/// Jet of the lift at `g` for the given flows.
pub fn lift_jet(form: &CuspForm, g: &GroupElement, spec: &FrameSpec, cfg: &EvalConfig) -> Result<LiftJet> {
    spec.check()?;
    cfg.check()?;
    let x = base_point(g, cfg)?;
    let frame = frame_for(spec, flavor(form));
    let series = match form.kind {
        FormKind::Holomorphic { weight } => holomorphic_series(form, weight, &x, &frame.point_space, cfg)?,
        FormKind::MaassEven { r } => maass_series(form, r, &x, &frame.point_space, cfg)?,
    };
    let mut coeffs = frame.space.zero();
    for (c, b) in series.iter().zip(&frame.basis) {
        if *c != Complex64::new(0.0, 0.0) {
            frame.space.axpy(&mut coeffs, *c, b);
        }
    }
    Ok(LiftJet { frame, coeffs })
}

/// Same as [`lift_jet`], recording one lift evaluation.
pub fn lift_jet_counted(
    form: &CuspForm,
    g: &GroupElement,
    spec: &FrameSpec,
    cfg: &EvalConfig,
    counter: &EvalCounter,
) -> Result<LiftJet> {
    counter.add_lift(1);
    lift_jet(form, g, spec, cfg)
}

/// Taylor series of `Phi_x(i + delta) = j(x, i+delta)^{-k} f(x . (i+delta))`.
fn holomorphic_series(form: &CuspForm, k: u32, x: &GroupElement, s1: &JetSpace, cfg: &EvalConfig) -> Result<Jet> {
    let zeta = s1.variable(0, I);
    let num = s1.add(&s1.scale(&zeta, c64(x.a)), &s1.constant(c64(x.b)));
    let den = s1.add(&s1.scale(&zeta, c64(x.c)), &s1.constant(c64(x.d)));
    let z = s1.mul(&num, &s1.recip(&den));
    let z0 = z[0];
    if 2.0 * PI * z0.im > 745.0 {
        return Ok(s1.zero());
    }
    let n = term_count(form, z0.im, s1.degree(), cfg)?;
    if n == 0 {
        return Ok(s1.zero());
    }
    let mut dz = z.clone();
    dz[0] = Complex64::new(0.0, 0.0);
    let u = s1.exp(&s1.scale(&dz, I * (2.0 * PI)));
    let q0 = e(z0);
    let mut a = Vec::with_capacity(n);
    let mut qn = Complex64::new(1.0, 0.0);
    for m in 1..=n {
        qn *= q0;
        a.push(form.coefficients[m - 1] * qn);
    }
    // sum_{m=1}^n a_m U^m by Horner
    let mut acc = s1.constant(a[n - 1]);
    for m in (1..n).rev() {
        acc = s1.mul(&acc, &u);
        acc[0] += a[m - 1];
    }
    acc = s1.mul(&acc, &u);
    let jk = s1.powi(&den, -(k as i32));
    Ok(s1.mul(&jk, &acc))
}

/// Generalised binomial coefficients of `(1 + x)^p`.
fn binomial_series(p: f64, n: usize) -> Vec<f64> {
    let mut c = vec![1.0; n + 1];
    for m in 1..=n {
        c[m] = c[m - 1] * (p - (m as f64 - 1.0)) / m as f64;
    }
    c
}

/// Bivariate series of `F` in `(delta_1, delta_2) = (zeta - i, xi + i)`.
fn maass_series(form: &CuspForm, r: f64, x: &GroupElement, s2: &JetSpace, cfg: &EvalConfig) -> Result<Jet> {
    let d = s2.degree() as usize;
    let z0 = x.point();
    let (x0, y0) = (z0.re, z0.im);
    if 2.0 * PI * y0 > 745.0 {
        return Ok(s2.zero());
    }
    let n = term_count(form, y0, s2.degree(), cfg)?;
    // psi(p, q) = sum_n f(n) 2 sqrt(y0+q) K_ir(2 pi n (y0+q)) cos(2 pi n (x0+p))
    let sqrt_c = binomial_series(0.5, d);
    let mut psi = s2.zero();
    let p_var = s2.variable(0, c64(0.0));
    let q_var = s2.variable(1, c64(0.0));
    let _ = (&p_var, &q_var);
    for m in 1..=n {
        let mf = m as f64;
        let lam = 2.0 * PI * mf;
        let kd = bessel_k_ir_derivatives(r, lam * y0, d)?;
        // B(q) = 2 sqrt(y0) (1 + q/y0)^{1/2} * sum_j lam^j K^(j) q^j / j!
        let mut kser = vec![0.0; d + 1];
        let mut lp = 1.0;
        for j in 0..=d {
            kser[j] = lp * kd[j] / factorial(j as u32);
            lp *= lam;
        }
        let pref = 2.0 * y0.sqrt();
        let mut b = vec![0.0; d + 1];
        for i in 0..=d {
            let si = sqrt_c[i] / y0.powi(i as i32);
            for j in 0..=(d - i) {
                b[i + j] += pref * si * kser[j];
            }
        }
        // A(p) = cos(lam (x0 + p))
        let (s, c) = (lam * x0).sin_cos();
        let mut a = vec![0.0; d + 1];
        let mut lp = 1.0;
        for i in 0..=d {
            let v = match i % 4 {
                0 => c,
                1 => -s,
                2 => -c,
                _ => s,
            };
            a[i] = v * lp / factorial(i as u32);
            lp *= lam;
        }
        let fm = form.coefficients[m - 1];
        for idx in 0..s2.len() {
            let ex = s2.exponents(idx);
            psi[idx] += fm * (a[ex[0] as usize] * b[ex[1] as usize]);
        }
    }
    // p = (Zs + Ws) / 2, q = (Zs - Ws) / (2i), Z = x.(i + d1), W = x.(-i + d2)
    let t1 = s2.variable(0, I);
    let t2 = s2.variable(1, -I);
    let mobius = |t: &Jet| {
        let num = s2.add(&s2.scale(t, c64(x.a)), &s2.constant(c64(x.b)));
        let den = s2.add(&s2.scale(t, c64(x.c)), &s2.constant(c64(x.d)));
        s2.mul(&num, &s2.recip(&den))
    };
    let mut zs = mobius(&t1);
    zs[0] = Complex64::new(0.0, 0.0);
    let mut ws = mobius(&t2);
    ws[0] = Complex64::new(0.0, 0.0);
    let p = s2.scale(&s2.add(&zs, &ws), c64(0.5));
    let q = s2.scale(&s2.add(&zs, &s2.scale(&ws, c64(-1.0))), Complex64::new(0.0, -0.5));
    let mut ppow = vec![s2.constant(c64(1.0))];
    let mut qpow = vec![s2.constant(c64(1.0))];
    for i in 1..=d {
        ppow.push(s2.mul(&ppow[i - 1], &p));
        qpow.push(s2.mul(&qpow[i - 1], &q));
    }
    let mut out = s2.zero();
    for idx in 0..s2.len() {
        if psi[idx] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let ex = s2.exponents(idx);
        let term = s2.mul(&ppow[ex[0] as usize], &qpow[ex[1] as usize]);
        s2.axpy(&mut out, psi[idx], &term);
    }
    Ok(out)
}

/// Exponents `(beta_1, beta_2, beta_3)` of an ordered derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub u32, pub u32, pub u32);

impl MultiIndex {
    pub fn order(&self) -> u32 {
        self.0 + self.1 + self.2
    }

    pub fn factorial(&self) -> f64 {
        factorial(self.0) * factorial(self.1) * factorial(self.2)
    }

    /// All multi-indices with `|beta| <= d`, graded then lexicographic.
    pub fn up_to(d: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for deg in 0..=d {
            for b1 in (0..=deg).rev() {
                for b2 in (0..=deg - b1).rev() {
                    out.push(MultiIndex(b1, b2, deg - b1 - b2));
                }
            }
        }
        out
    }
}

/// `d_1^{b1} d_2^{b2} d_3^{b3} d_2^l F(g)`.
pub fn lift_derivative(form: &CuspForm, g: &GroupElement, beta: MultiIndex, l: u32, cfg: &EvalConfig) -> Result<Complex64> {
    let order = beta.order() + l;
    if order > MAX_ORDER {
        return Err(Error::OrderTooHigh(order));
    }
    let jet = lift_jet(form, g, &FrameSpec::taylor(beta.order(), l), cfg)?;
    jet.derivative(&[beta.0, beta.1, beta.2, l])
}

/// Central-difference weights for the `m`-th derivative on the grid
/// `-p..=p` (Fornberg's recursion).
pub fn central_weights(m: usize, p: usize) -> Vec<f64> {
    let xs: Vec<f64> = (-(p as i64)..=p as i64).map(|i| i as f64).collect();
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i];
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Finite-difference estimate of the same derivative as [`lift_derivative`],
/// from tensor-product central stencils on the flow
/// `s -> F(g n(s_1) a(s_2) K(s_3) a(s_4))`.
pub fn lift_derivative_fd(form: &CuspForm, g: &GroupElement, beta: MultiIndex, l: u32, cfg: &EvalConfig) -> Result<Complex64> {
    let orders = [beta.0, beta.1, beta.2, l];
    let flows = [Flow::Horocycle, Flow::Geodesic, Flow::Rotation, Flow::Geodesic];
    let h = cfg.fd_step;
    let stencils: Vec<Vec<(i64, f64)>> = orders
        .iter()
        .map(|&m| {
            if m == 0 {
                vec![(0, 1.0)]
            } else {
                let p = m as usize / 2 + 3;
                central_weights(m as usize, p)
                    .into_iter()
                    .enumerate()
                    .map(|(i, w)| (i as i64 - p as i64, w / h.powi(m as i32)))
                    .filter(|&(_, w)| w != 0.0)
                    .collect()
            }
        })
        .collect();
    let mut acc = crate::sum::CompensatedSum::new();
    let mut idx = [0usize; 4];
    loop {
        let mut weight = 1.0;
        let mut pt = *g;
        for v in 0..4 {
            let (off, w) = stencils[v][idx[v]];
            weight *= w;
            pt = pt.mul(&flows[v].matrix(off as f64 * h));
        }
        acc.add(lift_eval(form, &pt, cfg)? * weight);
        let mut v = 0;
        loop {
            idx[v] += 1;
            if idx[v] < stencils[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
            if v == 4 {
                return Ok(acc.value());
            }
        }
    }
}

/// Sample first derivatives over the fundamental domain and return the
/// largest magnitude relative to the largest value (at least 1).
pub fn estimate_derivative_bound(form: &CuspForm, samples: usize, cfg: &EvalConfig) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut max_val = 0.0f64;
    let mut max_der = 0.0f64;
    for _ in 0..samples {
        let t = rng.gen_range(-0.5..0.5);
        let y: f64 = rng.gen_range(0.87..3.0);
        let g = GroupElement::n(t).mul(&GroupElement::a(y.ln()));
        let jet = lift_jet(form, &g, &FrameSpec::taylor(1, 0), cfg)?;
        max_val = max_val.max(jet.derivative(&[0, 0, 0, 0])?.norm());
        for e in [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]] {
            max_der = max_der.max(jet.derivative(&e)?.norm());
        }
    }
    Ok((max_der / max_val.max(1e-300)).max(1.0))
}

/// Read a Maass coefficient file.
///
/// ```text
/// maass-even
/// r 9.533695
/// 1 1.0
/// 2 -1.0683 0.0
/// ```
pub fn parse_maass(text: &str) -> Result<CuspForm> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    if header != "maass-even" {
        return Err(Error::Parse { line: ln, msg: format!("expected header 'maass-even', found '{header}'") });
    }
    let (ln, rline) = lines.next().ok_or(Error::MissingSpectralParameter)?;
    let mut parts = rline.split_whitespace();
    if parts.next() != Some("r") {
        return Err(Error::MissingSpectralParameter);
    }
    let r: f64 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(Error::Parse { line: ln, msg: "bad spectral parameter".into() })?;
    let mut coeffs = Vec::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 2 || f.len() > 3 {
            return Err(Error::Parse { line: ln, msg: "expected '<n> <re> [<im>]'".into() });
        }
        let bad = || Error::Parse { line: ln, msg: format!("malformed coefficient line '{line}'") };
        let n: usize = f[0].parse().map_err(|_| bad())?;
        if n != coeffs.len() + 1 {
            return Err(Error::Parse { line: ln, msg: format!("expected index {}, found {n}", coeffs.len() + 1) });
        }
        let re: f64 = f[1].parse().map_err(|_| bad())?;
        let im: f64 = if f.len() == 3 { f[2].parse().map_err(|_| bad())? } else { 0.0 };
        coeffs.push(Complex64::new(re, im));
    }
    if coeffs.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no coefficient lines".into() });
    }
    CuspForm::maass_even(r, coeffs)
}

pub fn load_maass(path: &Path) -> Result<CuspForm> {
    parse_maass(&std::fs::read_to_string(path)?)
}

/// Serialise a Maass form in the format read by [`parse_maass`].
pub fn format_maass(form: &CuspForm) -> Result<String> {
    let r = form.spectral_parameter().ok_or(Error::MissingSpectralParameter)?;
    let mut s = String::from("maass-even\n");
    writeln!(s, "r {r:?}").unwrap();
    for (i, c) in form.coefficients.iter().enumerate() {
        writeln!(s, "{} {:?} {:?}", i + 1, c.re, c.im).unwrap();
    }
    Ok(s)
}

pub fn write_maass(form: &CuspForm, path: &Path) -> Result<()> {
    std::fs::write(path, format_maass(form)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EvalConfig {
        EvalConfig::default()
    }

    #[test]
    fn tau_values() {
        let t = delta_coefficients(12);
        assert_eq!(t, vec![1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920, 534612, -370944]);
        let big = delta_coefficients(2000);
        // multiplicativity and the Hecke relation at p = 2
        assert_eq!(big[6 * 35 - 1], big[5] * big[34]);
        assert_eq!(big[7] , big[1] * big[3] - (1i128 << 11) * big[1]);
        for p in [3usize, 5, 7, 11, 13, 997] {
            let bound = 2.0 * (p as f64).powf(5.5);
            assert!((big[p - 1] as f64).abs() <= bound);
        }
    }

    #[test]
    fn delta_is_modular() {
        let f = CuspForm::delta(400);
        let c = cfg();
        let z = Complex64::new(0.3, 0.8);
        let v = eval_point(&f, z, &c).unwrap();
        let v1 = eval_point(&f, z + 1.0, &c).unwrap();
        assert!((v - v1).norm() < 1e-13);
        let w = eval_point(&f, -1.0 / z, &c).unwrap();
        let expect = z.powi(12) * v;
        assert!((w - expect).norm() < 1e-12 * expect.norm().max(1e-3), "{w} {expect}");
    }

    #[test]
    fn lift_is_left_invariant_and_k_equivariant() {
        let f = CuspForm::delta(800);
        let c = cfg().unreduced();
        let g = GroupElement::n(0.21).mul(&GroupElement::a(0.4)).mul(&GroupElement::k(0.3));
        let base = lift_eval(&f, &g, &c).unwrap();
        let gamma = GroupElement::new(2.0, 1.0, 1.0, 1.0);
        let moved = lift_eval(&f, &gamma.mul(&g), &c).unwrap();
        assert!((base - moved).norm() < 1e-11, "{base} {moved}");
        let th = 0.77;
        let rot = lift_eval(&f, &g.mul(&GroupElement::k(th)), &c).unwrap();
        let expect = Complex64::new(0.0, 12.0 * th).exp() * base;
        assert!((rot - expect).norm() < 1e-12);
        // reduced and unreduced agree
        let red = lift_eval(&f, &gamma.mul(&g), &cfg()).unwrap();
        assert!((red - base).norm() < 1e-12);
    }

    #[test]
    fn rotation_derivative_is_weight_times_value() {
        let f = CuspForm::delta(400);
        let g = GroupElement::n(-0.1).mul(&GroupElement::a(0.2));
        let jet = lift_jet(&f, &g, &FrameSpec::taylor(3, 0), &cfg()).unwrap();
        let v = jet.derivative(&[0, 0, 0, 0]).unwrap();
        for m in 1..=3u32 {
            let d = jet.derivative(&[0, 0, m, 0]).unwrap();
            let expect = Complex64::new(0.0, 12.0).powu(m) * v;
            assert!((d - expect).norm() < 1e-10 * expect.norm().max(1e-6), "{m}: {d} {expect}");
        }
    }

    #[test]
    fn holomorphy_relation() {
        // d_2 F = i d_1 F + (k/2) F
        let f = CuspForm::delta(400);
        let g = GroupElement::n(0.33).mul(&GroupElement::a(-0.1)).mul(&GroupElement::k(1.0));
        let jet = lift_jet(&f, &g, &FrameSpec::taylor(1, 0), &cfg()).unwrap();
        let v = jet.derivative(&[0, 0, 0, 0]).unwrap();
        let d1 = jet.derivative(&[1, 0, 0, 0]).unwrap();
        let d2 = jet.derivative(&[0, 1, 0, 0]).unwrap();
        assert!((d2 - (I * d1 + 6.0 * v)).norm() < 1e-11);
    }

    #[test]
    fn taylor_series_reproduces_nearby_values() {
        let f = CuspForm::delta(600);
        let c = cfg();
        let g = GroupElement::n(0.05).mul(&GroupElement::a(0.3));
        let jet = lift_jet(&f, &g, &FrameSpec::taylor(10, 0), &c).unwrap();
        let (t, v, th) = (0.02, -0.015, 0.01);
        let approx = jet.space().eval(jet.coefficients(), &[c64(t), c64(v), c64(th), c64(0.0)]);
        let exact = lift_eval(&f, &g.mul(&GroupElement::n(t)).mul(&GroupElement::a(v)).mul(&GroupElement::k(th)), &c).unwrap();
        assert!((approx - exact).norm() < 1e-13, "{approx} {exact}");
    }

    #[test]
    fn jets_agree_with_finite_differences() {
        let f = CuspForm::delta(600);
        let c = EvalConfig { fd_step: 1e-3, ..cfg() };
        let g = GroupElement::n(0.12).mul(&GroupElement::a(0.25)).mul(&GroupElement::k(-0.4));
        for (beta, l) in [
            (MultiIndex(1, 0, 0), 0),
            (MultiIndex(0, 1, 0), 1),
            (MultiIndex(1, 1, 0), 1),
            (MultiIndex(0, 0, 1), 2),
            (MultiIndex(2, 1, 0), 0),
        ] {
            let exact = lift_derivative(&f, &g, beta, l, &c).unwrap();
            let fd = lift_derivative_fd(&f, &g, beta, l, &c).unwrap();
            assert!((exact - fd).norm() < 1e-6 * exact.norm().max(1e-3), "{beta:?} {l}: {exact} {fd}");
        }
    }

    #[test]
    fn order_cap() {
        let f = CuspForm::delta(100);
        let g = GroupElement::IDENTITY;
        assert!(matches!(
            lift_derivative(&f, &g, MultiIndex(5, 5, 0), 3, &cfg()),
            Err(Error::OrderTooHigh(13))
        ));
    }

    fn synthetic_maass() -> CuspForm {
        let c = (1..=30).map(|n| c64(((n as f64) * 0.7).sin() / n as f64)).collect();
        CuspForm::maass_even(4.3, c).unwrap()
    }

    #[test]
    fn maass_jets_agree_with_finite_differences() {
        let f = synthetic_maass();
        let c = EvalConfig { fd_step: 1e-3, ..cfg() }.unreduced();
        let g = GroupElement::n(0.12).mul(&GroupElement::a(-0.3)).mul(&GroupElement::k(0.5));
        for (beta, l) in [(MultiIndex(0, 0, 0), 0), (MultiIndex(1, 0, 0), 0), (MultiIndex(0, 1, 0), 1), (MultiIndex(1, 0, 1), 1)] {
            let exact = lift_derivative(&f, &g, beta, l, &c).unwrap();
            let fd = lift_derivative_fd(&f, &g, beta, l, &c).unwrap();
            assert!((exact - fd).norm() < 1e-6 * exact.norm().max(1e-2), "{beta:?} {l}: {exact} {fd}");
        }
        // weight zero: right K-invariant
        let jet = lift_jet(&f, &g, &FrameSpec::taylor(2, 0), &c).unwrap();
        assert!(jet.derivative(&[0, 0, 1, 0]).unwrap().norm() < 1e-12);
        assert!(jet.derivative(&[0, 0, 2, 0]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn even_maass_form_is_modular() {
        // first even level-one form, Hecke normalised
        let lambda = [
            1.0, 1.549304477941621, 0.246899772454171, 1.400344365368829, 0.737060385350620, 0.382522923065510,
            -0.261420075765366, 0.620255317984777, -0.939040502362217, 1.141930955533338, -0.953564652617865,
            0.345744705166890,
        ];
        let f = CuspForm::maass_even(13.779_751_351_890_738, lambda.iter().map(|&c| c64(c)).collect()).unwrap();
        let c = EvalConfig { target_abs_error: 1e-12, ..cfg() }.unreduced();
        for z in [Complex64::new(0.1, 0.9), Complex64::new(0.3, 0.97), Complex64::new(-0.2, 1.1)] {
            let v = eval_point(&f, z, &c).unwrap();
            let w = eval_point(&f, -1.0 / z, &c).unwrap();
            assert!((v - w).norm() < 1e-7 * v.norm(), "{z}: {v} {w}");
        }
    }

    #[test]
    fn maass_file_round_trip() {
        let f = synthetic_maass();
        let text = format_maass(&f).unwrap();
        let back = parse_maass(&text).unwrap();
        assert_eq!(f, back);
        assert!(matches!(parse_maass("maass-even\n1 1.0\n"), Err(Error::MissingSpectralParameter)));
        assert!(matches!(parse_maass("maass-even\nr 1\n1 x\n"), Err(Error::Parse { .. })));
        assert!(parse_maass("# c\nmaass-even\nr 2.5 # note\n1 1.0\n2 0.5 0.1\n").is_ok());
    }

    #[test]
    fn insufficient_coefficients_reported() {
        let f = CuspForm::delta(5);
        let r = eval_point(&f, Complex64::new(0.0, 0.05), &cfg());
        assert!(matches!(r, Err(Error::InsufficientCoefficients { .. })));
    }

    #[test]
    fn fornberg_weights() {
        let w = central_weights(2, 1);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14 && (w[2] - 1.0).abs() < 1e-14);
        let w = central_weights(1, 2);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
