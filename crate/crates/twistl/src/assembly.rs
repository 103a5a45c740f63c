//! Assembly of `L(s, f x chi)` from twisted orbit sums.
//!
//! Orthogonality gives, for primitive `psi`,
//!
//! ```text
//! sum_j psi(j) f(j/q + iy) = tau(psi) sum_n f^(n) conj(psi)(n) e(iny)
//! ```
//!
//! so the orbit sums are taken with `psi = conj(chi)` and the Gauss sum is
//! `tau(conj(chi))`. After `y = e^t` the Mellin integral becomes
//! `sum_j psi(j) int F(n(j/q) a(t)) e^{t(s - 1/2)} dt` over `|t| <= c log q`,
//! which is discretised on the grid `t_x = x q^{-eps}` by Taylor expansion
//! at the left end of each panel.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::counter::{CounterSnapshot, EvalCounter};
use crate::dirichlet::{auto_split, split_character, CharacterSplit, DirichletCharacter};
use crate::error::{Error, Result};
use crate::forms::{CuspForm, EvalConfig, FormKind};
use crate::jet::{binomial, factorial};
use crate::orbit_sum::{fast_orbit_sums, naive_orbit_sums, SumKind, SumOptions, SumRequest};
use crate::special::ln_gamma;
use crate::sum::CompensatedSum;

/// Which Mellin integral recovers the L-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ParityRoute {
    /// `sum psi(j) int f(j/q + iy) ...`
    Standard,
    /// `sum psi(j) int d_x f(j/q + iy) ...`, needed for even Maass forms
    /// twisted by odd characters
    DxVariant,
}

impl ParityRoute {
    pub fn sum_kind(self) -> SumKind {
        match self {
            ParityRoute::Standard => SumKind::Standard,
            ParityRoute::DxVariant => SumKind::Dx,
        }
    }
}

pub fn parity_route(form: &CuspForm, chi: &DirichletCharacter) -> ParityRoute {
    match form.kind() {
        FormKind::MaassEven { .. } if !chi.is_even() => ParityRoute::DxVariant,
        _ => ParityRoute::Standard,
    }
}

/// `1 + chi(-1)` for Maass forms, `1` for holomorphic ones.
pub fn standard_prefactor(form: &CuspForm, chi: &DirichletCharacter) -> f64 {
    match form.kind() {
        FormKind::Holomorphic { .. } => 1.0,
        FormKind::MaassEven { .. } => 1.0 + chi.parity() as f64,
    }
}

/// Smallest `c > 2` with `c q^eps log q` an integer.
pub fn choose_c(q: u64, eps: f64) -> f64 {
    choose_c_above(q, eps, 2.0)
}

/// Smallest `c > floor` with `c q^eps log q` an integer.
pub fn choose_c_above(q: u64, eps: f64, floor: f64) -> f64 {
    let a = (q as f64).powf(eps) * (q as f64).ln();
    ((floor * a).floor() + 1.0) / a
}

/// Truncation exponent needed before the lower tail of the Mellin integral
/// drops below `10^{-gamma-2}`.
///
/// Near `t = -c log q` the lift has the size of `F` at height `q^{c-2}`
/// (reflect `j/q` to the cusp), so `c` must exceed `2 + log(y*) / log q`
/// where `y^{k/2} e^{-2 pi y}` falls below the target at `y*`.
pub fn truncation_floor(form: &CuspForm, q: u64, gamma: f64) -> f64 {
    let alpha = match form.kind() {
        FormKind::Holomorphic { weight } => weight as f64 / 2.0,
        FormKind::MaassEven { .. } => 0.5,
    };
    let target = -(gamma + 2.0) * LN_10;
    let mut y: f64 = 1.0;
    while alpha * y.ln() - 2.0 * PI * y > target {
        y += 0.01;
    }
    let lq = (q as f64).ln();
    2.0 + y.ln() / lq
}

/// Accuracy goals and the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionConfig {
    pub gamma: f64,
    pub eps: f64,
    pub s: Complex64,
}

impl PrecisionConfig {
    pub fn new(s: Complex64, eps: f64, gamma: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 2.0) {
            return Err(Error::Domain(format!("eps must lie in (0, 2], got {eps}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
        }
        Ok(PrecisionConfig { gamma, eps, s })
    }

    /// `N' = min(12, ceil((1 + gamma) ln 10 / (eps ln q)))`, the Taylor
    /// order along the geodesic: `h^{N'} ~ 10^{-(1+gamma)}` for `h = q^{-eps}`.
    pub fn n_prime(&self, q: u64) -> u32 {
        let raw = ((1.0 + self.gamma) * LN_10 / (self.eps * (q as f64).ln().max(1e-9))).ceil();
        (raw.max(1.0) as u32).min(12)
    }
}

/// Where each panel's Taylor expansion is centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum Anchor {
    /// left end, weights `d_l`
    #[default]
    Left,
    /// midpoint; odd orders drop out and even ones get `2 (h/2)^{l+1} / (l+1)!`
    Midpoint,
}

/// Grid, weights and normalising constants.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AssemblyConstants {
    pub c: f64,
    /// grid indices `x` run over `-x_max..x_max`
    pub x_max: i64,
    /// panel width `q^{-eps}`
    pub h: f64,
    pub n_prime: u32,
    /// `d_l = h^{l+1} / (l+1)!`
    pub d: Vec<f64>,
    /// `C' = q^{c |Re(s - 1/2)|}`
    pub c_prime: f64,
    pub anchor: Anchor,
    /// panel weights actually used, equal to `d` for the left anchor
    pub weights: Vec<f64>,
}

impl AssemblyConstants {
    pub fn new(q: u64, pc: &PrecisionConfig, c: f64) -> Self {
        Self::with_anchor(q, pc, c, Anchor::Left)
    }

    pub fn with_anchor(q: u64, pc: &PrecisionConfig, c: f64, anchor: Anchor) -> Self {
        let lq = (q as f64).ln();
        let scale = (q as f64).powf(pc.eps);
        let x_max = (c * scale * lq).round() as i64;
        let h = 1.0 / scale;
        let n_prime = pc.n_prime(q);
        let d: Vec<f64> = (0..=n_prime).map(|l| h.powi(l as i32 + 1) / factorial(l + 1)).collect();
        let weights = match anchor {
            Anchor::Left => d.clone(),
            Anchor::Midpoint => (0..=n_prime)
                .map(|l| if l % 2 == 0 { 2.0 * (h / 2.0).powi(l as i32 + 1) / factorial(l + 1) } else { 0.0 })
                .collect(),
        };
        let c_prime = (q as f64).powf(c * (pc.s.re - 0.5).abs());
        AssemblyConstants { c, x_max, h, n_prime, d, c_prime, anchor, weights }
    }

    /// The same grid with the geodesic order lowered to `n_prime`.
    pub fn truncated(mut self, n_prime: u32) -> Self {
        let n = n_prime.min(self.n_prime);
        self.n_prime = n;
        self.d.truncate(n as usize + 1);
        self.weights.truncate(n as usize + 1);
        self
    }

    /// Expansion points, one per panel.
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let shift = match self.anchor {
            Anchor::Left => 0.0,
            Anchor::Midpoint => 0.5,
        };
        (-self.x_max..self.x_max).map(move |x| (x as f64 + shift) * self.h)
    }

    /// Left panel ends.
    pub fn panels(&self) -> impl Iterator<Item = f64> + '_ {
        (-self.x_max..self.x_max).map(move |x| x as f64 * self.h)
    }

    pub fn grid_len(&self) -> usize {
        2 * self.x_max as usize
    }
}

/// `sum_x sum_l w_l d^l/dt^l [S(t) e^{t(s-1/2)}]` at the grid points, where
/// `provider(t)` returns `S_m(t) = sum_j psi(j) d_2^m g(n(j/q) a(t))` for
/// `m = 0..=N'`. Returns the sum and the magnitude of its last nonzero `l` layer.
pub fn discretized_integral<P>(consts: &AssemblyConstants, s: Complex64, provider: P) -> Result<(Complex64, f64)>
where
    P: Fn(f64) -> Result<Vec<Complex64>> + Sync,
{
    let w = s - 0.5;
    let np = consts.n_prime;
    let xs: Vec<f64> = consts.grid().collect();
    let terms: Vec<Result<(Vec<Complex64>, f64)>> = xs
        .par_iter()
        .map(|&t| {
            let sums = provider(t)?;
            if sums.len() < np as usize + 1 {
                return Err(Error::ProviderFailure(format!("provider returned {} orders, need {}", sums.len(), np + 1)));
            }
            let e = (w * t).exp();
            let mut per_l = Vec::with_capacity(np as usize + 1);
            for l in 0..=np {
                // Leibniz: d^l [S e^{tw}] = e^{tw} sum_m C(l,m) w^{l-m} S_m
                let mut g = Complex64::new(0.0, 0.0);
                for m in 0..=l {
                    g += sums[m as usize] * w.powu(l - m) * binomial(l, m);
                }
                per_l.push(e * g * consts.weights[l as usize]);
            }
            let top = (0..=np as usize).rev().find(|&l| consts.weights[l] != 0.0).unwrap_or(0);
            let last = per_l[top].norm();
            Ok((per_l, last))
        })
        .collect();
    let mut acc = CompensatedSum::new();
    let mut tail = 0.0;
    for term in terms {
        let (per_l, last) = term?;
        for v in per_l {
            acc.add(v);
        }
        tail += last;
    }
    Ok((acc.value(), tail))
}

/// Composite Gauss-Legendre rule over the same window, using only `m = 0`.
pub fn gauss_legendre_integral<P>(consts: &AssemblyConstants, s: Complex64, nodes: usize, provider: P) -> Result<Complex64>
where
    P: Fn(f64) -> Result<Vec<Complex64>> + Sync,
{
    let (xs, ws) = crate::quad::gauss_legendre(nodes);
    let w = s - 0.5;
    let half = consts.h / 2.0;
    let points: Vec<(f64, f64)> = consts
        .panels()
        .flat_map(|t0| xs.iter().zip(&ws).map(move |(x, wt)| (t0 + half * (1.0 + x), half * wt)).collect::<Vec<_>>())
        .collect();
    let vals: Vec<Result<Complex64>> = points.par_iter().map(|&(t, wt)| Ok(provider(t)?[0] * (w * t).exp() * wt)).collect();
    let mut acc = CompensatedSum::new();
    for v in vals {
        acc.add(v?);
    }
    Ok(acc.value())
}

/// `L(s) = normaliser * integral`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normaliser {
    /// the Gamma and pi factors, without the Gauss sum
    pub gamma_factor: Complex64,
    /// `tau(conj chi)` times the parity prefactor
    pub gauss_factor: Complex64,
}

impl Normaliser {
    /// Integral = `gamma_factor * gauss_factor * L(s)`.
    pub fn new(form: &CuspForm, chi: &DirichletCharacter, s: Complex64, route: ParityRoute) -> Result<Self> {
        let psi = chi.conj();
        let tau = psi.gauss_sum();
        let eps = chi.parity() as f64;
        Ok(match form.kind() {
            FormKind::Holomorphic { weight } => {
                let a = s + (weight as f64 - 1.0) / 2.0;
                // Gamma(a) / (2 pi)^a
                let g = (ln_gamma(a)? - a * (2.0 * PI).ln()).exp();
                Normaliser { gamma_factor: g, gauss_factor: tau }
            }
            FormKind::MaassEven { r } => {
                let ir = Complex64::new(0.0, r);
                match route {
                    ParityRoute::Standard => {
                        let g = (ln_gamma((s + ir) / 2.0)? + ln_gamma((s - ir) / 2.0)? - s * PI.ln()).exp() / 4.0;
                        Normaliser { gamma_factor: g, gauss_factor: tau * (1.0 + eps) }
                    }
                    ParityRoute::DxVariant => {
                        let g = (ln_gamma((s + 1.0 + ir) / 2.0)? + ln_gamma((s + 1.0 - ir) / 2.0)? - s * PI.ln()).exp() / 2.0;
                        Normaliser { gamma_factor: g, gauss_factor: Complex64::new(0.0, 1.0) * tau * (1.0 - eps) }
                    }
                }
            }
        })
    }

    pub fn total(&self) -> Complex64 {
        self.gamma_factor * self.gauss_factor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Engine {
    Fast,
    Naive,
}

/// How the `t` integral is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Quadrature {
    /// Taylor expansion at the left end of each panel.
    Taylor,
    /// Gauss-Legendre with the given number of nodes per panel.
    GaussLegendre(usize),
}

/// Everything [`assemble_l`] needs besides the form and the character.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOptions {
    pub engine: Engine,
    /// `(M, N)`; chosen automatically when `None`.
    pub split: Option<(u64, u64)>,
    /// Override the truncation exponent.
    pub c: Option<f64>,
    pub quadrature: Quadrature,
    pub anchor: Anchor,
    /// Override the Taylor order `N'` along the geodesic.
    pub n_prime: Option<u32>,
    pub sum: SumOptions,
    /// Force a route instead of picking it from the parity.
    pub route: Option<ParityRoute>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            engine: Engine::Fast,
            split: None,
            c: None,
            quadrature: Quadrature::Taylor,
            anchor: Anchor::Left,
            n_prime: None,
            sum: SumOptions::default(),
            route: None,
        }
    }
}

impl AssemblyOptions {
    pub fn naive() -> Self {
        AssemblyOptions { engine: Engine::Naive, ..Default::default() }
    }

    pub fn with_eval(mut self, eval: EvalConfig) -> Self {
        self.sum.eval = eval;
        self
    }
}

/// An assembled L-value with diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LValue {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    pub err_estimate: f64,
    pub route: ParityRoute,
    pub engine: Engine,
    pub constants: AssemblyConstants,
    pub split: Option<(u64, u64)>,
    /// Integral before normalisation.
    #[serde(serialize_with = "ser_complex")]
    pub integral: Complex64,
    pub fallbacks: usize,
    pub counters: CounterSnapshot,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

/// Truncation exponent used by [`assemble_l`] unless overridden.
pub fn default_c(form: &CuspForm, q: u64, pc: &PrecisionConfig) -> f64 {
    let floor = truncation_floor(form, q, pc.gamma) + 0.25;
    choose_c_above(q, pc.eps, floor.max(2.0))
}

/// `L(s, f x chi)` for primitive `chi`.
pub fn assemble_l(
    form: &CuspForm,
    chi: &DirichletCharacter,
    pc: &PrecisionConfig,
    opts: &AssemblyOptions,
    counter: &EvalCounter,
) -> Result<LValue> {
    if !chi.is_primitive() {
        return Err(Error::NonPrimitiveCharacter(chi.to_string()));
    }
    let q = chi.modulus();
    let route = opts.route.unwrap_or_else(|| parity_route(form, chi));
    let norm = Normaliser::new(form, chi, pc.s, route)?;
    if norm.gauss_factor == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain(format!("the {route:?} route vanishes identically for {chi}")));
    }
    let psi = chi.conj();
    let c = opts.c.unwrap_or_else(|| default_c(form, q, pc));
    let mut consts = AssemblyConstants::with_anchor(q, pc, c, opts.anchor);
    if let Some(np) = opts.n_prime {
        consts = consts.truncated(np.min(12));
    }
    let kind = route.sum_kind();
    let l_max = match opts.quadrature {
        Quadrature::Taylor => consts.n_prime,
        Quadrature::GaussLegendre(_) => 0,
    };
    let split: Option<CharacterSplit> = match opts.engine {
        Engine::Naive => None,
        Engine::Fast => Some(match opts.split {
            Some((m, n)) => split_character(&psi, m, n)?,
            None => auto_split(&psi)?,
        }),
    };
    let fallbacks = std::sync::atomic::AtomicUsize::new(0);
    let residual = std::sync::Mutex::new(0.0f64);
    let provider = |t: f64| -> Result<Vec<Complex64>> {
        match &split {
            None => naive_orbit_sums(form, &psi, t, l_max, kind, &opts.sum.eval, counter),
            Some(sp) => {
                let mut sum = opts.sum;
                sum.degree = sum.degree.map(|d| d.min(12u32.saturating_sub(l_max)));
                let req = SumRequest { form, split: sp, t, l_max, kind, options: sum };
                let rep = fast_orbit_sums(&req, counter)?;
                fallbacks.fetch_add(rep.fallbacks, std::sync::atomic::Ordering::Relaxed);
                let mut r = residual.lock().unwrap();
                *r += rep.max_residual * rep.points as f64;
                Ok(rep.complex_values())
            }
        }
    };
    let (integral, disc_err) = match opts.quadrature {
        Quadrature::Taylor => discretized_integral(&consts, pc.s, provider)?,
        Quadrature::GaussLegendre(n) => (gauss_legendre_integral(&consts, pc.s, n, provider)?, 0.0),
    };
    let total = norm.total();
    let value = integral / total;
    let transfer = *residual.lock().unwrap() * consts.h;
    let trunc = 10f64.powf(-pc.gamma - 2.0) * (q as f64);
    let err_estimate = (disc_err + transfer + trunc) / total.norm();
    Ok(LValue {
        value,
        err_estimate,
        route,
        engine: opts.engine,
        constants: consts,
        split: split.as_ref().map(|s| (s.m, s.n)),
        integral,
        fallbacks: fallbacks.into_inner(),
        counters: counter.snapshot(),
    })
}

/// The same value regrouped with the bounded factor `C'`: the integrand is
/// scaled by `1/C'` and the result by `C'' = C' / normaliser`.
pub fn regrouped(value: &LValue, form: &CuspForm, chi: &DirichletCharacter, s: Complex64) -> Result<Complex64> {
    let norm = Normaliser::new(form, chi, s, value.route)?;
    let c_prime = value.constants.c_prime;
    let c_double = c_prime / norm.total();
    Ok(c_double * (value.integral / c_prime))
}

/// `sum_n f^(n) chi(n) n^{-(s + (k-1)/2)}` truncated at the available
/// coefficients; only meaningful where the series converges fast.
pub fn dirichlet_series(form: &CuspForm, chi: &DirichletCharacter, s: Complex64) -> Complex64 {
    let shift = match form.kind() {
        FormKind::Holomorphic { weight } => (weight as f64 - 1.0) / 2.0,
        FormKind::MaassEven { .. } => 0.0,
    };
    let mut acc = CompensatedSum::new();
    for (i, a) in form.coefficients().iter().enumerate() {
        let n = (i + 1) as f64;
        acc.add(*a * chi.eval((i + 1) as i64) * (-(s + shift) * n.ln()).exp());
    }
    acc.value()
}
