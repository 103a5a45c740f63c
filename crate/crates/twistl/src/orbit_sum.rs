//! Twisted orbit sums `S_l(t) = sum_k chi(k) d_2^l F(n(k/q) a(t))`.
//!
//! With `q = M N` the sum splits over `j mod N` into Hecke-orbit sums
//!
//! ```text
//! S = sum_j chi_{M1 N}(j) sum_{(m,k) in T(M)} h_{j mod M}(m, k) g(A(M,m,k) v_j),
//! v_j = A(N,1,j) a(t + log q) = n(j/N) a(t + log M).
//! ```
//!
//! Each `v_j` is reduced to `gamma_j x_j`. Moving `gamma_j` through the
//! cosets permutes `T(M)`, so the inner sum becomes
//! `J(0, r_j, x_j) = sum r_j(m,k) g(A(M,m,k) x_j)` with `r_j = h o sigma^{-1}`.
//! Nearby `x_j` share one table of derivatives at a box representative and
//! are reached by Taylor expansion.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{gcd, inv_mod};
use crate::counter::EvalCounter;
use crate::dirichlet::{CharacterSplit, DirichletCharacter};
use crate::error::{Error, Result};
use crate::forms::{lift_jet, CuspForm, EvalConfig, FrameSpec, LiftJet, MultiIndex, MAX_ORDER};
use crate::hecke::{hecke_matrix, permutation, reduce_key, IndexSet, OrbitPermutation};
use crate::sl2::{box_sort, offset_coords, reduce_indexed, GroupElement, IntMatrix, IwasawaCoords, ReducedPoint};
use crate::sum::CompensatedSum;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which function is summed: `d_2^l F` or `d_2^l d_1 F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum SumKind {
    Standard,
    Dx,
}

impl SumKind {
    fn frame(self, d: u32, l_max: u32) -> FrameSpec {
        match self {
            SumKind::Standard => FrameSpec::taylor(d, l_max),
            SumKind::Dx => FrameSpec::taylor(d, l_max).with_horocycle_tail(),
        }
    }

    fn exponent(self, beta: MultiIndex, l: u32) -> Vec<u32> {
        match self {
            SumKind::Standard => vec![beta.0, beta.1, beta.2, l],
            SumKind::Dx => vec![beta.0, beta.1, beta.2, l, 1],
        }
    }
}

/// Weight function on `T(M)`, stored in [`IndexSet`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitWeightFunction {
    pub level: u64,
    pub values: Vec<Complex64>,
    /// `(residue, permutation key)`; `None` for an unpermuted `h`.
    pub id: (u64, Option<IntMatrix>),
}

impl OrbitWeightFunction {
    pub fn get(&self, set: &IndexSet, m: u64, k: u64) -> Complex64 {
        set.position(crate::hecke::HeckeIndex::new(m, k)).map_or(ZERO, |i| self.values[i])
    }

    /// `r = h o sigma^{-1}`, i.e. `r(sigma(i)) = h(i)`.
    pub fn permuted(&self, sigma: &OrbitPermutation, key: IntMatrix) -> Self {
        let mut values = vec![ZERO; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            values[sigma.apply(i)] = v;
        }
        OrbitWeightFunction { level: self.level, values, id: (self.id.0, Some(key)) }
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(i, _)| i)
    }
}

fn weight_from(level: u64, residue: u64, f: impl Fn(u64) -> Complex64) -> OrbitWeightFunction {
    let set = IndexSet::new(level);
    let values = set.entries().iter().map(|idx| if idx.m == 1 { f(idx.k) } else { ZERO }).collect();
    OrbitWeightFunction { level, values, id: (residue, None) }
}

/// `h_l(1, k) = chi_M(l + k N)`, zero off `m = 1`.
pub fn h_coprime(chi_m: &DirichletCharacter, n: u64, l: u64) -> OrbitWeightFunction {
    let m = chi_m.modulus();
    weight_from(m, l, |k| chi_m.eval((l + k * n) as i64))
}

/// `h_l(1, k) = e(b l^{-1} k / M)`, zero off `m = 1`.
pub fn h_divides(b: u64, m: u64, l: u64) -> Result<OrbitWeightFunction> {
    let inv = inv_mod(l as i64, m as i64).ok_or(Error::NonInvertibleResidue { residue: l, modulus: m })? as u64;
    Ok(weight_from(m, l % m, |k| root(b * inv % m * k % m, m)))
}

/// `h_l(1, k) = e(b l^{-1} k0 / M1) chi_{M2}(l + k0 N + l0 M1 N)` with
/// `k = k0 + l0 M1`.
pub fn h_mixed(b: u64, m1: u64, chi_m2: &DirichletCharacter, n: u64, l: u64) -> Result<OrbitWeightFunction> {
    let m2 = chi_m2.modulus();
    let inv = inv_mod(l as i64, m1 as i64).ok_or(Error::NonInvertibleResidue { residue: l, modulus: m1 })? as u64;
    Ok(weight_from(m1 * m2, l % (m1 * m2), |k| {
        let (k0, l0) = (k % m1, k / m1);
        root(b * inv % m1 * k0 % m1, m1) * chi_m2.eval((l + k0 * n + l0 * m1 * n) as i64)
    }))
}

fn root(num: u64, den: u64) -> Complex64 {
    crate::forms::e(Complex64::new(num as f64 / den as f64, 0.0))
}

/// Offsets and coefficients `t0^b1 v0^b2 theta0^b3 / beta!` for moving
/// from `x` to `y = x n(t0) a(v0) K(theta0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorStencil {
    pub offsets: IwasawaCoords,
    pub degree: u32,
    pub indices: Vec<MultiIndex>,
    pub coefficients: Vec<f64>,
}

pub fn taylor_stencil(x: &GroupElement, y: &GroupElement, d: u32) -> Result<TaylorStencil> {
    let o = offset_coords(x, y)?;
    if o.max_abs() >= 0.1 {
        return Err(Error::TooFar(format!("offset {o:?} leaves U_0.1")));
    }
    Ok(stencil_from_offsets(o, d))
}

fn stencil_from_offsets(o: IwasawaCoords, d: u32) -> TaylorStencil {
    let powers = |x: f64| {
        let mut p = vec![1.0; d as usize + 1];
        for i in 1..=d as usize {
            p[i] = p[i - 1] * x;
        }
        p
    };
    let (pt, pv, pth) = (powers(o.t), powers(o.v), powers(o.theta));
    let indices = MultiIndex::up_to(d);
    let coefficients = indices
        .iter()
        .map(|b| pt[b.0 as usize] * pv[b.1 as usize] * pth[b.2 as usize] / b.factorial())
        .collect();
    TaylorStencil { offsets: o, degree: d, indices, coefficients }
}

/// `sum_beta c_beta J_beta` together with the magnitude of the top-degree
/// layer as a truncation estimate. `j_values` follows `stencil.indices`.
pub fn taylor_transfer(stencil: &TaylorStencil, j_values: &[Complex64]) -> Result<(Complex64, f64)> {
    if j_values.len() < stencil.indices.len() {
        return Err(Error::MissingOrder(stencil.degree));
    }
    let mut acc = ZERO;
    let mut top = 0.0;
    for ((b, &c), &j) in stencil.indices.iter().zip(&stencil.coefficients).zip(j_values) {
        let term = j * c;
        acc += term;
        if b.order() == stencil.degree {
            top += term.norm();
        }
    }
    Ok((acc, top))
}

/// `J(beta, r, x) = sum_{(m,k)} r(m,k) d^beta g(A(M,m,k) x)` with
/// `g = d_2^l F` (or `d_2^l d_1 F`), summed in index order.
#[allow(clippy::too_many_arguments)]
pub fn j_sum(
    form: &CuspForm,
    l: u32,
    beta: MultiIndex,
    r: &OrbitWeightFunction,
    x: &GroupElement,
    kind: SumKind,
    cfg: &EvalConfig,
    counter: &EvalCounter,
) -> Result<Complex64> {
    let set = IndexSet::new(r.level);
    let spec = kind.frame(beta.order(), l);
    let e = kind.exponent(beta, l);
    let mut acc = CompensatedSum::new();
    for i in r.support() {
        let a = hecke_matrix(r.level, set.entries()[i])?;
        let jet = lift_jet(form, &a.mul(x), &spec, cfg)?;
        counter.add_lift(1);
        counter.add_derivatives(1);
        acc.add(r.values[i] * jet.derivative(&e)?);
    }
    Ok(acc.value())
}

/// `J(0, r, x)` for all `l <= l_max` at once.
fn j_sums_direct(
    form: &CuspForm,
    l_max: u32,
    r: &OrbitWeightFunction,
    set: &IndexSet,
    x: &GroupElement,
    kind: SumKind,
    cfg: &EvalConfig,
    counter: &EvalCounter,
) -> Result<Vec<Complex64>> {
    let spec = kind.frame(0, l_max);
    let mut acc = vec![CompensatedSum::new(); l_max as usize + 1];
    for i in r.support() {
        let a = hecke_matrix(r.level, set.entries()[i])?;
        let jet = lift_jet(form, &a.mul(x), &spec, cfg)?;
        counter.add_lift(1);
        counter.add_derivatives(l_max as u64 + 1);
        for l in 0..=l_max {
            acc[l as usize].add(r.values[i] * jet.derivative(&kind.exponent(MultiIndex(0, 0, 0), l))?);
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// Knobs of the fast engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumOptions {
    /// Box side is `q^{-eps}`.
    pub eps: f64,
    /// Target `10^{-gamma}` per transferred orbit sum.
    pub gamma: f64,
    /// Taylor degree; derived from `eps` and `gamma` when `None`.
    pub degree: Option<u32>,
    /// Share derivative tables between the members of a box.
    pub share_tables: bool,
    pub eval: EvalConfig,
}

impl Default for SumOptions {
    fn default() -> Self {
        SumOptions { eps: 0.25, gamma: 8.0, degree: None, share_tables: true, eval: EvalConfig::default() }
    }
}

/// `d = ceil((gamma + 2) ln 10 / (eps ln q))`, capped so that `d + l <= 12`.
pub fn taylor_degree(q: u64, eps: f64, gamma: f64, l_max: u32) -> u32 {
    let raw = ((gamma + 2.0) * std::f64::consts::LN_10 / (eps * (q as f64).ln())).ceil();
    (raw.max(1.0) as u32).min(MAX_ORDER.saturating_sub(l_max))
}

/// One fast orbit-sum evaluation.
#[derive(Debug, Clone)]
pub struct SumRequest<'a> {
    pub form: &'a CuspForm,
    pub split: &'a CharacterSplit,
    pub t: f64,
    pub l_max: u32,
    pub kind: SumKind,
    pub options: SumOptions,
}

/// Values for `l = 0..=l_max` and diagnostics.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SumReport {
    pub values: Vec<Complex64Ser>,
    pub degree: u32,
    pub points: usize,
    pub boxes: usize,
    pub weight_ids: usize,
    pub fallbacks: usize,
    pub max_residual: f64,
}

/// Serialisable complex number.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Complex64Ser {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Complex64Ser {
    fn from(z: Complex64) -> Self {
        Complex64Ser { re: z.re, im: z.im }
    }
}

impl From<Complex64Ser> for Complex64 {
    fn from(z: Complex64Ser) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl SumReport {
    pub fn value(&self, l: u32) -> Complex64 {
        self.values[l as usize].into()
    }

    pub fn complex_values(&self) -> Vec<Complex64> {
        self.values.iter().map(|&z| z.into()).collect()
    }
}

struct Member {
    j: u64,
    point: ReducedPoint,
    weight: usize,
    outer: Complex64,
}

/// Fast twisted sums for `l = 0..=req.l_max`.
pub fn fast_orbit_sums(req: &SumRequest<'_>, counter: &EvalCounter) -> Result<SumReport> {
    let split = req.split;
    let chi = &split.chi;
    if !chi.is_primitive() {
        return Err(Error::NonPrimitiveCharacter(chi.to_string()));
    }
    let order = req.l_max + u32::from(req.kind == SumKind::Dx);
    if req.l_max > MAX_ORDER || order > MAX_ORDER + 1 {
        return Err(Error::OrderTooHigh(order));
    }
    let q = chi.modulus();
    let (m, n) = (split.m, split.n);
    if m == 1 {
        let values = naive_orbit_sums(req.form, chi, req.t, req.l_max, req.kind, &req.options.eval, counter)?;
        return Ok(SumReport {
            values: values.into_iter().map(Into::into).collect(),
            points: q as usize,
            ..Default::default()
        });
    }
    let opts = &req.options;
    let d = opts.degree.unwrap_or_else(|| taylor_degree(q, opts.eps, opts.gamma, req.l_max));
    if d + req.l_max > MAX_ORDER {
        return Err(Error::OrderTooHigh(d + req.l_max));
    }
    let set = IndexSet::new(m);

    // reduce v_j and build the weight functions
    let lift = req.t + (m as f64).ln();
    let mut members = Vec::new();
    let mut weights: Vec<OrbitWeightFunction> = Vec::new();
    let mut weight_ids: HashMap<(u64, IntMatrix), usize> = HashMap::new();
    let mut base: HashMap<u64, Arc<OrbitWeightFunction>> = HashMap::new();
    for j in 0..n {
        if gcd(j as i64, n as i64) != 1 {
            continue;
        }
        let v = GroupElement::n(j as f64 / n as f64).mul(&GroupElement::a(lift));
        let point = reduce_indexed(&v, members.len())?;
        let c = j % m;
        let h = match base.get(&c) {
            Some(h) => h.clone(),
            None => {
                let h = Arc::new(if split.m1 == 1 {
                    h_coprime(&split.chi_m2, n, c)
                } else {
                    h_mixed(split.b, split.m1, &split.chi_m2, n, c)?
                });
                counter.add_chars(m);
                base.insert(c, h.clone());
                h
            }
        };
        let key = reduce_key(&point.gamma, m);
        let weight = *weight_ids.entry((c, key)).or_insert_with(|| {
            let sigma = permutation(m, &point.gamma);
            weights.push(h.permuted(&sigma, key));
            weights.len() - 1
        });
        counter.add_chars(1);
        members.push(Member { j, point, weight, outer: split.chi_m1n.eval(j as i64) });
    }

    let eta = (q as f64).powf(-opts.eps);
    let points: Vec<ReducedPoint> = members.iter().map(|mb| mb.point).collect();
    let partition = box_sort(&points, eta);
    let tol = 10f64.powf(-opts.gamma);
    let spec = req.kind.frame(d, req.l_max);
    let betas = MultiIndex::up_to(d);
    let nl = req.l_max as usize + 1;
    let exponents: Vec<Vec<Vec<u32>>> =
        (0..=req.l_max).map(|l| betas.iter().map(|&b| req.kind.exponent(b, l)).collect()).collect();

    let boxes: Vec<(&Vec<usize>, usize)> = partition.boxes.values().zip(partition.representatives.iter().copied()).collect();
    type BoxOut = Vec<(usize, Vec<Complex64>, f64, bool)>;
    let results: Vec<Result<BoxOut>> = boxes
        .par_iter()
        .map(|(idxs, rep)| -> Result<BoxOut> {
            let eval = &opts.eval;
            let direct = |i: usize| -> Result<Vec<Complex64>> {
                let mb = &members[i];
                j_sums_direct(req.form, req.l_max, &weights[mb.weight], &set, &mb.point.x, req.kind, eval, counter)
            };
            if idxs.len() == 1 || d == 0 {
                // nothing to share; with d = 0 there is no room for a transfer
                return idxs.iter().map(|&i| Ok((i, direct(i)?, 0.0, d == 0 && idxs.len() > 1))).collect();
            }
            let x = members[*rep].point.x;
            // derivative table at A(M,m,k) x for every index some member needs
            let build_tables = |ids: &[usize]| -> Result<HashMap<usize, Vec<Vec<Complex64>>>> {
                let mut needed = vec![false; set.len()];
                for &w in ids {
                    for i in weights[w].support() {
                        needed[i] = true;
                    }
                }
                let mut jets: Vec<Option<LiftJet>> = vec![None; set.len()];
                for (i, need) in needed.iter().enumerate() {
                    if *need {
                        let a = hecke_matrix(m, set.entries()[i])?;
                        jets[i] = Some(lift_jet(req.form, &a.mul(&x), &spec, eval)?);
                        counter.add_lift(1);
                        counter.add_derivatives((betas.len() * nl) as u64);
                    }
                }
                let mut tables = HashMap::new();
                for &w in ids {
                    if tables.contains_key(&w) {
                        continue;
                    }
                    let r = &weights[w];
                    let mut table = vec![vec![ZERO; betas.len()]; nl];
                    for i in r.support() {
                        let jet = jets[i].as_ref().expect("table built for support");
                        for (l, row) in table.iter_mut().enumerate() {
                            for (bi, slot) in row.iter_mut().enumerate() {
                                *slot += r.values[i] * jet.derivative(&exponents[l][bi])?;
                            }
                        }
                    }
                    tables.insert(w, table);
                }
                Ok(tables)
            };
            let shared = if opts.share_tables {
                let mut ids: Vec<usize> = idxs.iter().map(|&i| members[i].weight).collect();
                ids.sort_unstable();
                ids.dedup();
                Some(build_tables(&ids)?)
            } else {
                None
            };
            let mut out = Vec::with_capacity(idxs.len());
            for &i in idxs.iter() {
                let mb = &members[i];
                let own;
                let tables = match &shared {
                    Some(t) => t,
                    None => {
                        own = build_tables(&[mb.weight])?;
                        &own
                    }
                };
                let table = &tables[&mb.weight];
                let stencil = stencil_from_offsets(offset_coords(&x, &mb.point.x)?, d);
                let mut vals = Vec::with_capacity(nl);
                let mut residual = 0.0f64;
                for row in table {
                    let (v, top) = taylor_transfer(&stencil, row)?;
                    residual = residual.max(top);
                    vals.push(v);
                }
                if residual > tol {
                    out.push((i, direct(i)?, residual, true));
                } else {
                    out.push((i, vals, residual, false));
                }
            }
            Ok(out)
        })
        .collect();

    let mut per_member: Vec<Option<Vec<Complex64>>> = vec![None; members.len()];
    let mut fallbacks = 0;
    let mut max_residual = 0.0f64;
    for r in results {
        for (i, vals, residual, fell_back) in r? {
            per_member[i] = Some(vals);
            if fell_back {
                fallbacks += 1;
            } else {
                max_residual = max_residual.max(residual);
            }
        }
    }
    let mut acc = vec![CompensatedSum::new(); nl];
    for (mb, vals) in members.iter().zip(&per_member) {
        let vals = vals.as_ref().expect("every member is in a box");
        for (a, v) in acc.iter_mut().zip(vals) {
            a.add(mb.outer * v);
        }
    }
    debug_assert!(members.iter().all(|mb| mb.j < n));
    Ok(SumReport {
        values: acc.iter().map(|a| a.value().into()).collect(),
        degree: d,
        points: members.len(),
        boxes: partition.len(),
        weight_ids: weights.len(),
        fallbacks,
        max_residual,
    })
}

/// Single-order convenience wrapper around [`fast_orbit_sums`].
pub fn fast_orbit_sum(req: &SumRequest<'_>, counter: &EvalCounter) -> Result<Complex64> {
    Ok(fast_orbit_sums(req, counter)?.value(req.l_max))
}

/// Direct `O(q)` sums for `l = 0..=l_max`, in increasing `k`.
pub fn naive_orbit_sums(
    form: &CuspForm,
    chi: &DirichletCharacter,
    t: f64,
    l_max: u32,
    kind: SumKind,
    cfg: &EvalConfig,
    counter: &EvalCounter,
) -> Result<Vec<Complex64>> {
    let q = chi.modulus();
    let spec = kind.frame(0, l_max);
    let a = GroupElement::a(t);
    let terms: Vec<Result<Vec<Complex64>>> = (0..q)
        .into_par_iter()
        .map(|k| {
            let c = chi.eval(k as i64);
            counter.add_chars(1);
            if c == ZERO {
                return Ok(Vec::new());
            }
            let g = GroupElement::n(k as f64 / q as f64).mul(&a);
            let jet = lift_jet(form, &g, &spec, cfg)?;
            counter.add_lift(1);
            counter.add_derivatives(l_max as u64 + 1);
            (0..=l_max).map(|l| Ok(c * jet.derivative(&kind.exponent(MultiIndex(0, 0, 0), l))?)).collect()
        })
        .collect();
    let mut acc = vec![CompensatedSum::new(); l_max as usize + 1];
    for term in terms {
        for (a, v) in acc.iter_mut().zip(term?) {
            a.add(v);
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

pub fn naive_orbit_sum(
    form: &CuspForm,
    chi: &DirichletCharacter,
    t: f64,
    l: u32,
    cfg: &EvalConfig,
    counter: &EvalCounter,
) -> Result<Complex64> {
    Ok(naive_orbit_sums(form, chi, t, l, SumKind::Standard, cfg, counter)?[l as usize])
}
