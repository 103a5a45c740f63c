//! Direct `O(q)` checks: Mellin integrals by adaptive quadrature, tail
//! estimates, and the scaling bench.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{gcd, inv_mod};
use crate::assembly::{
    assemble_l, parity_route, truncation_floor, AssemblyOptions, Engine, Normaliser, ParityRoute, PrecisionConfig,
};
use crate::counter::{CounterSnapshot, EvalCounter};
use crate::dirichlet::{split_character, DirichletCharacter};
use crate::error::{Error, Result};
use crate::forms::{central_weights, eval_point, lift_eval, CuspForm, EvalConfig};
use crate::quad::adaptive_gk;
use crate::sl2::GroupElement;
use crate::sum::CompensatedSum;

/// Largest modulus the direct oracle accepts.
pub const ORACLE_MAX_Q: u64 = 100_000;

const QUAD_TOL: f64 = 1e-10;
const QUAD_DEPTH: u32 = 40;

/// `F(n(x) a(t))`.
fn lift_at(form: &CuspForm, x: f64, t: f64, cfg: &EvalConfig) -> Result<Complex64> {
    lift_eval(form, &GroupElement::n(x).mul(&GroupElement::a(t)), cfg)
}

/// `d/ds F(n(x) a(t) n(s))` at `s = 0` by a 9-point central stencil in `x`;
/// the flow moves `x` at rate `e^t`.
fn lift_dx_at(form: &CuspForm, x: f64, t: f64, cfg: &EvalConfig) -> Result<Complex64> {
    let step = 1e-2;
    let w = central_weights(1, 4);
    let y = t.exp();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, wi) in w.iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        let off = (i as f64 - 4.0) * step * y;
        acc += lift_at(form, x + off, t, cfg)? * *wi;
    }
    Ok(acc / step)
}

/// Integral of `F(n(j/q) a(t)) e^{t(s - 1/2)}` (or its horocycle
/// derivative) over `[lo, hi]`, by adaptive Gauss-Kronrod.
fn mellin_piece(
    form: &CuspForm,
    x: f64,
    s: Complex64,
    route: ParityRoute,
    lo: f64,
    hi: f64,
    cfg: &EvalConfig,
) -> Result<Complex64> {
    let w = s - 0.5;
    let err = std::cell::Cell::new(None);
    let f = |t: f64| {
        let v = match route {
            ParityRoute::Standard => lift_at(form, x, t, cfg),
            ParityRoute::DxVariant => lift_dx_at(form, x, t, cfg),
        };
        match v {
            Ok(v) => v * (w * t).exp(),
            Err(e) => {
                err.set(Some(e));
                Complex64::new(0.0, 0.0)
            }
        }
    };
    // fixed unit panels keep the adaptive rule from skipping features
    let panels = ((hi - lo).ceil() as usize).max(1);
    let width = (hi - lo) / panels as f64;
    let mut acc = CompensatedSum::new();
    for p in 0..panels {
        let a = lo + p as f64 * width;
        acc.add(adaptive_gk(&f, a, a + width, QUAD_TOL / panels as f64, QUAD_DEPTH)?);
    }
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(acc.value())
}

/// Result of [`direct_integral_l`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct OracleValue {
    pub value_re: f64,
    pub value_im: f64,
    pub err_estimate: f64,
    pub c: f64,
    pub route: ParityRoute,
    pub counters: CounterSnapshot,
}

impl OracleValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.value_re, self.value_im)
    }
}

/// `L(s, f x chi)` from `sum_j conj(chi)(j) int f(j/q + iy) y^{s + (k-3)/2} dy`
/// over `[q^{-c}, q^c]`, one adaptive quadrature per `j`.
pub fn direct_integral_l(form: &CuspForm, chi: &DirichletCharacter, s: Complex64, gamma: f64) -> Result<OracleValue> {
    direct_integral_l_with(form, chi, s, gamma, parity_route(form, chi), &EvalCounter::new())
}

/// [`direct_integral_l`] with an explicit route, so the vanishing standard
/// integrand can be inspected.
pub fn direct_integral_l_with(
    form: &CuspForm,
    chi: &DirichletCharacter,
    s: Complex64,
    gamma: f64,
    route: ParityRoute,
    counter: &EvalCounter,
) -> Result<OracleValue> {
    let q = chi.modulus();
    if q > ORACLE_MAX_Q {
        return Err(Error::TooLarge(q));
    }
    if !chi.is_primitive() {
        return Err(Error::NonPrimitiveCharacter(chi.to_string()));
    }
    let integral = oracle_integral(form, chi, s, gamma, route, counter)?;
    let c = truncation_floor(form, q, gamma) + 0.25;
    let norm = Normaliser::new(form, chi, s, route)?;
    let total = norm.total();
    if total.norm() == 0.0 {
        return Err(Error::Domain(format!("the {route:?} route vanishes identically for {chi}")));
    }
    let value = integral / total;
    let err_estimate = (QUAD_TOL * q as f64 + 10f64.powf(-gamma - 2.0) * q as f64) / total.norm();
    Ok(OracleValue { value_re: value.re, value_im: value.im, err_estimate, c, route, counters: counter.snapshot() })
}

/// The raw character-weighted integral, before the Gamma and Gauss factors.
pub fn oracle_integral(
    form: &CuspForm,
    chi: &DirichletCharacter,
    s: Complex64,
    gamma: f64,
    route: ParityRoute,
    counter: &EvalCounter,
) -> Result<Complex64> {
    let q = chi.modulus();
    let psi = chi.conj();
    let c = truncation_floor(form, q, gamma) + 0.25;
    let lq = (q as f64).ln();
    let cfg = EvalConfig::default();
    let parts: Vec<Result<Complex64>> = (0..q)
        .into_par_iter()
        .map(|j| {
            let w = psi.eval(j as i64);
            counter.add_chars(1);
            if w.norm() == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            counter.add_lift(1);
            Ok(w * mellin_piece(form, j as f64 / q as f64, s, route, -c * lq, c * lq, &cfg)?)
        })
        .collect();
    let mut acc = CompensatedSum::new();
    for p in parts {
        acc.add(p?);
    }
    Ok(acc.value())
}

/// `f(n/q + iy)` through `f(z) = (qiy)^{-k} f(a/q + i/(q^2 y))` with
/// `a n = -1 mod q`, useful when `y` is tiny.
pub fn reflected_value(form: &CuspForm, q: u64, n: u64, y: f64, cfg: &EvalConfig) -> Result<Complex64> {
    let inv = inv_mod((n % q) as i64, q as i64).ok_or(Error::NonInvertibleResidue { residue: n % q, modulus: q })?;
    let a = (q - inv as u64) % q;
    let k = form.weight() as i32;
    let z = Complex64::new(a as f64 / q as f64, 1.0 / (q as f64 * q as f64 * y));
    Ok(Complex64::new(0.0, q as f64 * y).powi(-k) * eval_point(form, z, cfg)?)
}

/// Relative gap between `f(n/q + iy)` summed directly and via
/// [`reflected_value`].
pub fn reflection_gap(form: &CuspForm, q: u64, n: u64, y: f64) -> Result<f64> {
    let cfg = EvalConfig::default().unreduced();
    let direct = eval_point(form, Complex64::new(n as f64 / q as f64, y), &cfg)?;
    let reflected = reflected_value(form, q, n, y, &cfg)?;
    Ok((direct - reflected).norm() / direct.norm().max(reflected.norm()).max(1e-300))
}

/// `max_n |I(c1) - I(c2)|` over `n` coprime to `q`, where
/// `I(c) = int_{q^{-c}}^{q^c} f(n/q + iy) y^{(k-1)/2} dy`, i.e. the
/// `s = 1/2` Mellin integral. The difference is integrated directly on the
/// two tails; the lower tail is evaluated through the reflection.
pub fn truncation_check(form: &CuspForm, q: u64, c1: f64, c2: f64) -> Result<f64> {
    if !(2.0 < c1 && c1 < c2) {
        return Err(Error::Domain(format!("need 2 < c1 < c2, got {c1}, {c2}")));
    }
    let lq = (q as f64).ln();
    let k = form.weight() as f64;
    let cfg = EvalConfig::default().unreduced();
    let ns: Vec<u64> = (1..q).filter(|&n| gcd(n as i64, q as i64) == 1).collect();
    let gaps: Vec<Result<f64>> = ns
        .par_iter()
        .map(|&n| {
            let x = n as f64 / q as f64;
            let upper = |t: f64| -> Result<Complex64> {
                let y = t.exp();
                Ok(eval_point(form, Complex64::new(x, y), &cfg)? * y.powf(k / 2.0))
            };
            let lower = |t: f64| -> Result<Complex64> {
                let y = t.exp();
                Ok(reflected_value(form, q, n, y, &cfg)? * y.powf(k / 2.0))
            };
            let up = integrate_result(upper, c1 * lq, c2 * lq)?;
            let down = integrate_result(lower, -c2 * lq, -c1 * lq)?;
            Ok((up + down).norm())
        })
        .collect();
    let mut worst = 0.0f64;
    for g in gaps {
        worst = worst.max(g?);
    }
    Ok(worst)
}

fn integrate_result<F: Fn(f64) -> Result<Complex64>>(f: F, a: f64, b: f64) -> Result<Complex64> {
    let err = std::cell::Cell::new(None);
    let g = |t: f64| match f(t) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e));
            Complex64::new(0.0, 0.0)
        }
    };
    let v = adaptive_gk(g, a, b, 1e-14, QUAD_DEPTH)?;
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(v)
}

/// One modulus of a scaling run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BenchCase {
    pub q: u64,
    pub m: u64,
    pub n: u64,
}

/// Workload knobs for [`scaling_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub s: Complex64,
    pub eps: f64,
    pub gamma: f64,
    /// Taylor order along the geodesic; small so the transfer has room.
    pub n_prime: u32,
    /// Largest `q` for which the naive engine is also run.
    pub naive_up_to: u64,
    pub options: AssemblyOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            s: Complex64::new(0.5, 0.0),
            eps: 0.1,
            gamma: 6.0,
            n_prime: 2,
            naive_up_to: 10_000,
            options: AssemblyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchRow {
    pub q: u64,
    pub m: u64,
    pub n: u64,
    pub time_ms: f64,
    pub lift_evals: u64,
    pub lift_deriv_evals: u64,
    pub char_evals: u64,
    pub fast_re: f64,
    pub fast_im: f64,
    pub naive_re: Option<f64>,
    pub naive_im: Option<f64>,
    pub rel_dev: Option<f64>,
    pub naive_lift_evals: Option<u64>,
    /// orbit sums evaluated, one per grid point
    pub grid_points: usize,
}

impl BenchRow {
    /// Fast-engine lift evaluations per orbit sum.
    pub fn lifts_per_sum(&self) -> f64 {
        self.lift_evals as f64 / self.grid_points.max(1) as f64
    }

    /// [`Self::lifts_per_sum`] relative to the `q` a direct sum would cost.
    pub fn lifts_per_q(&self) -> f64 {
        self.lifts_per_sum() / self.q as f64
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

pub const BENCH_CSV_HEADER: &str = "q,M,N,time_ms,lift_evals,lift_deriv_evals,char_evals,fast_re,fast_im,naive_re,naive_im,rel_dev";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.3},{},{},{},{:e},{:e},{},{},{}\n",
                r.q,
                r.m,
                r.n,
                r.time_ms,
                r.lift_evals,
                r.lift_deriv_evals,
                r.char_evals,
                r.fast_re,
                r.fast_im,
                opt(r.naive_re),
                opt(r.naive_im),
                opt(r.rel_dev)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench rows serialise")
    }

    /// Smallest `C` with `lifts per sum <= C (M^5 + N) q^{0.15}` on the
    /// first row, and whether every other row respects it.
    pub fn complexity_fit(&self) -> (f64, bool) {
        let bound = |r: &BenchRow| ((r.m as f64).powi(5) + r.n as f64) * (r.q as f64).powf(0.15);
        let Some(first) = self.rows.first() else { return (0.0, true) };
        let c = first.lifts_per_sum() / bound(first);
        let ok = self.rows.iter().all(|r| r.lifts_per_sum() <= c * bound(r) * (1.0 + 1e-12));
        (c, ok)
    }

    /// Whether lifts per sum over `q` strictly decrease down the rows.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].lifts_per_q() < w[0].lifts_per_q())
    }
}

/// A primitive character of modulus `q`, the one with the smallest label.
pub fn first_primitive(q: u64) -> Option<DirichletCharacter> {
    (1..q.max(2))
        .filter(|&l| gcd(l as i64, q as i64) == 1)
        .filter_map(|l| DirichletCharacter::from_label(q, l).ok())
        .find(|c| c.is_primitive())
}

/// Run the fast engine (and the naive one where affordable) on every case,
/// recording counters and wall time. Each case is a full assembly with a
/// small geodesic order so the box transfer has room.
pub fn scaling_report(form: &CuspForm, cases: &[BenchCase], cfg: &BenchConfig) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for case in cases {
        let chi = first_primitive(case.q).ok_or_else(|| Error::Domain(format!("no primitive character mod {}", case.q)))?;
        split_character(&chi.conj(), case.m, case.n)?;
        let pc = PrecisionConfig::new(cfg.s, cfg.eps, cfg.gamma)?;
        let mut opts = cfg.options.clone();
        opts.engine = Engine::Fast;
        opts.split = Some((case.m, case.n));
        opts.n_prime = Some(cfg.n_prime);
        let counter = EvalCounter::new();
        let start = Instant::now();
        let fast = assemble_l(form, &chi, &pc, &opts, &counter)?;
        let time_ms = start.elapsed().as_secs_f64() * 1e3;
        let snap = counter.snapshot();
        let (naive, naive_lifts) = if case.q <= cfg.naive_up_to {
            let nc = EvalCounter::new();
            let mut nopts = opts.clone();
            nopts.engine = Engine::Naive;
            let v = assemble_l(form, &chi, &pc, &nopts, &nc)?.value;
            (Some(v), Some(nc.snapshot().lift_evals))
        } else {
            (None, None)
        };
        let rel_dev = naive.map(|v| (fast.value - v).norm() / (1.0 + v.norm()));
        rows.push(BenchRow {
            q: case.q,
            m: case.m,
            n: case.n,
            time_ms,
            lift_evals: snap.lift_evals,
            lift_deriv_evals: snap.lift_deriv_evals,
            char_evals: snap.char_evals,
            fast_re: fast.value.re,
            fast_im: fast.value.im,
            naive_re: naive.map(|v| v.re),
            naive_im: naive.map(|v| v.im),
            rel_dev,
            naive_lift_evals: naive_lifts,
            grid_points: fast.constants.grid_len(),
        });
    }
    Ok(BenchReport { rows })
}

/// `q = 6^j` for `j = 2..=5` with `M` the admissible divisor nearest
/// `q^{1/6}`.
pub fn default_bench_cases() -> Vec<BenchCase> {
    (2..=5)
        .map(|j| {
            let q = 6u64.pow(j);
            let target = (q as f64).powf(1.0 / 6.0);
            let chi = first_primitive(q).expect("6^j has primitive characters").conj();
            let m = crate::arith::divisors(q)
                .into_iter()
                .filter(|&m| m > 1 && m * m <= q && split_character(&chi, m, q / m).is_ok())
                .min_by(|a, b| (*a as f64 - target).abs().total_cmp(&(*b as f64 - target).abs()))
                .unwrap_or(1);
            BenchCase { q, m, n: q / m }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::dirichlet_series;

    fn delta() -> CuspForm {
        CuspForm::delta(4000)
    }

    #[test]
    fn oracle_matches_the_dirichlet_series() {
        let chi: DirichletCharacter = "5:2".parse().unwrap();
        let s = Complex64::new(3.0, 1.0);
        let v = direct_integral_l(&delta(), &chi, s, 8.0).unwrap();
        let ds = dirichlet_series(&delta(), &chi, s);
        assert!((v.value() - ds).norm() < 1e-8 * ds.norm(), "{} {ds}", v.value());
        assert!(v.err_estimate > 0.0 && v.c > 2.0);
        assert_eq!(v.route, ParityRoute::Standard);
        assert!(v.counters.lift_evals >= 4);
    }

    #[test]
    fn oracle_rejects_bad_input() {
        let s = Complex64::new(0.5, 0.0);
        let big = DirichletCharacter::from_label(100_003, 2).unwrap();
        assert!(matches!(direct_integral_l(&delta(), &big, s, 6.0), Err(Error::TooLarge(100_003))));
        let imprimitive: DirichletCharacter = "9:8".parse().unwrap();
        assert!(matches!(direct_integral_l(&delta(), &imprimitive, s, 6.0), Err(Error::NonPrimitiveCharacter(_))));
        assert!(matches!(truncation_check(&delta(), 7, 2.0, 3.0), Err(Error::Domain(_))));
        assert!(matches!(reflected_value(&delta(), 6, 3, 0.1, &EvalConfig::default()), Err(Error::NonInvertibleResidue { .. })));
    }

    #[test]
    fn reflection_agrees_with_the_direct_series() {
        for (q, n, y) in [(7u64, 2u64, 0.05), (11, 4, 0.02), (16, 5, 0.03)] {
            let gap = reflection_gap(&delta(), q, n, y).unwrap();
            assert!(gap < 1e-9, "{q} {n} {y}: {gap}");
        }
    }

    #[test]
    fn primitive_characters() {
        assert_eq!(first_primitive(4).unwrap().to_string(), "4:3");
        assert!(first_primitive(2).is_none());
        assert!(first_primitive(6).is_none());
        assert!(first_primitive(5).unwrap().is_primitive());
    }

    fn row(q: u64, m: u64, lifts: u64, grid: usize) -> BenchRow {
        BenchRow {
            q,
            m,
            n: q / m,
            time_ms: 1.0,
            lift_evals: lifts,
            lift_deriv_evals: 0,
            char_evals: 0,
            fast_re: 1.0,
            fast_im: 0.0,
            naive_re: None,
            naive_im: None,
            rel_dev: None,
            naive_lift_evals: None,
            grid_points: grid,
        }
    }

    #[test]
    fn report_shape_and_fit() {
        let report = BenchReport { rows: vec![row(36, 2, 800, 100), row(216, 2, 2800, 100), row(1296, 3, 14000, 100)] };
        assert!(report.strictly_decreasing());
        let (c, ok) = report.complexity_fit();
        assert!(c > 0.0 && ok);
        let csv = report.to_csv();
        assert!(csv.starts_with(BENCH_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["rows"][2]["q"], 1296);

        let flat = BenchReport { rows: vec![row(36, 2, 800, 100), row(216, 2, 4800, 100)] };
        assert!(!flat.strictly_decreasing());
    }

    #[test]
    fn bench_cases_are_admissible() {
        let cases = default_bench_cases();
        assert_eq!(cases.iter().map(|c| c.q).collect::<Vec<_>>(), vec![36, 216, 1296, 7776]);
        for c in cases {
            assert_eq!(c.m * c.n, c.q);
            let chi = first_primitive(c.q).unwrap().conj();
            assert!(split_character(&chi, c.m, c.n).is_ok());
        }
    }
}
