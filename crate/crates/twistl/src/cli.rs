//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};

use crate::assembly::{
    assemble_l, parity_route, standard_prefactor, Anchor, AssemblyOptions, Engine, ParityRoute, PrecisionConfig,
};
use crate::counter::{CounterSnapshot, EvalCounter};
use crate::dirichlet::{auto_split, split_character, DirichletCharacter};
use crate::error::{Error, Result};
use crate::forms::{lift_eval, load_maass, CuspForm, EvalConfig};
use crate::hecke::{certify, permutation, random_sl2z, reduce_key};
use crate::oracle::{
    default_bench_cases, direct_integral_l, first_primitive, reflection_gap, scaling_report, truncation_check, BenchCase,
    BenchConfig,
};
use crate::orbit_sum::{fast_orbit_sums, naive_orbit_sums, SumKind, SumOptions, SumRequest};
use crate::sl2::{int_inverse, int_mul, GroupElement};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Coefficients of Delta kept in memory.
const DELTA_COEFFICIENTS: usize = 4000;

#[derive(Debug, Parser)]
#[command(name = "twistl", version, about = "Twisted L-values of level-one cusp forms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorArg {
    Left,
    Midpoint,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// `delta` or `maass:<path>`
    #[arg(long, global = true, default_value = "delta")]
    pub form: String,
    /// Dirichlet character as `q:label`
    #[arg(long = "char", global = true)]
    pub character: Option<String>,
    /// `MxN` or `auto`
    #[arg(long, global = true, default_value = "auto")]
    pub split: String,
    /// `re,im`
    #[arg(long, global = true, default_value = "0.5,0", allow_hyphen_values = true)]
    pub s: String,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, global = true, default_value_t = 8.0)]
    pub gamma: f64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. `TWISTL_THREADS` takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Geodesic coordinate for `orbit-sum`
    #[arg(long, global = true, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t: f64,
    /// Geodesic derivative order for `orbit-sum`
    #[arg(long, global = true, default_value_t = 0)]
    pub l: u32,
    /// Taylor anchor inside each panel
    #[arg(long, global = true, value_enum, default_value_t = AnchorArg::Left)]
    pub anchor: AnchorArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// L-value with the fast orbit-sum engine
    Compute,
    /// L-value with direct character sums
    Naive,
    /// L-value from direct Mellin integrals
    Oracle,
    /// One twisted orbit sum, fast and direct
    OrbitSum,
    /// Gauss sum of the character
    Gauss,
    /// Run the invariant suite
    Verify,
    /// Counter scaling over q = 6^j
    Bench,
}

/// Parsed and validated inputs.
pub struct Resolved {
    pub form: CuspForm,
    pub chi: Option<DirichletCharacter>,
    pub split: Option<(u64, u64)>,
    pub s: Complex64,
}

pub fn parse_complex(text: &str) -> Result<Complex64> {
    let bad = || Error::Domain(format!("expected a complex number as 're,im', got '{text}'"));
    let (re, im) = match text.split_once(',') {
        Some((a, b)) => (a, b),
        None => (text, "0"),
    };
    let re: f64 = re.trim().parse().map_err(|_| bad())?;
    let im: f64 = im.trim().parse().map_err(|_| bad())?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

pub fn parse_split(text: &str) -> Result<Option<(u64, u64)>> {
    if text == "auto" {
        return Ok(None);
    }
    let bad = || Error::InvalidSplit(format!("expected 'MxN' or 'auto', got '{text}'"));
    let (m, n) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let m: u64 = m.trim().parse().map_err(|_| bad())?;
    let n: u64 = n.trim().parse().map_err(|_| bad())?;
    if m == 0 || n == 0 {
        return Err(bad());
    }
    Ok(Some((m, n)))
}

pub fn parse_form(text: &str) -> Result<CuspForm> {
    if text == "delta" {
        return Ok(CuspForm::delta(DELTA_COEFFICIENTS));
    }
    match text.strip_prefix("maass:") {
        Some(path) => load_maass(&PathBuf::from(path)),
        None => Err(Error::Domain(format!("unknown form '{text}', expected 'delta' or 'maass:<path>'"))),
    }
}

fn resolve(common: &Common, needs_char: bool) -> Result<Resolved> {
    let s = parse_complex(&common.s)?;
    let split = parse_split(&common.split)?;
    if !(common.eps > 0.0 && common.eps <= 2.0) {
        return Err(Error::Domain(format!("--eps must lie in (0, 2], got {}", common.eps)));
    }
    if !(common.gamma > 0.0 && common.gamma.is_finite()) {
        return Err(Error::Domain(format!("--gamma must be positive, got {}", common.gamma)));
    }
    let chi = match &common.character {
        Some(c) => Some(c.parse::<DirichletCharacter>()?),
        None if needs_char => return Err(Error::Domain("--char is required".into())),
        None => None,
    };
    if let (Some(chi), Some((m, n))) = (&chi, split) {
        if m * n != chi.modulus() {
            return Err(Error::InvalidSplit(format!("{m}x{n} does not multiply to {}", chi.modulus())));
        }
    }
    let form = parse_form(&common.form)?;
    Ok(Resolved { form, chi, split, s })
}

/// Status of a failed run.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::MissingSpectralParameter
        | Error::Domain(_)
        | Error::InvalidLabel { .. }
        | Error::InvalidSplit(_)
        | Error::NonFactorable { .. }
        | Error::InvalidIndex { .. }
        | Error::NonPrimitiveCharacter(_)
        | Error::TooLarge(_)
        | Error::Io(_) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

/// The common output record.
#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub command: Command,
    pub value_re: f64,
    pub value_im: f64,
    pub err_estimate: f64,
    pub counters: CounterSnapshot,
    pub config: Value,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl Record {
    fn render(&self, format: OutputFormat) -> String {
        if let (OutputFormat::Csv, Some(csv)) = (format, self.details.get("csv").and_then(Value::as_str)) {
            return csv.to_string();
        }
        match format {
            OutputFormat::Json => serde_json::to_string_pretty(self).expect("records serialise") + "\n",
            OutputFormat::Csv => format!(
                "command,value_re,value_im,err_estimate,lift_evals,lift_deriv_evals,char_evals\n{},{:e},{:e},{:e},{},{},{}\n",
                command_name(self.command),
                self.value_re,
                self.value_im,
                self.err_estimate,
                self.counters.lift_evals,
                self.counters.lift_deriv_evals,
                self.counters.char_evals
            ),
            OutputFormat::Text => {
                let mut out = format!(
                    "{}: {:.15e} {:+.15e}i  (err <= {:.3e})\nlifts {}  derivatives {}  characters {}\n",
                    command_name(self.command),
                    self.value_re,
                    self.value_im,
                    self.err_estimate,
                    self.counters.lift_evals,
                    self.counters.lift_deriv_evals,
                    self.counters.char_evals
                );
                if let Some(checks) = self.details.get("checks").and_then(Value::as_array) {
                    for c in checks {
                        out.push_str(&format!(
                            "{} {}: {}\n",
                            if c["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
                            c["name"].as_str().unwrap_or(""),
                            c["detail"].as_str().unwrap_or("")
                        ));
                    }
                }
                out
            }
        }
    }
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Compute => "compute",
        Command::Naive => "naive",
        Command::Oracle => "oracle",
        Command::OrbitSum => "orbit-sum",
        Command::Gauss => "gauss",
        Command::Verify => "verify",
        Command::Bench => "bench",
    }
}

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Thread count after applying `TWISTL_THREADS`.
pub fn effective_threads(flag: usize) -> usize {
    std::env::var("TWISTL_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(flag)
}

/// Parse `args` and run; nothing is printed.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let threads = effective_threads(cli.common.threads);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return Outcome { code: EXIT_FAILURE, stdout: String::new(), stderr: format!("error: {e}\n") },
    };
    match pool.install(|| execute(&cli)) {
        Ok((record, code)) => Outcome { code, stdout: record.render(cli.common.output), stderr: String::new() },
        Err(e) => Outcome { code: exit_code(&e), stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let out = run_args(args);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}

fn config_echo(cli: &Cli) -> Value {
    json!({
        "command": command_name(cli.command),
        "form": cli.common.form,
        "char": cli.common.character,
        "split": cli.common.split,
        "s": cli.common.s,
        "eps": cli.common.eps,
        "gamma": cli.common.gamma,
        "seed": cli.common.seed,
        "t": cli.common.t,
        "l": cli.common.l,
        "anchor": cli.common.anchor,
    })
}

fn execute(cli: &Cli) -> Result<(Record, i32)> {
    let c = &cli.common;
    let needs_char = matches!(cli.command, Command::Compute | Command::Naive | Command::Oracle | Command::OrbitSum | Command::Gauss);
    let r = resolve(c, needs_char)?;
    let config = config_echo(cli);
    let counter = EvalCounter::new();
    let record = |value: Complex64, err: f64, counters: CounterSnapshot, details: Value| Record {
        command: cli.command,
        value_re: value.re,
        value_im: value.im,
        err_estimate: err,
        counters,
        config: config.clone(),
        details,
    };
    match cli.command {
        Command::Compute | Command::Naive => {
            let chi = r.chi.as_ref().expect("checked above");
            let pc = PrecisionConfig::new(r.s, c.eps, c.gamma)?;
            let engine = if cli.command == Command::Compute { Engine::Fast } else { Engine::Naive };
            let opts = AssemblyOptions {
                engine,
                split: r.split,
                anchor: match c.anchor {
                    AnchorArg::Left => Anchor::Left,
                    AnchorArg::Midpoint => Anchor::Midpoint,
                },
                ..Default::default()
            };
            let v = assemble_l(&r.form, chi, &pc, &opts, &counter)?;
            let details = json!({
                "route": v.route,
                "split": v.split,
                "c": v.constants.c,
                "grid_points": v.constants.grid_len(),
                "n_prime": v.constants.n_prime,
                "fallbacks": v.fallbacks,
            });
            Ok((record(v.value, v.err_estimate, counter.snapshot(), details), EXIT_OK))
        }
        Command::Oracle => {
            let chi = r.chi.as_ref().expect("checked above");
            let v = direct_integral_l(&r.form, chi, r.s, c.gamma)?;
            let details = json!({ "route": v.route, "c": v.c });
            Ok((record(v.value(), v.err_estimate, v.counters, details), EXIT_OK))
        }
        Command::OrbitSum => {
            let chi = r.chi.as_ref().expect("checked above");
            if !chi.is_primitive() {
                return Err(Error::NonPrimitiveCharacter(chi.to_string()));
            }
            let split = match r.split {
                Some((m, n)) => split_character(chi, m, n)?,
                None => auto_split(chi)?,
            };
            let kind = match parity_route(&r.form, chi) {
                ParityRoute::Standard => SumKind::Standard,
                ParityRoute::DxVariant => SumKind::Dx,
            };
            let opts = SumOptions { eps: c.eps, gamma: c.gamma, ..Default::default() };
            let req = SumRequest { form: &r.form, split: &split, t: c.t, l_max: c.l, kind, options: opts };
            let fast = fast_orbit_sums(&req, &counter)?;
            let fast_counters = counter.snapshot();
            let naive = naive_orbit_sums(&r.form, chi, c.t, c.l, kind, &opts.eval, &EvalCounter::new())?;
            let value = fast.value(c.l);
            let direct = naive[c.l as usize];
            let details = json!({
                "split": [split.m, split.n],
                "naive_re": direct.re,
                "naive_im": direct.im,
                "deviation": (value - direct).norm(),
                "boxes": fast.boxes,
                "points": fast.points,
                "fallbacks": fast.fallbacks,
                "degree": fast.degree,
            });
            Ok((record(value, fast.max_residual, fast_counters, details), EXIT_OK))
        }
        Command::Gauss => {
            let chi = r.chi.as_ref().expect("checked above");
            let crt = chi.gauss_sum();
            counter.add_chars(chi.modulus());
            let direct = chi.gauss_sum_direct();
            let details = json!({ "direct_re": direct.re, "direct_im": direct.im, "primitive": chi.is_primitive() });
            Ok((record(crt, (crt - direct).norm(), counter.snapshot(), details), EXIT_OK))
        }
        Command::Verify => {
            let checks = verify_suite(&r.form, c.seed, &counter)?;
            let passed = checks.iter().filter(|c| c.pass).count();
            let failed = checks.len() - passed;
            let worst = checks.iter().map(|c| c.ratio).fold(0.0f64, f64::max);
            let details = json!({ "checks": checks });
            let code = if failed == 0 { EXIT_OK } else { EXIT_TOLERANCE };
            Ok((record(Complex64::new(passed as f64, failed as f64), worst, counter.snapshot(), details), code))
        }
        Command::Bench => {
            let cases: Vec<BenchCase> = match (&r.chi, r.split) {
                (Some(chi), Some((m, n))) => vec![BenchCase { q: chi.modulus(), m, n }],
                _ => default_bench_cases(),
            };
            let cfg = BenchConfig { s: r.s, ..Default::default() };
            let report = scaling_report(&r.form, &cases, &cfg)?;
            let total = report.rows.iter().fold(CounterSnapshot::default(), |acc, row| CounterSnapshot {
                lift_evals: acc.lift_evals + row.lift_evals,
                lift_deriv_evals: acc.lift_deriv_evals + row.lift_deriv_evals,
                char_evals: acc.char_evals + row.char_evals,
            });
            let worst = report.rows.iter().filter_map(|row| row.rel_dev).fold(0.0f64, f64::max);
            let last = report.rows.last().map(|row| Complex64::new(row.fast_re, row.fast_im)).unwrap_or_default();
            let (fit, fits) = report.complexity_fit();
            if c.output == OutputFormat::Csv {
                let rec = record(last, worst, total, Value::Null);
                return Ok((Record { details: json!({ "csv": report.to_csv() }), ..rec }, EXIT_OK));
            }
            let details = json!({
                "rows": report.rows,
                "lifts_per_q": report.rows.iter().map(|row| row.lifts_per_q()).collect::<Vec<_>>(),
                "strictly_decreasing": report.strictly_decreasing(),
                "fit_constant": fit,
                "fit_holds": fits,
            });
            Ok((record(last, worst, total, details), EXIT_OK))
        }
    }
}

/// One line of the `verify` report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// measured / tolerance
    pub ratio: f64,
    pub detail: String,
}

impl Check {
    fn bound(name: &str, measured: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            pass: measured <= tol,
            ratio: measured / tol,
            detail: format!("{measured:.3e} <= {tol:.1e}"),
        }
    }

    fn flag(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.into(), pass, ratio: if pass { 0.0 } else { 1.0 }, detail }
    }
}

fn primitive_characters(q: u64) -> Vec<DirichletCharacter> {
    (1..q)
        .filter_map(|l| DirichletCharacter::from_label(q, l).ok())
        .filter(|c| c.is_primitive())
        .collect()
}

/// The invariant suite behind `verify`. Random choices come from `seed`;
/// the report contains no timings so repeated runs are identical.
pub fn verify_suite(form: &CuspForm, seed: u64, counter: &EvalCounter) -> Result<Vec<Check>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let holomorphic = form.spectral_parameter().is_none();

    let mut worst = 0.0f64;
    for q in [5u64, 7, 16, 36] {
        for chi in primitive_characters(q) {
            worst = worst.max((chi.gauss_sum().norm() - (q as f64).sqrt()).abs());
        }
    }
    checks.push(Check::bound("gauss_modulus", worst, 1e-10));

    let mut worst = 0.0f64;
    for q in 2..=60u64 {
        for chi in (1..q).filter_map(|l| DirichletCharacter::from_label(q, l).ok()) {
            worst = worst.max((chi.gauss_sum() - chi.gauss_sum_direct()).norm() / (q as f64).sqrt());
        }
    }
    checks.push(Check::bound("gauss_crt", worst, 1e-10));

    let mut ok = true;
    for _ in 0..40 {
        let l = rng.gen_range(2..=12u64);
        let a = random_sl2z(&mut rng, 30);
        let x = random_sl2z(&mut rng, 5);
        let b = int_mul(&int_mul(&x, &[[1, l as i64 * rng.gen_range(-3..=3)], [0, 1]]), &int_inverse(&x));
        let a2 = int_mul(&a, &b);
        let p1 = crate::hecke::OrbitPermutation::build(&crate::hecke::IndexSet::new(l), &a);
        let p2 = crate::hecke::OrbitPermutation::build(&crate::hecke::IndexSet::new(l), &a2);
        ok &= reduce_key(&a, l) == reduce_key(&a2, l) && p1.map == p2.map && certify(&p1) && certify(&p2);
        ok &= permutation(l, &a).map == p1.map;
    }
    checks.push(Check::flag("permutation_congruence", ok, "40 exact pairs".into()));

    let mut worst = 0.0f64;
    for (q, m) in [(15u64, 3u64), (36, 6)] {
        let chi = first_primitive(q).expect("modulus has primitive characters");
        let split = split_character(&chi, m, q / m)?;
        let lq = (q as f64).ln();
        for _ in 0..2 {
            let t = rng.gen_range(-2.5 * lq..2.5 * lq);
            let kind = if holomorphic { SumKind::Standard } else { SumKind::Dx };
            let req = SumRequest { form, split: &split, t, l_max: 2, kind, options: SumOptions::default() };
            let fast = fast_orbit_sums(&req, counter)?;
            let naive = naive_orbit_sums(form, &chi, t, 2, kind, &EvalConfig::default(), counter)?;
            for (f, n) in fast.complex_values().iter().zip(&naive) {
                worst = worst.max((f - n).norm() / (1.0 + n.norm()));
            }
        }
    }
    checks.push(Check::bound("orbit_sum_fast_vs_naive", worst, 1e-6));

    if holomorphic {
        let chi: DirichletCharacter = "16:3".parse()?;
        let s = Complex64::new(0.5, 0.0);
        let pc = PrecisionConfig::new(s, 0.5, 6.0)?;
        let opts = AssemblyOptions { split: Some((4, 4)), ..Default::default() };
        let fast = assemble_l(form, &chi, &pc, &opts, counter)?.value;
        let naive = assemble_l(form, &chi, &pc, &AssemblyOptions::naive(), counter)?.value;
        checks.push(Check::bound("engine_independence", (fast - naive).norm() / (1.0 + naive.norm()), 1e-6));
        let oracle = direct_integral_l(form, &chi, s, 8.0)?.value();
        checks.push(Check::bound("oracle_agreement", (fast - oracle).norm() / oracle.norm(), 1e-4));

        checks.push(Check::bound("truncation", truncation_check(form, 16, 2.5, 3.5)?, 1e-8));
        let q = 16u64;
        let candidates: Vec<u64> = (2..q - 1).filter(|n| n % 2 == 1).collect();
        let n = candidates[rng.gen_range(0..candidates.len())];
        checks.push(Check::bound("reflection", reflection_gap(form, q, n, 1.0 / q as f64)?, 1e-9));
    }

    let odd: DirichletCharacter = "5:2".parse()?;
    let synthetic = CuspForm::maass_even(9.533_695_261_353_557, vec![Complex64::new(1.0, 0.0); 4])?;
    let zero = standard_prefactor(&synthetic, &odd) == 0.0 && parity_route(&synthetic, &odd) == ParityRoute::DxVariant;
    checks.push(Check::flag("parity_routing", zero, "odd twist of an even Maass form".into()));

    let cfg = EvalConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let gamma = GroupElement::from_int(&random_sl2z(&mut rng, 6));
        let g = GroupElement::n(rng.gen_range(-0.5..0.5))
            .mul(&GroupElement::a(rng.gen_range(-0.5..1.5)))
            .mul(&GroupElement::k(rng.gen_range(0.0..std::f64::consts::TAU)));
        let a = lift_eval(form, &gamma.mul(&g), &cfg)?;
        // g sits high enough for the raw expansion
        let b = lift_eval(form, &g, &cfg.unreduced())?;
        worst = worst.max((a - b).norm() / b.norm().max(1.0));
    }
    checks.push(Check::bound("automorphy", worst, 1e-9));
    Ok(checks)
}
