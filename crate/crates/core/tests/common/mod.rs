//! Oracles, the kernel/function corpus and property runners shared by the
//! integration tests. Nothing here calls into the library to compute a
//! reference value.
#![allow(dead_code)]

use std::f64::consts::PI;

use anisofrac::energy::{anisotropic_energy, bbm_upper_bound_check};
use anisofrac::gridfn::{FractionalParams, Grid, GridFunction};
use anisofrac::kernel::{builtin, symmetrize, Kernel, KernelParams, ParamValue};
use anisofrac::limits::LimitDensity;
use anisofrac::variational::{solve_local, solve_nonlocal, Coefficient, LocalProblem, NonlocalProblem};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// `exp(1 - 1/(1 - t²))` on `(a, b)` with `t` mapped to `(-1, 1)`.
pub fn bump(a: f64, b: f64, x: f64) -> f64 {
    if x <= a || x >= b {
        return 0.0;
    }
    let t = (2.0 * x - a - b) / (b - a);
    (1.0 - 1.0 / (1.0 - t * t)).exp()
}

pub fn bump_derivative(a: f64, b: f64, x: f64) -> f64 {
    if x <= a || x >= b {
        return 0.0;
    }
    let t = (2.0 * x - a - b) / (b - a);
    let q = 1.0 - t * t;
    bump(a, b, x) * (-2.0 * t / (q * q)) * 2.0 / (b - a)
}

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn line(a: f64, b: f64, n: usize) -> Grid {
    Grid::new_1d(a, b, n).unwrap()
}

pub fn sample(g: &Grid, f: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_fn(g.clone(), true, |x| f(x[0]))
}

pub fn params(kv: &[(&str, f64)]) -> KernelParams {
    kv.iter().map(|(k, v)| (k.to_string(), ParamValue::Number(*v))).collect()
}

/// `2 + ½ sin(2πx + h)`: bounded but not symmetric under `(x, h) -> (x - h, -h)`.
pub fn asymmetric_kernel() -> Kernel {
    Kernel::new(
        "asymmetric",
        1,
        (1.5, 2.5),
        |x, h| 2.0 + 0.5 * (2.0 * PI * x[0] + h[0]).sin(),
        |x, _| 2.0 + 0.5 * (2.0 * PI * x[0]).sin(),
    )
    .unwrap()
}

/// One-dimensional kernel corpus, indexed by `which`; `a`, `b` in [0, 1) tune it.
pub fn corpus_kernel(which: usize, a: f64, b: f64) -> Kernel {
    match which % 6 {
        0 => builtin("constant", &params(&[("c", 0.5 + 2.0 * a)])).unwrap(),
        1 => builtin("periodic-1d", &params(&[("A0", 2.0), ("A1", 1.8 * a - 0.9), ("period_len", 0.5 + b)])).unwrap(),
        2 => builtin("separable-angular", &params(&[("n", 1.0), ("c0", 1.0 + a), ("c2", b)])).unwrap(),
        3 => builtin("matrix-alpha", &params(&[("n", 1.0), ("alpha", 0.5 + 2.0 * a), ("amp", 0.9 * b), ("m11", 1.5)])).unwrap(),
        4 => asymmetric_kernel(),
        _ => {
            let mut t = Vec::new();
            for i in 0..5 {
                for j in 0..4 {
                    let (x, h) = (-1.0 + 0.5 * i as f64, -2.0 + 4.0 / 3.0 * j as f64);
                    t.push((x, h, 1.0 + a + b * ((x + 0.3 * h) * 2.0).cos().abs()));
                }
            }
            anisofrac::kernel::tabulated(&t).unwrap()
        }
    }
}

/// Random 1D test function on `[-1, 1]`: a scaled bump on `(lo, hi)` plus a scaled hat.
#[derive(Debug, Clone, Copy)]
pub struct FnSpec {
    pub nodes: usize,
    pub lo: f64,
    pub hi: f64,
    pub amp: f64,
    pub hat: f64,
}

impl FnSpec {
    pub fn build(&self) -> GridFunction {
        let (lo, hi, amp, hat) = (self.lo, self.hi, self.amp, self.hat);
        sample(&line(-1.0, 1.0, self.nodes), move |x| amp * bump(lo, hi, x) + hat * (1.0 - x.abs()))
    }
}

pub fn fn_spec() -> impl Strategy<Value = FnSpec> {
    (5usize..=33, -1.0f64..-0.1, 0.1f64..1.0, -3.0f64..3.0, -1.0f64..1.0)
        .prop_map(|(nodes, lo, hi, amp, hat)| FnSpec { nodes, lo, hi, amp, hat })
}

pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn finish<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// `J(c u) = |c|^p J(u)` to 1e-10 relative.
pub fn prop_homogeneity(cases: u32) -> Result<(), String> {
    let strat = (0usize..6, 0.0f64..1.0, 0.0f64..1.0, fn_spec(), 0.05f64..0.95, 1.0f64..4.0, -5.0f64..5.0);
    finish(runner(cases).run(&strat, |(w, a, b, spec, s, p, c)| {
        let k = corpus_kernel(w, a, b);
        let u = spec.build();
        let fp = FractionalParams::new(s, p).unwrap();
        let j = anisotropic_energy(&k, &u, fp).unwrap().value;
        let jc = anisotropic_energy(&k, &u.scaled(c), fp).unwrap().value;
        let want = c.abs().powf(p) * j;
        prop_assert!((jc - want).abs() <= 1e-10 * want.abs().max(1e-300), "{jc} vs {want}");
        Ok(())
    }))
}

/// `|J_k(u) - J_sym(k)(u)|` within the combined error bounds.
pub fn prop_symmetrization(cases: u32) -> Result<(), String> {
    let strat = (0usize..6, 0.0f64..1.0, 0.0f64..1.0, fn_spec(), 0.05f64..0.95, 1.0f64..4.0);
    finish(runner(cases).run(&strat, |(w, a, b, spec, s, p)| {
        let k = corpus_kernel(w, a, b);
        let u = spec.build();
        let fp = FractionalParams::new(s, p).unwrap();
        let j = anisotropic_energy(&k, &u, fp).unwrap();
        let js = anisotropic_energy(&symmetrize(&k), &u, fp).unwrap();
        prop_assert!(
            (j.value - js.value).abs() <= j.error_bound + js.error_bound + 1e-12 * j.value.abs(),
            "{} vs {} (bounds {} {})",
            j.value,
            js.value,
            j.error_bound,
            js.error_bound
        );
        Ok(())
    }))
}

/// `m_- [u]^p ≤ p/(1-s) J ≤ m_+ [u]^p` up to quadrature error, and the
/// upper link of the chain.
pub fn prop_sandwich(cases: u32) -> Result<(), String> {
    let strat = (0usize..6, 0.0f64..1.0, 0.0f64..1.0, fn_spec(), 0.05f64..0.95, 1.0f64..4.0);
    finish(runner(cases).run(&strat, |(w, a, b, spec, s, p)| {
        let k = corpus_kernel(w, a, b);
        let u = spec.build();
        let fp = FractionalParams::new(s, p).unwrap();
        let [lower, upper] = bbm_upper_bound_check(&k, &u, fp).unwrap();
        prop_assert!(lower.passed, "{lower:?}");
        prop_assert!(upper.passed, "{upper:?}");
        let raw = anisotropic_energy(&k, &u, fp).unwrap().value * p / (1.0 - s);
        let semi = lower.rhs / k.m_plus();
        let tol = lower.tolerance * (1.0 + k.m_minus() / k.m_plus());
        prop_assert!(k.m_minus() * semi <= raw * (1.0 + 1e-12) + tol, "{} > {raw}", k.m_minus() * semi);
        Ok(())
    }))
}

/// `A(x) ξ·ξ = 𝒜(x, ξ)` for p = 2 in 1D and 2D, 1e-10 relative.
pub fn prop_limit_matrix(cases: u32) -> Result<(), String> {
    let strat = (0usize..5, 0.0f64..1.0, 0.0f64..1.0, -2.0f64..2.0, -2.0f64..2.0, -3.0f64..3.0, -3.0f64..3.0);
    finish(runner(cases).run(&strat, |(w, a, b, x0, x1, z0, z1)| {
        let (k, x, xi) = match w {
            0 => (builtin("separable-angular", &params(&[("n", 2.0), ("c0", 1.0 + a), ("c2", b)])).unwrap(), vec![x0, x1], vec![z0, z1]),
            1 => (
                builtin("matrix-alpha", &params(&[("alpha", 0.5 + 2.0 * a), ("amp", 0.9 * b), ("m11", 2.0), ("m12", 0.3)])).unwrap(),
                vec![x0, x1],
                vec![z0, z1],
            ),
            2 => (builtin("constant", &params(&[("c", 1.0 + a), ("n", 2.0)])).unwrap(), vec![x0, x1], vec![z0, z1]),
            _ => (corpus_kernel(w + b as usize, a, b), vec![x0], vec![z0]),
        };
        let ld = LimitDensity::new(&k, 2.0).unwrap();
        let m = ld.limit_matrix(&x).unwrap();
        let n = xi.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += m[(i, j)] * xi[i] * xi[j];
            }
        }
        let d = ld.limit_density(&x, &xi);
        prop_assert!((q - d).abs() <= 1e-10 * d.abs().max(1e-300), "{q} vs {d}");
        prop_assert!((m[(0, n - 1)] - m[(n - 1, 0)]).abs() <= 1e-14 * m[(0, 0)].abs());
        Ok(())
    }))
}

/// Every accepted step of the nonlocal and local solvers lowers (or keeps) the objective.
pub fn prop_monotone_trace(cases: u32) -> Result<(), String> {
    let strat = (0usize..6, 0.0f64..1.0, 0.0f64..1.0, 5usize..=25, 0.05f64..0.95, 1.3f64..4.0, -2.0f64..2.0, -2.0f64..2.0);
    finish(runner(cases).run(&strat, |(w, a, b, nodes, s, p, c0, c1)| {
        let k = corpus_kernel(w, a, b);
        let f = GridFunction::from_fn(line(-1.0, 1.0, nodes), false, |x| c0 + c1 * (3.0 * x[0]).sin());
        let r = solve_nonlocal(&NonlocalProblem::new(&k, FractionalParams::new(s, p).unwrap(), &f)).unwrap();
        prop_assert!(r.trace.windows(2).all(|t| t[1] <= t[0]), "nonlocal trace {:?}", r.trace);
        let l = solve_local(&LocalProblem::new(Coefficient::density(&k, p).unwrap(), p, &f)).unwrap();
        prop_assert!(l.trace.windows(2).all(|t| t[1] <= t[0]), "local trace {:?}", l.trace);
        Ok(())
    }))
}

/// Runs the CLI binary; returns (status, stdout, stderr).
pub fn cli(args: &[&str], threads: Option<usize>) -> (i32, String, String) {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_anisofrac"));
    cmd.args(args).env_remove("ANISOFRAC_THREADS");
    if let Some(t) = threads {
        cmd.env("ANISOFRAC_THREADS", t.to_string());
    }
    let out = cmd.output().expect("run anisofrac");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Configs for the determinism check, as `(subcommand, toml)`.
pub const DETERMINISM_CONFIGS: [(&str, &str); 7] = [
    ("energy", "[kernel]\nname = \"periodic-1d\"\n[params]\ns = 0.3\np = 3\nu = \"bump(-0.8, 0.5)\"\n[output]\nbreakdown = true\n"),
    ("bbm-sweep", "[kernel]\nname = \"periodic-1d\"\n[grid]\nN = 129\n[params]\nu = \"bump(-0.9, 0.7)\"\n"),
    ("ms-sweep", "[kernel]\nname = \"separable-angular\"\n[grid]\nN = 129\n"),
    ("solve-nonlocal", "[kernel]\nname = \"periodic-1d\"\n[grid]\nN = 65\n[params]\ns = 0.6\np = 3\nf = \"1 + sin(3 * x)\"\n"),
    ("localize", "[kernel]\nname = \"periodic-1d\"\n[grid]\nN = 65\n"),
    ("commute", "[kernel]\nname = \"periodic-1d\"\n[grid]\nN = 33\n[params]\neps_list = [0.5, 0.25]\ns_list = [0.75, 0.875]\n"),
    ("energy", "[kernel]\nname = \"matrix-alpha\"\n[kernel.params]\namp = 0.4\nm11 = 2\n[grid]\nn = 2\nN = 13\n"),
];

/// Runs every determinism config with 1, 2 and 8 workers (once through
/// `--threads`, once through the environment) and compares the CSV bytes.
pub fn determinism_across_workers() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (i, (cmd, toml)) in DETERMINISM_CONFIGS.iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.toml"));
        std::fs::write(&cfg, toml).map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for t in [1usize, 2, 8] {
            let out = dir.path().join(format!("o{i}_{t}.csv"));
            let ts = t.to_string();
            let (code, _, err) = cli(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", &ts], None);
            if code != 0 {
                return Err(format!("{cmd} with {t} threads exited {code}: {err}"));
            }
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
            let (code, stdout, err) = cli(&[cmd, "--config", cfg.to_str().unwrap()], Some(t));
            if code != 0 {
                return Err(format!("{cmd} with ANISOFRAC_THREADS={t} exited {code}: {err}"));
            }
            outputs.push(stdout.into_bytes());
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{cmd} config {i}: CSV differs across worker counts"));
        }
    }
    Ok(())
}
