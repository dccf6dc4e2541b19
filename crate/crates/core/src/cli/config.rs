//! Experiment configs: a TOML document with `[kernel]`, `[grid]`, `[params]`
//! and `[output]` sections, parsed strictly.
//!
//! Unknown keys and type mismatches are errors, and every error in the
//! document is reported with its line, not just the first.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::error::Error;
use crate::expr::Expr;
use crate::gridfn::{Grid, GridFunction};
use crate::kernel::{builtin, Kernel, KernelParams, ParamValue, BUILTIN_KERNELS};
use crate::limits::{default_bbm_s_list, default_ms_s_list};
use crate::variational::{Method, SolverSettings};

/// What a config is run as.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Energy,
    BbmSweep,
    MsSweep,
    SolveNonlocal,
    SolveLocal,
    Localize,
    Homogenize,
    Commute,
    VerifyKernel,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Energy => "energy",
            Task::BbmSweep => "bbm-sweep",
            Task::MsSweep => "ms-sweep",
            Task::SolveNonlocal => "solve-nonlocal",
            Task::SolveLocal => "solve-local",
            Task::Localize => "localize",
            Task::Homogenize => "homogenize",
            Task::Commute => "commute",
            Task::VerifyKernel => "verify-kernel",
        }
    }

    /// Whether `s_list` must increase (toward 1) or decrease (toward 0).
    fn s_list_increasing(self) -> bool {
        self != Task::MsSweep
    }

    fn default_box(self, n: usize) -> Vec<f64> {
        match (self, n) {
            // Test functions for the s -> 0 sweep live away from the origin.
            (Task::MsSweep, 1) => vec![0.0, 3.0],
            (Task::MsSweep, _) => vec![0.0, 3.0, 0.0, 3.0],
            (_, 1) => vec![-1.0, 1.0],
            _ => vec![-1.0, 1.0, -1.0, 1.0],
        }
    }

    fn default_nodes(self, n: usize) -> usize {
        match (self, n) {
            (Task::BbmSweep | Task::MsSweep, 1) => 257,
            (_, 1) => 129,
            _ => 33,
        }
    }

    fn default_u(self, n: usize) -> &'static str {
        match (self, n) {
            (Task::MsSweep, 1) => "bump(1, 2)",
            (Task::MsSweep, _) => "bump(1, 2) * bump(1, 2, y)",
            (_, 1) => "bump(-1, 1)",
            _ => "bump(-1, 1) * bump(-1, 1, y)",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One validation problem; `line` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// A validated experiment with defaults applied.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub kernel_name: String,
    pub kernel_params: KernelParams,
    pub kernel: Kernel,
    pub dim: usize,
    pub bounds: Vec<f64>,
    pub nodes: usize,
    pub s: f64,
    pub p: f64,
    pub s_list: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub f: Expr,
    pub u: Expr,
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub samples: usize,
    pub output: Option<PathBuf>,
    pub breakdown: bool,
}

impl ExperimentConfig {
    pub fn grid(&self) -> Grid {
        Grid::new(self.dim, &self.bounds, self.nodes).expect("validated grid")
    }

    /// The test function `u`, pinned to zero on the boundary.
    pub fn u_function(&self) -> GridFunction {
        GridFunction::from_fn(self.grid(), true, |x| self.u.eval(x))
    }

    /// The source `f`, sampled at every node.
    pub fn source(&self) -> GridFunction {
        GridFunction::from_fn(self.grid(), false, |x| self.f.eval(x))
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings { tolerance: self.tolerance, max_iter: self.max_iter, method: Method::Auto, ..Default::default() }
    }
}

/// Accepted keys per section; `kernel.params` is free-form.
const SECTIONS: [(&str, &[&str]); 4] = [
    ("kernel", &["name", "table", "params"]),
    ("grid", &["n", "box", "N"]),
    ("params", &["s", "p", "s_list", "eps_list", "f", "u", "tolerance", "max_iter", "seed", "samples"]),
    ("output", &["path", "breakdown"]),
];

struct Reader<'t> {
    text: &'t str,
    errors: Vec<ConfigError>,
    lines: BTreeMap<String, usize>,
}

type Value<'i> = Spanned<DeValue<'i>>;

fn type_name(v: &DeValue) -> &'static str {
    match v {
        DeValue::String(_) => "a string",
        DeValue::Integer(_) => "an integer",
        DeValue::Float(_) => "a float",
        DeValue::Boolean(_) => "a boolean",
        DeValue::Datetime(_) => "a datetime",
        DeValue::Array(_) => "an array",
        DeValue::Table(_) => "a table",
    }
}

fn as_number(v: &DeValue) -> Option<f64> {
    match v {
        DeValue::Integer(i) => i64::from_str_radix(i.as_str(), i.radix()).ok().map(|x| x as f64),
        DeValue::Float(f) => f.as_str().parse().ok(),
        _ => None,
    }
}

impl Reader<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
    }

    fn error(&mut self, span: Option<Range<usize>>, message: impl Into<String>) {
        let line = span.map(|s| self.line(s));
        self.errors.push(ConfigError { line, message: message.into() });
    }

    fn error_at(&mut self, key: &str, message: impl Into<String>) {
        let line = self.lines.get(key).copied();
        self.errors.push(ConfigError { line, message: message.into() });
    }

    fn mismatch(&mut self, key: &str, want: &str, v: &Value) {
        self.error(Some(v.span()), format!("{key} must be {want}, got {}", type_name(v.get_ref())));
    }

    fn number(&mut self, key: &str, v: &Value) -> Option<f64> {
        let x = as_number(v.get_ref());
        if x.is_none() {
            self.mismatch(key, "a number", v);
        }
        x
    }

    fn integer(&mut self, key: &str, v: &Value) -> Option<i64> {
        match v.get_ref() {
            DeValue::Integer(i) => {
                let x = i64::from_str_radix(i.as_str(), i.radix()).ok();
                if x.is_none() {
                    self.error(Some(v.span()), format!("{key} is out of range"));
                }
                x
            }
            _ => {
                self.mismatch(key, "an integer", v);
                None
            }
        }
    }

    fn string(&mut self, key: &str, v: &Value) -> Option<String> {
        match v.get_ref() {
            DeValue::String(s) => Some(s.to_string()),
            _ => {
                self.mismatch(key, "a string", v);
                None
            }
        }
    }

    fn numbers(&mut self, key: &str, v: &Value) -> Option<Vec<f64>> {
        let Some(arr) = v.get_ref().as_array() else {
            self.mismatch(key, "an array of numbers", v);
            return None;
        };
        let mut out = Vec::with_capacity(arr.len());
        let mut ok = true;
        for item in arr.iter() {
            match as_number(item.get_ref()) {
                Some(x) => out.push(x),
                None => {
                    self.error(Some(item.span()), format!("{key} entries must be numbers, got {}", type_name(item.get_ref())));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }
}

#[derive(Default)]
struct Raw {
    kernel_name: Option<String>,
    kernel_table: Option<String>,
    kernel_params: KernelParams,
    n: Option<i64>,
    bounds: Option<Vec<f64>>,
    nodes: Option<i64>,
    s: Option<f64>,
    p: Option<f64>,
    s_list: Option<Vec<f64>>,
    eps_list: Option<Vec<f64>>,
    f: Option<String>,
    u: Option<String>,
    tolerance: Option<f64>,
    max_iter: Option<i64>,
    seed: Option<i64>,
    samples: Option<i64>,
    path: Option<String>,
    breakdown: Option<bool>,
}

fn read_entry(r: &mut Reader, raw: &mut Raw, section: &str, key: &str, v: &Value) {
    let full = format!("{section}.{key}");
    r.lines.insert(full.clone(), r.line(v.span()));
    match (section, key) {
        ("kernel", "name") => raw.kernel_name = r.string(&full, v),
        ("kernel", "table") => raw.kernel_table = r.string(&full, v),
        ("kernel", "params") => {
            let Some(t) = v.get_ref().as_table() else {
                return r.mismatch(&full, "a table", v);
            };
            for (k, pv) in t.iter() {
                let pk = format!("kernel.params.{}", k.get_ref());
                let value = match pv.get_ref() {
                    DeValue::String(s) => Some(ParamValue::Text(s.to_string())),
                    other => as_number(other).map(ParamValue::Number),
                };
                match value {
                    Some(x) => {
                        raw.kernel_params.insert(k.get_ref().to_string(), x);
                    }
                    None => r.mismatch(&pk, "a number or a string", pv),
                }
            }
        }
        ("grid", "n") => raw.n = r.integer(&full, v),
        ("grid", "box") => raw.bounds = r.numbers(&full, v),
        ("grid", "N") => raw.nodes = r.integer(&full, v),
        ("params", "s") => raw.s = r.number(&full, v),
        ("params", "p") => raw.p = r.number(&full, v),
        ("params", "s_list") => raw.s_list = r.numbers(&full, v),
        ("params", "eps_list") => raw.eps_list = r.numbers(&full, v),
        ("params", "f") => raw.f = r.string(&full, v),
        ("params", "u") => raw.u = r.string(&full, v),
        ("params", "tolerance") => raw.tolerance = r.number(&full, v),
        ("params", "max_iter") => raw.max_iter = r.integer(&full, v),
        ("params", "seed") => raw.seed = r.integer(&full, v),
        ("params", "samples") => raw.samples = r.integer(&full, v),
        ("output", "path") => raw.path = r.string(&full, v),
        ("output", "breakdown") => match v.get_ref() {
            DeValue::Boolean(b) => raw.breakdown = Some(*b),
            _ => r.mismatch(&full, "a boolean", v),
        },
        _ => unreachable!("key filtered against SECTIONS"),
    }
}

/// Parses and validates a config for `task`. Relative paths (`kernel.table`,
/// `output.path`) are resolved against `base`.
pub fn parse_config(text: &str, task: Task, base: &Path) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let doc = match DeTable::parse(text) {
        Ok(d) => d,
        Err(e) => {
            let mut r = Reader { text, errors: Vec::new(), lines: BTreeMap::new() };
            r.error(e.span(), e.message().trim().to_string());
            return Err(r.errors);
        }
    };
    let mut r = Reader { text, errors: Vec::new(), lines: BTreeMap::new() };
    let mut raw = Raw::default();
    for (name, section) in doc.get_ref().iter() {
        let name_str: &str = name.get_ref();
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == name_str) else {
            let known: Vec<&str> = SECTIONS.iter().map(|(s, _)| *s).collect();
            r.error(Some(name.span()), format!("unknown section `{name_str}` (expected one of {})", known.join(", ")));
            continue;
        };
        let Some(table) = section.get_ref().as_table() else {
            r.mismatch(name_str, "a table", section);
            continue;
        };
        for (key, value) in table.iter() {
            let key_str: &str = key.get_ref();
            if !keys.contains(&key_str) {
                r.error(Some(key.span()), format!("unknown key `{name_str}.{key_str}` (expected one of {})", keys.join(", ")));
                continue;
            }
            read_entry(&mut r, &mut raw, name_str, key_str, value);
        }
    }
    validate(r, raw, task, base)
}

fn validate(mut r: Reader, raw: Raw, task: Task, base: &Path) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let dim = raw.n.unwrap_or(1);
    if dim != 1 && dim != 2 {
        r.error_at("grid.n", format!("n must be 1 or 2, got {dim}"));
    }
    let dim = if dim == 2 { 2 } else { 1 };
    let bounds = raw.bounds.unwrap_or_else(|| task.default_box(dim));
    if bounds.len() != 2 * dim {
        r.error_at("grid.box", format!("box needs {} numbers for n = {dim}, got {}", 2 * dim, bounds.len()));
    } else if bounds.chunks(2).any(|ab| !(ab[0].is_finite() && ab[1].is_finite() && ab[0] < ab[1])) {
        r.error_at("grid.box", "box must list finite intervals [lo, hi] with lo < hi");
    }
    let nodes = raw.nodes.unwrap_or(task.default_nodes(dim) as i64);
    if nodes < 3 {
        r.error_at("grid.N", format!("N must be at least 3, got {nodes}"));
    }

    let s = raw.s.unwrap_or(0.5);
    if !(s > 0.0 && s < 1.0) {
        r.error_at("params.s", "s must lie in (0,1)");
    }
    let p = raw.p.unwrap_or(2.0);
    if !(p >= 1.0 && p.is_finite()) {
        r.error_at("params.p", "p must be a finite number >= 1");
    }
    let increasing = task.s_list_increasing();
    let s_list = raw.s_list.unwrap_or_else(|| if increasing { default_bbm_s_list() } else { default_ms_s_list() });
    if s_list.is_empty() {
        r.error_at("params.s_list", "s_list must not be empty");
    } else if s_list.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        r.error_at("params.s_list", "s_list entries must lie in (0,1)");
    } else if !s_list.windows(2).all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] }) {
        let dir = if increasing { "increase toward 1" } else { "decrease toward 0" };
        r.error_at("params.s_list", format!("s_list must strictly {dir} for {task}"));
    }
    let eps_list = raw.eps_list.unwrap_or_else(|| vec![0.25, 0.125, 0.0625]);
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0 && ((1.0 / e) - (1.0 / e).round()).abs() < 1e-9)) {
        r.error_at("params.eps_list", "eps_list entries must be of the form 1/k for a positive integer k");
    }
    let tolerance = raw.tolerance.unwrap_or(1e-8);
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        r.error_at("params.tolerance", "tolerance must be positive");
    }
    let max_iter = raw.max_iter.unwrap_or(10_000);
    if max_iter < 1 {
        r.error_at("params.max_iter", "max_iter must be at least 1");
    }
    let seed = raw.seed.unwrap_or(0);
    if seed < 0 {
        r.error_at("params.seed", "seed must be non-negative");
    }
    let samples = raw.samples.unwrap_or(1024);
    if samples < 1 {
        r.error_at("params.samples", "samples must be at least 1");
    }

    let expression = |r: &mut Reader, key: &str, src: &str| match Expr::parse(src) {
        Ok(e) if e.arity() > dim => {
            r.error_at(key, format!("`{src}` uses y but the grid is one-dimensional"));
            None
        }
        Ok(e) => Some(e),
        Err(e) => {
            r.error_at(key, format!("{key}: {e}"));
            None
        }
    };
    let f = expression(&mut r, "params.f", raw.f.as_deref().unwrap_or("const(1)"));
    let u = expression(&mut r, "params.u", raw.u.as_deref().unwrap_or(task.default_u(dim)));

    let kernel_name = raw.kernel_name.unwrap_or_else(|| "constant".into());
    let mut kernel_params = raw.kernel_params;
    let mut kernel = None;
    if !BUILTIN_KERNELS.contains(&kernel_name.as_str()) {
        r.error_at("kernel.name", format!("unknown kernel `{kernel_name}` (expected one of {})", BUILTIN_KERNELS.join(", ")));
    } else {
        if let Some(t) = raw.kernel_table {
            if kernel_params.contains_key("table") {
                r.error_at("kernel.table", "give the table either as kernel.table or kernel.params.table, not both");
            }
            kernel_params.insert("table".into(), ParamValue::Text(base.join(t).to_string_lossy().into_owned()));
        }
        if matches!(kernel_name.as_str(), "constant" | "matrix-alpha" | "separable-angular") && !kernel_params.contains_key("n") {
            kernel_params.insert("n".into(), ParamValue::Number(dim as f64));
        }
        match builtin(&kernel_name, &kernel_params) {
            Ok(k) if k.dim() != dim => {
                r.error_at("kernel.name", format!("kernel `{kernel_name}` is {}-dimensional but grid.n = {dim}", k.dim()))
            }
            Ok(k) => kernel = Some(k),
            Err(Error::Io(e)) => r.error_at("kernel.table", format!("cannot read kernel table: {e}")),
            Err(e) => r.error_at("kernel.name", e.to_string()),
        }
    }

    match (kernel, f, u) {
        (Some(kernel), Some(f), Some(u)) if r.errors.is_empty() => Ok(ExperimentConfig {
            task,
            kernel_name,
            kernel_params,
            kernel,
            dim,
            bounds,
            nodes: nodes as usize,
            s,
            p,
            s_list,
            eps_list,
            f,
            u,
            tolerance,
            max_iter: max_iter as usize,
            seed: seed as u64,
            samples: samples as usize,
            output: raw.path.map(|p| base.join(p)),
            breakdown: raw.breakdown.unwrap_or(false),
        }),
        _ => {
            r.errors.sort_by_key(|e| e.line);
            Err(r.errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, task: Task) -> Result<ExperimentConfig, Vec<ConfigError>> {
        parse_config(text, task, Path::new("."))
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse("[kernel]\nname = \"constant\"\n", Task::Energy).unwrap();
        assert_eq!((c.dim, c.nodes, c.s, c.p), (1, 129, 0.5, 2.0));
        assert_eq!(c.bounds, vec![-1.0, 1.0]);
        assert_eq!(c.kernel.constant_value(), Some(1.0));
        assert_eq!(c.tolerance, 1e-8);
        assert!(c.output.is_none() && !c.breakdown);
        let e = parse("", Task::MsSweep).unwrap();
        assert_eq!(e.bounds, vec![0.0, 3.0]);
        assert_eq!(e.s_list, default_ms_s_list());
    }

    #[test]
    fn s_outside_open_interval() {
        let errs = parse("[params]\ns = 1.0\n", Task::Energy).unwrap_err();
        assert_eq!(errs, vec![ConfigError { line: Some(2), message: "s must lie in (0,1)".into() }]);
    }

    #[test]
    fn s_list_is_kept_in_order() {
        let c = parse("[params]\ns_list = [0.75, 0.875, 0.9375]\n", Task::BbmSweep).unwrap();
        assert_eq!(c.s_list, vec![0.75, 0.875, 0.9375]);
        assert!(parse("[params]\ns_list = [0.75, 0.875]\n", Task::MsSweep).is_err());
    }

    #[test]
    fn collects_every_error_with_lines() {
        let text = "[kernel]\nname = \"nope\"\ncolour = 3\n[grid]\nN = \"big\"\n[params]\np = 0.5\n[extra]\n";
        let errs = parse(text, Task::Energy).unwrap_err();
        let lines: Vec<Option<usize>> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![Some(2), Some(3), Some(5), Some(7), Some(8)], "{errs:?}");
        let text = "[kernel]\nname = \"nope\"\n[params]\np = 0.5\ns = 0\nf = \"sin(\"\n";
        let errs = parse(text, Task::Energy).unwrap_err();
        let lines: Vec<Option<usize>> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![Some(2), Some(4), Some(5), Some(6)], "{errs:?}");
    }

    #[test]
    fn kernel_params_and_dimension() {
        let c = parse("[kernel]\nname = \"periodic-1d\"\n[kernel.params]\nA0 = 3\nA1 = 1.5\n", Task::Homogenize).unwrap();
        assert_eq!(c.kernel.bounds(), (1.5, 4.5));
        let c = parse("[kernel]\nname = \"separable-angular\"\n[grid]\nn = 2\n", Task::Energy).unwrap();
        assert_eq!(c.kernel.dim(), 2);
        assert_eq!(c.bounds.len(), 4);
        let errs = parse("[kernel]\nname = \"periodic-1d\"\n[kernel.params]\nA0 = 1\n", Task::Energy).unwrap_err();
        assert_eq!(errs[0].line, Some(2));
        let errs = parse("[params]\nu = \"bump(-1, 1, y)\"\n", Task::Energy).unwrap_err();
        assert_eq!(errs[0].line, Some(2));
    }

    #[test]
    fn syntax_errors_have_lines() {
        let errs = parse("[grid]\nn = 1\nn = 2\n", Task::Energy).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, Some(3), "{errs:?}");
    }
}
