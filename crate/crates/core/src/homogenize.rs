//! One-dimensional periodic homogenization: the effective coefficients `A*`
//! (homogenize, then localize) and `Ā` (localize the averaged kernel), the cell
//! problem that decides `A*`, and the experiment showing the two orders of
//! limits give different solutions.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::energy::Form;
use crate::error::{invalid, Error, Result};
use crate::gridfn::{FractionalParams, Grid, GridFunction};
use crate::kernel::Kernel;
use crate::quadrature::pairwise_sum;
use crate::variational::{
    minimize, solve_local, solve_nonlocal, Coefficient, DescentSettings, LocalProblem, NonlocalProblem, Program,
    SolverSettings,
};

/// Midpoints used for cell averages.
const AVERAGE_POINTS: usize = 8192;
/// Points of the average over one period inside the averaged kernel.
const KERNEL_AVERAGE_POINTS: usize = 128;
/// Cells of the discrete cell problem.
pub const CELL_NODES: usize = 512;

/// `A(y)` on the unit period, with its exponent.
#[derive(Clone)]
pub struct PeriodicCoefficient {
    a: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    p: f64,
}

impl fmt::Debug for PeriodicCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicCoefficient").field("p", &self.p).field("mean", &self.mean()).finish()
    }
}

fn average(f: impl Fn(f64) -> f64) -> f64 {
    let m = AVERAGE_POINTS;
    let v: Vec<f64> = (0..m).map(|j| f((j as f64 + 0.5) / m as f64)).collect();
    pairwise_sum(&v) / m as f64
}

impl PeriodicCoefficient {
    /// `a` is read on `[0, 1)` only and must be positive there.
    pub fn new(p: f64, a: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid(format!("homogenization needs 1 < p < inf, got {p}")));
        }
        let c = Self { a: Arc::new(a), p };
        let lo = (0..AVERAGE_POINTS).map(|j| c.value((j as f64 + 0.5) / AVERAGE_POINTS as f64)).fold(f64::INFINITY, f64::min);
        if !(lo > 0.0) {
            return Err(invalid("periodic coefficient must be positive"));
        }
        Ok(c)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `A(y)` with `y` reduced mod 1.
    pub fn value(&self, y: f64) -> f64 {
        (self.a)(y.rem_euclid(1.0))
    }

    /// `∫₀¹ A`.
    pub fn mean(&self) -> f64 {
        average(|y| self.value(y))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        average(|y| (self.value(y) - m).powi(2))
    }

    /// `(∫ A^{-1/(p-1)})^{-1/(p-1)}`, the formula as printed.
    pub fn printed_star(&self) -> f64 {
        let q = 1.0 / (self.p - 1.0);
        average(|y| self.value(y).powf(-q)).powf(-q)
    }

    /// `(∫ A^{-1/(p-1)})^{-(p-1)}`, the minimum of the 1D cell problem.
    pub fn classical_star(&self) -> f64 {
        let q = 1.0 / (self.p - 1.0);
        average(|y| self.value(y).powf(-q)).powf(-(self.p - 1.0))
    }
}

fn check_periodic_1d(k: &Kernel) -> Result<()> {
    if k.dim() != 1 {
        return Err(Error::Dimension(format!("homogenization is one-dimensional, kernel has n = {}", k.dim())));
    }
    match k.period() {
        Some(l) if (l - 1.0).abs() < 1e-12 => Ok(()),
        _ => Err(Error::NotPeriodic),
    }
}

/// `A(y) = (a(y, -1) + a(y, 1)) / p`.
pub fn coefficient_from_kernel(k: &Kernel, p: f64) -> Result<PeriodicCoefficient> {
    check_periodic_1d(k)?;
    let k = k.clone();
    PeriodicCoefficient::new(p, move |y| (k.radial_limit(&[y], &[-1.0]) + k.radial_limit(&[y], &[1.0])) / p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// `min ∫₀¹ A(y) |ξ + v'(y)|^p dy`.
    pub value: f64,
    /// Node values of the periodic corrector `v`, with `v(0) = 0`.
    pub corrector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Cell problem on [`CELL_NODES`] periodic nodes.
pub fn cell_problem_1d(c: &PeriodicCoefficient, xi: f64) -> Result<f64> {
    let sol = cell_problem_with(c, xi, CELL_NODES, SolverSettings::default())?;
    if !sol.converged {
        return Err(Error::NotConverged { iterations: sol.iterations, residual: sol.residual });
    }
    Ok(sol.value)
}

/// Minimizes `Σ_j (1/N) A(y_{j+½}) |ξ + N(v_{j+1} - v_j)|^p` over periodic node
/// values with `v_0 = 0` (the objective ignores constants).
pub fn cell_problem_with(c: &PeriodicCoefficient, xi: f64, nodes: usize, settings: SolverSettings) -> Result<CellSolution> {
    if nodes < 2 {
        return Err(invalid("cell problem needs at least 2 nodes"));
    }
    if xi == 0.0 {
        return Ok(CellSolution { value: 0.0, corrector: vec![0.0; nodes], residual: 0.0, iterations: 0, converged: true });
    }
    let p = c.p;
    let nf = nodes as f64;
    let mut free = vec![true; nodes];
    free[0] = false;
    let mut prog = Program::new(p, &free, &vec![0.0; nodes], true);
    for j in 0..nodes {
        let mut form = Form::node((j + 1) % nodes);
        form.coef[0] = nf;
        form.push(j, -nf);
        form.offset = xi;
        prog.add(c.value((j as f64 + 0.5) / nf) / nf, &form);
    }
    let (x, iterations) = if p == 2.0 {
        (prog.solve_quadratic()?, 0)
    } else {
        let tol = settings.tolerance * (1.0 + xi.abs().powf(p - 1.0));
        let d = minimize(
            &prog,
            DVector::zeros(prog.num_free()),
            DescentSettings { tolerance: tol, max_iter: settings.max_iter, memory: settings.memory },
        );
        (d.x, d.iterations)
    };
    let (value, grad) = prog.evaluate(&x);
    let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let tol = settings.tolerance * (1.0 + xi.abs().powf(p - 1.0));
    Ok(CellSolution { value, corrector: prog.to_nodes(&x), residual, iterations, converged: residual <= tol })
}

/// Which closed form the cell-problem oracle agrees with (1% relative).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaMatch {
    Both,
    Printed,
    Classical,
    Neither,
}

impl FormulaMatch {
    pub fn tag(&self) -> &'static str {
        match self {
            FormulaMatch::Both => "both",
            FormulaMatch::Printed => "printed",
            FormulaMatch::Classical => "classical",
            FormulaMatch::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarReport {
    /// Cell-problem value at ξ = 1; this is the coefficient used downstream.
    pub oracle: f64,
    pub printed: f64,
    pub classical: f64,
    /// `|oracle - printed| / oracle`.
    pub discrepancy: f64,
    pub matches: FormulaMatch,
}

pub fn effective_star(c: &PeriodicCoefficient) -> Result<StarReport> {
    let oracle = cell_problem_1d(c, 1.0)?;
    let printed = c.printed_star();
    let classical = c.classical_star();
    let close = |v: f64| (v - oracle).abs() <= 0.01 * oracle;
    let matches = match (close(printed), close(classical)) {
        (true, true) => FormulaMatch::Both,
        (true, false) => FormulaMatch::Printed,
        (false, true) => FormulaMatch::Classical,
        (false, false) => FormulaMatch::Neither,
    };
    Ok(StarReport { oracle, printed, classical, discrepancy: (oracle - printed).abs() / oracle, matches })
}

/// `Ā = ∫₀¹ A`.
pub fn effective_bar(k: &Kernel, p: f64) -> Result<f64> {
    Ok(coefficient_from_kernel(k, p)?.mean())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoefficients {
    pub a_star: StarReport,
    pub a_bar: f64,
    /// `Ā - A*` with the oracle value of `A*`.
    pub gap: f64,
}

impl EffectiveCoefficients {
    pub fn new(c: &PeriodicCoefficient) -> Result<Self> {
        let a_star = effective_star(c)?;
        let a_bar = c.mean();
        Ok(Self { gap: a_bar - a_star.oracle, a_star, a_bar })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "A_star_formula,A_star_oracle,A_bar,gap\n{},{},{},{}\n",
            self.a_star.printed, self.a_star.oracle, self.a_bar, self.gap
        )
    }

    pub fn summary(&self) -> String {
        format!(
            "homogenize: A_star oracle {:.8} printed formula {:.8} classical formula {:.8} (matches {}), A_bar {:.8}, gap {:.6}",
            self.a_star.oracle,
            self.a_star.printed,
            self.a_star.classical,
            self.a_star.matches.tag(),
            self.a_bar,
            self.gap
        )
    }
}

/// `m̄(h) = ∫₀¹ m(t, h) dt`, by the midpoint rule on the period.
pub fn averaged_kernel(k: &Kernel) -> Result<Kernel> {
    check_periodic_1d(k)?;
    let m = KERNEL_AVERAGE_POINTS;
    let ts: Arc<Vec<f64>> = Arc::new((0..m).map(|j| (j as f64 + 0.5) / m as f64).collect());
    let avg = |f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, ts: Arc<Vec<f64>>| {
        move |_: &[f64], h: &[f64]| ts.iter().map(|&t| f(t, h[0])).sum::<f64>() / ts.len() as f64
    };
    let (e, r) = (k.clone(), k.clone());
    let eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = Arc::new(move |t, h| e.evaluate(&[t], &[h]));
    let radial: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = Arc::new(move |t, w| r.radial_limit(&[t], &[w]));
    let mut out = Kernel::new(format!("avg({})", k.name()), 1, k.bounds(), avg(eval, ts.clone()), avg(radial, ts.clone()))?;
    if k.has_tail_limit() {
        let t = k.clone();
        let tail: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> =
            Arc::new(move |y, w| t.tail_limit(&[y], &[w]).expect("declared"));
        out = out.with_tail_limit(avg(tail, ts));
    }
    Ok(out.translation_invariant().with_period(1.0))
}

/// One solve along an iterated-limit path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    /// `"i"` (s -> 1 first) or `"ii"` (ε -> 0 first, through m̄).
    pub path: &'static str,
    pub eps: Option<f64>,
    /// `None` marks the local (s = 1) solution.
    pub s: Option<f64>,
    /// `‖u - u_lim‖_p` with `u_lim` the local solution of the same row group.
    pub to_limit: f64,
    /// `‖u - u*‖_p / ‖u*‖_p`.
    pub to_star: f64,
    /// `‖u - ū‖_p / ‖ū‖_p`.
    pub to_bar: f64,
}

#[derive(Debug, Clone)]
pub struct CommuteReport {
    pub coefficients: EffectiveCoefficients,
    pub u_star: GridFunction,
    pub u_bar: GridFunction,
    /// `‖u* - ū‖_p`.
    pub distance: f64,
    /// `‖u* - ū‖_p / ‖ū‖_p`.
    pub separation: f64,
    pub rows: Vec<PathRow>,
    /// Relative distance of path (i) to `u*` at the smallest ε and largest s.
    pub path_i: f64,
    /// Relative distance of path (ii) to `ū` at the largest s.
    pub path_ii: f64,
}

impl CommuteReport {
    /// Both paths within 10% of their limits.
    pub fn paths_converge(&self) -> bool {
        self.path_i <= 0.1 && self.path_ii <= 0.1
    }

    /// The limits are further apart than the two path distances combined.
    pub fn separated(&self) -> bool {
        self.separation > self.path_i + self.path_ii
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("path,eps,s,to_limit,to_star,to_bar\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.path, opt(r.eps), opt(r.s), r.to_limit, r.to_star, r.to_bar);
        }
        let _ = writeln!(out, "summary,,,{},{},{}", self.distance, self.path_i, self.path_ii);
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "commute: A_star {:.6} A_bar {:.6} distance {:.6e} separation {:.4} path_i {:.4} path_ii {:.4} separated {}",
            self.coefficients.a_star.oracle,
            self.coefficients.a_bar,
            self.distance,
            self.separation,
            self.path_i,
            self.path_ii,
            self.separated()
        )
    }
}

fn check_eps(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(invalid("ε list is empty"));
    }
    for &e in eps_list {
        let inv = 1.0 / e;
        if !(e > 0.0 && e <= 1.0 && (inv - inv.round()).abs() < 1e-9) {
            return Err(invalid(format!("ε must be of the form 1/k, got {e}")));
        }
    }
    Ok(())
}

fn relative(u: &GridFunction, v: &GridFunction, p: f64) -> Result<f64> {
    let d = u.sub(v)?.lp_norm(p);
    let n = v.lp_norm(p);
    Ok(if n > 0.0 { d / n } else { d })
}

fn constant_solution(a: f64, p: f64, f: &GridFunction, st: SolverSettings) -> Result<GridFunction> {
    Ok(solve_local(&LocalProblem::new(Coefficient::constant(a), p, f).with_settings(st))?.ensure_converged()?.minimizer)
}

/// Compares `u*` and `ū` and follows both iterated limits at finite parameters.
///
/// Path (i) solves the nonlocal problem with `m(x/ε, h)` for every (ε, s) on a
/// grid with 16 cells per period, plus the local problem with `A(x/ε)`. Path
/// (ii) solves the nonlocal problem with `m̄` on the grid of `f`.
pub fn commute_experiment(
    k: &Kernel,
    p: f64,
    f: &GridFunction,
    eps_list: &[f64],
    s_list: &[f64],
    settings: SolverSettings,
) -> Result<CommuteReport> {
    check_periodic_1d(k)?;
    check_eps(eps_list)?;
    crate::limits::check_list(s_list, true)?;
    for &s in s_list {
        FractionalParams::new(s, p)?;
    }
    let grid = f.grid();
    if grid.dim() != 1 {
        return Err(Error::Dimension("the commute experiment is one-dimensional".into()));
    }
    let coefficients = EffectiveCoefficients::new(&coefficient_from_kernel(k, p)?)?;
    let (a_star, a_bar) = (coefficients.a_star.oracle, coefficients.a_bar);
    let u_star = constant_solution(a_star, p, f, settings)?;
    let u_bar = constant_solution(a_bar, p, f, settings)?;
    let distance = u_star.sub(&u_bar)?.lp_norm(p);
    let separation = relative(&u_star, &u_bar, p)?;

    let (lo, hi) = (grid.lo(0), grid.hi(0));
    let path_i = eps_list
        .par_iter()
        .map(|&eps| -> Result<Vec<PathRow>> {
            let cells = (16.0 * (hi - lo) / eps).round() as usize;
            let g = Grid::new_1d(lo, hi, cells + 1)?;
            let fe = GridFunction::from_fn(g, false, |x| f.eval(x));
            let ke = k.rescaled(eps)?;
            let star = constant_solution(a_star, p, &fe, settings)?;
            let bar = constant_solution(a_bar, p, &fe, settings)?;
            let local = LocalProblem::new(Coefficient::density(&ke, p)?, p, &fe).with_settings(settings);
            let ue = solve_local(&local)?.ensure_converged()?.minimizer;
            let mut rows = vec![PathRow {
                path: "i",
                eps: Some(eps),
                s: None,
                to_limit: 0.0,
                to_star: relative(&ue, &star, p)?,
                to_bar: relative(&ue, &bar, p)?,
            }];
            let solved = s_list
                .par_iter()
                .map(|&s| {
                    let prob = NonlocalProblem::new(&ke, FractionalParams::new(s, p)?, &fe).with_settings(settings);
                    let u = solve_nonlocal(&prob)?.ensure_converged()?.minimizer;
                    Ok(PathRow {
                        path: "i",
                        eps: Some(eps),
                        s: Some(s),
                        to_limit: u.sub(&ue)?.lp_norm(p),
                        to_star: relative(&u, &star, p)?,
                        to_bar: relative(&u, &bar, p)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.extend(solved);
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let mbar = averaged_kernel(k)?;
    let local = LocalProblem::new(Coefficient::density(&mbar, p)?, p, f).with_settings(settings);
    let ubar_local = solve_local(&local)?.ensure_converged()?.minimizer;
    let mut path_ii = vec![PathRow {
        path: "ii",
        eps: None,
        s: None,
        to_limit: 0.0,
        to_star: relative(&ubar_local, &u_star, p)?,
        to_bar: relative(&ubar_local, &u_bar, p)?,
    }];
    let solved = s_list
        .par_iter()
        .map(|&s| {
            let prob = NonlocalProblem::new(&mbar, FractionalParams::new(s, p)?, f).with_settings(settings);
            let u = solve_nonlocal(&prob)?.ensure_converged()?.minimizer;
            Ok(PathRow {
                path: "ii",
                eps: None,
                s: Some(s),
                to_limit: u.sub(&ubar_local)?.lp_norm(p),
                to_star: relative(&u, &u_star, p)?,
                to_bar: relative(&u, &u_bar, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    path_ii.extend(solved);

    let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = *s_list.last().expect("checked non-empty");
    let rows: Vec<PathRow> = path_i.into_iter().flatten().chain(path_ii).collect();
    let d_i = rows
        .iter()
        .find(|r| r.path == "i" && r.eps == Some(eps_min) && r.s == Some(s_max))
        .map(|r| r.to_star)
        .expect("row exists");
    let d_ii = rows.iter().find(|r| r.path == "ii" && r.s == Some(s_max)).map(|r| r.to_bar).expect("row exists");
    Ok(CommuteReport { coefficients, u_star, u_bar, distance, separation, rows, path_i: d_i, path_ii: d_ii })
}
