//! Nonlocal and local Dirichlet problems solved by minimizing their discrete
//! energies, and the sweep s -> 1 that compares the two solutions.
//!
//! The nonlocal objective is `(1-s) I_{m,s,p}(v) - ∫fv` (that is `p J - ∫fv`)
//! with `I` discretized by exactly the terms of the energy quadrature. Its
//! s -> 1 limit is the local objective `∫𝒜(x, ∇v) - ∫fv`.

mod program;

pub(crate) use program::{minimize, DescentSettings, Program};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, Matrix2, SymmetricEigen};
use rayon::prelude::*;

use crate::energy::{check_dims, Form, QuadratureSettings, Segment, Sink, Visitor, Weights};
use crate::error::{invalid, Error, Result};
use crate::gridfn::{FractionalParams, Grid, GridFunction};
use crate::kernel::Kernel;
use crate::limits::{check_list, LimitDensity};
use crate::table::ConvergenceTable;

/// Stored terms beyond this count are not kept; p = 2 problems then run on the
/// assembled matrix alone.
const MAX_STORED_TERMS: usize = 4_000_000;
/// Hard limit for problems that need their terms (p != 2).
const MAX_TERMS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Direct solve for p = 2, descent otherwise.
    Auto,
    Iterative,
    /// Only for p = 2.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// The descent stops once the sup-norm of the gradient is at most
    /// `tolerance · (1 + ‖f‖_∞)`.
    pub tolerance: f64,
    pub max_iter: usize,
    pub method: Method,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 10_000, method: Method::Auto, memory: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub minimizer: GridFunction,
    pub objective: f64,
    /// Sup-norm of the objective gradient over the free nodes.
    pub residual: f64,
    /// Absolute tolerance the residual was held to.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step (initial value first).
    pub trace: Vec<f64>,
    /// Objective gradient per node, zero on pinned nodes.
    pub gradient: Vec<f64>,
}

impl SolveResult {
    /// `Err(NotConverged)` unless the solve converged.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations, residual: self.residual })
        }
    }

    /// Derivative of the objective at the minimizer along `dir`.
    pub fn directional_derivative(&self, dir: &[f64]) -> f64 {
        self.gradient.iter().zip(dir).map(|(g, d)| g * d).sum()
    }
}

#[derive(Debug, Clone)]
pub struct NonlocalProblem {
    pub kernel: Kernel,
    pub fp: FractionalParams,
    pub source: GridFunction,
    pub settings: SolverSettings,
}

impl NonlocalProblem {
    pub fn new(kernel: &Kernel, fp: FractionalParams, source: &GridFunction) -> Self {
        Self { kernel: kernel.clone(), fp, source: source.clone(), settings: SolverSettings::default() }
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.source.grid()
    }
}

/// Coefficient of a local problem: the s -> 1 density of a kernel, or
/// `𝒜(x, ξ) = A(x) |ξ|^p` for a given scalar `A`.
#[derive(Clone)]
pub enum Coefficient {
    Density(LimitDensity),
    Scalar(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Density(d) => f.debug_tuple("Density").field(&d.kernel().name()).finish(),
            Coefficient::Scalar(_) => f.write_str("Scalar(..)"),
        }
    }
}

impl Coefficient {
    pub fn density(kernel: &Kernel, p: f64) -> Result<Self> {
        Ok(Coefficient::Density(LimitDensity::new(kernel, p)?))
    }

    pub fn constant(c: f64) -> Self {
        Coefficient::Scalar(Arc::new(move |_| c))
    }

    pub fn scalar(a: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Scalar(Arc::new(a))
    }
}

#[derive(Debug, Clone)]
pub struct LocalProblem {
    pub coefficient: Coefficient,
    pub p: f64,
    pub source: GridFunction,
    pub settings: SolverSettings,
}

impl LocalProblem {
    pub fn new(coefficient: Coefficient, p: f64, source: &GridFunction) -> Self {
        Self { coefficient, p, source: source.clone(), settings: SolverSettings::default() }
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("the Dirichlet problems need 1 < p < inf, got {p}")));
    }
    Ok(())
}

fn check_source(f: &GridFunction) -> Result<()> {
    if f.values().iter().any(|v| !v.is_finite()) {
        return Err(invalid("source has non-finite values"));
    }
    Ok(())
}

fn load(grid: &Grid, f: &GridFunction) -> Vec<f64> {
    (0..grid.num_nodes()).map(|i| grid.trapezoid_weight(i) * f.values()[i]).collect()
}

fn interior(grid: &Grid) -> Vec<bool> {
    (0..grid.num_nodes()).map(|i| !grid.is_boundary(i)).collect()
}

/// Collects the weighted terms of one node.
#[derive(Default)]
struct TermSink {
    terms: Vec<(f64, Form)>,
    outside: f64,
    count: usize,
}

impl Sink for TermSink {
    fn term(&mut self, _seg: Segment, w: Weights, form: &Form) {
        if w.main != 0.0 {
            self.count += 1;
            self.terms.push((w.main, *form));
        }
    }

    fn outside(&mut self, _seg: Segment, w: Weights, _node: usize) {
        self.outside += w.main;
    }

    fn end_group(&mut self) {}
}

/// Counts terms without storing them.
#[derive(Default)]
struct CountSink(usize);

impl Sink for CountSink {
    fn term(&mut self, _seg: Segment, w: Weights, _form: &Form) {
        if w.main != 0.0 {
            self.0 += 1;
        }
    }
    fn outside(&mut self, _seg: Segment, _w: Weights, _node: usize) {}
    fn end_group(&mut self) {}
}

fn nonlocal_program(prob: &NonlocalProblem, need_terms: bool) -> Result<Program> {
    let grid = prob.grid();
    check_dims(&prob.kernel, grid)?;
    check_exponent(prob.fp.p())?;
    check_source(&prob.source)?;
    let settings = QuadratureSettings::for_grid(grid);
    let vis = Visitor::new(&prob.kernel, grid, prob.fp, &settings);
    let centre = grid.index([grid.nodes_per_axis() / 2, if grid.dim() == 2 { grid.nodes_per_axis() / 2 } else { 0 }]);
    let mut counter = CountSink::default();
    vis.visit_node(centre, &mut counter);
    let estimate = counter.0 * grid.num_nodes();
    if need_terms && estimate > MAX_TERMS {
        return Err(Error::TooLarge(format!("about {estimate} quadrature terms; use p = 2 or a coarser grid")));
    }
    let keep = need_terms || estimate <= MAX_STORED_TERMS;
    let scale = 1.0 - prob.fp.s();
    let mut prog = Program::new(prob.fp.p(), &interior(grid), &load(grid, &prob.source), keep);
    let all: Vec<usize> = (0..grid.num_nodes()).collect();
    for block in all.chunks(256) {
        let sinks: Vec<TermSink> = block
            .par_iter()
            .map(|&i| {
                let mut sink = TermSink::default();
                vis.visit_node(i, &mut sink);
                sink
            })
            .collect();
        for (&i, sink) in block.iter().zip(&sinks) {
            for (w, form) in &sink.terms {
                prog.add(scale * w, form);
            }
            prog.add_diagonal(i, scale * sink.outside);
        }
    }
    Ok(prog)
}

fn local_program(prob: &LocalProblem) -> Result<Program> {
    let p = prob.p;
    check_exponent(p)?;
    check_source(&prob.source)?;
    let grid = prob.source.grid();
    let n = grid.dim();
    if let Coefficient::Density(d) = &prob.coefficient {
        if d.dim() != n {
            return Err(Error::Dimension(format!("limit density is {}-dimensional but the grid is {n}-dimensional", d.dim())));
        }
        if d.p() != p {
            return Err(invalid(format!("limit density was built for p = {} but the problem has p = {p}", d.p())));
        }
    }
    if n == 2 && p != 2.0 {
        return Err(invalid("the local solver supports p != 2 only in one dimension"));
    }
    let mut prog = Program::new(p, &interior(grid), &load(grid, &prob.source), true);
    if n == 1 {
        let h = grid.spacing(0);
        for c in 0..grid.num_cells() {
            let (base, mid) = grid.cell(c);
            let a = match &prob.coefficient {
                Coefficient::Density(d) => d.limit_density(&mid[..1], &[1.0]),
                Coefficient::Scalar(a) => a(&mid[..1]),
            };
            let mut form = Form::node(base + 1);
            form.push(base, -1.0);
            prog.add(h * a / h.powf(p), &form);
        }
        return Ok(prog);
    }
    // Bilinear elements, 2-point Gauss per axis.
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    let np = grid.nodes_per_axis();
    let q = 0.5 / 3f64.sqrt();
    let w = grid.cell_volume() / 4.0;
    for c in 0..grid.num_cells() {
        let (base, mid) = grid.cell(c);
        let ids = [base, base + 1, base + np, base + np + 1];
        for (t0, t1) in [(0.5 - q, 0.5 - q), (0.5 + q, 0.5 - q), (0.5 - q, 0.5 + q), (0.5 + q, 0.5 + q)] {
            let x = [mid[0] + (t0 - 0.5) * h0, mid[1] + (t1 - 0.5) * h1];
            let a = match &prob.coefficient {
                Coefficient::Density(d) => {
                    let m = d.limit_matrix(&x)?;
                    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
                }
                Coefficient::Scalar(a) => Matrix2::identity() * a(&x),
            };
            // Rows: ∂₀ and ∂₁ of the interpolant on u00, u10, u01, u11.
            let d0 = [-(1.0 - t1) / h0, (1.0 - t1) / h0, -t1 / h0, t1 / h0];
            let d1 = [-(1.0 - t0) / h1, -t0 / h1, (1.0 - t0) / h1, t0 / h1];
            let eig = SymmetricEigen::new(a);
            for k in 0..2 {
                let lam = eig.eigenvalues[k];
                if lam <= 0.0 {
                    continue;
                }
                let e = eig.eigenvectors.column(k);
                let mut form = Form::empty();
                for j in 0..4 {
                    form.push(ids[j], e[0] * d0[j] + e[1] * d1[j]);
                }
                prog.add(w * lam, &form);
            }
        }
    }
    Ok(prog)
}

fn finish(prog: &Program, grid: &Grid, x: DVector<f64>, run: Option<program::Descent>, tol: f64) -> Result<SolveResult> {
    let (value, grad, iterations, trace) = match run {
        Some(d) => (d.value, d.grad, d.iterations, d.trace),
        None => {
            let (f0, _) = prog.evaluate(&DVector::zeros(prog.num_free()));
            let (value, grad) = prog.evaluate(&x);
            (value, grad, 0, vec![f0, value])
        }
    };
    let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut gradient = vec![0.0; grid.num_nodes()];
    for (k, &i) in prog.nodes.iter().enumerate() {
        gradient[i] = grad[k];
    }
    Ok(SolveResult {
        minimizer: GridFunction::from_values(grid.clone(), prog.to_nodes(&x), true)?,
        objective: value,
        residual,
        tolerance: tol,
        iterations,
        converged: residual <= tol,
        trace,
        gradient,
    })
}

fn run(prog: &Program, grid: &Grid, p: f64, st: SolverSettings, f_sup: f64, start: Option<&GridFunction>) -> Result<SolveResult> {
    let tol = st.tolerance * (1.0 + f_sup);
    let direct = match st.method {
        Method::Direct if p != 2.0 => return Err(invalid("the direct solve needs p = 2")),
        Method::Direct => true,
        Method::Auto => p == 2.0 && start.is_none(),
        Method::Iterative => false,
    };
    if direct {
        let x = prog.solve_quadratic()?;
        return finish(prog, grid, x, None, tol);
    }
    let x0 = match start {
        Some(u) => {
            if u.grid() != grid {
                return Err(Error::Dimension("starting point lives on a different grid".into()));
            }
            DVector::from_iterator(prog.num_free(), prog.nodes.iter().map(|&i| u.values()[i]))
        }
        None => DVector::zeros(prog.num_free()),
    };
    let d = minimize(prog, x0, DescentSettings { tolerance: tol, max_iter: st.max_iter, memory: st.memory });
    let x = d.x.clone();
    finish(prog, grid, x, Some(d), tol)
}

/// Minimizes `(1-s) I_{m,s,p}(v) - ∫fv` over grid functions vanishing on the boundary.
pub fn solve_nonlocal(prob: &NonlocalProblem) -> Result<SolveResult> {
    solve(prob, None)
}

/// [`solve_nonlocal`] by descent from `start`.
pub fn solve_nonlocal_from(prob: &NonlocalProblem, start: &GridFunction) -> Result<SolveResult> {
    solve(prob, Some(start))
}

fn solve(prob: &NonlocalProblem, start: Option<&GridFunction>) -> Result<SolveResult> {
    let p = prob.fp.p();
    let need_terms = p != 2.0;
    let prog = nonlocal_program(prob, need_terms)?;
    let st = prob.settings;
    run(&prog, prob.grid(), p, st, prob.source.max_abs(), start)
}

/// Minimizes `∫𝒜(x, ∇v) - ∫fv` over grid functions vanishing on the boundary.
pub fn solve_local(prob: &LocalProblem) -> Result<SolveResult> {
    let prog = local_program(prob)?;
    run(&prog, prob.source.grid(), prob.p, prob.settings, prob.source.max_abs(), None)
}

/// [`solve_local`] by descent from `start`.
pub fn solve_local_from(prob: &LocalProblem, start: &GridFunction) -> Result<SolveResult> {
    let prog = local_program(prob)?;
    run(&prog, prob.source.grid(), prob.p, prob.settings, prob.source.max_abs(), Some(start))
}

/// Rows `(s, ‖u_s - u‖_p)`, with `u_s` the nonlocal and `u` the local solution.
pub fn localization_sweep(k: &Kernel, p: f64, f: &GridFunction, s_list: &[f64]) -> Result<ConvergenceTable> {
    localization_sweep_with(k, p, f, s_list, SolverSettings::default())
}

pub fn localization_sweep_with(
    k: &Kernel,
    p: f64,
    f: &GridFunction,
    s_list: &[f64],
    settings: SolverSettings,
) -> Result<ConvergenceTable> {
    check_list(s_list, true)?;
    for &s in s_list {
        FractionalParams::new(s, p)?;
    }
    let local = LocalProblem::new(Coefficient::density(k, p)?, p, f).with_settings(settings);
    let u = solve_local(&local)?.ensure_converged()?.minimizer;
    let dist = s_list
        .par_iter()
        .map(|&s| {
            let prob = NonlocalProblem::new(k, FractionalParams::new(s, p)?, f).with_settings(settings);
            let us = solve_nonlocal(&prob)?.ensure_converged()?.minimizer;
            Ok(us.sub(&u)?.lp_norm(p))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceTable::distances(s_list, &dist))
}
