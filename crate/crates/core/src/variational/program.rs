//! Discrete convex objectives of the form
//!
//! ```text
//! Φ(v) = Σ_t w_t |ℓ_t(v)|^p + Σ_i d_i |v_i|^p - Σ_i b_i v_i
//! ```
//!
//! over the free entries of `v` (pinned entries are held at zero), and a
//! preconditioned L-BFGS minimizer for them.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::energy::{pow_abs, Form};
use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum;

/// Chunk size of the deterministic parallel reduction over terms.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub w: f64,
    pub form: Form,
}

pub(crate) struct Program {
    pub p: f64,
    /// Node index of each free variable.
    pub nodes: Vec<usize>,
    ordinal: Vec<Option<usize>>,
    terms: Option<Vec<Term>>,
    diag: Vec<f64>,
    rhs: DVector<f64>,
    /// `Σ w ℓℓᵀ + diag` on the free variables, with `Σ 2w c ℓ` and `Σ w c²`
    /// from the constant parts `c` of the forms.
    quad: DMatrix<f64>,
    lin: DVector<f64>,
    c0: f64,
}

impl Program {
    /// `keep_terms = false` keeps only the assembled quadratic part, which is
    /// the objective itself when `p = 2`.
    pub fn new(p: f64, free: &[bool], rhs_nodes: &[f64], keep_terms: bool) -> Self {
        let nodes: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
        let mut ordinal = vec![None; free.len()];
        for (k, &i) in nodes.iter().enumerate() {
            ordinal[i] = Some(k);
        }
        let nf = nodes.len();
        let rhs = DVector::from_iterator(nf, nodes.iter().map(|&i| rhs_nodes[i]));
        Self {
            p,
            nodes,
            ordinal,
            terms: keep_terms.then(Vec::new),
            diag: vec![0.0; free.len()],
            rhs,
            quad: DMatrix::zeros(nf, nf),
            lin: DVector::zeros(nf),
            c0: 0.0,
        }
    }

    pub fn num_free(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.ordinal.len()
    }

    /// Adds `w |ℓ(v)|^p`. Entries on pinned nodes are dropped.
    pub fn add(&mut self, w: f64, form: &Form) {
        if w == 0.0 {
            return;
        }
        let mut reduced = Form::empty();
        reduced.offset = form.offset;
        let mut ords = [0usize; 5];
        for k in 0..form.len as usize {
            if let Some(o) = self.ordinal[form.idx[k] as usize] {
                ords[reduced.len as usize] = o;
                reduced.push(form.idx[k] as usize, form.coef[k]);
            }
        }
        if reduced.len == 0 && reduced.offset == 0.0 {
            return;
        }
        let len = reduced.len as usize;
        for a in 0..len {
            let ca = w * reduced.coef[a];
            self.lin[ords[a]] += 2.0 * ca * reduced.offset;
            for b in 0..len {
                self.quad[(ords[a], ords[b])] += ca * reduced.coef[b];
            }
        }
        self.c0 += w * reduced.offset * reduced.offset;
        if let Some(t) = self.terms.as_mut() {
            t.push(Term { w, form: reduced });
        }
    }

    /// Adds `w |v[node]|^p`.
    pub fn add_diagonal(&mut self, node: usize, w: f64) {
        if let Some(o) = self.ordinal[node] {
            self.diag[node] += w;
            self.quad[(o, o)] += w;
        }
    }

    fn expand(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut v = vec![0.0; self.num_nodes()];
        for (k, &i) in self.nodes.iter().enumerate() {
            v[i] = x[k];
        }
        v
    }

    /// Node values of a free vector.
    pub fn to_nodes(&self, x: &DVector<f64>) -> Vec<f64> {
        self.expand(x)
    }

    /// Objective and gradient with respect to the free variables.
    pub fn evaluate(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let linear = self.rhs.dot(x);
        let Some(terms) = &self.terms else {
            // p = 2: xᵀQx + lᵀx + c0.
            let qx = &self.quad * x;
            let value = x.dot(&qx) + self.lin.dot(x) + self.c0 - linear;
            let grad = 2.0 * qx + &self.lin - &self.rhs;
            return (value, grad);
        };
        let p = self.p;
        let v = self.expand(x);
        let nn = self.num_nodes();
        let parts: Vec<(f64, Vec<f64>)> = terms
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; nn];
                let mut vals = Vec::with_capacity(chunk.len());
                for t in chunk {
                    let l = t.form.eval(&v);
                    if l == 0.0 {
                        continue;
                    }
                    vals.push(t.w * pow_abs(l, p));
                    let d = t.w * p * l.abs().powf(p - 1.0) * l.signum();
                    for k in 0..t.form.len as usize {
                        g[t.form.idx[k] as usize] += d * t.form.coef[k];
                    }
                }
                (pairwise_sum(&vals), g)
            })
            .collect();
        let mut gfull = vec![0.0; nn];
        let mut vals: Vec<f64> = Vec::with_capacity(parts.len() + 1);
        for (val, g) in &parts {
            vals.push(*val);
            for (a, b) in gfull.iter_mut().zip(g) {
                *a += b;
            }
        }
        let mut dsum = Vec::new();
        for (i, &d) in self.diag.iter().enumerate() {
            if d != 0.0 && v[i] != 0.0 {
                dsum.push(d * pow_abs(v[i], p));
                gfull[i] += d * p * v[i].abs().powf(p - 1.0) * v[i].signum();
            }
        }
        vals.push(pairwise_sum(&dsum));
        let value = pairwise_sum(&vals) - linear;
        let grad = DVector::from_iterator(self.num_free(), self.nodes.iter().map(|&i| gfull[i])) - &self.rhs;
        (value, grad)
    }

    /// Minimizer of the quadratic part, `2Q x = b - l`; exact when `p = 2`.
    pub fn solve_quadratic(&self) -> Result<DVector<f64>> {
        if self.num_free() == 0 {
            return Ok(DVector::zeros(0));
        }
        let chol = Cholesky::new(2.0 * &self.quad)
            .ok_or_else(|| Error::LinearSolve("assembled matrix is not positive definite".into()))?;
        Ok(chol.solve(&(&self.rhs - &self.lin)))
    }

    fn preconditioner(&self) -> Option<Cholesky<f64, Dyn>> {
        if self.num_free() == 0 {
            return None;
        }
        let mut q = self.quad.clone();
        if let Some(c) = Cholesky::new(q.clone()) {
            return Some(c);
        }
        let ridge = 1e-12 * (0..q.nrows()).map(|i| q[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        for i in 0..q.nrows() {
            q[(i, i)] += ridge;
        }
        Cholesky::new(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DescentSettings {
    pub tolerance: f64,
    pub max_iter: usize,
    pub memory: usize,
}

pub(crate) struct Descent {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

fn sup(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// L-BFGS with initial inverse Hessian `γ Q⁻¹` and Armijo backtracking.
/// Steps that would raise the objective are never taken.
pub(crate) fn minimize(prog: &Program, x0: DVector<f64>, st: DescentSettings) -> Descent {
    let pre = prog.preconditioner();
    let apply_pre = |g: &DVector<f64>| match &pre {
        Some(c) => c.solve(g),
        None => g.clone(),
    };
    let mut x = x0;
    let (mut f, mut g) = prog.evaluate(&x);
    let mut trace = vec![f];
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut residual = sup(&g);
    while residual > st.tolerance && iterations < st.max_iter {
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * s.dot(&q);
            q.axpy(-a, y, 1.0);
            alphas.push(a);
        }
        let mut r = apply_pre(&q);
        if let Some((s, y, _)) = hist.back() {
            let hy = apply_pre(y);
            let gamma = s.dot(y) / y.dot(&hy);
            if gamma.is_finite() && gamma > 0.0 {
                r *= gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&r);
            r.axpy(a - b, s, 1.0);
        }
        let mut d = -r;
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            hist.clear();
            d = -apply_pre(&g);
            slope = g.dot(&d);
            if !(slope < 0.0) {
                break;
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + step * &d;
            let (fn_, gn) = prog.evaluate(&xn);
            let armijo = fn_ <= f + 1e-4 * step * slope;
            // Near the minimum the decrease drowns in rounding; a step that
            // does not raise the objective and shrinks the gradient is kept.
            let flat = fn_ <= f && sup(&gn) < residual;
            if armijo || flat {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > st.memory {
                hist.pop_front();
            }
        }
        x = xn;
        f = fn_;
        g = gn;
        residual = sup(&g);
        iterations += 1;
        trace.push(f);
    }
    Descent { x, value: f, grad: g, iterations, trace }
}
