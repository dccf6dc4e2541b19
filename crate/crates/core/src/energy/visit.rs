//! Enumeration of the weighted terms `w |ℓ(v)|^p` that make up the discrete
//! double integral. The energy evaluates them on the fly; the solvers store
//! them once and reuse them for every objective and gradient evaluation.

use crate::gridfn::{FractionalParams, Grid};
use crate::kernel::Kernel;
use crate::quadrature::{kronrod7, zeta_negative, SphereRule};

use super::QuadratureSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Segment {
    Near = 0,
    Bulk = 1,
    Tail = 2,
}

/// Affine form `offset + Σ coef_k v[idx_k]` with at most five entries.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Form {
    pub offset: f64,
    pub len: u8,
    pub idx: [u32; 5],
    pub coef: [f64; 5],
}

impl Form {
    pub fn empty() -> Self {
        Self { offset: 0.0, len: 0, idx: [0; 5], coef: [0.0; 5] }
    }

    pub fn node(i: usize) -> Self {
        let mut f = Self::empty();
        f.push(i, 1.0);
        f
    }

    pub fn push(&mut self, i: usize, c: f64) {
        let k = self.len as usize;
        self.idx[k] = i as u32;
        self.coef[k] = c;
        self.len += 1;
    }

    #[allow(dead_code)]
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len as usize).map(|k| (self.idx[k] as usize, self.coef[k]))
    }

    #[inline]
    pub fn eval(&self, v: &[f64]) -> f64 {
        let mut s = self.offset;
        for k in 0..self.len as usize {
            s += self.coef[k] * v[self.idx[k] as usize];
        }
        s
    }
}

/// Weights attached to one term: the value rule, the embedded lower-order rule
/// difference used for the error estimate, and the coarse-angle difference.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Weights {
    pub main: f64,
    pub check: f64,
    pub ang: f64,
}

pub(crate) trait Sink {
    fn term(&mut self, seg: Segment, w: Weights, form: &Form);
    /// Term `w |v[node]|^p` from a pair with one point outside the box.
    fn outside(&mut self, seg: Segment, w: Weights, node: usize);
    /// Closes one error-estimation group (a radial interval or a probe).
    fn end_group(&mut self);
}

#[inline]
pub(crate) fn pow_abs(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// Precomputed quadrature layout for one (kernel, grid, s, p, settings).
pub(crate) struct Visitor<'a> {
    pub kernel: &'a Kernel,
    pub grid: &'a Grid,
    pub s: f64,
    pub p: f64,
    pub h_min: f64,
    /// Radii `h_min ρ^k`; the last one is the start of the tail.
    pub ladder: Vec<f64>,
    pub dirs: SphereRule,
}

impl<'a> Visitor<'a> {
    pub fn new(kernel: &'a Kernel, grid: &'a Grid, fp: FractionalParams, settings: &QuadratureSettings) -> Self {
        let mut ladder = vec![settings.h_min];
        let mut k = 1;
        while *ladder.last().unwrap() < settings.h_max || ladder.len() < 2 {
            ladder.push(settings.h_min * settings.ladder_ratio.powi(k));
            k += 1;
        }
        let dirs = if grid.dim() == 1 { SphereRule::two_point() } else { SphereRule::circle(settings.angular_points) };
        Self { kernel, grid, s: fp.s(), p: fp.p(), h_min: settings.h_min, ladder, dirs }
    }

    pub fn tail_start(&self) -> f64 {
        *self.ladder.last().expect("ladder is never empty")
    }

    /// Distance along `-ω` from `x` to the box boundary.
    fn exit_distance(&self, x: &[f64; 2], omega: &[f64]) -> f64 {
        let g = self.grid;
        let mut r = f64::INFINITY;
        for k in 0..g.dim() {
            let w = omega[k];
            if w > 0.0 {
                r = r.min((x[k] - g.lo(k)) / w);
            } else if w < 0.0 {
                r = r.min((g.hi(k) - x[k]) / -w);
            }
        }
        r.max(0.0)
    }

    /// One-sided difference quotient of `v` at node `i` toward `-ω`, as a form.
    fn slope_form(&self, i: usize, omega: &[f64]) -> Form {
        let g = self.grid;
        let m = g.multi(i);
        let mut f = Form::empty();
        let mut diag = 0.0;
        let mut nbrs = [(0usize, 0.0f64); 2];
        let mut nn = 0;
        for k in 0..g.dim() {
            let w = omega[k];
            if w == 0.0 {
                continue;
            }
            let c = w.abs() / g.spacing(k);
            diag += c;
            let step_down = w > 0.0;
            let inside = if step_down { m[k] > 0 } else { m[k] + 1 < g.nodes_per_axis() };
            if inside {
                let mut mm = m;
                if step_down {
                    mm[k] -= 1;
                } else {
                    mm[k] += 1;
                }
                nbrs[nn] = (g.index(mm), -c);
                nn += 1;
            }
        }
        f.push(i, diag);
        for &(j, c) in &nbrs[..nn] {
            f.push(j, c);
        }
        f
    }

    /// Form `v_i - u(y)` with `u(y)` interpolated; `None` when `y` is outside the box.
    fn difference_form(&self, i: usize, y: &[f64]) -> Option<Form> {
        let st = self.grid.stencil(y);
        if st.len == 0 {
            return None;
        }
        let mut f = Form::node(i);
        for (j, w) in st.iter() {
            if w != 0.0 {
                f.push(j, -w);
            }
        }
        Some(f)
    }

    /// Endpoint correction of the outer trapezoid rule at a boundary node.
    ///
    /// At distance δ inside an edge the node integrand grows like
    /// `c δ^α`, α = p(1-s), because rays leaving through the edge see `u ≈ g δ`.
    /// The composite trapezoid rule misses `-ζ(-α) c Δ^{1+α}` of that layer
    /// (Navot's extension of Euler-Maclaurin), with
    /// `c = |g|^p ∫_{ω·ν>0} (ω·ν)^{sp} [a(ω)/α + (a(ω) + a(-ω))/(sp)]`.
    /// Skipped for α >= 2, where the term is below the smooth trapezoid error.
    fn boundary_layer(&self, i: usize, sink: &mut impl Sink) {
        let (s, p) = (self.s, self.p);
        let alpha = p * (1.0 - s);
        if alpha >= 2.0 {
            return;
        }
        let sp = s * p;
        let g = self.grid;
        let n = g.dim();
        let m = g.multi(i);
        let x = g.coord(i);
        let last = g.nodes_per_axis() - 1;
        let zeta = -zeta_negative(alpha);
        for k in 0..n {
            for (on_side, inward) in [(m[k] == 0, 1.0), (m[k] == last, -1.0)] {
                if !on_side {
                    continue;
                }
                let mut tangential = 1.0;
                for j in 0..n {
                    if j != k {
                        let half = m[j] == 0 || m[j] == last;
                        tangential *= if half { 0.5 * g.spacing(j) } else { g.spacing(j) };
                    }
                }
                let mut ang = 0.0;
                let mut neg = [0.0; 2];
                for (omega, aw) in self.dirs.iter() {
                    let c = inward * omega[k];
                    if c <= 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        neg[j] = -omega[j];
                    }
                    let a = self.kernel.radial_limit(&x[..n], omega);
                    let b = self.kernel.radial_limit(&x[..n], &neg[..n]);
                    ang += aw * c.powf(sp) * (a / alpha + (a + b) / sp);
                }
                let dk = g.spacing(k);
                let mut mm = m;
                mm[k] = if inward > 0.0 { m[k] + 1 } else { m[k] - 1 };
                let mut form = Form::node(g.index(mm));
                form.push(i, -1.0);
                let w = tangential * zeta * dk.powf(1.0 + alpha) * ang / dk.powf(p);
                sink.term(Segment::Near, Weights { main: w, check: 0.0, ang: 0.0 }, &form);
            }
        }
        sink.end_group();
    }

    /// Emits every term belonging to the outer quadrature node `i`. Weights
    /// already include the outer trapezoid weight but no `(1-s)/p` prefactor.
    pub fn visit_node(&self, i: usize, sink: &mut impl Sink) {
        let n = self.grid.dim();
        let (s, p) = (self.s, self.p);
        let sp = s * p;
        let wx = self.grid.trapezoid_weight(i);
        let x = self.grid.coord(i);
        let xs = &x[..n];
        let h_min = self.h_min;
        let r_tail = self.tail_start();
        let near_w = h_min.powf(p * (1.0 - s)) / (p * (1.0 - s));
        let probe_w = h_min.powf(-sp) / (p + 1.0 - sp);
        let const_kernel = self.kernel.constant_value();

        if self.grid.is_boundary(i) {
            self.boundary_layer(i, sink);
        }

        for (k, (omega, aw)) in self.dirs.iter().enumerate() {
            let sigma = if n == 1 { 0.0 } else if k % 2 == 1 { 1.0 } else { -1.0 };
            let base = wx * aw;

            // Near-diagonal surrogate a(x, ω) |D_ω v|^p r^p integrated on [0, h_min].
            let a = self.kernel.radial_limit(xs, omega);
            let slope = self.slope_form(i, omega);
            let w = base * a * near_w;
            sink.term(Segment::Near, Weights { main: w, check: 0.0, ang: sigma * w }, &slope);
            // Taylor-remainder probe at r = h_min.
            let mut y = [0.0; 2];
            let mut h = [0.0; 2];
            for j in 0..n {
                h[j] = h_min * omega[j];
                y[j] = x[j] - h[j];
            }
            let m = self.kernel.evaluate(xs, &h[..n]);
            let pw = base * probe_w;
            match self.difference_form(i, &y[..n]) {
                Some(f) => sink.term(Segment::Near, Weights { main: 0.0, check: pw * m, ang: 0.0 }, &f),
                None => sink.outside(Segment::Near, Weights { main: 0.0, check: pw * m, ang: 0.0 }, i),
            }
            sink.term(
                Segment::Near,
                Weights { main: 0.0, check: -pw * a * h_min.powf(p), ang: 0.0 },
                &slope,
            );
            sink.end_group();

            // Bulk: G3/K7 in t = ln r on each rung, split where the ray leaves the box.
            let r_exit = self.exit_distance(&x, omega);
            for win in self.ladder.windows(2) {
                let (r0, r1) = (win[0], win[1]);
                let mut pieces = [(r0, r1), (0.0, 0.0)];
                let mut np = 1;
                if r_exit > r0 && r_exit < r1 {
                    pieces = [(r0, r_exit), (r_exit, r1)];
                    np = 2;
                }
                for &(a0, a1) in &pieces[..np] {
                    let outside_piece = a0 >= r_exit;
                    for node in kronrod7(a0.ln(), a1.ln()) {
                        let r = node.x.exp();
                        for j in 0..n {
                            h[j] = r * omega[j];
                            y[j] = x[j] - h[j];
                        }
                        let fac = base * (-sp * node.x).exp();
                        let mut mm = self.kernel.evaluate(xs, &h[..n]);
                        let form = if outside_piece { None } else { self.difference_form(i, &y[..n]) };
                        if form.is_none() {
                            let mut mh = [0.0; 2];
                            for j in 0..n {
                                mh[j] = -h[j];
                            }
                            mm += self.kernel.evaluate(&y[..n], &mh[..n]);
                        }
                        let w = Weights {
                            main: fac * node.wk * mm,
                            check: fac * (node.wk - node.wg) * mm,
                            ang: sigma * fac * node.wk * mm,
                        };
                        match form {
                            Some(f) => sink.term(Segment::Bulk, w, &f),
                            None => sink.outside(Segment::Bulk, w, i),
                        }
                    }
                    sink.end_group();
                }
            }

            // Tail r > r_tail: both points can no longer lie in the box.
            if let Some(c) = const_kernel {
                let w = base * 2.0 * c * r_tail.powf(-sp) / sp;
                sink.outside(Segment::Tail, Weights { main: w, check: 0.0, ang: sigma * w }, i);
            } else {
                // t = r^{-sp} turns r^{-1-sp} dr into dt / (sp).
                let t_max = r_tail.powf(-sp);
                for node in kronrod7(0.0, t_max) {
                    let r = node.x.powf(-1.0 / sp).min(1e300);
                    let mut mh = [0.0; 2];
                    for j in 0..n {
                        h[j] = r * omega[j];
                        y[j] = x[j] - h[j];
                        mh[j] = -h[j];
                    }
                    let g = self.kernel.evaluate(xs, &h[..n]) + self.kernel.evaluate(&y[..n], &mh[..n]);
                    let fac = base * g / sp;
                    let w = Weights { main: fac * node.wk, check: fac * (node.wk - node.wg), ang: sigma * fac * node.wk };
                    sink.outside(Segment::Tail, w, i);
                }
            }
            sink.end_group();
        }
    }
}
