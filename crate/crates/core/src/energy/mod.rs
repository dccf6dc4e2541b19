//! Quadrature of the fractional double integral
//!
//! ```text
//! I_{m,s,p}(u) = ∬ m(x, h) |u(x) - u(x-h)|^p / |h|^{n+sp} dh dx
//! ```
//!
//! for a zero-extended grid function, the Gagliardo seminorm (m ≡ 1) and the
//! energy `J = (1-s)/p · I`.
//!
//! The outer integral is the trapezoid rule on the grid nodes. The inner
//! integral is taken in polar form `h = rω`:
//!
//! * `r < h_min`: `m |u(x) - u(x-rω)|^p` is replaced by `a(x, ω) |D_ω u(x)|^p r^p`
//!   with `D_ω` the one-sided difference toward `-ω`, integrated in closed form;
//! * `h_min <= r <= h_max`: geometric ladder with ratio `2^{1/8}`, G3/K7 in `ln r`
//!   on each rung, with the rung containing the box exit split there;
//! * `r > h_max`: closed form for constant kernels, otherwise K7 after `t = r^{-sp}`.
//!
//! When `x - h` leaves the box only `|u(x)|^p` survives, and the mirror region
//! (`x` outside, `x - h` inside) is folded in through the weight
//! `m(x, h) + m(x - h, -h)`. The error bound adds `|K7 - G3|` per rung, the
//! Taylor remainder at `h_min`, the gap between the M- and M/2-point angular
//! rules, and the gap between the outer trapezoid rule and its two
//! every-other-node sub-rules.

mod visit;

pub(crate) use visit::{pow_abs, Form, Segment, Sink, Visitor, Weights};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gridfn::{FractionalParams, Grid, GridFunction};
use crate::kernel::Kernel;
use crate::quadrature::{pairwise_sum, sphere_area};

/// Radii and rule sizes used by the energy quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// End of the near-diagonal segment.
    pub h_min: f64,
    /// Largest distance at which a ray can still leave the box (the box diameter).
    pub h_split: f64,
    /// Start of the tail segment.
    pub h_max: f64,
    pub ladder_ratio: f64,
    /// Size of the circle rule in 2D (ignored in 1D).
    pub angular_points: usize,
}

impl QuadratureSettings {
    /// `h_min` = spacing/8, `h_max` = 2 x box diameter, ratio `2^{1/8}`, 64 directions.
    pub fn for_grid(grid: &Grid) -> Self {
        let spacing = (0..grid.dim()).map(|k| grid.spacing(k)).fold(f64::INFINITY, f64::min);
        Self {
            h_min: spacing / 8.0,
            h_split: grid.diameter(),
            h_max: 2.0 * grid.diameter(),
            ladder_ratio: 2f64.powf(0.125),
            angular_points: 64,
        }
    }

    /// Halves `h_min` and doubles the number of rungs.
    pub fn refined(&self) -> Self {
        Self { h_min: 0.5 * self.h_min, ladder_ratio: self.ladder_ratio.sqrt(), ..*self }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        let spacing = (0..grid.dim()).map(|k| grid.spacing(k)).fold(f64::INFINITY, f64::min);
        if !(self.h_min > 0.0 && self.h_min <= spacing) {
            return Err(invalid(format!("h_min must lie in (0, grid spacing = {spacing}], got {}", self.h_min)));
        }
        if !(self.ladder_ratio > 1.0 && self.ladder_ratio.is_finite()) {
            return Err(invalid("ladder ratio must exceed 1"));
        }
        if grid.dim() == 2 && (self.angular_points < 4 || self.angular_points % 2 == 1) {
            return Err(invalid("angular rule needs an even number of at least 4 points"));
        }
        Ok(())
    }
}

/// Value of an energy with its breakdown and an error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub value: f64,
    pub near_diagonal: f64,
    pub bulk: f64,
    pub tail: f64,
    pub error_bound: f64,
    /// Settings actually used; `h_max` is the top rung of the ladder.
    pub settings: QuadratureSettings,
}

impl EnergyReport {
    /// Multiplies every component by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let (near, bulk, tail) = (c * self.near_diagonal, c * self.bulk, c * self.tail);
        Self {
            value: near + bulk + tail,
            near_diagonal: near,
            bulk,
            tail,
            error_bound: c.abs() * self.error_bound,
            settings: self.settings,
        }
    }
}

#[derive(Default, Clone, Copy)]
struct NodeSums {
    seg: [f64; 3],
    err: f64,
    ang: f64,
}

struct EnergySink<'a> {
    v: &'a [f64],
    p: f64,
    sums: NodeSums,
    group: f64,
}

impl EnergySink<'_> {
    #[inline]
    fn add(&mut self, seg: Segment, w: Weights, val: f64) {
        if val == 0.0 {
            return;
        }
        self.sums.seg[seg as usize] += w.main * val;
        self.group += w.check * val;
        self.sums.ang += w.ang * val;
    }
}

impl Sink for EnergySink<'_> {
    fn term(&mut self, seg: Segment, w: Weights, form: &Form) {
        let val = pow_abs(form.eval(self.v), self.p);
        self.add(seg, w, val);
    }

    fn outside(&mut self, seg: Segment, w: Weights, node: usize) {
        let val = pow_abs(self.v[node], self.p);
        self.add(seg, w, val);
    }

    fn end_group(&mut self) {
        self.sums.err += self.group.abs();
        self.group = 0.0;
    }
}

fn support_diameter(u: &GridFunction) -> f64 {
    let g = u.grid();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (i, v) in u.values().iter().enumerate() {
        if *v != 0.0 {
            let x = g.coord(i);
            for k in 0..g.dim() {
                lo[k] = lo[k].min(x[k] - g.spacing(k)).max(g.lo(k));
                hi[k] = hi[k].max(x[k] + g.spacing(k)).min(g.hi(k));
            }
        }
    }
    if lo[0] > hi[0] {
        return 0.0;
    }
    (0..g.dim()).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
}

/// Largest 2D grid (nodes per axis) the energy quadrature accepts.
///
/// Cost is nodes × directions × rungs × 7 kernel evaluations. With the default
/// settings the ladder has about `8 log2(16 (N-1))` rungs, so one 2D node costs
/// roughly `64 · 80 · 7 ≈ 36 000` evaluations and N = 48 about `8 · 10^7`,
/// a few seconds on one core. The count grows like `N² log N`.
pub const MAX_NODES_2D: usize = 48;

pub(crate) fn check_dims(k: &Kernel, grid: &Grid) -> Result<()> {
    if k.dim() != grid.dim() {
        return Err(Error::Dimension(format!("kernel is {}-dimensional but the grid is {}-dimensional", k.dim(), grid.dim())));
    }
    if grid.dim() == 2 && grid.nodes_per_axis() > MAX_NODES_2D {
        return Err(Error::TooLarge(format!(
            "2D energies take at most {MAX_NODES_2D} nodes per axis, got {}",
            grid.nodes_per_axis()
        )));
    }
    Ok(())
}

/// Raw double integral `∬ m |u(x) - u(x-h)|^p / |h|^{n+sp}` with explicit settings.
pub fn double_integral_with(
    k: &Kernel,
    u: &GridFunction,
    fp: FractionalParams,
    settings: &QuadratureSettings,
) -> Result<EnergyReport> {
    let grid = u.grid();
    check_dims(k, grid)?;
    settings.validate(grid)?;
    let bmax = u.boundary_max();
    if bmax > 0.0 {
        return Err(Error::BoundaryNotZero(bmax));
    }
    let vis = Visitor::new(k, grid, fp, settings);
    let used = QuadratureSettings { h_max: vis.tail_start(), ..*settings };
    let required = (2.0 * support_diameter(u)).max(grid.diameter());
    if used.h_max < required {
        return Err(Error::TailTooClose { h_max: used.h_max, required });
    }
    if u.is_zero() {
        return Ok(EnergyReport { value: 0.0, near_diagonal: 0.0, bulk: 0.0, tail: 0.0, error_bound: 0.0, settings: used });
    }
    let v = u.values();
    let p = fp.p();
    let nodes: Vec<NodeSums> = (0..grid.num_nodes())
        .into_par_iter()
        .map(|i| {
            // Nodes with u = 0 whose neighbours all vanish still see the
            // support through the bulk, so every node is visited.
            let mut sink = EnergySink { v, p, sums: NodeSums::default(), group: 0.0 };
            vis.visit_node(i, &mut sink);
            sink.sums
        })
        .collect();
    let col = |f: &dyn Fn(&NodeSums) -> f64| pairwise_sum(&nodes.iter().map(f).collect::<Vec<_>>());
    let near = col(&|s| s.seg[0]);
    let bulk = col(&|s| s.seg[1]);
    let tail = col(&|s| s.seg[2]);
    let err = col(&|s| s.err);
    let ang = col(&|s| s.ang).abs();
    // Outer trapezoid against the two interleaved rules on every other node
    // (even or odd, endpoints kept). The integrand is only piecewise smooth,
    // so the full difference is used, not a Richardson fraction of it.
    let total = col(&|s| s.seg[0] + s.seg[1] + s.seg[2]);
    let last = grid.nodes_per_axis() - 1;
    let outer = [0, 1]
        .iter()
        .map(|&offset| {
            let on = |j: usize| j == 0 || j == last || j % 2 == offset;
            let ratio = |m: usize| -> f64 {
                if !on(m) {
                    return 0.0;
                }
                let gap = |inside: bool, neighbour: usize| match (inside, inside && on(neighbour)) {
                    (false, _) => 0.0,
                    (true, true) => 1.0,
                    (true, false) => 2.0,
                };
                let coarse = gap(m > 0, m.wrapping_sub(1)) + gap(m < last, m + 1);
                let fine = (m > 0) as u8 as f64 + (m < last) as u8 as f64;
                coarse / fine
            };
            let coarse: Vec<f64> = nodes
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let m = grid.multi(i);
                    let w: f64 = (0..grid.dim()).map(|d| ratio(m[d])).product();
                    w * (s.seg[0] + s.seg[1] + s.seg[2])
                })
                .collect();
            (total - pairwise_sum(&coarse)).abs()
        })
        .fold(0.0, f64::max);
    Ok(EnergyReport {
        value: near + bulk + tail,
        near_diagonal: near,
        bulk,
        tail,
        error_bound: err + ang + outer,
        settings: used,
    })
}

/// Raw double integral with the default settings for the grid.
pub fn double_integral(k: &Kernel, u: &GridFunction, fp: FractionalParams) -> Result<EnergyReport> {
    double_integral_with(k, u, fp, &QuadratureSettings::for_grid(u.grid()))
}

/// `[u]_{s,p}^p`.
pub fn gagliardo(u: &GridFunction, fp: FractionalParams) -> Result<EnergyReport> {
    let k = Kernel::constant(1.0, u.grid().dim())?;
    double_integral(&k, u, fp)
}

/// `J_{m,s}(u) = (1-s)/p ∬ m(x,h) |u(x) - u(x-h)|^p / |h|^{n+sp}`.
pub fn anisotropic_energy(k: &Kernel, u: &GridFunction, fp: FractionalParams) -> Result<EnergyReport> {
    Ok(double_integral(k, u, fp)?.scaled((1.0 - fp.s()) / fp.p()))
}

/// Outcome of an inequality check: `slack = rhs - lhs`, accepted when
/// `slack >= -tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Combined quadrature error of both sides.
    pub tolerance: f64,
    pub passed: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        Self { lhs, rhs, slack, tolerance, passed: slack >= -tolerance }
    }
}

/// Checks `p/(1-s) J ≤ m_+ [u]^p ≤ (nω_n m_+/p)(‖∇u‖_p^p/(1-s) + 2^p ‖u‖_p^p/s)`.
/// Returns both links of the chain; the first is the (H1) sandwich step.
pub fn bbm_upper_bound_check(k: &Kernel, u: &GridFunction, fp: FractionalParams) -> Result<[InequalityCheck; 2]> {
    let (s, p) = (fp.s(), fp.p());
    let n = u.grid().dim();
    let raw = double_integral(k, u, fp)?;
    let semi = gagliardo(u, fp)?;
    let mp = k.m_plus();
    let mid = mp * semi.value;
    let grad = u.gradient_lp(p).powf(p);
    let norm = u.lp_norm(p).powf(p);
    let rhs = sphere_area(n) * mp / p * (grad / (1.0 - s) + 2f64.powf(p) * norm / s);
    Ok([
        InequalityCheck::new(raw.value, mid, raw.error_bound + mp * semi.error_bound),
        InequalityCheck::new(mid, rhs, mp * semi.error_bound),
    ])
}

/// Checks `J_{s1} ≤ 2^{p(1-s1)} J_{s2} + 2^{p-1} m_+ nω_n (1-s1)/s1 ‖u‖_p^p`.
pub fn interpolation_check(k: &Kernel, u: &GridFunction, s1: f64, s2: f64, p: f64) -> Result<InequalityCheck> {
    if !(s1 < s2) {
        return Err(invalid(format!("interpolation check needs s1 < s2, got s1 = {s1}, s2 = {s2}")));
    }
    let f1 = FractionalParams::new(s1, p)?;
    let f2 = FractionalParams::new(s2, p)?;
    let j1 = anisotropic_energy(k, u, f1)?;
    let j2 = anisotropic_energy(k, u, f2)?;
    let n = u.grid().dim();
    let c2 = 2f64.powf(p * (1.0 - s1));
    let c3 = 2f64.powf(p - 1.0) * k.m_plus() * sphere_area(n) * (1.0 - s1) / s1;
    let rhs = c2 * j2.value + c3 * u.lp_norm(p).powf(p);
    Ok(InequalityCheck::new(j1.value, rhs, j1.error_bound + c2 * j2.error_bound))
}
