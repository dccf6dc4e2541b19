//! Piecewise-multilinear functions on uniform grids over a box, extended by
//! zero outside the box. This is the discrete stand-in for W^{s,p}_0(Ω).

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::quadrature::pairwise_sum;

/// The pair (s, p) with s in (0, 1) and p >= 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalParams {
    s: f64,
    p: f64,
}

impl FractionalParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid(format!("s must lie in (0,1), got {s}")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("p must satisfy 1 <= p < inf, got {p}")));
        }
        Ok(Self { s, p })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Uniform grid with `nodes` points per axis on a box in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    nodes: usize,
    spacing: [f64; 2],
}

/// Up to four (node, weight) pairs of a multilinear interpolation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil {
    pub len: usize,
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

impl Stencil {
    fn push(&mut self, i: usize, w: f64) {
        self.idx[self.len] = i;
        self.w[self.len] = w;
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx[..self.len].iter().copied().zip(self.w[..self.len].iter().copied())
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        self.iter().map(|(i, w)| w * values[i]).sum()
    }
}

impl Grid {
    /// `bounds` holds `[a1, b1]` in 1D or `[a1, b1, a2, b2]` in 2D.
    pub fn new(dim: usize, bounds: &[f64], nodes: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if bounds.len() != 2 * dim {
            return Err(invalid(format!("box needs {} numbers, got {}", 2 * dim, bounds.len())));
        }
        if nodes < 3 {
            return Err(invalid(format!("need at least 3 nodes per axis, got {nodes}")));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let mut spacing = [0.0; 2];
        for k in 0..dim {
            let (a, b) = (bounds[2 * k], bounds[2 * k + 1]);
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(invalid(format!("degenerate box side [{a}, {b}]")));
            }
            lo[k] = a;
            hi[k] = b;
            spacing[k] = (b - a) / (nodes - 1) as f64;
        }
        Ok(Self { dim, lo, hi, nodes, spacing })
    }

    pub fn new_1d(a: f64, b: f64, nodes: usize) -> Result<Self> {
        Self::new(1, &[a, b], nodes)
    }

    pub fn new_2d(x: [f64; 2], y: [f64; 2], nodes: usize) -> Result<Self> {
        Self::new(2, &[x[0], x[1], y[0], y[1]], nodes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.pow(self.dim as u32)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    /// Box bounds in the `[a1, b1, (a2, b2)]` layout.
    pub fn bounds(&self) -> Vec<f64> {
        (0..self.dim).flat_map(|k| [self.lo[k], self.hi[k]]).collect()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim).map(|k| (self.hi[k] - self.lo[k]).powi(2)).sum::<f64>().sqrt()
    }

    /// Multi-index (i, j) of a node; j = 0 in 1D. Row-major with x fastest.
    pub fn multi(&self, idx: usize) -> [usize; 2] {
        [idx % self.nodes, idx / self.nodes]
    }

    pub fn index(&self, m: [usize; 2]) -> usize {
        m[0] + self.nodes * m[1]
    }

    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let m = self.multi(idx);
        let mut x = [0.0; 2];
        for k in 0..self.dim {
            x[k] = self.lo[k] + m[k] as f64 * self.spacing[k];
        }
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi(idx);
        (0..self.dim).any(|k| m[k] == 0 || m[k] == self.nodes - 1)
    }

    /// Composite trapezoid weight of a node.
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        let m = self.multi(idx);
        let mut w = 1.0;
        for k in 0..self.dim {
            let half = m[k] == 0 || m[k] == self.nodes - 1;
            w *= if half { 0.5 * self.spacing[k] } else { self.spacing[k] };
        }
        w
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    /// Multilinear interpolation stencil at `x`; empty outside the closed box.
    pub fn stencil(&self, x: &[f64]) -> Stencil {
        let mut st = Stencil::default();
        if !self.contains(x) {
            return st;
        }
        let mut cell = [0usize; 2];
        let mut t = [0.0; 2];
        for k in 0..self.dim {
            let u = (x[k] - self.lo[k]) / self.spacing[k];
            let c = (u.floor() as usize).min(self.nodes - 2);
            cell[k] = c;
            t[k] = (u - c as f64).clamp(0.0, 1.0);
        }
        if self.dim == 1 {
            st.push(cell[0], 1.0 - t[0]);
            st.push(cell[0] + 1, t[0]);
        } else {
            let base = self.index(cell);
            let n = self.nodes;
            st.push(base, (1.0 - t[0]) * (1.0 - t[1]));
            st.push(base + 1, t[0] * (1.0 - t[1]));
            st.push(base + n, (1.0 - t[0]) * t[1]);
            st.push(base + n + 1, t[0] * t[1]);
        }
        st
    }

    /// Number of cells in the grid.
    pub fn num_cells(&self) -> usize {
        (self.nodes - 1).pow(self.dim as u32)
    }

    /// Lower-left node of a cell, and its midpoint.
    pub fn cell(&self, c: usize) -> (usize, [f64; 2]) {
        let nc = self.nodes - 1;
        let m = [c % nc, c / nc];
        let base = self.index(if self.dim == 1 { [m[0], 0] } else { m });
        let mut mid = [0.0; 2];
        for k in 0..self.dim {
            mid[k] = self.lo[k] + (m[k] as f64 + 0.5) * self.spacing[k];
        }
        (base, mid)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing[k]).product()
    }

    fn header(&self) -> String {
        let b: Vec<String> = self.bounds().iter().map(|v| v.to_string()).collect();
        format!("# grid n={} box={} N={}", self.dim, b.join(","), self.nodes)
    }
}

/// Node values of a piecewise-multilinear function on a [`Grid`], zero outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    pinned: bool,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.num_nodes();
        Self { grid, values: vec![0.0; n], pinned: true }
    }

    /// Samples `f` at the nodes. With `pinned`, boundary nodes are set to 0.
    pub fn from_fn(grid: Grid, pinned: bool, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_nodes())
            .map(|i| {
                if pinned && grid.is_boundary(i) {
                    0.0
                } else {
                    f(&grid.coord(i)[..grid.dim()])
                }
            })
            .collect();
        Self { grid, values, pinned }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>, pinned: bool) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::Dimension(format!(
                "expected {} node values, got {}",
                grid.num_nodes(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid function values must be finite"));
        }
        let gf = Self { grid, values, pinned };
        if pinned && gf.boundary_max() != 0.0 {
            return Err(Error::BoundaryNotZero(gf.boundary_max()));
        }
        Ok(gf)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    pub fn boundary_max(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| self.grid.is_boundary(i))
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect(), pinned: self.pinned }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Dimension("grid functions live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid.clone(), values, pinned: self.pinned && other.pinned })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// Multilinear interpolation inside the box, exactly zero outside.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.grid.stencil(x).apply(&self.values)
    }

    /// `‖u‖_p` by the composite trapezoid rule on the nodes.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let terms: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.trapezoid_weight(i) * v.abs().powf(p))
            .collect();
        pairwise_sum(&terms).powf(1.0 / p)
    }

    /// Cell-centered gradient of the interpolant on cell `c`.
    pub fn cell_gradient(&self, c: usize) -> [f64; 2] {
        let (base, _) = self.grid.cell(c);
        let u = &self.values;
        if self.grid.dim() == 1 {
            [(u[base + 1] - u[base]) / self.grid.spacing(0), 0.0]
        } else {
            let n = self.grid.nodes_per_axis();
            let (u00, u10, u01, u11) = (u[base], u[base + 1], u[base + n], u[base + n + 1]);
            [
                (u10 - u00 + u11 - u01) / (2.0 * self.grid.spacing(0)),
                (u01 - u00 + u11 - u10) / (2.0 * self.grid.spacing(1)),
            ]
        }
    }

    /// Gradient of the bilinear interpolant at local coordinates `t ∈ [0,1]^2` of cell `c`.
    pub fn cell_gradient_at(&self, c: usize, t: [f64; 2]) -> [f64; 2] {
        let (base, _) = self.grid.cell(c);
        let u = &self.values;
        if self.grid.dim() == 1 {
            return [(u[base + 1] - u[base]) / self.grid.spacing(0), 0.0];
        }
        let n = self.grid.nodes_per_axis();
        let (u00, u10, u01, u11) = (u[base], u[base + 1], u[base + n], u[base + n + 1]);
        [
            ((u10 - u00) * (1.0 - t[1]) + (u11 - u01) * t[1]) / self.grid.spacing(0),
            ((u01 - u00) * (1.0 - t[0]) + (u11 - u10) * t[0]) / self.grid.spacing(1),
        ]
    }

    /// `‖∇u‖_p` from cell-centered differences (midpoint rule over cells).
    pub fn gradient_lp(&self, p: f64) -> f64 {
        let vol = self.grid.cell_volume();
        let terms: Vec<f64> = (0..self.grid.num_cells())
            .map(|c| {
                let g = self.cell_gradient(c);
                vol * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(p)
            })
            .collect();
        pairwise_sum(&terms).powf(1.0 / p)
    }

    /// CSV text: a `# grid ...` header, then node values in row-major order
    /// (one line per row of constant y).
    pub fn to_csv(&self) -> String {
        let mut out = self.grid.header();
        out.push('\n');
        let n = self.grid.nodes_per_axis();
        if self.grid.dim() == 1 {
            for v in &self.values {
                let _ = writeln!(out, "{v}");
            }
        } else {
            for row in self.values.chunks(n) {
                let r: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", r.join(","));
            }
        }
        out
    }

    /// Parses the format written by [`GridFunction::to_csv`]. The result is
    /// pinned when every boundary value is zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
        let rest = header
            .trim()
            .strip_prefix('#')
            .map(str::trim)
            .and_then(|h| h.strip_prefix("grid"))
            .ok_or_else(|| Error::Parse(format!("bad grid header `{header}`")))?;
        let (mut dim, mut bounds, mut nodes) = (None, None, None);
        for field in rest.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field `{field}`")))?;
            let bad = |_| Error::Parse(format!("bad value in header field `{field}`"));
            match k {
                "n" => dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "N" => nodes = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "box" => {
                    bounds = Some(
                        v.split(',')
                            .map(|x| x.parse::<f64>().map_err(|e| bad(e.to_string())))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                _ => return Err(Error::Parse(format!("unknown header field `{k}`"))),
            }
        }
        let (Some(dim), Some(bounds), Some(nodes)) = (dim, bounds, nodes) else {
            return Err(Error::Parse("grid header needs n=, box= and N=".into()));
        };
        let grid = Grid::new(dim, &bounds, nodes)?;
        let mut values = Vec::with_capacity(grid.num_nodes());
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for tok in line.split(',') {
                values.push(tok.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: `{}`: {e}", lineno + 2, tok.trim()))
                })?);
            }
        }
        let mut gf = Self::from_values(grid, values, false)?;
        gf.pinned = gf.boundary_max() == 0.0;
        Ok(gf)
    }
}
