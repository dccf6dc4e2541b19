//! The s -> 1 density 𝒜(x, ξ), the s -> 0 weights b_s and b, the constants
//! K_{p,n} and C_{p,n}, and the sweeps that approach both limits.
//!
//! The sweeps report the double integral without the `1/p` of the energy:
//! `(1-s) I(u)` for s -> 1 and `s I(u)` for s -> 0. These tend to `∫𝒜(x, ∇u)`
//! and `∫|u|^p b` respectively.
//!
//! For s -> 0 the library uses `b(x) = (2/p) ∫_S m_∞(x, ω)`: split `b_s` at a
//! fixed radius R; `2s` times the part below R vanishes, and on the part above
//! R the weight is within o(1) of `m_∞` while `2s ∫_R^∞ r^{-sp-1} dr -> 2/p`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::energy::double_integral;
use crate::error::{invalid, Error, Result};
use crate::gridfn::{FractionalParams, GridFunction};
use crate::kernel::Kernel;
use crate::quadrature::{kronrod7, pairwise_sum, sphere_area, SphereRule};
use crate::table::{extrapolate_to_zero, ConvergenceTable, Extrapolation};

/// 𝒜(x, ξ) = (1/p) ∫_S a(x, ω) |ξ·ω|^p for one kernel and exponent.
#[derive(Debug, Clone)]
pub struct LimitDensity {
    kernel: Kernel,
    p: f64,
    rule: SphereRule,
}

impl LimitDensity {
    pub fn new(kernel: &Kernel, p: f64) -> Result<Self> {
        Self::with_rule(kernel, p, SphereRule::for_dim(kernel.dim()))
    }

    pub fn with_rule(kernel: &Kernel, p: f64, rule: SphereRule) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("p must satisfy 1 <= p < inf, got {p}")));
        }
        if rule.dim() != kernel.dim() {
            return Err(Error::Dimension(format!("sphere rule for n = {} but kernel has n = {}", rule.dim(), kernel.dim())));
        }
        Ok(Self { kernel: kernel.clone(), p, rule })
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn limit_density(&self, x: &[f64], xi: &[f64]) -> f64 {
        let p = self.p;
        self.rule.integrate(|w| {
            let dot: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
            self.kernel.radial_limit(x, w) * dot.abs().powf(p)
        }) / p
    }

    /// `a_ij(x) = ½ ∫_S ω_i ω_j a(x, ω)`, so that `A ξ·ξ = 𝒜(x, ξ)` when p = 2.
    pub fn limit_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if self.p != 2.0 {
            return Err(invalid(format!("the limit matrix exists only for p = 2, got p = {}", self.p)));
        }
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * self.rule.integrate(|w| w[i] * w[j] * self.kernel.radial_limit(x, w));
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }
}

/// `K_{p,n} = (1/p) ∫_S |ω_1|^p`.
pub fn bbm_constant(p: f64, n: usize) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(invalid(format!("K_(p,n) is provided for n in 1..=3, got {n}")));
    }
    Ok(SphereRule::for_dim(n).integrate(|w| w[0].abs().powf(p)) / p)
}

/// `C_{p,n} = 4 π^{n/2} / (p Γ(n/2)) = 2 nω_n / p`.
pub fn ms_constant(p: f64, n: usize) -> f64 {
    let half = n as f64 / 2.0;
    4.0 * std::f64::consts::PI.powf(half) / (p * statrs::function::gamma::gamma(half))
}

/// An enclosure `[lo, hi]` with a point estimate inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_within(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `∫_S ∫_{r0}^{r1} m(x, rω) r^{-sp-1} dr dω` on a ladder in `ln r`; returns
/// (K7 value, Σ|K7 - G3|).
fn radial_part(k: &Kernel, x: &[f64], sp: f64, r0: f64, r1: f64) -> (f64, f64) {
    let rule = SphereRule::for_dim(k.dim());
    let ratio = 2f64.powf(0.125);
    let mut vals = Vec::new();
    let mut err = 0.0;
    let mut h = vec![0.0; k.dim()];
    for (w, aw) in rule.iter() {
        let mut a = r0;
        while a < r1 {
            let b = (a * ratio).min(r1);
            let (mut vk, mut vg) = (0.0, 0.0);
            for node in kronrod7(a.ln(), b.ln()) {
                let r = node.x.exp();
                for (hj, wj) in h.iter_mut().zip(w) {
                    *hj = r * wj;
                }
                let f = aw * k.evaluate(x, &h) * (-sp * node.x).exp();
                vk += node.wk * f;
                vg += node.wg * f;
            }
            vals.push(vk);
            err += (vk - vg).abs();
            a = b;
        }
    }
    (pairwise_sum(&vals), err)
}

/// `∫_S ∫_{r_cut}^∞ m(x, rω) r^{-sp-1}` with `t = r^{-sp}`.
fn tail_part(k: &Kernel, x: &[f64], sp: f64, r_cut: f64) -> f64 {
    let rule = SphereRule::for_dim(k.dim());
    let mut h = vec![0.0; k.dim()];
    rule.integrate(|w| {
        kronrod7(0.0, r_cut.powf(-sp))
            .iter()
            .map(|node| {
                let r = node.x.powf(-1.0 / sp).min(1e300);
                for (hj, wj) in h.iter_mut().zip(w) {
                    *hj = r * wj;
                }
                node.wk * k.evaluate(x, &h)
            })
            .sum::<f64>()
            / sp
    })
}

/// Encloses `b_s(x) = 2s ∫_S ∫_{2|x|}^∞ m(x, rω) r^{-sp-1} dr dω`. The part
/// beyond `r_cut` is bracketed by `[m_-, m_+]`; the estimate integrates it.
pub fn ms_weight(k: &Kernel, x: &[f64], fp: FractionalParams, r_cut: f64) -> Result<Interval> {
    if x.len() != k.dim() {
        return Err(Error::Dimension(format!("point has {} coordinates, kernel has n = {}", x.len(), k.dim())));
    }
    let r0 = 2.0 * norm(x);
    if r0 == 0.0 {
        return Err(invalid("b_s(0) diverges: the radial integral starts at 2|x| = 0 where r^{-sp-1} is not integrable"));
    }
    if !(r_cut > r0) {
        return Err(invalid(format!("r_cut must exceed 2|x| = {r0}, got {r_cut}")));
    }
    let (s, p) = (fp.s(), fp.p());
    let sp = s * p;
    let (fin, err) = radial_part(k, x, sp, r0, r_cut);
    let (fin, err) = (2.0 * s * fin, 2.0 * s * err);
    let bracket = sphere_area(k.dim()) * 2.0 * s * r_cut.powf(-sp) / sp;
    let tail = 2.0 * s * tail_part(k, x, sp, r_cut);
    let lo = fin - err + k.m_minus() * bracket;
    let hi = fin + err + k.m_plus() * bracket;
    Ok(Interval { lo, hi, estimate: (fin + tail).clamp(lo, hi) })
}

/// `b(x) = (2/p) ∫_S m_∞(x, ω)`.
pub fn ms_weight_limit(k: &Kernel, x: &[f64], p: f64) -> Result<f64> {
    if !k.has_tail_limit() {
        return Err(Error::MissingTailLimit);
    }
    let rule = SphereRule::for_dim(k.dim());
    Ok(2.0 / p * rule.integrate(|w| k.tail_limit(x, w).expect("checked above")))
}

/// `b(x)` from `b_s(x)` at s = 0.2, 0.1, 0.05, extrapolated to s = 0.
pub fn ms_weight_extrapolated(k: &Kernel, x: &[f64], p: f64) -> Result<f64> {
    let r_cut = 32.0 * norm(x);
    let mut pts = Vec::new();
    for s in [0.2, 0.1, 0.05] {
        pts.push((s, ms_weight(k, x, FractionalParams::new(s, p)?, r_cut)?.estimate));
    }
    Ok(extrapolate_to_zero(&pts))
}

/// `s_k = 1 - 2^{-k}`, k = 2..7.
pub fn default_bbm_s_list() -> Vec<f64> {
    (2..=7).map(|k| 1.0 - 0.5f64.powi(k)).collect()
}

/// `s_k = 2^{-k}`, k = 2..7.
pub fn default_ms_s_list() -> Vec<f64> {
    (2..=7).map(|k| 0.5f64.powi(k)).collect()
}

pub(crate) fn check_list(s_list: &[f64], increasing: bool) -> Result<()> {
    if s_list.is_empty() {
        return Err(invalid("s list is empty"));
    }
    for w in s_list.windows(2) {
        if (increasing && w[1] <= w[0]) || (!increasing && w[1] >= w[0]) {
            let dir = if increasing { "increasing toward 1" } else { "decreasing toward 0" };
            return Err(invalid(format!("s list must be strictly {dir}, got {s_list:?}")));
        }
    }
    Ok(())
}

/// `∫𝒜(x, ∇u_h)` over cells, 2-point Gauss per axis on the bilinear interpolant.
pub fn limit_energy(ld: &LimitDensity, u: &GridFunction) -> f64 {
    let g = u.grid();
    let n = g.dim();
    // 2-point Gauss per axis; exact for p = 2 on the bilinear interpolant.
    let q = 0.5 / 3f64.sqrt();
    let pts: &[[f64; 2]] = if n == 1 {
        &[[0.5, 0.5]]
    } else {
        &[[0.5 - q, 0.5 - q], [0.5 + q, 0.5 - q], [0.5 - q, 0.5 + q], [0.5 + q, 0.5 + q]]
    };
    let w = g.cell_volume() / pts.len() as f64;
    let vals: Vec<f64> = (0..g.num_cells())
        .map(|c| {
            let (_, mid) = g.cell(c);
            pts.iter()
                .map(|t| {
                    let mut x = mid;
                    for k in 0..n {
                        x[k] += (t[k] - 0.5) * g.spacing(k);
                    }
                    ld.limit_density(&x[..n], &u.cell_gradient_at(c, *t)[..n]) * w
                })
                .sum::<f64>()
        })
        .collect();
    pairwise_sum(&vals)
}

/// Rows `(s, (1-s) I(u), extrapolated, ∫𝒜(x, ∇u), rel_error)`.
pub fn bbm_sweep(k: &Kernel, u: &GridFunction, p: f64, s_list: &[f64]) -> Result<ConvergenceTable> {
    check_list(s_list, true)?;
    let reference = limit_energy(&LimitDensity::new(k, p)?, u);
    let values = s_list
        .par_iter()
        .map(|&s| Ok((1.0 - s) * double_integral(k, u, FractionalParams::new(s, p)?)?.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceTable::extrapolated(s_list, &values, &vec![reference; s_list.len()], Extrapolation::OneMinusS))
}

/// `∫|u|^p b` by the trapezoid rule on the nodes.
pub fn ms_limit_integral(k: &Kernel, u: &GridFunction, p: f64) -> Result<f64> {
    let g = u.grid();
    let n = g.dim();
    let mut vals = Vec::with_capacity(g.num_nodes());
    for (i, v) in u.values().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let x = g.coord(i);
        vals.push(g.trapezoid_weight(i) * v.abs().powf(p) * ms_weight_limit(k, &x[..n], p)?);
    }
    Ok(pairwise_sum(&vals))
}

/// Rows `(s, s I(u), extrapolated, ∫|u|^p b, rel_error)`.
pub fn ms_sweep(k: &Kernel, u: &GridFunction, p: f64, s_list: &[f64]) -> Result<ConvergenceTable> {
    check_list(s_list, false)?;
    let reference = ms_limit_integral(k, u, p)?;
    let values = s_list
        .par_iter()
        .map(|&s| Ok(s * double_integral(k, u, FractionalParams::new(s, p)?)?.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceTable::extrapolated(s_list, &values, &vec![reference; s_list.len()], Extrapolation::S))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::Grid;
    use crate::kernel::{builtin, KernelParams, ParamValue};
    use std::f64::consts::PI;

    fn params(kv: &[(&str, f64)]) -> KernelParams {
        kv.iter().map(|(k, v)| (k.to_string(), ParamValue::Number(*v))).collect()
    }

    fn fp(s: f64, p: f64) -> FractionalParams {
        FractionalParams::new(s, p).unwrap()
    }

    #[test]
    fn density_examples() {
        let k1 = Kernel::constant(1.0, 1).unwrap();
        let ld = LimitDensity::new(&k1, 2.0).unwrap();
        assert!((ld.limit_density(&[0.3], &[1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ld.limit_density(&[0.3], &[0.0]), 0.0);
        let k2 = Kernel::constant(1.0, 2).unwrap();
        let ld2 = LimitDensity::new(&k2, 2.0).unwrap();
        assert!((ld2.limit_density(&[0.0, 0.0], &[0.6, 0.8]) - PI / 2.0).abs() < 1e-12);
        assert_eq!(ld2.limit_density(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn matrix_examples() {
        let k2 = Kernel::constant(1.0, 2).unwrap();
        let a = LimitDensity::new(&k2, 2.0).unwrap().limit_matrix(&[0.0, 0.0]).unwrap();
        assert!((a[(0, 0)] - PI / 2.0).abs() < 1e-12 && (a[(1, 1)] - PI / 2.0).abs() < 1e-12 && a[(0, 1)].abs() < 1e-12);
        // a(ω) = 1 + cos²θ: ½∫cos²θ(1 + cos²θ) = π/2 + 3π/8, ½∫sin²θ(1 + cos²θ) = π/2 + π/8.
        let ks = builtin("separable-angular", &params(&[("c0", 1.0), ("c2", 1.0)])).unwrap();
        let ld = LimitDensity::new(&ks, 2.0).unwrap();
        let m = ld.limit_matrix(&[0.1, 0.2]).unwrap();
        assert!((m[(0, 0)] - (PI / 2.0 + 3.0 * PI / 8.0)).abs() < 1e-12);
        assert!((m[(1, 1)] - (PI / 2.0 + PI / 8.0)).abs() < 1e-12);
        for t in 0..8 {
            let th = 0.7 * t as f64 + 0.1;
            let xi = [th.cos() * (1.0 + t as f64), th.sin()];
            let q = m[(0, 0)] * xi[0] * xi[0] + 2.0 * m[(0, 1)] * xi[0] * xi[1] + m[(1, 1)] * xi[1] * xi[1];
            let d = ld.limit_density(&[0.1, 0.2], &xi);
            assert!((q - d).abs() <= 1e-10 * d);
        }
        let kp = builtin("periodic-1d", &KernelParams::new()).unwrap();
        let m1 = LimitDensity::new(&kp, 2.0).unwrap().limit_matrix(&[0.25]).unwrap();
        assert!((m1[(0, 0)] - 3.0).abs() < 1e-14);
        assert!(LimitDensity::new(&kp, 3.0).unwrap().limit_matrix(&[0.0]).is_err());
    }

    #[test]
    fn constants() {
        assert!((bbm_constant(2.0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((bbm_constant(2.0, 2).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((bbm_constant(1.0, 1).unwrap() - 2.0).abs() < 1e-15);
        // K_{2,3} = (1/2)(4π/3).
        assert!((bbm_constant(2.0, 3).unwrap() - 2.0 * PI / 3.0).abs() < 1e-10);
        assert!(bbm_constant(2.0, 4).is_err());
        assert!((ms_constant(2.0, 1) - 2.0).abs() < 1e-14);
        assert!((ms_constant(1.0, 1) - 4.0).abs() < 1e-14);
        assert!((ms_constant(2.0, 2) - 2.0 * PI).abs() < 1e-12);
        for n in 1..=3 {
            for p in [1.0, 2.0, 3.5] {
                assert!((ms_constant(p, n) - 2.0 * sphere_area(n) / p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ms_weight_examples() {
        let k = Kernel::constant(1.0, 1).unwrap();
        let iv = ms_weight(&k, &[1.0], fp(0.5, 2.0), 10.0).unwrap();
        assert!((iv.lo - 1.0).abs() < 1e-10 && (iv.hi - 1.0).abs() < 1e-10, "{iv:?}");
        let k3 = Kernel::constant(3.0, 1).unwrap();
        let iv3 = ms_weight(&k3, &[1.0], fp(0.5, 2.0), 10.0).unwrap();
        assert!((iv3.estimate - 3.0 * iv.estimate).abs() < 1e-10);
        assert!(ms_weight(&k, &[0.0], fp(0.5, 2.0), 10.0).is_err());
        assert!(ms_weight(&k, &[1.0], fp(0.5, 2.0), 1.5).is_err());
    }

    #[test]
    fn ms_weight_sandwich_and_nesting() {
        let kp = builtin("periodic-1d", &KernelParams::new()).unwrap();
        let km = builtin("matrix-alpha", &params(&[("m11", 2.0), ("amp", 0.3)])).unwrap();
        for (k, x) in [(&kp, vec![0.7]), (&km, vec![0.3, -0.5])] {
            let n = k.dim();
            let f = fp(0.3, 2.0);
            let r = norm(&x);
            let c = 2f64.powf(1.0 - f.s() * f.p()) * sphere_area(n) / f.p() * r.powf(-f.s() * f.p());
            let iv = ms_weight(k, &x, f, 8.0 * r).unwrap();
            assert!(iv.lo >= k.m_minus() * c * (1.0 - 1e-12) && iv.hi <= k.m_plus() * c * (1.0 + 1e-12), "{iv:?}");
            let fine = ms_weight(k, &x, f, 64.0 * r).unwrap();
            assert!(fine.is_within(&iv), "{fine:?} {iv:?}");
            assert!(iv.contains(iv.estimate));
        }
    }

    #[test]
    fn ms_limit_examples() {
        for n in 1..=2 {
            for p in [1.0, 2.0, 3.0] {
                let k = Kernel::constant(1.0, n).unwrap();
                let x = if n == 1 { vec![1.0] } else { vec![0.6, 0.8] };
                let b = ms_weight_limit(&k, &x, p).unwrap();
                assert!((b - ms_constant(p, n)).abs() < 1e-10);
                let e = ms_weight_extrapolated(&k, &x, p).unwrap();
                assert!((e - b).abs() < 0.05 * b, "n={n} p={p}: {e} vs {b}");
                let k2 = Kernel::constant(2.0, n).unwrap();
                assert!((ms_weight_limit(&k2, &x, p).unwrap() - 2.0 * b).abs() < 1e-10);
            }
        }
        let k = Kernel::new("step", 1, (1.0, 1.5), |_, _| 1.0, |_, _| 1.0)
            .unwrap()
            .with_tail_limit(|_, w| if w[0] > 0.0 { 1.5 } else { 1.0 });
        assert!((ms_weight_limit(&k, &[0.0], 2.0).unwrap() - 2.5).abs() < 1e-14);
        let no_tail = Kernel::new("plain", 1, (1.0, 1.0), |_, _| 1.0, |_, _| 1.0).unwrap();
        assert!(matches!(ms_weight_limit(&no_tail, &[1.0], 2.0), Err(Error::MissingTailLimit)));
    }

    #[test]
    fn sweeps_of_zero_are_zero() {
        let u = GridFunction::zeros(Grid::new_1d(-1.0, 1.0, 17).unwrap());
        let k = Kernel::constant(1.0, 1).unwrap();
        let t = bbm_sweep(&k, &u, 2.0, &default_bbm_s_list()).unwrap();
        assert!(t.rows.iter().all(|r| r.value == 0.0 && r.reference == 0.0));
        let t = ms_sweep(&k, &u, 2.0, &default_ms_s_list()).unwrap();
        assert!(t.rows.iter().all(|r| r.value == 0.0));
        assert!(bbm_sweep(&k, &u, 2.0, &[0.9, 0.8]).is_err());
        assert!(ms_sweep(&k, &u, 2.0, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn bbm_two_dimensional_constant() {
        // (1-s)[u]^2 -> K_{2,2} ‖∇u‖² = (π/2) ‖∇u‖² in 2D.
        let g = Grid::new_2d([-1.0, 1.0], [-1.0, 1.0], 17).unwrap();
        let u = GridFunction::from_fn(g, true, |x| (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]));
        let k = Kernel::constant(1.0, 2).unwrap();
        let t = bbm_sweep(&k, &u, 2.0, &[0.875, 0.9375, 0.96875]).unwrap();
        // Exact ‖∇u_h‖² of the bilinear interpolant: on a cell, ∂₁u_h runs linearly
        // between edge slopes a and b, so its square integrates to h²(a² + ab + b²)/3.
        let (n, h) = (17, 0.125);
        let v = u.values();
        let mut grad2 = 0.0;
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let at = |di: usize, dj: usize| v[(j + dj) * n + i + di];
                let (a, b) = ((at(1, 0) - at(0, 0)) / h, (at(1, 1) - at(0, 1)) / h);
                let (c, d) = ((at(0, 1) - at(0, 0)) / h, (at(1, 1) - at(1, 0)) / h);
                grad2 += h * h * (a * a + a * b + b * b + c * c + c * d + d * d) / 3.0;
            }
        }
        let expect = PI / 2.0 * grad2;
        assert!((t.rows[2].reference - expect).abs() < 1e-12 * expect);
        assert!(t.rows[2].rel_error.unwrap() < 0.03, "{}", t.summary("bbm-2d"));
    }
}
