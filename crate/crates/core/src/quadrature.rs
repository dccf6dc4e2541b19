//! Low-level quadrature building blocks: the embedded Gauss-Kronrod 3/7 pair
//! used on every radial interval, Gauss-Legendre nodes, sphere rules, a fixed
//! order pairwise sum and a Halton sequence for sampling audits.

use std::f64::consts::PI;

/// Abscissae of the 7-point Kronrod rule on [-1, 1], non-negative half.
const XGK: [f64; 4] = [
    0.960_491_268_708_020_283_423_507_092_629_080,
    0.774_596_669_241_483_377_035_853_079_956_480,
    0.434_243_749_346_802_558_002_071_502_844_628,
    0.0,
];
const WGK: [f64; 4] = [
    0.104_656_226_026_467_265_193_823_857_192_073,
    0.268_488_089_868_333_440_728_569_280_666_710,
    0.401_397_414_775_962_222_905_051_818_618_432,
    0.450_916_538_658_474_142_345_110_087_045_571,
];
/// Weights of the embedded 3-point Gauss rule (nodes XGK[1], XGK[3]).
const WG: [f64; 4] = [0.0, 5.0 / 9.0, 0.0, 8.0 / 9.0];

/// One node of the Kronrod 3/7 pair mapped to an interval.
#[derive(Debug, Clone, Copy)]
pub struct KronrodNode {
    pub x: f64,
    /// Weight in the 7-point Kronrod rule.
    pub wk: f64,
    /// Weight in the embedded 3-point Gauss rule (zero off the Gauss nodes).
    pub wg: f64,
}

/// Nodes of the G3/K7 pair on `[a, b]`.
pub fn kronrod7(a: f64, b: f64) -> [KronrodNode; 7] {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut out = [KronrodNode { x: c, wk: 0.0, wg: 0.0 }; 7];
    let mut k = 0;
    for j in 0..3 {
        for sign in [-1.0, 1.0] {
            out[k] = KronrodNode {
                x: c + sign * r * XGK[j],
                wk: r * WGK[j],
                wg: r * WG[j],
            };
            k += 1;
        }
    }
    out[6] = KronrodNode { x: c, wk: r * WGK[3], wg: r * WG[3] };
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the three-term recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A quadrature rule on the unit sphere S^{n-1} with respect to the surface measure.
#[derive(Debug, Clone)]
pub struct SphereRule {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// The two-point "sphere" S^0 = {-1, +1} with counting measure.
    pub fn two_point() -> Self {
        Self { dim: 1, points: vec![-1.0, 1.0], weights: vec![1.0, 1.0] }
    }

    /// Uniform `m`-point rule on the circle, angles `2πk/m`.
    pub fn circle(m: usize) -> Self {
        let mut points = Vec::with_capacity(2 * m);
        for k in 0..m {
            let t = 2.0 * PI * k as f64 / m as f64;
            points.push(t.cos());
            points.push(t.sin());
        }
        Self { dim: 2, points, weights: vec![2.0 * PI / m as f64; m] }
    }

    /// Product rule on S^2: Gauss-Legendre in cos(θ) times a uniform rule in φ.
    pub fn sphere(n_theta: usize, n_phi: usize) -> Self {
        let (z, wz) = gauss_legendre(n_theta);
        let mut points = Vec::with_capacity(3 * n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (zi, wi) in z.iter().zip(&wz) {
            let rho = (1.0 - zi * zi).sqrt();
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                points.extend_from_slice(&[rho * phi.cos(), rho * phi.sin(), *zi]);
                weights.push(wi * 2.0 * PI / n_phi as f64);
            }
        }
        Self { dim: 3, points, weights }
    }

    /// Default rule for dimension `n`: 2 points, 256-point circle, or 32x64 product rule.
    pub fn for_dim(n: usize) -> Self {
        match n {
            1 => Self::two_point(),
            2 => Self::circle(256),
            3 => Self::sphere(32, 64),
            _ => panic!("sphere rules are provided for n <= 3 only"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Integrates `f` over the sphere.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        pairwise_sum(&self.iter().map(|(w, wt)| wt * f(w)).collect::<Vec<_>>())
    }
}

/// Surface measure |S^{n-1}| = n ω_n.
pub fn sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Riemann zeta for real `sigma > 1` (Euler-Maclaurin with 16 terms).
pub fn zeta(sigma: f64) -> f64 {
    assert!(sigma > 1.0);
    const N: usize = 16;
    // B_2, B_4, B_6, B_8 over (2j)!.
    const B: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let n = N as f64;
    let mut s = 0.0;
    for k in 1..N {
        s += (k as f64).powf(-sigma);
    }
    s += n.powf(1.0 - sigma) / (sigma - 1.0) + 0.5 * n.powf(-sigma);
    let mut rising = sigma;
    for (j, b) in B.iter().enumerate() {
        s += b * rising * n.powf(-sigma - (2 * j + 1) as f64);
        let k = (2 * j + 1) as f64;
        rising *= (sigma + k) * (sigma + k + 1.0);
    }
    s
}

/// `ζ(-α)` for `α >= 0` through the functional equation.
pub fn zeta_negative(alpha: f64) -> f64 {
    if alpha < 1e-8 {
        return -0.5 - 0.5 * (2.0 * PI).ln() * alpha;
    }
    let gamma = statrs::function::gamma::gamma(1.0 + alpha);
    2f64.powf(-alpha) * PI.powf(-alpha - 1.0) * (-PI * alpha / 2.0).sin() * gamma * zeta(1.0 + alpha)
}

/// Pairwise (cascade) summation with a fixed split, so results only depend on
/// the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Van der Corput radical inverse in the given base.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `dims`-dimensional Halton point with index `i` (bases 2, 3, 5, 7, 11, ...).
pub fn halton(i: u64, dims: usize) -> Vec<f64> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    assert!(dims <= PRIMES.len());
    PRIMES[..dims].iter().map(|&b| radical_inverse(i, b)).collect()
}
