//! Quadrature rules: Gauss-Legendre panels and double-exponential rules for
//! integrands with algebraic endpoint singularities.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]` with one panel.
    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| f(mid + half * t) * w)
            .sum::<Complex64>()
            * half
    }

    /// Composite rule over consecutive breakpoints.
    pub fn integrate_panels<F: FnMut(f64) -> Complex64>(
        &self,
        breaks: &[f64],
        mut f: F,
    ) -> Complex64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

const MAX_LEVEL: usize = 12;

/// Tanh-sinh rule on `[a, b]`. The integrand receives `(y, y - a, b - y)` with
/// both distances computed without cancellation, so factors like `(b - y)^p`
/// stay accurate near the endpoints.
pub fn tanh_sinh<F>(a: f64, b: f64, tol: f64, mut f: F) -> Complex64
where
    F: FnMut(f64, f64, f64) -> Complex64,
{
    let len = b - a;
    let mut eval = |t: f64| -> Complex64 {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // 1 - tanh|u| and 1 + tanh|u|
        let small = 2.0 * e / (1.0 + e);
        let big = 2.0 / (1.0 + e);
        let (da, db) = if u >= 0.0 {
            (0.5 * len * big, 0.5 * len * small)
        } else {
            (0.5 * len * small, 0.5 * len * big)
        };
        if da <= 0.0 || db <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let ch = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (ch * ch);
        let y = if da <= db { a + da } else { b - db };
        f(y, da, db) * (0.5 * len * w)
    };
    let t_max = 6.0;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let mut add = Complex64::new(0.0, 0.0);
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let next = sum * h;
        let diff = (next - estimate).norm();
        estimate = next;
        if diff <= tol * estimate.norm().max(1e-300) {
            break;
        }
    }
    estimate
}

/// Exp-sinh rule on `[a, inf)`. The integrand receives `(y, y - a)`.
pub fn exp_sinh<F>(a: f64, tol: f64, mut f: F) -> Complex64
where
    F: FnMut(f64, f64) -> Complex64,
{
    let mut eval = |t: f64| -> Complex64 {
        let d = (FRAC_PI_2 * t.sinh()).exp();
        if d == 0.0 || !d.is_finite() {
            return Complex64::new(0.0, 0.0);
        }
        let w = FRAC_PI_2 * t.cosh() * d;
        let v = f(a + d, d) * w;
        if v.re.is_finite() && v.im.is_finite() {
            v
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let (t_lo, t_hi) = (-6.0, 5.0);
    let mut h = 0.5;
    let mut sum = Complex64::new(0.0, 0.0);
    let n_lo = (t_lo / h) as i64;
    let n_hi = (t_hi / h) as i64;
    for k in n_lo..=n_hi {
        sum += eval(k as f64 * h);
    }
    let mut estimate = sum * h;
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let n_lo = (t_lo / h) as i64;
        let n_hi = (t_hi / h) as i64;
        let mut add = Complex64::new(0.0, 0.0);
        for k in n_lo..=n_hi {
            if k.rem_euclid(2) == 1 {
                add += eval(k as f64 * h);
            }
        }
        sum += add;
        let next = sum * h;
        let diff = (next - estimate).norm();
        estimate = next;
        if diff <= tol * estimate.norm().max(1e-300) {
            break;
        }
    }
    estimate
}
