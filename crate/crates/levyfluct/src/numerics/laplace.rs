//! Numerical Laplace inversion on a cotangent (Talbot-type) contour with
//! the Weideman-Trefethen parameters.

use num_complex::Complex64;

pub const DEFAULT_NODES: usize = 64;

const A: f64 = 0.5017;
const B: f64 = 0.6407;
const C: f64 = 0.6122;
const D: f64 = 0.2645;

/// Inverts `F` at `t > 0`, assuming `f` is real and `F(conj s) = conj F(s)`.
/// `shift` moves the contour so that `F(s + shift)` has its singularities on
/// the closed left half-plane; the shift is undone by the factor `e^{shift t}`.
pub fn invert<F: Fn(Complex64) -> Complex64>(f: F, t: f64, shift: f64, nodes: usize) -> f64 {
    assert!(t > 0.0 && nodes >= 2 && nodes.is_multiple_of(2));
    let n = nodes as f64;
    let step = 2.0 * std::f64::consts::PI / n;
    let sum: Complex64 = (nodes / 2..nodes)
        .map(|k| {
            let th = -std::f64::consts::PI + (k as f64 + 0.5) * step;
            let (s, c) = (B * th).sin_cos();
            let cot = c / s;
            let z = Complex64::new(A * th * cot - C, D * th) * (n / t);
            let dz = Complex64::new(A * cot - A * B * th / (s * s), D) * (n / t);
            (z * t).exp() * f(z + shift) * dz
        })
        .sum();
    (shift * t).exp() * 2.0 / n * sum.im
}

/// Inverts a transform whose original is complex valued, using all contour nodes.
pub fn invert_complex<F: Fn(Complex64) -> Complex64>(
    f: F,
    t: f64,
    shift: f64,
    nodes: usize,
) -> Complex64 {
    assert!(t > 0.0 && nodes >= 2);
    let n = nodes as f64;
    let step = 2.0 * std::f64::consts::PI / n;
    let sum: Complex64 = (0..nodes)
        .map(|k| {
            let th = -std::f64::consts::PI + (k as f64 + 0.5) * step;
            let (s, c) = (B * th).sin_cos();
            let cot = c / s;
            let z = Complex64::new(A * th * cot - C, D * th) * (n / t);
            let dz = Complex64::new(A * cot - A * B * th / (s * s), D) * (n / t);
            (z * t).exp() * f(z + shift) * dz
        })
        .sum();
    (shift * t).exp() * sum / Complex64::new(0.0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_exponential() {
        for &t in &[0.01, 0.5, 3.0, 20.0] {
            let v = invert(|s| 1.0 / (s + 1.0), t, 0.0, DEFAULT_NODES);
            assert!((v - (-t).exp()).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn complex_original() {
        let l = Complex64::new(0.5, 2.0);
        let t = 1.5;
        let v = invert_complex(|s| 1.0 / (s + l), t, 0.0, DEFAULT_NODES);
        assert!((v - (-l * t).exp()).norm() < 1e-9);
    }

    #[test]
    fn inverts_growing_sinh_with_shift() {
        for &t in &[0.01, 1.0, 10.0, 40.0] {
            let v = invert(|s| 1.0 / (s * s - 1.0), t, 1.0, DEFAULT_NODES);
            assert!((v / t.sinh() - 1.0).abs() < 1e-9, "t={t}");
        }
    }
}
