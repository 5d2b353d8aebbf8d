//! Complex helpers missing from num-complex.

use num_complex::Complex64;

/// `exp(z) - 1` without cancellation for small `|z|`.
pub fn expm1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        // Horner on the Taylor series; six terms reach double precision here.
        let mut s = Complex64::new(1.0, 0.0);
        for k in (2..=7).rev() {
            s = Complex64::new(1.0, 0.0) + s * z / k as f64;
        }
        z * s
    } else {
        // exp(x + iy) - 1 = expm1(x) cos y - 2 sin^2(y/2) + i e^x sin y
        let (x, y) = (z.re, z.im);
        let half = (0.5 * y).sin();
        Complex64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
    }
}

/// `(exp(z) - 1) / z`, equal to 1 at `z = 0`.
pub fn exprel(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let mut s = Complex64::new(1.0, 0.0);
        for k in (2..=8).rev() {
            s = Complex64::new(1.0, 0.0) + s * z / k as f64;
        }
        s
    } else {
        expm1(z) / z
    }
}

/// Principal-branch power that maps `0` to `0` for positive exponents.
pub fn cpow(z: Complex64, p: f64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        if p > 0.0 {
            Complex64::new(0.0, 0.0)
        } else if p == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        }
    } else {
        Complex64::from_polar(z.norm().powf(p), z.arg() * p)
    }
}
