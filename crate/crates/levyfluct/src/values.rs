use crate::error::{FluctError, Result};
use num_complex::Complex64;
use serde::Serialize;

/// The six fluctuation functions at one `(x, λ)`. Entries that are only
/// defined on one half-plane are `None` on the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctValues {
    pub a: Complex64,
    pub a_bar: Complex64,
    pub b: Option<Complex64>,
    pub c: Option<Complex64>,
    pub b_bar: Option<Complex64>,
    pub c_bar: Option<Complex64>,
}

fn need(v: Option<Complex64>, name: &str) -> Result<Complex64> {
    v.ok_or_else(|| FluctError::InvalidInput(format!("{name} is not defined on this half-plane")))
}

impl FluctValues {
    pub fn b(&self) -> Result<Complex64> {
        need(self.b, "B")
    }
    pub fn c(&self) -> Result<Complex64> {
        need(self.c, "C")
    }
    pub fn b_bar(&self) -> Result<Complex64> {
        need(self.b_bar, "B̄")
    }
    pub fn c_bar(&self) -> Result<Complex64> {
        need(self.c_bar, "C̄")
    }

    /// `A·B + Ā·C - 1`, when `B` and `C` exist.
    pub fn identity_residual(&self) -> Option<f64> {
        Some((self.a * self.b? + self.a_bar * self.c? - 1.0).norm())
    }

    /// `Ā·B̄ + A·C̄ - 1`, when `B̄` and `C̄` exist.
    pub fn dual_identity_residual(&self) -> Option<f64> {
        Some((self.a_bar * self.b_bar? + self.a * self.c_bar? - 1.0).norm())
    }
}
