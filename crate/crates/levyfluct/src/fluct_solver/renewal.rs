//! Renewal functions `H_q`, `H̄_q` on a grid and their potential ratios.

use super::grid::Grid;
use crate::error::{invalid, Result};

/// `H_q` and `H̄_q` sampled on a grid, with their atoms at 0.
///
/// `r_plus[k-1]` is the mass of `H_q(dy)/H̄_q(y)` on cell `(x_{k-1}, x_k]`,
/// evaluated with the geometric mean of the end values of `H̄_q`; likewise
/// `r_minus` for `H̄_q(dy)/H_q(y⁻)`. Cells next to a zero atom carry an
/// infinite mass.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalPair {
    grid: Grid,
    h: Vec<f64>,
    hbar: Vec<f64>,
    r_plus: Vec<f64>,
    r_minus: Vec<f64>,
}

impl RenewalPair {
    /// `h` and `hbar` hold node values `x_1..x_N`; `h0`, `hbar0` are the atoms.
    pub fn new(grid: Grid, h0: f64, h: &[f64], hbar0: f64, hbar: &[f64]) -> Result<Self> {
        let n = grid.len();
        if h.len() != n || hbar.len() != n {
            return invalid(format!("renewal values must match the {n} grid nodes"));
        }
        let full = |a0: f64, v: &[f64]| {
            std::iter::once(a0)
                .chain(v.iter().copied())
                .collect::<Vec<_>>()
        };
        let (h, hbar) = (full(h0, h), full(hbar0, hbar));
        for (name, v) in [("H", &h), ("H̄", &hbar)] {
            if v[0] < 0.0 || v[1..].iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return invalid(format!(
                    "{name} must be positive on the grid and nonnegative at 0"
                ));
            }
            if v.windows(2).any(|w| w[1] < w[0]) {
                return invalid(format!("{name} must be nondecreasing"));
            }
        }
        let ratio = |num: &[f64], den: &[f64]| -> Vec<f64> {
            (1..num.len())
                .map(|k| (num[k] - num[k - 1]) / (den[k] * den[k - 1]).sqrt())
                .map(|r| if r.is_nan() { f64::INFINITY } else { r })
                .collect()
        };
        let r_plus = ratio(&h, &hbar);
        let r_minus = ratio(&hbar, &h);
        Ok(Self {
            grid,
            h,
            hbar,
            r_plus,
            r_minus,
        })
    }

    /// Samples closed-form renewal functions on `grid`.
    pub fn from_fn<F: Fn(f64) -> (f64, f64)>(
        grid: Grid,
        h0: f64,
        hbar0: f64,
        f: F,
    ) -> Result<Self> {
        let (h, hbar): (Vec<f64>, Vec<f64>) = grid.nodes().iter().map(|&x| f(x)).unzip();
        Self::new(grid, h0, &h, hbar0, &hbar)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `H_q` at nodes `0..=N`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `H̄_q` at nodes `0..=N`.
    pub fn hbar(&self) -> &[f64] {
        &self.hbar
    }

    pub fn h0(&self) -> f64 {
        self.h[0]
    }

    pub fn hbar0(&self) -> f64 {
        self.hbar[0]
    }

    pub fn r_plus(&self) -> &[f64] {
        &self.r_plus
    }

    pub fn r_minus(&self) -> &[f64] {
        &self.r_minus
    }

    pub fn h_at(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.h, x)
    }

    pub fn hbar_at(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.hbar, x)
    }

    /// Same data with `H` scaled by `k` and `H̄` by `1/k`.
    pub fn rescale(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return invalid("rescaling factor must be positive");
        }
        let h: Vec<f64> = self.h[1..].iter().map(|v| v * k).collect();
        let hb: Vec<f64> = self.hbar[1..].iter().map(|v| v / k).collect();
        Self::new(self.grid.clone(), self.h[0] * k, &h, self.hbar[0] / k, &hb)
    }

    /// Restriction to the first `n` nodes.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        let grid = Grid::new(self.grid.nodes()[..n].to_vec())?;
        Self::new(
            grid,
            self.h[0],
            &self.h[1..=n],
            self.hbar[0],
            &self.hbar[1..=n],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_ratios_are_dy_over_y() {
        let g = Grid::nested(512, 5.0).unwrap();
        let rp = RenewalPair::from_fn(g.clone(), 0.0, 0.0, |x| (x / 2.0, x / 2.0)).unwrap();
        assert!(rp.r_plus()[0].is_infinite());
        for k in 2..=g.len() {
            let (a, b) = (g.node(k - 1), g.node(k));
            let exact = (b / a).ln();
            assert!((rp.r_plus()[k - 1] / exact - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_decreasing_values() {
        let g = Grid::uniform(3, 3.0).unwrap();
        assert!(RenewalPair::new(g, 0.0, &[1.0, 0.5, 2.0], 0.0, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn interpolation_uses_atoms() {
        let g = Grid::uniform(2, 2.0).unwrap();
        let rp = RenewalPair::new(g, 0.0, &[1.0, 2.0], 0.5, &[1.0, 1.5]).unwrap();
        assert_eq!(rp.hbar_at(0.5), 0.75);
        assert_eq!(rp.h_at(3.0), 2.0);
    }
}
