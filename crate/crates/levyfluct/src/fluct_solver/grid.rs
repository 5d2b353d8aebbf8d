//! Amplitude grids: geometric near 0, uniform beyond 1.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    /// Strictly increasing positive nodes; node 0 at `x = 0` is implicit.
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return invalid("empty grid");
        }
        if !(nodes[0] > 0.0)
            || nodes.windows(2).any(|w| !(w[1] > w[0]))
            || nodes.iter().any(|x| !x.is_finite())
        {
            return invalid("grid nodes must be positive, finite and strictly increasing");
        }
        Ok(Self { nodes })
    }

    /// `n` cells from `1e-4·x_max` to `x_max`: half geometric up to
    /// `min(1, x_max)`, half uniform after. Doubling `n` refines every cell
    /// into two, so grids of size `n` and `2n` are nested.
    pub fn nested(n: usize, x_max: f64) -> Result<Self> {
        Self::nested_from(n, 1e-4 * x_max, x_max)
    }

    pub fn nested_from(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return invalid(format!("grid size {n} must be even and at least 4"));
        }
        if !(x_min > 0.0 && x_max > x_min && x_max.is_finite()) {
            return invalid(format!("need 0 < x_min < x_max, got {x_min}, {x_max}"));
        }
        let knee = x_max.min(1.0).max(x_min);
        let (n_geo, n_uni) = if knee >= x_max {
            (n, 0)
        } else {
            (n / 2, n / 2)
        };
        let ratio = (knee / x_min).ln() / n_geo as f64;
        let mut nodes: Vec<f64> = (0..=n_geo)
            .map(|k| x_min * (ratio * k as f64).exp())
            .collect();
        *nodes.last_mut().expect("nonempty") = knee;
        let h = (x_max - knee) / n_uni.max(1) as f64;
        nodes.extend((1..=n_uni).map(|k| {
            if k == n_uni {
                x_max
            } else {
                knee + h * k as f64
            }
        }));
        Self::new(nodes)
    }

    /// Evenly spaced nodes `h, 2h, ..., n h`.
    pub fn uniform(n: usize, x_max: f64) -> Result<Self> {
        if n == 0 || !(x_max > 0.0) {
            return invalid("uniform grid needs n > 0 and x_max > 0");
        }
        let h = x_max / n as f64;
        Self::new((1..=n).map(|k| h * k as f64).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty")
    }

    /// Node `k` with the implicit node `x_0 = 0`.
    pub fn node(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.nodes[k - 1]
        }
    }

    /// Index `k ≥ 1` with `x_{k-1} < x ≤ x_k` (clamped to the grid).
    pub fn cell_of(&self, x: f64) -> usize {
        self.nodes
            .partition_point(|&n| n < x)
            .min(self.nodes.len() - 1)
            + 1
    }

    /// Piecewise-linear interpolation of node values (`values[0]` at `x = 0`).
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len() + 1);
        if x <= 0.0 {
            return values[0];
        }
        if x >= self.x_max() {
            return values[values.len() - 1];
        }
        let k = self.cell_of(x);
        let (a, b) = (self.node(k - 1), self.node(k));
        let t = (x - a) / (b - a);
        values[k - 1] * (1.0 - t) + values[k] * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_grids_share_nodes() {
        let g = Grid::nested(64, 20.0).unwrap();
        let f = Grid::nested(128, 20.0).unwrap();
        assert_eq!(g.len(), 65);
        for (k, &x) in g.nodes().iter().enumerate() {
            assert!((f.nodes()[2 * k] - x).abs() < 1e-12 * x.max(1.0));
        }
        assert_eq!(g.x_max(), 20.0);
        assert!((g.nodes()[0] - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn short_grids_are_geometric() {
        let g = Grid::nested(10, 0.5).unwrap();
        let r: Vec<f64> = g.nodes().windows(2).map(|w| w[1] / w[0]).collect();
        assert!(r.iter().all(|&v| (v - r[0]).abs() < 1e-12));
    }

    #[test]
    fn cell_lookup_and_interpolation() {
        let g = Grid::uniform(4, 4.0).unwrap();
        assert_eq!(g.cell_of(0.5), 1);
        assert_eq!(g.cell_of(1.0), 1);
        assert_eq!(g.cell_of(1.5), 2);
        assert_eq!(g.interpolate(&[0.0, 1.0, 2.0, 3.0, 4.0], 2.25), 2.25);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(Grid::new(vec![0.0, 1.0]).is_err());
        assert!(Grid::new(vec![1.0, 1.0]).is_err());
        assert!(Grid::nested(7, 1.0).is_err());
    }
}
