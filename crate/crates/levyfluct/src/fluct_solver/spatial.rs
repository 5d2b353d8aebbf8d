//! Measure-valued form of the forward march.
//!
//! `A(x⁻, du)` lives on `u ∈ [0, x)` and `Ā(x, dv)` on `v ∈ [-x, 0]`. Both are
//! stored as masses on a uniform grid in the distance `t` from 0 (`t = u`
//! resp. `t = -v`). A cell `(x_{k-1}, x_k]` adds to `A` the reflected copy
//! `t ↦ y - t` of `Ā(y)` weighted by `r₊`, averaged over `y` in the cell, and
//! symmetrically for `Ā`.

use super::grid::Grid;
use super::renewal::RenewalPair;
use crate::error::{invalid, Result};
use crate::numerics::cmath::exprel;
use num_complex::Complex64;

/// Amplitude sub-steps per renewal grid cell; the march has a first-order
/// boundary layer at `u → 0` that this keeps below 1e-3.
const SUBSTEPS: usize = 4;

/// Box widths below this fraction of a cell are treated as point shifts.
const POINT_SHIFT: f64 = 1e-3;

/// Cumulative helpers for a piecewise-linear density reconstructed from cell
/// masses on `edges` (minmod-limited slopes), with the top cell cut at the
/// support end `top`.
struct Cumulative<'a> {
    mass: &'a [f64],
    edges: &'a [f64],
    top: f64,
    /// Cell mean density and slope.
    dens: Vec<f64>,
    slope: Vec<f64>,
    /// `G` at cell edges.
    g: Vec<f64>,
    /// `∫G` at cell edges.
    gg: Vec<f64>,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

impl<'a> Cumulative<'a> {
    fn new(mass: &'a [f64], edges: &'a [f64], top: f64) -> Self {
        debug_assert!(edges.len() > mass.len());
        let n = mass.len();
        let width = |j: usize| (edges[j + 1].min(top) - edges[j]).max(0.0);
        let dens: Vec<f64> = (0..n)
            .map(|j| {
                if width(j) > 0.0 {
                    mass[j] / width(j)
                } else {
                    0.0
                }
            })
            .collect();
        let centre = |j: usize| edges[j] + 0.5 * width(j);
        let slope: Vec<f64> = (0..n)
            .map(|j| {
                let w = width(j);
                if w <= 0.0 {
                    return 0.0;
                }
                let left = (j > 0 && width(j - 1) > 0.0)
                    .then(|| (dens[j] - dens[j - 1]) / (centre(j) - centre(j - 1)));
                let right = (j + 1 < n && width(j + 1) > 0.0)
                    .then(|| (dens[j + 1] - dens[j]) / (centre(j + 1) - centre(j)));
                let s = match (left, right) {
                    (Some(l), Some(r)) => minmod(l, r),
                    (Some(d), None) | (None, Some(d)) => d,
                    (None, None) => 0.0,
                };
                // keep the density nonnegative across the cell
                s.clamp(-2.0 * dens[j] / w, 2.0 * dens[j] / w)
            })
            .collect();
        let mut c = Self {
            mass,
            edges,
            top,
            dens,
            slope,
            g: Vec::with_capacity(n + 1),
            gg: Vec::with_capacity(n + 1),
        };
        c.g.push(0.0);
        c.gg.push(0.0);
        for j in 0..n {
            let full = edges[j + 1] - edges[j];
            let gg = c.gg[j] + c.partial_integral(j, full);
            c.gg.push(gg);
            c.g.push(c.g[j] + mass[j]);
        }
        c
    }

    fn width(&self, j: usize) -> f64 {
        (self.edges[j + 1].min(self.top) - self.edges[j]).max(0.0)
    }

    /// Mass of cell `j` on `[e_j, e_j + r]`.
    fn partial_mass(&self, j: usize, r: f64) -> f64 {
        let w = self.width(j);
        if r >= w {
            return self.mass[j];
        }
        let (d, s) = (self.dens[j], self.slope[j]);
        d * r + 0.5 * s * (r * r - w * r)
    }

    /// `∫_0^r` of the partial mass, i.e. `∫G - G(e_j)·r` on the cell.
    fn partial_integral(&self, j: usize, r: f64) -> f64 {
        let w = self.width(j);
        let g = self.g[j];
        let inside = |r: f64| {
            let (d, s) = (self.dens[j], self.slope[j]);
            g * r + 0.5 * d * r * r + 0.5 * s * (r * r * r / 3.0 - 0.5 * w * r * r)
        };
        if r <= w {
            inside(r)
        } else {
            inside(w) + (g + self.mass[j]) * (r - w)
        }
    }

    /// Evaluates `f(j, r)` at `z = s - edges[i]` for `i = 0..=len`, where
    /// `z` lies in cell `j` at offset `r`. The arguments decrease, so one
    /// cursor walks the cells downward.
    fn along_reflection<F: Fn(usize, f64) -> f64>(
        &self,
        s: f64,
        len: usize,
        below: f64,
        f: F,
    ) -> Vec<f64> {
        let n = self.mass.len();
        let mut j = n;
        (0..=len)
            .map(|i| {
                let z = s - self.edges[i];
                if z <= 0.0 {
                    return below;
                }
                if z >= self.edges[n] {
                    return f(n, z - self.edges[n]);
                }
                while j > 0 && self.edges[j] > z {
                    j -= 1;
                }
                f(j, z - self.edges[j])
            })
            .collect()
    }

    fn cdf_values(&self, s: f64, len: usize) -> Vec<f64> {
        self.along_reflection(s, len, 0.0, |j, r| {
            if j < self.mass.len() {
                self.g[j] + self.partial_mass(j, r)
            } else {
                self.g[j]
            }
        })
    }

    fn cdf_integral_values(&self, s: f64, len: usize) -> Vec<f64> {
        self.along_reflection(s, len, 0.0, |j, r| {
            if j < self.mass.len() {
                self.gg[j] + self.partial_integral(j, r)
            } else {
                self.gg[j] + self.g[j] * r
            }
        })
    }
}

/// Masses of `∫ μ(y - ·) dy/(s1 - s0)` over `y ∈ [s0, s1]` on the first
/// `len` cells of `edges`, for `μ` supported on `[0, top]`.
fn reflect_average(
    mass: &[f64],
    edges: &[f64],
    top: f64,
    s0: f64,
    s1: f64,
    len: usize,
) -> Vec<f64> {
    let c = Cumulative::new(mass, edges, top);
    let w = s1 - s0;
    let point = |i: usize| w < POINT_SHIFT * (edges[i + 1] - edges[i]);
    let masses: Vec<f64> = if (0..len).all(point) {
        let f = c.cdf_values(0.5 * (s0 + s1), len);
        (0..len).map(|i| f[i] - f[i + 1]).collect()
    } else {
        let (f1, f0) = (
            c.cdf_integral_values(s1, len),
            c.cdf_integral_values(s0, len),
        );
        let fp = if (0..len).any(point) {
            c.cdf_values(0.5 * (s0 + s1), len)
        } else {
            Vec::new()
        };
        (0..len)
            .map(|i| {
                if point(i) {
                    fp[i] - fp[i + 1]
                } else {
                    (f1[i] - f1[i + 1] - f0[i] + f0[i + 1]) / w
                }
            })
            .collect()
    };
    masses.into_iter().map(|m| m.max(0.0)).collect()
}

fn add_scaled(base: &[f64], extra: &[f64], k: f64) -> Vec<f64> {
    let n = base.len().max(extra.len());
    (0..n)
        .map(|i| base.get(i).copied().unwrap_or(0.0) + k * extra.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn mean(a: &[f64], b: &[f64]) -> Vec<f64> {
    add_scaled(&a.iter().map(|v| 0.5 * v).collect::<Vec<_>>(), b, 0.5)
}

fn normalize(mut v: Vec<f64>, total: f64) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|m| *m *= total / s);
    }
    v
}

/// Splits each of the first `last` cells into `parts`, interpolating the
/// renewal functions log-log (linearly on a cell that starts at 0).
fn refine(rp: &RenewalPair, last: usize, parts: usize) -> Result<RenewalPair> {
    let g = rp.grid();
    let (h, hb) = (rp.h(), rp.hbar());
    let mut nodes = Vec::with_capacity(last * parts);
    let (mut hv, mut hbv) = (
        Vec::with_capacity(last * parts),
        Vec::with_capacity(last * parts),
    );
    for k in 1..=last {
        let (x0, x1) = (g.node(k - 1), g.node(k));
        for i in 1..=parts {
            let t = i as f64 / parts as f64;
            let interp = |v: &[f64]| {
                if i == parts {
                    v[k]
                } else if x0 > 0.0 && v[k - 1] > 0.0 {
                    let s = (x0 + t * (x1 - x0)).ln() - x0.ln();
                    v[k - 1] * (s * (v[k] / v[k - 1]).ln() / (x1 / x0).ln()).exp()
                } else {
                    v[k - 1] + t * (v[k] - v[k - 1])
                }
            };
            nodes.push(if i == parts { x1 } else { x0 + t * (x1 - x0) });
            hv.push(interp(h));
            hbv.push(interp(hb));
        }
    }
    // the first cell stays whole: the march starts at its end
    if h[0] == 0.0 || hb[0] == 0.0 {
        nodes.drain(..parts - 1);
        hv.drain(..parts - 1);
        hbv.drain(..parts - 1);
    }
    RenewalPair::new(Grid::new(nodes)?, h[0], &hv, hb[0], &hbv)
}

/// Cell edges: `[0, t_min]`, then half the cells geometric up to a tenth of
/// the span and the rest uniform.
fn spatial_edges(cells: usize, t_min: f64, x_span: f64) -> Result<Vec<f64>> {
    if cells < 4 {
        return invalid(format!("need at least 4 spatial cells, got {cells}"));
    }
    let knee = 0.1 * x_span;
    let n_geo = cells / 2;
    let n_uni = cells - n_geo;
    let ratio = (knee / t_min).ln() / (n_geo - 1) as f64;
    let mut edges = vec![0.0];
    edges.extend((0..n_geo).map(|k| t_min * (ratio * k as f64).exp()));
    *edges.last_mut().expect("nonempty") = knee;
    let h = (x_span - knee) / n_uni as f64;
    edges.extend((1..=n_uni).map(|k| {
        if k == n_uni {
            x_span
        } else {
            knee + h * k as f64
        }
    }));
    Ok(edges)
}

/// Spatial measures for every node `x_k ≤ x_span` of the renewal grid.
#[derive(Debug, Clone)]
pub struct SpatialMeasureGrid {
    edges: Vec<f64>,
    xs: Vec<f64>,
    a: Vec<Vec<f64>>,
    a_bar: Vec<Vec<f64>>,
}

/// Marches the measures up to `x_span` on `cells` spatial cells, laid out
/// geometrically near 0 and uniformly beyond a tenth of the span. Each cell
/// adds exactly `ΔH` resp. `ΔH̄`, so total masses match the renewal functions.
///
/// Without atoms the march starts at `x_1` from the self-similar small-`x`
/// shape whose mean matches the first-order expansion of the scalar march.
pub fn solve_spatial(rp: &RenewalPair, cells: usize, x_span: f64) -> Result<SpatialMeasureGrid> {
    if !(x_span > 0.0) || x_span > rp.grid().x_max() * (1.0 + 1e-12) {
        return invalid(format!(
            "spatial span {x_span} needs renewal data up to it; grid ends at {}",
            rp.grid().x_max()
        ));
    }
    let rp = &refine(rp, rp.grid().cell_of(x_span), SUBSTEPS)?;
    let g = rp.grid();
    let t_min = (1e-3 * g.node(1)).min(1e-4 * x_span);
    let edges = spatial_edges(cells, t_min, x_span)?;
    let last = g.cell_of(x_span);
    let widest = (1..=last)
        .map(|k| g.node(k) - g.node(k - 1))
        .fold(0.0, f64::max);
    let widest_t = edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if widest_t > widest {
        return invalid(format!(
            "spatial cell {widest_t} is coarser than the amplitude grid (widest cell {widest})"
        ));
    }
    let cells_below = |x: f64| (edges.partition_point(|&e| e < x)).clamp(1, cells);
    let (h, hb) = (rp.h(), rp.hbar());
    // Beta(1, β) shape on [0, x] with mean `m·x`; a point mass at 0 when m = 0
    let seed = |total: f64, x: f64, m: f64| -> Vec<f64> {
        if m <= 0.0 {
            return vec![total];
        }
        let beta = 1.0 / m - 1.0;
        let cdf = |t: f64| 1.0 - (1.0 - (t / x).min(1.0)).powf(beta);
        let v = (0..cells_below(x))
            .map(|i| cdf(edges[i + 1]) - cdf(edges[i]))
            .collect();
        normalize(v, total)
    };
    let mut xs = vec![0.0];
    let mut a = vec![vec![h[0]]];
    let mut a_bar = vec![vec![hb[0]]];
    let first = if h[0] > 0.0 && hb[0] > 0.0 { 1 } else { 2 };
    if first == 2 {
        let x1 = g.node(1);
        let slope = |v: &[f64], atom: f64| {
            if atom > 0.0 || g.len() < 2 {
                0.0
            } else {
                (v[2] / v[1]).ln() / (g.node(2) / x1).ln()
            }
        };
        let (kappa, kappa_bar) = (slope(h, h[0]), slope(hb, hb[0]));
        let d = 1.0 + kappa + kappa_bar;
        xs.push(x1);
        a.push(seed(h[1], x1, kappa / d));
        a_bar.push(seed(hb[1], x1, kappa_bar / d));
    }
    let (rpl, rmi) = (rp.r_plus(), rp.r_minus());
    for k in first..=last {
        let (s0, s1) = (g.node(k - 1), g.node(k));
        let len = cells_below(s1);
        let (a0, b0) = (&a[k - 1], &a_bar[k - 1]);
        let step = |src: &[f64], top: f64| reflect_average(src, &edges, top, s0, s1, len);
        let (from_b0, from_a0) = (step(b0, s0), step(a0, s0));
        let a_pred = add_scaled(a0, &from_b0, rpl[k - 1]);
        let b_pred = add_scaled(b0, &from_a0, rmi[k - 1]);
        // increments carry exactly the renewal mass of the cell
        let a_inc = normalize(mean(&from_b0, &step(&b_pred, s1)), h[k] - h[k - 1]);
        let b_inc = normalize(mean(&from_a0, &step(&a_pred, s1)), hb[k] - hb[k - 1]);
        xs.push(s1);
        a.push(add_scaled(&a[k - 1], &a_inc, 1.0));
        a_bar.push(add_scaled(&a_bar[k - 1], &b_inc, 1.0));
    }
    Ok(SpatialMeasureGrid {
        edges,
        xs,
        a,
        a_bar,
    })
}

impl SpatialMeasureGrid {
    /// Spatial cell edges `0 = t_0 < t_1 < … < t_M`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Amplitude nodes, starting with 0.
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn x_span(&self) -> f64 {
        *self.xs.last().expect("nonempty")
    }

    /// Masses of `A(x_k⁻, ·)` on `[t_j, t_{j+1})`.
    pub fn a_masses(&self, k: usize) -> &[f64] {
        &self.a[k]
    }

    /// Masses of `Ā(x_k, ·)` on `[-t_{j+1}, -t_j]`.
    pub fn a_bar_masses(&self, k: usize) -> &[f64] {
        &self.a_bar[k]
    }

    fn interpolated(&self, family: &[Vec<f64>], x: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.x_span() * (1.0 + 1e-12)).contains(&x) {
            return invalid(format!(
                "amplitude {x} outside the spatial solution; rerun with x_span ≥ {x}"
            ));
        }
        let k = self
            .xs
            .partition_point(|&n| n < x)
            .clamp(1, self.xs.len() - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        Ok(add_scaled(
            &family[k - 1]
                .iter()
                .map(|m| m * (1.0 - t))
                .collect::<Vec<_>>(),
            &family[k],
            t,
        ))
    }

    /// Mass of one spatial cell `j` at amplitude `x`, linear in `x`.
    fn cell_mass(&self, family: &[Vec<f64>], x: f64, j: usize) -> Result<f64> {
        if !(0.0..=self.x_span() * (1.0 + 1e-12)).contains(&x) {
            return invalid(format!(
                "amplitude {x} outside the spatial solution; rerun with x_span ≥ {x}"
            ));
        }
        let k = self
            .xs
            .partition_point(|&n| n < x)
            .clamp(1, self.xs.len() - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        let m = |v: &Vec<f64>| v.get(j).copied().unwrap_or(0.0);
        Ok(m(&family[k - 1]) * (1.0 - t) + m(&family[k]) * t)
    }

    /// Mass of `A(x⁻, ·)` on `[t_j, t_{j+1})`.
    pub fn a_mass_at(&self, x: f64, j: usize) -> Result<f64> {
        self.cell_mass(&self.a, x, j)
    }

    /// Mass of `Ā(x, ·)` on `[-t_{j+1}, -t_j]`.
    pub fn a_bar_mass_at(&self, x: f64, j: usize) -> Result<f64> {
        self.cell_mass(&self.a_bar, x, j)
    }

    /// `A(x⁻, ·)` at any amplitude, linear in `x` between nodes.
    pub fn a_masses_at(&self, x: f64) -> Result<Vec<f64>> {
        self.interpolated(&self.a, x)
    }

    pub fn a_bar_masses_at(&self, x: f64) -> Result<Vec<f64>> {
        self.interpolated(&self.a_bar, x)
    }

    fn transform(&self, masses: &[f64], rate: Complex64) -> Complex64 {
        // exact average of e^{rate·t} over each cell
        masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| (rate * e[0]).exp() * exprel(rate * (e[1] - e[0])) * *m)
            .sum()
    }

    /// `∫e^{-λu}A(x⁻, du)`.
    pub fn a_transform(&self, x: f64, lambda: Complex64) -> Result<Complex64> {
        Ok(self.transform(&self.a_masses_at(x)?, -lambda))
    }

    /// `∫e^{-λv}Ā(x, dv)`.
    pub fn a_bar_transform(&self, x: f64, lambda: Complex64) -> Result<Complex64> {
        Ok(self.transform(&self.a_bar_masses_at(x)?, lambda))
    }
}
