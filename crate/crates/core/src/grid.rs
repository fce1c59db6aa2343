//! Cell-centered radial discretization of `R^N` with the Gaussian weight
//! `K(r) = exp(r^2 / 4)`.
//!
//! A radial function is stored by its values at the cell centers
//! `r_i = (i + 1/2) dr`. The quadrature weight of cell `i` is the exact
//! spherical-shell measure of the cell times `K(r_i)`:
//!
//! ```text
//! q_i = omega_N * K(r_i) * (r_{i+1/2}^N - r_{i-1/2}^N) / N
//! ```
//!
//! so no node sits at the Hardy singularity and integrating `1` without the
//! weight reproduces the ball volume exactly. Gradients live on faces: face
//! `i + 1/2` couples cells `i` and `i + 1` with conductance
//! `omega_N r_f^{N-1} K(r_f) / dr`, the face at `r = 0` carries no flux and the
//! face at `r_max` imposes `v = 0` half a cell away from the last node.
//! The operator `L v = -K^{-1} div(K grad v)` is assembled from the same
//! conductances, which makes it exactly symmetric for the quadrature inner
//! product.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Largest value of `omega_N r^{N-1} K(r)` accepted at the truncation radius.
const WEIGHT_CEILING: f64 = 1e290;

/// `Gamma(k / 2)` for a positive integer `k`.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k > 0, "Gamma(0) is undefined");
    let (mut g, mut x) = if k % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = k as f64 / 2.0;
    while x < target - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Surface measure of the unit sphere `S^{N-1}`.
pub fn sphere_measure(dim: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}

/// The Gaussian weight `K(r) = exp(r^2 / 4)`.
#[inline]
pub fn gaussian_weight(r: f64) -> f64 {
    (0.25 * r * r).exp()
}

/// Identifies the grid a field was sampled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub dim: usize,
    pub m: usize,
    r_max_bits: u64,
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: usize,
    r_max: f64,
    m: usize,
    spacing: f64,
    sphere: f64,
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    /// `conductance[i]` couples cells `i` and `i + 1`; the last entry is the
    /// Dirichlet face at `r_max`.
    conductance: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, m: usize) -> Result<Self> {
        if dim < 3 {
            return Err(LabError::DimensionTooSmall(dim));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(LabError::InvalidGrid(format!(
                "truncation radius must be positive, got {r_max}"
            )));
        }
        if m < 16 {
            return Err(LabError::InvalidGrid(format!(
                "need at least 16 cells, got {m}"
            )));
        }
        let sphere = sphere_measure(dim);
        let edge = sphere * r_max.powi(dim as i32 - 1) * gaussian_weight(r_max);
        if !edge.is_finite() || edge * m as f64 / r_max > WEIGHT_CEILING {
            return Err(LabError::WeightOverflow { r_max });
        }

        let h = r_max / m as f64;
        let n = dim as i32;
        let nodes: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
        let quad_weights = nodes
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let lo = i as f64 * h;
                let hi = lo + h;
                sphere * gaussian_weight(r) * (hi.powi(n) - lo.powi(n)) / dim as f64
            })
            .collect();
        let conductance = (0..m)
            .map(|i| {
                let rf = (i + 1) as f64 * h;
                let dist = if i + 1 == m { 0.5 * h } else { h };
                sphere * rf.powi(n - 1) * gaussian_weight(rf) / dist
            })
            .collect();

        Ok(Self {
            dim,
            r_max,
            m,
            spacing: h,
            sphere,
            nodes,
            quad_weights,
            conductance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn sphere_measure(&self) -> f64 {
        self.sphere
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    pub fn key(&self) -> GridKey {
        GridKey {
            dim: self.dim,
            m: self.m,
            r_max_bits: self.r_max.to_bits(),
        }
    }

    /// Unweighted volume of cell `i` in `R^N`.
    pub fn cell_volume(&self, i: usize) -> f64 {
        self.quad_weights[i] / gaussian_weight(self.nodes[i])
    }

    pub(crate) fn check(&self, f: &RadialField) {
        assert_eq!(
            f.grid, self.key(),
            "field was sampled on a different grid"
        );
    }

    /// `sum_i f(r_i) q_i`, the discrete `int_{R^N} f K dy`.
    pub fn weighted_integral(&self, f: &RadialField) -> f64 {
        self.check(f);
        self.integrate(&f.values)
    }

    pub(crate) fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.quad_weights)
            .map(|(v, q)| v * q)
            .sum()
    }

    /// `<a, b>_K`.
    pub fn inner(&self, a: &RadialField, b: &RadialField) -> f64 {
        self.check(a);
        self.check(b);
        a.values
            .iter()
            .zip(&b.values)
            .zip(&self.quad_weights)
            .map(|((x, y), q)| x * y * q)
            .sum()
    }

    /// `||v||_{K,2}^2`.
    pub fn l2_sq(&self, v: &RadialField) -> f64 {
        self.inner(v, v)
    }

    /// `(int |v|^q K)` without the root; `q` is not range checked.
    pub fn power_integral(&self, v: &RadialField, q: f64) -> f64 {
        self.check(v);
        v.values
            .iter()
            .zip(&self.quad_weights)
            .map(|(x, w)| x.abs().powf(q) * w)
            .sum()
    }

    /// `||v||_{K,q}` for `q` in `[2, 2N/(N-2)]`.
    pub fn weighted_norm(&self, v: &RadialField, q: f64) -> Result<f64> {
        let two_star = 2.0 * self.dim as f64 / (self.dim as f64 - 2.0);
        if !(2.0..=two_star + 1e-12).contains(&q) {
            return Err(LabError::ExponentOutOfRange { q, two_star });
        }
        Ok(self.power_integral(v, q).powf(1.0 / q))
    }

    /// `||grad v||_{K,2}^2` with zero flux at the origin and `v(r_max) = 0`.
    pub fn gradient_norm_sq(&self, v: &RadialField) -> f64 {
        self.check(v);
        let x = &v.values;
        let mut acc = 0.0;
        for i in 0..self.m - 1 {
            let d = x[i + 1] - x[i];
            acc += self.conductance[i] * d * d;
        }
        let last = x[self.m - 1];
        acc + self.conductance[self.m - 1] * last * last
    }

    /// `int |v|^2 / |y|^2 K dy`.
    pub fn hardy_seminorm_sq(&self, v: &RadialField) -> f64 {
        self.check(v);
        v.values
            .iter()
            .zip(&self.nodes)
            .zip(&self.quad_weights)
            .map(|((x, r), q)| x * x / (r * r) * q)
            .sum()
    }

    /// Stiffness action `(S v)_i = sum_faces c_f (v_i - v_j)`; `L v = S v / q`.
    pub(crate) fn stiffness_apply(&self, x: &[f64], out: &mut [f64]) {
        let c = &self.conductance;
        let m = self.m;
        for i in 0..m {
            let mut acc = 0.0;
            if i > 0 {
                acc += c[i - 1] * (x[i] - x[i - 1]);
            }
            if i + 1 < m {
                acc += c[i] * (x[i] - x[i + 1]);
            } else {
                acc += c[i] * x[i];
            }
            out[i] = acc;
        }
    }

    /// The drift operator `L v = -Delta v - (1/2) y . grad v` in divergence form.
    #[allow(non_snake_case)]
    pub fn apply_L(&self, v: &RadialField) -> RadialField {
        self.check(v);
        let mut out = vec![0.0; self.m];
        self.stiffness_apply(&v.values, &mut out);
        for (o, q) in out.iter_mut().zip(&self.quad_weights) {
            *o /= q;
        }
        RadialField {
            values: out,
            grid: self.key(),
        }
    }

    /// Tridiagonal stiffness matrix as `(diag, off)` with `off[i]` coupling
    /// `i` and `i + 1`.
    pub(crate) fn stiffness_matrix(&self) -> (Vec<f64>, Vec<f64>) {
        let c = &self.conductance;
        let m = self.m;
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        for i in 0..m {
            diag[i] += c[i];
            if i + 1 < m {
                diag[i + 1] += c[i];
                off[i] = -c[i];
            }
        }
        (diag, off)
    }
}

/// Values of a radial function at the cell centers of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    values: Vec<f64>,
    grid: GridKey,
}

impl RadialField {
    pub fn new(grid: &RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(LabError::NonFinite { index });
        }
        Ok(Self {
            values,
            grid: grid.key(),
        })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.key(),
        }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&r| f(r)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_key(&self) -> GridKey {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|x| s * x).collect(),
            grid: self.grid,
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
            grid: self.grid,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&x| f(x)).collect(),
            grid: self.grid,
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn from_raw(grid: GridKey, values: Vec<f64>) -> Self {
        Self { values, grid }
    }
}
