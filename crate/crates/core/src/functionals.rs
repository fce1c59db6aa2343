//! Energy, Nehari functionals and model constants of the self-similar flow
//!
//! ```text
//! v_s + L v = beta v + mu v / |y|^2 + |v|^{p-1} v
//! ```
//!
//! with `A(v) = ||grad v||^2 - mu ||v / |y| ||^2 - beta ||v||^2` (all weighted
//! by `K`), `B(v) = ||v||_{K,p+1}^{p+1}`, `E_K = A/2 - B/2*`, `D_K = A - B`
//! and `D_{K,delta} = delta A - B`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{gamma_half, RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub mu: f64,
    pub beta: f64,
    pub p: f64,
    pub two_star: f64,
}

impl ModelParams {
    pub fn new(dim: usize, mu: f64) -> Result<Self> {
        if dim < 3 {
            return Err(LabError::DimensionTooSmall(dim));
        }
        let n = dim as f64;
        let max = (n - 2.0).powi(2) / 8.0;
        if !(0.0..=max).contains(&mu) {
            return Err(LabError::CouplingOutOfRange { mu, max });
        }
        let beta = (n - 2.0) / 4.0;
        let p = (n + 2.0) / (n - 2.0);
        let two_star = 2.0 * n / (n - 2.0);
        debug_assert!((beta - 1.0 / (p - 1.0)).abs() < 1e-14);
        debug_assert!((p + 1.0 - two_star).abs() < 1e-14);
        Ok(Self {
            dim,
            mu,
            beta,
            p,
            two_star,
        })
    }

    /// Largest admissible Hardy coupling `(N-2)^2 / 8`.
    pub fn mu_max(dim: usize) -> f64 {
        (dim as f64 - 2.0).powi(2) / 8.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub dim: usize,
    pub beta: f64,
    pub p: f64,
    pub two_star: f64,
    /// Weighted Hardy constant `(2 / (N-2))^2`.
    pub hardy: f64,
    /// First eigenvalue of `L`.
    pub lambda_1: f64,
    pub lambda_star: f64,
    /// Sobolev constant of `R^N` (Aubin-Talenti).
    pub sobolev: f64,
}

pub fn model_constants(dim: usize) -> Result<ModelConstants> {
    if dim < 3 {
        return Err(LabError::DimensionTooSmall(dim));
    }
    let n = dim as f64;
    let ratio = gamma_half(dim) / gamma_half(2 * dim);
    Ok(ModelConstants {
        dim,
        beta: (n - 2.0) / 4.0,
        p: (n + 2.0) / (n - 2.0),
        two_star: 2.0 * n / (n - 2.0),
        hardy: (2.0 / (n - 2.0)).powi(2),
        lambda_1: n / 2.0,
        lambda_star: f64::max(1.0, n / 4.0),
        sobolev: std::f64::consts::PI * n * (n - 2.0) * ratio.powf(2.0 / n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub a_val: f64,
    pub b_val: f64,
    pub energy: f64,
    pub nehari: f64,
    pub nehari_delta: Option<(f64, f64)>,
    pub l2_sq: f64,
    /// `||v||_{K,p+1}`.
    pub lp1: f64,
    pub grad_sq: f64,
    pub hardy_sq: f64,
}

impl FunctionalReport {
    fn assemble(
        params: &ModelParams,
        grad_sq: f64,
        hardy_sq: f64,
        l2_sq: f64,
        b_val: f64,
        delta: Option<f64>,
    ) -> Self {
        let a_val = grad_sq - params.mu * hardy_sq - params.beta * l2_sq;
        Self {
            a_val,
            b_val,
            energy: 0.5 * a_val - b_val / params.two_star,
            nehari: a_val - b_val,
            nehari_delta: delta.map(|d| (d, d * a_val - b_val)),
            l2_sq,
            lp1: b_val.powf(1.0 / (params.p + 1.0)),
            grad_sq,
            hardy_sq,
        }
    }

    /// Report of `s v`, from the homogeneity of each term.
    pub fn at_scale(&self, s: f64, params: &ModelParams) -> Self {
        let s2 = s * s;
        Self::assemble(
            params,
            s2 * self.grad_sq,
            s2 * self.hardy_sq,
            s2 * self.l2_sq,
            s.abs().powf(params.p + 1.0) * self.b_val,
            self.nehari_delta.map(|(d, _)| d),
        )
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            nehari_delta: Some((delta, delta * self.a_val - self.b_val)),
            ..*self
        }
    }

    pub fn is_zero(&self) -> bool {
        self.l2_sq == 0.0 && self.grad_sq == 0.0
    }

    /// `D_{K,delta}(v)`.
    pub fn nehari_at(&self, delta: f64) -> f64 {
        delta * self.a_val - self.b_val
    }

    /// Sobolev-type quotient `A / ||v||_{K,p+1}^2`.
    pub fn sobolev_quotient(&self) -> f64 {
        self.a_val / (self.lp1 * self.lp1)
    }
}

pub fn evaluate(
    grid: &RadialGrid,
    v: &RadialField,
    params: &ModelParams,
    delta: Option<f64>,
) -> FunctionalReport {
    debug_assert_eq!(grid.dim(), params.dim);
    FunctionalReport::assemble(
        params,
        grid.gradient_norm_sq(v),
        grid.hardy_seminorm_sq(v),
        grid.l2_sq(v),
        grid.power_integral(v, params.p + 1.0),
        delta,
    )
}
