//! Weighted Hardy inequality `int u^2/|y|^2 K <= C_N int |grad u|^2 K` with
//! `C_N = (2/(N-2))^2`: quotients, the radial witness family and a sweep over
//! it, plus the exact discrete Hardy constant of a grid.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::linalg::is_positive_definite;

/// Largest spacing accepted by [`optimality_sweep`].
pub const SWEEP_MAX_SPACING: f64 = 0.05;
/// Cells required per unit of the witness's steepest logarithmic derivative.
pub const CELLS_PER_LOG_UNIT: f64 = 8.0;

pub fn hardy_constant(dim: usize) -> f64 {
    (2.0 / (dim as f64 - 2.0)).powi(2)
}

/// `Q(v) = int v^2/|y|^2 K / int |grad v|^2 K`.
pub fn hardy_quotient(grid: &RadialGrid, v: &RadialField) -> Result<f64> {
    if v.is_zero() {
        return Err(LabError::ZeroField);
    }
    Ok(grid.hardy_seminorm_sq(v) / grid.gradient_norm_sq(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    pub epsilon: f64,
    pub gamma: f64,
}

impl WitnessParams {
    pub fn new(dim: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "witness epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            gamma: (dim as f64 - 2.0 + 2.0 * epsilon) / 2.0,
        })
    }

    /// `1 / gamma^2`.
    pub fn lower_bound(&self) -> f64 {
        1.0 / (self.gamma * self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessVariant {
    /// Outer branch multiplied by `e^{1/4}` so the field is continuous at `r = 1`.
    #[default]
    Continuous,
    /// `1` on `[0, 1]`, `r^{-gamma} e^{-r^2/4}` beyond, jump at `r = 1` kept.
    Raw,
}

/// Radial witness `V = 1` on `[0, 1]`, `c r^{-gamma} exp(-r^2/4)` for `r > 1`.
pub fn witness_field(
    grid: &RadialGrid,
    w: &WitnessParams,
    variant: WitnessVariant,
) -> Result<RadialField> {
    if grid.r_max() < 6.0 {
        return Err(LabError::InvalidParameter(format!(
            "witness needs r_max >= 6, grid has {}",
            grid.r_max()
        )));
    }
    let c = match variant {
        WitnessVariant::Continuous => 0.25f64.exp(),
        WitnessVariant::Raw => 1.0,
    };
    RadialField::from_fn(grid, |r| {
        if r <= 1.0 {
            1.0
        } else {
            c * r.powf(-w.gamma) * (-0.25 * r * r).exp()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub gamma: f64,
    /// `1 / gamma^2`.
    pub lower_bound: f64,
    pub quotient: f64,
}

/// Largest spacing at which the witness for `w` is considered resolved.
pub fn required_spacing(grid: &RadialGrid, w: &WitnessParams) -> f64 {
    // |V'/V| = gamma/r + r/2 on (1, r_max], largest at one of the ends.
    let steep = f64::max(w.gamma + 0.5, w.gamma / grid.r_max() + 0.5 * grid.r_max());
    f64::min(SWEEP_MAX_SPACING, 1.0 / (CELLS_PER_LOG_UNIT * steep))
}

pub fn optimality_sweep(
    grid: &RadialGrid,
    eps_list: &[f64],
    variant: WitnessVariant,
) -> Result<Vec<SweepRow>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidParameter(
            "epsilon list must be strictly decreasing".into(),
        ));
    }
    eps_list
        .iter()
        .map(|&eps| {
            let w = WitnessParams::new(grid.dim(), eps)?;
            let required = required_spacing(grid, &w);
            if grid.spacing() > required {
                return Err(LabError::InsufficientResolution {
                    spacing: grid.spacing(),
                    required,
                });
            }
            let v = witness_field(grid, &w, variant)?;
            Ok(SweepRow {
                epsilon: eps,
                gamma: w.gamma,
                lower_bound: w.lower_bound(),
                quotient: hardy_quotient(grid, &v)?,
            })
        })
        .collect()
}

/// Best constant of the discrete inequality `hardy_sq <= C grad_sq` on this
/// grid. `C = 1 / lambda` for the largest `lambda` with `G - lambda H`
/// positive definite, where `G` is the stiffness matrix and
/// `H = diag(q_i / r_i^2)`; `lambda` is found by bisection on the `L D L^T`
/// pivots.
pub fn discrete_hardy_constant(grid: &RadialGrid) -> f64 {
    let (diag, off) = grid.stiffness_matrix();
    let h: Vec<f64> = grid
        .quad_weights()
        .iter()
        .zip(grid.nodes())
        .map(|(q, r)| q / (r * r))
        .collect();
    let pd = |lambda: f64| {
        let shifted: Vec<f64> = diag.iter().zip(&h).map(|(d, w)| d - lambda * w).collect();
        is_positive_definite(&shifted, &off)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while pd(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if pd(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    1.0 / lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_quotient() {
        let g = RadialGrid::new(3, 12.0, 2048).unwrap();
        let v = RadialField::from_fn(&g, |r| (-0.25 * r * r).exp()).unwrap();
        let q = hardy_quotient(&g, &v).unwrap();
        // 4 pi^{3/2} / (1.5 (4 pi)^{3/2}) = 1/3
        assert!((q - 1.0 / 3.0).abs() < 1e-3, "{q}");
        assert!(q <= 4.0);
    }

    #[test]
    fn zero_field_has_no_quotient() {
        let g = RadialGrid::new(3, 12.0, 64).unwrap();
        assert_eq!(
            hardy_quotient(&g, &RadialField::zeros(&g)).unwrap_err(),
            LabError::ZeroField
        );
    }

    #[test]
    fn bump_away_from_origin() {
        let g = RadialGrid::new(3, 12.0, 1024).unwrap();
        let v = RadialField::from_fn(&g, |r| {
            if (4.0..=6.0).contains(&r) {
                ((r - 4.0) * (6.0 - r)).powi(2)
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(hardy_quotient(&g, &v).unwrap() <= 1.0 / 16.0 + 1e-3);
    }

    #[test]
    fn witness_values() {
        let g = RadialGrid::new(3, 12.0, 2400).unwrap();
        let w = WitnessParams::new(3, 1.0).unwrap();
        assert_eq!(w.gamma, 1.5);
        assert_eq!(WitnessParams::new(3, 0.5).unwrap().gamma, 1.0);
        let v = witness_field(&g, &w, WitnessVariant::Continuous).unwrap();
        // node 0.5 and node 2.0 lie on this grid (spacing 0.005)
        let at = |r: f64| {
            let i = g.nodes().iter().position(|&x| (x - r).abs() < 1e-9).unwrap();
            v.values()[i]
        };
        assert_eq!(at(0.5025), 1.0);
        let expect = 0.25f64.exp() * 2.0025f64.powf(-1.5) * (-0.25 * 2.0025f64 * 2.0025).exp();
        assert!((at(2.0025) - expect).abs() < 1e-14);
        assert!((0.25f64.exp() * 2f64.powf(-1.5) * (-1.0f64).exp() - 0.167).abs() < 1e-3);
        let small = RadialGrid::new(3, 5.0, 256).unwrap();
        assert!(witness_field(&small, &w, WitnessVariant::Raw).is_err());
    }

    #[test]
    fn sweep_rejects_coarse_grids_and_bad_order() {
        let g = RadialGrid::new(3, 12.0, 128).unwrap();
        assert!(matches!(
            optimality_sweep(&g, &[1.0], WitnessVariant::Continuous),
            Err(LabError::InsufficientResolution { .. })
        ));
        let g = RadialGrid::new(3, 12.0, 1024).unwrap();
        assert!(optimality_sweep(&g, &[0.1, 1.0], WitnessVariant::Continuous).is_err());
        assert!(optimality_sweep(&g, &[], WitnessVariant::Continuous).unwrap().is_empty());
    }

    #[test]
    fn witness_lower_bound_limit() {
        let w = WitnessParams::new(4, 1e-9).unwrap();
        assert!((w.lower_bound() - hardy_constant(4)).abs() < 1e-8);
        assert!(WitnessParams::new(3, 0.0).is_err());
    }

    #[test]
    fn discrete_constant_is_close_to_the_continuum_one() {
        let g = RadialGrid::new(3, 12.0, 512).unwrap();
        let c = discrete_hardy_constant(&g);
        let v = RadialField::from_fn(&g, |r| (-0.25 * r * r).exp()).unwrap();
        assert!(c >= hardy_quotient(&g, &v).unwrap());
        assert!(c > 2.0 && c < 4.0, "{c}");
    }
}
