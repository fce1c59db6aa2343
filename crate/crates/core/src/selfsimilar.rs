//! Change of variables between the original frame `u(x, t)` and the
//! self-similar frame `v(y, s)`:
//!
//! ```text
//! v(y, s) = rho^beta u(rho^{1/2} y, t),   rho = 1 + t = e^s,   beta = (N-2)/4
//! ```
//!
//! Fields are resampled between grids with a monotone cubic Hermite
//! interpolant. Samples are extended evenly through the origin and oddly
//! through the Dirichlet wall; points past `r_max` evaluate to zero and mark
//! the result as not covered.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::functionals::ModelParams;
use crate::grid::{sphere_measure, RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePoint {
    pub t: f64,
    pub s: f64,
    pub rho: f64,
}

impl FramePoint {
    pub fn from_t(t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(LabError::InvalidParameter(format!("t must be >= 0, got {t}")));
        }
        Ok(Self {
            t,
            s: t.ln_1p(),
            rho: 1.0 + t,
        })
    }

    pub fn from_s(s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(LabError::InvalidParameter(format!("s must be >= 0, got {s}")));
        }
        Ok(Self {
            t: s.exp_m1(),
            s,
            rho: s.exp(),
        })
    }
}

/// Monotone cubic Hermite interpolant of a field on its grid.
///
/// Slopes come from the fourth-order central difference and are limited to
/// the Fritsch-Carlson region wherever the samples are monotone across the
/// whole five-point stencil.
#[derive(Debug, Clone)]
pub struct RadialInterpolant<'a> {
    values: &'a [f64],
    slopes: Vec<f64>,
    h: f64,
    r_max: f64,
}

impl<'a> RadialInterpolant<'a> {
    pub fn new(grid: &RadialGrid, field: &'a RadialField) -> Self {
        grid.check(field);
        let values = field.values();
        let h = grid.spacing();
        let n = values.len() as isize;
        let at = |j: isize| extended(values, j);
        // Slopes (per unit index) on nodes -1..=n, enough for every interval.
        let slopes = (-1..=n)
            .map(|i| {
                let d = (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / 12.0;
                let left = at(i) - at(i - 1);
                let right = at(i + 1) - at(i);
                let outer = [at(i - 1) - at(i - 2), at(i + 2) - at(i + 1)];
                if left * right > 0.0 && outer.iter().all(|o| o * right > 0.0) {
                    let cap = 3.0 * left.abs().min(right.abs());
                    if d * right <= 0.0 {
                        0.0
                    } else {
                        d.signum() * d.abs().min(cap)
                    }
                } else {
                    d
                }
            })
            .collect();
        Self {
            values,
            slopes,
            h,
            r_max: grid.r_max(),
        }
    }

    pub fn covers(&self, r: f64) -> bool {
        r.abs() <= self.r_max
    }

    /// Interpolated value at radius `r`; zero past `r_max`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.r_max {
            return 0.0;
        }
        let n = self.values.len() as isize;
        let t = r / self.h - 0.5;
        let i = (t.floor() as isize).clamp(-1, n - 1);
        let x = t - i as f64;
        let (y0, y1) = (extended(self.values, i), extended(self.values, i + 1));
        let (d0, d1) = (self.slope(i), self.slope(i + 1));
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * y0
            + (x3 - 2.0 * x2 + x) * d0
            + (-2.0 * x3 + 3.0 * x2) * y1
            + (x3 - x2) * d1
    }

    fn slope(&self, i: isize) -> f64 {
        self.slopes[(i + 1) as usize]
    }
}

/// Samples at index `j`, mirrored evenly below 0 and oddly past the wall.
fn extended(values: &[f64], j: isize) -> f64 {
    let n = values.len() as isize;
    if j < 0 {
        extended(values, -1 - j)
    } else if j >= n {
        -extended(values, 2 * n - 1 - j)
    } else {
        values[j as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub field: RadialField,
    /// False when some target node mapped past the source grid.
    pub covered: bool,
}

fn resample(
    src_grid: &RadialGrid,
    src: &RadialField,
    dst_grid: &RadialGrid,
    amplitude: f64,
    stretch: f64,
) -> Result<Resampled> {
    if src_grid.dim() != dst_grid.dim() {
        return Err(LabError::InvalidGrid(format!(
            "dimension mismatch: {} vs {}",
            src_grid.dim(),
            dst_grid.dim()
        )));
    }
    let interp = RadialInterpolant::new(src_grid, src);
    let covered = dst_grid.nodes().iter().all(|r| interp.covers(stretch * r));
    let field = RadialField::from_fn(dst_grid, |r| amplitude * interp.eval(stretch * r))?;
    Ok(Resampled { field, covered })
}

fn beta_of(dim: usize) -> f64 {
    (dim as f64 - 2.0) / 4.0
}

/// `v(y) = (1+t)^beta u((1+t)^{1/2} y)` on `grid_y`.
pub fn to_selfsimilar(
    grid_x: &RadialGrid,
    u: &RadialField,
    t: f64,
    grid_y: &RadialGrid,
) -> Result<Resampled> {
    let frame = FramePoint::from_t(t)?;
    let beta = beta_of(grid_x.dim());
    resample(grid_x, u, grid_y, frame.rho.powf(beta), frame.rho.sqrt())
}

/// `u(x) = rho^{-beta} v(rho^{-1/2} x)` with `rho = e^s`, on `grid_x`.
pub fn from_selfsimilar(
    grid_y: &RadialGrid,
    v: &RadialField,
    s: f64,
    grid_x: &RadialGrid,
) -> Result<Resampled> {
    let frame = FramePoint::from_s(s)?;
    let beta = beta_of(grid_y.dim());
    resample(grid_y, v, grid_x, frame.rho.powf(-beta), frame.rho.sqrt().recip())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameResidual {
    /// Unweighted radial `L^2` norm of the residual over interior nodes.
    pub norm: f64,
    pub t1: f64,
    pub t2: f64,
    pub covered: bool,
}

/// Residual of `u_t - Delta u - mu u/|x|^2 - |u|^{p-1} u` for two
/// self-similar snapshots mapped to the original frame, with a backward
/// difference in time and the unweighted finite-volume Laplacian of `grid_x`.
pub fn original_frame_residual(
    grid_y: &RadialGrid,
    (v1, s1): (&RadialField, f64),
    (v2, s2): (&RadialField, f64),
    grid_x: &RadialGrid,
    params: &ModelParams,
) -> Result<FrameResidual> {
    if !(s2 > s1) {
        return Err(LabError::InvalidParameter(format!(
            "snapshots must be ordered in time, got s1 = {s1}, s2 = {s2}"
        )));
    }
    let u1 = from_selfsimilar(grid_y, v1, s1, grid_x)?;
    let u2 = from_selfsimilar(grid_y, v2, s2, grid_x)?;
    let (f1, f2) = (FramePoint::from_s(s1)?, FramePoint::from_s(s2)?);
    let dt = f2.t - f1.t;

    let n = grid_x.len();
    let h = grid_x.spacing();
    let nd = grid_x.dim() as i32;
    let r = grid_x.nodes();
    let a = u1.field.values();
    let b = u2.field.values();
    let omega = sphere_measure(grid_x.dim());
    let mut sum = 0.0;
    for i in 0..n - 1 {
        let lo = i as f64 * h;
        let hi = lo + h;
        let vol = (hi.powi(nd) - lo.powi(nd)) / nd as f64;
        let mut flux = hi.powi(nd - 1) * (b[i + 1] - b[i]) / h;
        if i > 0 {
            flux -= lo.powi(nd - 1) * (b[i] - b[i - 1]) / h;
        }
        let lap = flux / vol;
        let res = (b[i] - a[i]) / dt
            - lap
            - params.mu * b[i] / (r[i] * r[i])
            - b[i].abs().powf(params.p - 1.0) * b[i];
        sum += omega * vol * res * res;
    }
    Ok(FrameResidual {
        norm: sum.sqrt(),
        t1: f1.t,
        t2: f2.t,
        covered: u1.covered && u2.covered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;

    #[test]
    fn frame_points() {
        let f = FramePoint::from_s(1.0).unwrap();
        assert!((f.t - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!((f.rho - std::f64::consts::E).abs() < 1e-15);
        let g = FramePoint::from_t(f.t).unwrap();
        assert!((g.s - 1.0).abs() < 1e-15);
        assert!(FramePoint::from_t(-0.1).is_err());
        assert!(FramePoint::from_s(f64::NAN).is_err());
    }

    #[test]
    fn interpolant_reproduces_nodes_and_is_even() {
        let g = RadialGrid::new(3, 12.0, 256).unwrap();
        let v = fields::gaussian(&g, 1.0).unwrap();
        let it = RadialInterpolant::new(&g, &v);
        for (r, x) in g.nodes().iter().zip(v.values()) {
            assert!((it.eval(*r) - x).abs() < 1e-15);
        }
        assert_eq!(it.eval(-0.3), it.eval(0.3));
        assert_eq!(it.eval(12.5), 0.0);
        assert!(!it.covers(12.5));
        assert!((it.eval(1.0) - (-0.25f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn gaussian_maps_to_a_compressed_gaussian() {
        let g = RadialGrid::new(3, 12.0, 2048).unwrap();
        let u = fields::gaussian(&g, 1.0).unwrap();
        let t = std::f64::consts::E - 1.0;
        let out = to_selfsimilar(&g, &u, t, &g).unwrap();
        assert!(!out.covered);
        let e = std::f64::consts::E;
        for (y, v) in g.nodes().iter().zip(out.field.values()).step_by(37) {
            let expect = if e.sqrt() * y <= 12.0 {
                0.25f64.exp() * (-e * y * y / 4.0).exp()
            } else {
                0.0
            };
            assert!((v - expect).abs() < 1e-8, "{y}: {v} vs {expect}");
        }
        let same = to_selfsimilar(&g, &u, 0.0, &g).unwrap();
        assert!(same.covered);
        assert_eq!(same.field.values(), u.values());
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let g3 = RadialGrid::new(3, 12.0, 64).unwrap();
        let g4 = RadialGrid::new(4, 12.0, 64).unwrap();
        let u = fields::gaussian(&g3, 1.0).unwrap();
        assert!(to_selfsimilar(&g3, &u, 1.0, &g4).is_err());
    }
}
