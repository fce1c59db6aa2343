//! Field families used as initial data, test fields and descent seeds.

use rand::Rng;

use crate::error::Result;
use crate::grid::{RadialField, RadialGrid};

/// `amplitude * exp(-r^2 / 4)`, the first eigenfunction of `L`.
pub fn gaussian(grid: &RadialGrid, amplitude: f64) -> Result<RadialField> {
    RadialField::from_fn(grid, |r| amplitude * (-0.25 * r * r).exp())
}

/// `P(r) exp(-c r^2)` with `P(r) = sum_k coeffs[k] r^k`.
pub fn gaussian_poly(grid: &RadialGrid, coeffs: &[f64], decay: f64) -> Result<RadialField> {
    RadialField::from_fn(grid, |r| {
        let poly = coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c);
        poly * (-decay * r * r).exp()
    })
}

/// Aubin-Talenti profile `(1 + r^2/eps^2)^{-(N-2)/2}` with a Gaussian tail
/// `exp(-r^2/4)` so that it lies in the weighted space.
pub fn talenti_bubble(grid: &RadialGrid, eps: f64) -> Result<RadialField> {
    let k = 0.5 * (grid.dim() as f64 - 2.0);
    RadialField::from_fn(grid, |r| {
        (1.0 + (r / eps).powi(2)).powf(-k) * (-0.25 * r * r).exp()
    })
}

/// Random member of the family `P(r) exp(-c r^2)`: `P` of degree at most 3
/// with standard normal-ish coefficients (constant term kept away from 0)
/// and `c` uniform in `[0.3, 1.0]`.
pub fn random_smooth<R: Rng + ?Sized>(grid: &RadialGrid, rng: &mut R) -> RadialField {
    let degree = rng.gen_range(0..=3usize);
    let mut coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
    coeffs[0] = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let decay = rng.gen_range(0.3..1.0);
    gaussian_poly(grid, &coeffs, decay).expect("bounded smooth field")
}

/// Random Talenti bubble with `eps` log-uniform in `[eps_min, 1]`,
/// multiplied by `1 + small polynomial` so the family is not one-parameter.
pub fn random_bubble<R: Rng + ?Sized>(grid: &RadialGrid, eps_min: f64, rng: &mut R) -> RadialField {
    let eps = (rng.gen_range(eps_min.ln()..0.0f64)).exp();
    let a = rng.gen_range(-0.2..0.2);
    let b = rng.gen_range(-0.05..0.05);
    let bubble = talenti_bubble(grid, eps).expect("bounded bubble");
    let nodes = grid.nodes().to_vec();
    let vals: Vec<f64> = bubble
        .values()
        .iter()
        .zip(&nodes)
        .map(|(v, &r)| v * (1.0 + a * r.min(4.0) + b * r.min(4.0).powi(2)))
        .collect();
    RadialField::new(grid, vals).expect("bounded bubble")
}
