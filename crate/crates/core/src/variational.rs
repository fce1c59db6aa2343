//! Potential-well geometry: Nehari projections, fibering maps, the Sobolev
//! quotient `S_K = inf A(v) / ||v||_{K,p+1}^2`, the depth family `d(delta)` and
//! membership tests for the (modified) wells.
//!
//! Along a ray `s -> s v` every functional is a monomial in `s`, so the
//! crossing with `N_delta`, the peak of the fibering map and the constrained
//! minimum over `N_delta` all have closed forms in terms of `A`, `B` and
//! `S_K`:
//!
//! ```text
//! s(delta)  = (delta A / B)^{1/(p-1)}
//! peak(v)   = (1/N) (A / B^{2/(p+1)})^{N/2}
//! d(delta)  = a(delta) delta^{(N-2)/2} S_K^{N/2},   a(delta) = 1/2 - delta/(p+1)
//! r(delta)^2 = delta^{(N-2)/2} S_K^{N/2}
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fields;
use crate::functionals::{evaluate, model_constants, FunctionalReport, ModelParams};
use crate::grid::{RadialField, RadialGrid};
use crate::linalg::solve_spd_tridiagonal;

/// Scaling `s` with `D_{K,delta}(s v) = 0`.
pub fn nehari_scaling(report: &FunctionalReport, delta: f64, params: &ModelParams) -> Result<f64> {
    if !(report.b_val > 0.0 && report.a_val > 0.0 && delta > 0.0) {
        return Err(LabError::NoCrossing {
            a: report.a_val,
            b: report.b_val,
        });
    }
    Ok((delta * report.a_val / report.b_val).powf(1.0 / (params.p - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPeak {
    pub s_star: f64,
    pub peak: f64,
}

/// Maximum of the fibering map `s -> E_K(s v)` over `s >= 0`.
pub fn ray_peak(report: &FunctionalReport, params: &ModelParams) -> Result<RayPeak> {
    let s_star = nehari_scaling(report, 1.0, params)?;
    let quotient = report.a_val / report.b_val.powf(2.0 / (params.p + 1.0));
    Ok(RayPeak {
        s_star,
        peak: quotient.powf(params.dim as f64 / 2.0) / params.dim as f64,
    })
}

/// `E_K(s v)` from the report of `v`.
pub fn fibering_energy(report: &FunctionalReport, s: f64, params: &ModelParams) -> f64 {
    0.5 * s * s * report.a_val - s.abs().powf(params.p + 1.0) * report.b_val / params.two_star
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop once the quotient changed by less than this (relative) over
    /// `window` iterations.
    pub rel_tol: f64,
    pub window: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            rel_tol: 1e-8,
            window: 50,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub quotient: f64,
    /// Dual norm of the quotient's derivative at the final iterate.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final iterate, normalized to `||v||_{K,p+1} = 1`.
    pub field: RadialField,
    pub history: Vec<f64>,
}

/// Quotient and the `K`-weighted derivative `q * grad Q` of
/// `Q(v) = A(v) / B(v)^{2/(p+1)}`.
fn quotient_and_gradient(
    grid: &RadialGrid,
    v: &RadialField,
    params: &ModelParams,
) -> (f64, Vec<f64>) {
    let rep = evaluate(grid, v, params, None);
    let x = v.values();
    let mut sv = vec![0.0; x.len()];
    grid.stiffness_apply(x, &mut sv);
    let norm = rep.b_val.powf(-2.0 / (params.p + 1.0));
    let ratio = rep.a_val / rep.b_val;
    let g = sv
        .iter()
        .zip(x)
        .zip(grid.quad_weights().iter().zip(grid.nodes()))
        .map(|((s, &xi), (&q, &r))| {
            let lin = s - q * (params.beta + params.mu / (r * r)) * xi;
            2.0 * norm * (lin - q * ratio * xi.abs().powf(params.p - 1.0) * xi)
        })
        .collect();
    (rep.a_val * norm, g)
}

fn normalize(grid: &RadialGrid, v: &RadialField, params: &ModelParams) -> RadialField {
    let b = grid.power_integral(v, params.p + 1.0);
    v.scaled(b.powf(-1.0 / (params.p + 1.0)))
}

/// Preconditioned descent on `Q(v) = A(v)/||v||_{K,p+1}^2`.
///
/// Directions are Riesz representers of `dQ` in the inner product
/// `<u, w> = int (grad u . grad w + u w) K`, i.e. one tridiagonal solve with
/// `S + diag(q)` per iteration; steps use Armijo backtracking and each iterate
/// is renormalized onto the unit `L^{p+1}_K` sphere. The observer sees every
/// accepted iterate.
pub fn descend(
    grid: &RadialGrid,
    params: &ModelParams,
    seed: &RadialField,
    opts: &DescentOptions,
    mut observer: impl FnMut(usize, &RadialField, f64),
) -> Result<DescentOutcome> {
    if seed.is_zero() {
        return Err(LabError::ZeroField);
    }
    let (stiff_diag, off) = grid.stiffness_matrix();
    let precond: Vec<f64> = stiff_diag
        .iter()
        .zip(grid.quad_weights())
        .map(|(d, q)| d + q)
        .collect();

    let mut v = normalize(grid, seed, params);
    let (mut q_val, mut grad) = quotient_and_gradient(grid, &v, params);
    let mut history = vec![q_val];
    let mut step: f64 = 1.0;
    let mut grad_norm = f64::NAN;
    let mut converged = false;
    observer(0, &v, q_val);

    let mut iter = 0;
    while iter < opts.max_iter {
        let dir = solve_spd_tridiagonal(&precond, &off, &grad)
            .ok_or_else(|| LabError::DescentFailure("preconditioner not definite".into()))?;
        let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        grad_norm = slope.max(0.0).sqrt();
        if !slope.is_finite() {
            return Err(LabError::DescentFailure(format!(
                "non-finite slope at iteration {iter}"
            )));
        }
        if slope <= 0.0 {
            converged = true;
            break;
        }
        let dir = RadialField::from_raw(v.grid_key(), dir);

        step = (2.0 * step).min(1e6);
        let accepted = loop {
            let trial = v.add_scaled(-step, &dir);
            if !trial.is_zero() {
                let trial = normalize(grid, &trial, params);
                let rep = evaluate(grid, &trial, params, None);
                let q_trial = rep.sobolev_quotient();
                if q_trial.is_finite() && q_trial <= q_val - opts.armijo * step * slope {
                    break Some((trial, q_trial));
                }
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((next, q_next)) = accepted else {
            converged = true;
            break;
        };
        v = next;
        q_val = q_next;
        iter += 1;
        history.push(q_val);
        observer(iter, &v, q_val);
        grad = quotient_and_gradient(grid, &v, params).1;

        if iter >= opts.window {
            let old = history[iter - opts.window];
            if (old - q_val).abs() <= opts.rel_tol * q_val.abs() {
                converged = true;
                break;
            }
        }
    }
    if !q_val.is_finite() || q_val <= 0.0 {
        return Err(LabError::DescentFailure(format!(
            "quotient left the admissible range: {q_val}"
        )));
    }
    Ok(DescentOutcome {
        quotient: q_val,
        grad_norm,
        iterations: iter,
        converged,
        field: v,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct SkEstimate {
    /// Lowest quotient found, an upper bound for the discrete `S_K`.
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    pub minimizer: RadialField,
    /// Set when the value falls below `S_0 / 2`, which the theory excludes.
    pub below_lower_bound: bool,
    pub restarts: Vec<f64>,
}

/// Seed for restart `k`: the Gaussian for `k = 0`, random
/// Gaussian-times-polynomial fields afterwards.
pub fn descent_seed(grid: &RadialGrid, seed: u64, k: usize) -> RadialField {
    if k == 0 {
        fields::gaussian(grid, 1.0).expect("gaussian is finite")
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        fields::random_smooth(grid, &mut rng)
    }
}

pub fn estimate_sk(
    grid: &RadialGrid,
    params: &ModelParams,
    restarts: usize,
    seed: u64,
    opts: &DescentOptions,
) -> Result<SkEstimate> {
    if restarts == 0 {
        return Err(LabError::InvalidParameter("need at least one restart".into()));
    }
    let mut best: Option<(usize, DescentOutcome)> = None;
    let mut values = Vec::with_capacity(restarts);
    for k in 0..restarts {
        let start = descent_seed(grid, seed, k);
        let out = descend(grid, params, &start, opts, |_, _, _| {})?;
        values.push(out.quotient);
        if best.as_ref().is_none_or(|(_, b)| out.quotient < b.quotient) {
            best = Some((k, out));
        }
    }
    let (k, out) = best.expect("at least one restart");
    let s0 = model_constants(params.dim)?.sobolev;
    Ok(SkEstimate {
        value: out.quotient,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        best_restart: k,
        minimizer: out.field,
        below_lower_bound: out.quotient < 0.5 * s0 * (1.0 - 1e-2),
        restarts: values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellConstants {
    pub dim: usize,
    pub p: f64,
    pub s_k: f64,
    /// `d = (1/N) S_K^{N/2}`.
    pub depth: f64,
}

impl WellConstants {
    pub fn from_sk(params: &ModelParams, s_k: f64) -> Self {
        let n = params.dim as f64;
        Self {
            dim: params.dim,
            p: params.p,
            s_k,
            depth: s_k.powf(n / 2.0) / n,
        }
    }

    /// `a(delta) = 1/2 - delta/(p+1)`.
    pub fn a_of(&self, delta: f64) -> f64 {
        0.5 - delta / (self.p + 1.0)
    }

    /// `r(delta)^2 = delta^{(N-2)/2} S_K^{N/2}`.
    pub fn r_sq_of(&self, delta: f64) -> f64 {
        let n = self.dim as f64;
        delta.powf((n - 2.0) / 2.0) * self.s_k.powf(n / 2.0)
    }

    pub fn r_of(&self, delta: f64) -> f64 {
        self.r_sq_of(delta).sqrt()
    }

    /// `d(delta) = a(delta) r(delta)^2`.
    pub fn d_of(&self, delta: f64) -> f64 {
        self.a_of(delta) * self.r_sq_of(delta)
    }

    /// Upper end `(p+1)/2` of the admissible `delta` range.
    pub fn delta_max(&self) -> f64 {
        0.5 * (self.p + 1.0)
    }

    /// `(delta, d(delta), r(delta))` on `n` equispaced points of `(0, (p+1)/2]`.
    pub fn tabulate(&self, n: usize) -> Vec<(f64, f64, f64)> {
        (1..=n)
            .map(|k| {
                let delta = self.delta_max() * k as f64 / n as f64;
                (delta, self.d_of(delta), self.r_of(delta))
            })
            .collect()
    }

    /// Roots `delta_1 < 1 < delta_2` of `d(delta) = e` for `0 < e < d`.
    pub fn delta_roots(&self, e: f64) -> Option<(f64, f64)> {
        if !(e > 0.0 && e < self.depth) {
            return None;
        }
        let bisect = |mut lo: f64, mut hi: f64, increasing: bool| {
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if (self.d_of(mid) < e) == increasing {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        Some((bisect(0.0, 1.0, true), bisect(1.0, self.delta_max(), false)))
    }
}

/// Estimate `S_K` and derive the well constants from it.
pub fn well_constants(
    grid: &RadialGrid,
    params: &ModelParams,
    restarts: usize,
    seed: u64,
    opts: &DescentOptions,
) -> Result<(WellConstants, SkEstimate)> {
    let est = estimate_sk(grid, params, restarts, seed, opts)?;
    Ok((WellConstants::from_sk(params, est.value), est))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellClassification {
    pub in_nehari_plus: bool,
    pub in_nehari_minus: bool,
    pub on_nehari: bool,
    pub delta: f64,
    pub in_w_delta: bool,
    pub in_v_delta: bool,
    pub in_b_delta: bool,
    pub below_depth: bool,
    /// `E_K < alpha` when a level was supplied.
    pub in_level_set: Option<bool>,
    pub delta_roots: Option<(f64, f64)>,
}

/// Relative tolerance under which `D_K` counts as zero.
pub const NEHARI_TOL: f64 = 1e-12;

pub fn classify(
    report: &FunctionalReport,
    consts: &WellConstants,
    delta: f64,
    alpha: Option<f64>,
) -> WellClassification {
    let zero = report.is_zero();
    let scale = report.a_val.abs().max(report.b_val.abs());
    let on = !zero && report.nehari.abs() <= NEHARI_TOL * scale;
    let d_delta = report.nehari_at(delta);
    let below_d_delta = report.energy < consts.d_of(delta);
    WellClassification {
        in_nehari_plus: !zero && !on && report.nehari > 0.0,
        in_nehari_minus: !zero && !on && report.nehari < 0.0,
        on_nehari: on,
        delta,
        in_w_delta: zero || (d_delta > 0.0 && below_d_delta),
        in_v_delta: !zero && d_delta < 0.0 && below_d_delta,
        in_b_delta: report.a_val.max(0.0).sqrt() < consts.r_of(delta),
        below_depth: report.energy < consts.depth,
        in_level_set: alpha.map(|a| report.energy < a),
        delta_roots: consts.delta_roots(report.energy),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBounds {
    /// Upper bound for `lambda_alpha = inf ||v||_{K,2}` over `N cap E^alpha`.
    pub lambda_upper: f64,
    /// Lower bound for `Lambda_alpha = sup ||v||_{K,2}` over the same set.
    pub big_lambda_lower: f64,
    pub keepers: usize,
    pub samples: usize,
}

/// Samples perturbed Talenti bubbles, projects each onto the Nehari manifold
/// and records the extreme `L^2_K` norms among those with `E_K < alpha`.
pub fn empirical_lambda_bounds(
    grid: &RadialGrid,
    params: &ModelParams,
    consts: &WellConstants,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<LambdaBounds> {
    if !(alpha > consts.depth) {
        return Err(LabError::InvalidParameter(format!(
            "level {alpha} must exceed the depth {}",
            consts.depth
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps_min = 4.0 * grid.spacing();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut keepers = 0;
    for _ in 0..samples {
        let v = fields::random_bubble(grid, eps_min, &mut rng);
        let rep = evaluate(grid, &v, params, None);
        let Ok(s) = nehari_scaling(&rep, 1.0, params) else {
            continue;
        };
        let on = rep.at_scale(s, params);
        if on.energy < alpha {
            keepers += 1;
            let norm = on.l2_sq.sqrt();
            lo = lo.min(norm);
            hi = hi.max(norm);
        }
    }
    if keepers == 0 {
        return Err(LabError::NoKeepers { samples });
    }
    Ok(LambdaBounds {
        lambda_upper: lo,
        big_lambda_lower: hi,
        keepers,
        samples,
    })
}

/// High-energy blow-up condition
/// `8(p+1)/(p-1) E_K <= ||v||_{K,2}^2 < (p-1)/(2(p+1)) ||v||_{K,p+1}^{p+1}`,
/// read with the squared `L^2_K` norm.
pub fn high_energy_condition(report: &FunctionalReport, params: &ModelParams) -> bool {
    let p = params.p;
    let left = 8.0 * (p + 1.0) / (p - 1.0) * report.energy;
    let right = (p - 1.0) / (2.0 * (p + 1.0)) * report.b_val;
    left <= report.l2_sq && report.l2_sq < right
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (RadialGrid, ModelParams, FunctionalReport) {
        let g = RadialGrid::new(3, 12.0, 2048).unwrap();
        let params = ModelParams::new(3, 0.0).unwrap();
        let v = fields::gaussian(&g, 1.0).unwrap();
        let rep = evaluate(&g, &v, &params, None);
        (g, params, rep)
    }

    #[test]
    fn nehari_scaling_of_the_gaussian() {
        let (g, params, rep) = setup();
        let s = nehari_scaling(&rep, 1.0, &params).unwrap();
        assert!((s - 1.933).abs() < 1e-3, "{s}");
        let s2 = nehari_scaling(&rep, 2.0, &params).unwrap();
        assert!((s2 - 2.299).abs() < 1e-3, "{s2}");
        let v = fields::gaussian(&g, s2).unwrap();
        let on = evaluate(&g, &v, &params, None);
        assert!(on.nehari_at(2.0).abs() < 1e-9 * on.b_val);
        let zero = evaluate(&g, &RadialField::zeros(&g), &params, None);
        assert!(matches!(
            nehari_scaling(&zero, 1.0, &params),
            Err(LabError::NoCrossing { .. })
        ));
    }

    #[test]
    fn ray_peak_of_the_gaussian() {
        let (_, params, rep) = setup();
        let peak = ray_peak(&rep, &params).unwrap();
        assert!((peak.s_star - 1.933).abs() < 1e-3);
        assert!((peak.peak - 69.4).abs() < 0.1, "{}", peak.peak);
        let e = fibering_energy(&rep, peak.s_star, &params);
        assert!((e - peak.peak).abs() < 1e-9 * peak.peak);
        let doubled = rep.at_scale(2.0, &params);
        let p2 = ray_peak(&doubled, &params).unwrap();
        assert!((p2.peak - peak.peak).abs() < 1e-10 * peak.peak);
        assert!((p2.s_star - 0.5 * peak.s_star).abs() < 1e-12);
    }

    #[test]
    fn on_the_manifold_the_peak_is_the_energy() {
        let (_, params, rep) = setup();
        let s = nehari_scaling(&rep, 1.0, &params).unwrap();
        let on = rep.at_scale(s, &params);
        let peak = ray_peak(&on, &params).unwrap();
        assert!((peak.s_star - 1.0).abs() < 1e-12);
        assert!((peak.peak - on.energy).abs() < 1e-9 * on.energy);
    }

    #[test]
    fn depth_family_shape() {
        let params = ModelParams::new(3, 0.0).unwrap();
        let c = WellConstants::from_sk(&params, 5.0);
        assert!((c.a_of(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.d_of(1.0) - c.depth).abs() < 1e-12);
        assert!(c.d_of(c.delta_max()).abs() < 1e-12);
        assert!(c.d_of(3.5) < 0.0);
        let (d1, d2) = c.delta_roots(0.5 * c.depth).unwrap();
        assert!(d1 < 1.0 && d2 > 1.0);
        assert!((c.d_of(d1) - 0.5 * c.depth).abs() < 1e-8);
        assert!((c.d_of(d2) - 0.5 * c.depth).abs() < 1e-8);
        assert!(c.delta_roots(2.0 * c.depth).is_none());
        assert!(c.delta_roots(-1.0).is_none());
    }

    #[test]
    fn classification_of_scaled_gaussians() {
        let (_, params, rep) = setup();
        let s0 = model_constants(3).unwrap().sobolev;
        let c = WellConstants::from_sk(&params, s0);
        let small = rep.at_scale(0.1, &params);
        let cls = classify(&small, &c, 1.0, None);
        assert!(cls.in_nehari_plus && !cls.in_nehari_minus && !cls.on_nehari);
        assert!(cls.in_w_delta && !cls.in_v_delta && cls.below_depth);
        assert!((small.energy - 0.278).abs() < 1e-3);

        let big = rep.at_scale(3.0, &params);
        assert!((big.nehari + 2404.0).abs() < 2.0, "{}", big.nehari);
        let cls = classify(&big, &c, 1.0, None);
        assert!(cls.in_nehari_minus && cls.in_v_delta && !cls.in_w_delta);

        let zero = rep.at_scale(0.0, &params);
        let cls = classify(&zero, &c, 1.0, Some(1.0));
        assert!(cls.in_w_delta && !cls.in_nehari_plus && !cls.on_nehari && !cls.in_nehari_minus);
        assert_eq!(cls.in_level_set, Some(true));
    }

    #[test]
    fn high_energy_condition_examples() {
        let (_, params, rep) = setup();
        let big = rep.at_scale(3.0, &params);
        assert!((big.energy + 233.6).abs() < 0.5, "{}", big.energy);
        assert!(high_energy_condition(&big, &params));
        assert!(big.nehari < 0.0);
        let zero = rep.at_scale(0.0, &params);
        assert!(!high_energy_condition(&zero, &params));
    }

    #[test]
    fn descent_lowers_the_gaussian_quotient() {
        let g = RadialGrid::new(3, 12.0, 512).unwrap();
        let params = ModelParams::new(3, 0.0).unwrap();
        let opts = DescentOptions {
            max_iter: 200,
            ..DescentOptions::default()
        };
        let seed = fields::gaussian(&g, 1.0).unwrap();
        let start = evaluate(&g, &seed, &params, None).sobolev_quotient();
        let mut last = f64::INFINITY;
        let out = descend(&g, &params, &seed, &opts, |_, _, q| {
            assert!(q <= last);
            last = q;
        })
        .unwrap();
        assert!(out.quotient < start);
        let s0 = model_constants(3).unwrap().sobolev;
        assert!(out.quotient >= 0.5 * s0);
    }
}
