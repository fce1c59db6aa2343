//! Time integration of the self-similar flow in discrete weak form,
//! with the monitors used to read its long-time behaviour.
//!
//! Each step solves
//!
//! ```text
//! (Q + dt (S - Q (beta + mu / r^2))) v_new = Q (v + dt |v|^{p-1} v)
//! ```
//!
//! with `Q = diag(q)` the weighted cell volumes and `S` the stiffness matrix.
//! The bracket is the discrete form of `A`, which is positive definite, so the
//! system is symmetric positive definite for every `dt > 0`. Because the
//! nonlinear potential is convex, the step satisfies
//! `E(v_new) + dt ||(v_new - v)/dt||^2 <= E(v)`.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::functionals::{evaluate, ModelParams};
use crate::grid::{RadialField, RadialGrid};
use crate::linalg::solve_spd_tridiagonal;
use crate::variational::WellConstants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt0: f64,
    pub s_max: f64,
    pub blowup_l2sq: f64,
    pub blowup_linf: f64,
    /// Runs whose `||v||_{K,2}^2` drops to this level are labelled decaying.
    pub decay_l2sq: f64,
    pub adapt: bool,
    pub sample_every: usize,
    pub delta_for_wells: f64,
    /// Keep the full field every this many steps (0 keeps only the last).
    pub snapshot_every: usize,
    pub max_steps: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            s_max: 40.0,
            blowup_l2sq: 1e8,
            blowup_linf: 1e6,
            decay_l2sq: 1e-6,
            adapt: true,
            sample_every: 10,
            delta_for_wells: 1.0,
            snapshot_every: 0,
            max_steps: 50_000_000,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self, l2_sq0: f64, linf0: f64) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidParameter(msg));
        if !(self.dt0 > 0.0 && self.dt0 <= 1e-2) {
            return bad(format!("dt0 must lie in (0, 1e-2], got {}", self.dt0));
        }
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return bad(format!("s_max must be positive, got {}", self.s_max));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.delta_for_wells > 0.0) {
            return bad(format!("delta_for_wells must be positive, got {}", self.delta_for_wells));
        }
        if !(self.decay_l2sq >= 0.0) {
            return bad(format!("decay_l2sq must be nonnegative, got {}", self.decay_l2sq));
        }
        if !(self.blowup_l2sq >= 1e3 * l2_sq0 && self.blowup_l2sq > 0.0) {
            return bad(format!(
                "blowup_l2sq {} must exceed 1e3 times the initial value {l2_sq0}",
                self.blowup_l2sq
            ));
        }
        if !(self.blowup_linf >= 1e3 * linf0 && self.blowup_linf > 0.0) {
            return bad(format!(
                "blowup_linf {} must exceed 1e3 times the initial value {linf0}",
                self.blowup_linf
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub s: f64,
    pub l2_sq: f64,
    pub a_val: f64,
    pub b_val: f64,
    pub energy: f64,
    pub nehari: f64,
    /// `||(v_n - v_{n-1}) / dt||_{K,2}^2` of the step ending here.
    pub vdot_l2sq: f64,
    /// `f(s) = int_0^s ||v||_{K,2}^2`, trapezoidal in time.
    pub f_cum: f64,
    /// `int_0^s ||v_s||_{K,2}^2`, summed over every step.
    pub diss_cum: f64,
    pub nehari_delta: f64,
    pub sup_norm: f64,
    /// Time elapsed since the previous sample, accumulated locally so it
    /// stays exact when steps fall below the resolution of `s`.
    pub ds: f64,
    /// Increment of `f_cum` since the previous sample, accumulated the same way.
    pub df: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeLabel {
    GlobalDecay,
    BlowUp,
    HorizonReached,
    IntegratorFailure,
}

impl std::fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutcomeLabel::GlobalDecay => "GLOBAL_DECAY",
            OutcomeLabel::BlowUp => "BLOW_UP",
            OutcomeLabel::HorizonReached => "HORIZON_REACHED",
            OutcomeLabel::IntegratorFailure => "INTEGRATOR_FAILURE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOutcome {
    pub label: OutcomeLabel,
    pub s_final: f64,
    pub steps: usize,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub s: f64,
    pub vdot_l2sq: f64,
    pub field: RadialField,
}

#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub trace: Vec<TraceSample>,
    pub outcome: EvolutionOutcome,
    pub snapshots: Vec<Snapshot>,
}

/// `|x|^{p-1} x`, with integer powers where possible.
fn power_term(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p < 64.0 {
        x.abs().powi(p as i32 - 1) * x
    } else {
        x.abs().powf(p - 1.0) * x
    }
}

/// IMEX stepper bound to one grid and parameter set.
#[derive(Debug, Clone)]
pub struct ImexStepper<'g> {
    grid: &'g RadialGrid,
    params: ModelParams,
    /// Diagonal of `S - Q (beta + mu/r^2)`.
    a_diag: Vec<f64>,
    off: Vec<f64>,
}

impl<'g> ImexStepper<'g> {
    pub fn new(grid: &'g RadialGrid, params: &ModelParams) -> Self {
        let (diag, off) = grid.stiffness_matrix();
        let a_diag = diag
            .iter()
            .zip(grid.quad_weights().iter().zip(grid.nodes()))
            .map(|(d, (q, r))| d - q * (params.beta + params.mu / (r * r)))
            .collect();
        Self {
            grid,
            params: *params,
            a_diag,
            off,
        }
    }

    /// Implicit linear step with an explicit source:
    /// `(v_new - v)/dt + (L - beta - mu/r^2) v_new = source`.
    pub fn linear_step(&self, v: &RadialField, dt: f64, source: &[f64]) -> Result<RadialField> {
        self.grid.check(v);
        if !(dt > 0.0) {
            return Err(LabError::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let q = self.grid.quad_weights();
        let diag: Vec<f64> = q.iter().zip(&self.a_diag).map(|(q, a)| q + dt * a).collect();
        let off: Vec<f64> = self.off.iter().map(|o| dt * o).collect();
        let rhs: Vec<f64> = v
            .values()
            .iter()
            .zip(source)
            .zip(q)
            .map(|((x, f), q)| q * (x + dt * f))
            .collect();
        let out = solve_spd_tridiagonal(&diag, &off, &rhs).ok_or_else(|| {
            LabError::IntegratorFailure("linear system lost positive definiteness".into())
        })?;
        if let Some(index) = out.iter().position(|x| !x.is_finite()) {
            return Err(LabError::IntegratorFailure(format!(
                "non-finite value at node {index}"
            )));
        }
        Ok(RadialField::from_raw(v.grid_key(), out))
    }

    pub fn step(&self, v: &RadialField, dt: f64) -> Result<RadialField> {
        let p = self.params.p;
        let source: Vec<f64> = v.values().iter().map(|&x| power_term(x, p)).collect();
        self.linear_step(v, dt, &source)
    }
}

/// One IMEX step of the full flow.
pub fn imex_step(
    grid: &RadialGrid,
    v: &RadialField,
    params: &ModelParams,
    dt: f64,
) -> Result<RadialField> {
    ImexStepper::new(grid, params).step(v, dt)
}

fn sample(
    grid: &RadialGrid,
    v: &RadialField,
    params: &ModelParams,
    config: &EvolutionConfig,
    s: f64,
    vdot_l2sq: f64,
    f_cum: f64,
    diss_cum: f64,
    (ds, df): (f64, f64),
) -> TraceSample {
    let rep = evaluate(grid, v, params, None);
    TraceSample {
        s,
        l2_sq: rep.l2_sq,
        a_val: rep.a_val,
        b_val: rep.b_val,
        energy: rep.energy,
        nehari: rep.nehari,
        vdot_l2sq,
        f_cum,
        diss_cum,
        nehari_delta: rep.nehari_at(config.delta_for_wells),
        sup_norm: v.sup_norm(),
        ds,
        df,
    }
}

/// Number of trailing samples inspected when certifying growth at blow-up.
pub const GROWTH_WINDOW: usize = 10;

/// Integrates from `v0` until the horizon, a blow-up threshold, decay below
/// `decay_l2sq` or a failed step.
pub fn evolve(
    grid: &RadialGrid,
    v0: &RadialField,
    params: &ModelParams,
    config: &EvolutionConfig,
) -> Result<EvolutionRun> {
    grid.check(v0);
    let l2_initial = grid.l2_sq(v0);
    config.validate(l2_initial, v0.sup_norm())?;
    let stepper = ImexStepper::new(grid, params);

    let mut v = v0.clone();
    let mut s = 0.0;
    let mut f_cum = 0.0;
    let mut diss_cum = 0.0;
    let mut l2 = l2_initial;
    let mut vdot = 0.0;
    let mut steps = 0usize;
    let mut trace = vec![sample(grid, &v, params, config, s, 0.0, 0.0, 0.0, (0.0, 0.0))];
    let (mut ds_acc, mut df_acc) = (0.0, 0.0);
    let mut snapshots = Vec::new();

    let finish = |label, s_final, steps, detail: String| EvolutionOutcome {
        label,
        s_final,
        steps,
        detail,
    };
    let outcome = loop {
        if s >= config.s_max * (1.0 - 1e-14) {
            break finish(
                OutcomeLabel::HorizonReached,
                s,
                steps,
                format!("reached s = {s} with ||v||^2 = {l2:e}"),
            );
        }
        if steps >= config.max_steps {
            break finish(
                OutcomeLabel::HorizonReached,
                s,
                steps,
                format!("step budget {} exhausted at s = {s}", config.max_steps),
            );
        }
        let mut dt = if config.adapt {
            config.dt0 / (1.0 + v.sup_norm().powf(params.p - 1.0))
        } else {
            config.dt0
        };
        if config.s_max - s - dt < 1e-6 * dt {
            dt = config.s_max - s;
        }
        let next = match stepper.step(&v, dt) {
            Ok(next) => next,
            Err(e) => {
                break finish(OutcomeLabel::IntegratorFailure, s, steps, e.to_string());
            }
        };
        let diff = next.add_scaled(-1.0, &v);
        vdot = grid.l2_sq(&diff) / (dt * dt);
        let l2_next = grid.l2_sq(&next);
        if !(vdot.is_finite() && l2_next.is_finite()) {
            break finish(
                OutcomeLabel::IntegratorFailure,
                s,
                steps,
                format!("non-finite norms after s = {s}"),
            );
        }
        let df = 0.5 * (l2 + l2_next) * dt;
        diss_cum += vdot * dt;
        f_cum += df;
        s += dt;
        ds_acc += dt;
        df_acc += df;
        steps += 1;
        v = next;
        l2 = l2_next;

        let linf = v.sup_norm();
        let crossed = l2 >= config.blowup_l2sq || linf >= config.blowup_linf;
        let decayed = l2_initial > 0.0 && l2 <= config.decay_l2sq;
        let at_horizon = s >= config.s_max * (1.0 - 1e-14);
        if steps % config.sample_every == 0 || crossed || decayed || at_horizon {
            trace.push(sample(
                grid,
                &v,
                params,
                config,
                s,
                vdot,
                f_cum,
                diss_cum,
                (ds_acc, df_acc),
            ));
            (ds_acc, df_acc) = (0.0, 0.0);
        }
        if config.snapshot_every > 0 && steps % config.snapshot_every == 0 {
            snapshots.push(Snapshot {
                s,
                vdot_l2sq: vdot,
                field: v.clone(),
            });
        }
        if crossed {
            let n = trace.len();
            let back = GROWTH_WINDOW.min(n - 1);
            let growing = back > 0
                && trace[n - back - 1..]
                    .windows(2)
                    .all(|w| w[1].l2_sq > w[0].l2_sq);
            break if growing {
                finish(
                    OutcomeLabel::BlowUp,
                    s,
                    steps,
                    format!("threshold crossed at s = {s}: ||v||^2 = {l2:e}, sup = {linf:e}"),
                )
            } else {
                finish(
                    OutcomeLabel::IntegratorFailure,
                    s,
                    steps,
                    format!("threshold crossed at s = {s} without sustained growth"),
                )
            };
        }
        if decayed {
            break finish(
                OutcomeLabel::GlobalDecay,
                s,
                steps,
                format!("||v||^2 = {l2:e} <= {:e} at s = {s}", config.decay_l2sq),
            );
        }
    };
    if snapshots.last().is_none_or(|snap: &Snapshot| snap.s < s) {
        snapshots.push(Snapshot {
            s,
            vdot_l2sq: vdot,
            field: v,
        });
    }
    Ok(EvolutionRun {
        trace,
        outcome,
        snapshots,
    })
}

/// Largest violation of the discrete energy identity between any two
/// samples, `|E(s2) + int_{s1}^{s2} ||v_s||^2 - E(s1)|`, relative to
/// `1 + max |E|` over `[s1, s_end]`.
pub fn energy_identity_defect(trace: &[TraceSample]) -> f64 {
    let n = trace.len();
    if n < 2 {
        return 0.0;
    }
    let g: Vec<f64> = trace.iter().map(|t| t.energy + t.diss_cum).collect();
    let mut suffix_max = g[n - 1];
    let mut suffix_min = g[n - 1];
    let mut suffix_energy = trace[n - 1].energy.abs();
    let mut worst = 0.0f64;
    for i in (0..n - 1).rev() {
        suffix_energy = suffix_energy.max(trace[i].energy.abs());
        let scale = suffix_energy + 1.0;
        let here = (suffix_max - g[i]).abs().max((g[i] - suffix_min).abs()) / scale;
        worst = worst.max(here);
        suffix_max = suffix_max.max(g[i]);
        suffix_min = suffix_min.min(g[i]);
    }
    worst
}

/// Largest increase of the energy between consecutive samples.
pub fn max_energy_increase(trace: &[TraceSample]) -> f64 {
    trace
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub fitted_rate: f64,
    pub predicted_rate: f64,
    pub delta_1: f64,
    pub satisfied: bool,
    /// Largest `l2_sq(s) / (l2_sq(0) e^{-predicted s})` over the trace.
    pub worst_ratio: f64,
}

/// Compares the decay of `||v||_{K,2}^2` with the envelope
/// `||v_0||^2 exp(-(1 - delta_1) s / 2)`, `delta_1` the lower root of
/// `d(delta) = E0`.
pub fn fit_decay_rate(
    trace: &[TraceSample],
    consts: &WellConstants,
    e0: f64,
    tol: f64,
) -> Result<DecayFit> {
    let first = trace
        .first()
        .ok_or_else(|| LabError::NotApplicable("empty trace".into()))?;
    let last = trace.last().expect("nonempty");
    if trace.len() < 4 || !(last.l2_sq < first.l2_sq) || last.l2_sq <= 0.0 {
        return Err(LabError::NotApplicable("trace does not decay".into()));
    }
    let (delta_1, _) = consts.delta_roots(e0).ok_or_else(|| {
        LabError::NotApplicable(format!("initial energy {e0} outside (0, d)"))
    })?;
    let predicted_rate = 0.5 * (1.0 - delta_1);

    let tail = &trace[trace.len() / 2..];
    let n = tail.len() as f64;
    let (sx, sy) = tail
        .iter()
        .fold((0.0, 0.0), |(a, b), t| (a + t.s, b + t.l2_sq.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = tail.iter().fold((0.0, 0.0), |(a, b), t| {
        let dx = t.s - mx;
        (a + dx * (t.l2_sq.ln() - my), b + dx * dx)
    });
    let fitted_rate = -sxy / sxx;

    let worst_ratio = trace
        .iter()
        .map(|t| t.l2_sq / (first.l2_sq * (-predicted_rate * t.s).exp()))
        .fold(0.0, f64::max);
    Ok(DecayFit {
        fitted_rate,
        predicted_rate,
        delta_1,
        satisfied: worst_ratio <= 1.0 + tol,
        worst_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupMonitors {
    pub dk_sign_flips: usize,
    pub f_convexity_ok: bool,
    /// Largest mismatch between `f''` and `-2 D_K`, relative to the largest
/// `|2 D_K|` among the three samples of each divided difference.
    pub convexity_error: f64,
}

/// Relative tolerance of the convexity check.
pub const CONVEXITY_TOL: f64 = 0.05;

/// Sign flips of `D_K` along the trace and agreement of the second divided
/// differences of `f` with `-2 D_K`.
pub fn blowup_monitors(trace: &[TraceSample]) -> BlowupMonitors {
    let mut flips = 0;
    let mut last_sign = 0.0;
    for t in trace {
        if t.nehari != 0.0 {
            let sign = t.nehari.signum();
            if last_sign != 0.0 && sign != last_sign {
                flips += 1;
            }
            last_sign = sign;
        }
    }
    let mut worst = 0.0f64;
    for w in trace.windows(3) {
        let (h0, h1) = (w[1].ds, w[2].ds);
        if h0 <= 0.0 || h1 <= 0.0 {
            continue;
        }
        let second = 2.0 * (w[2].df / h1 - w[1].df / h0) / (h0 + h1);
        let scale = w.iter().map(|t| t.nehari.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        let err = (second + 2.0 * w[1].nehari).abs() / (2.0 * scale);
        worst = worst.max(err);
    }
    BlowupMonitors {
        dk_sign_flips: flips,
        f_convexity_ok: worst <= CONVEXITY_TOL,
        convexity_error: worst,
    }
}

/// `||L v - beta v - mu v/r^2 - |v|^{p-1} v||_{K,2}` with the discrete `L`.
pub fn stationary_residual(grid: &RadialGrid, v: &RadialField, params: &ModelParams) -> f64 {
    grid.check(v);
    let x = v.values();
    let mut sv = vec![0.0; x.len()];
    grid.stiffness_apply(x, &mut sv);
    let res: Vec<f64> = sv
        .iter()
        .zip(x)
        .zip(grid.quad_weights().iter().zip(grid.nodes()))
        .map(|((s, &xi), (q, r))| {
            let lv = s / q;
            let rr = lv - (params.beta + params.mu / (r * r)) * xi - power_term(xi, params.p);
            rr * rr
        })
        .collect();
    grid.integrate(&res).sqrt()
}

#[derive(Debug, Clone)]
pub struct StationaryCandidate {
    pub s: f64,
    pub vdot_l2sq: f64,
    pub residual: f64,
    pub l2_sq: f64,
    pub energy: f64,
    pub field: RadialField,
}

/// Snapshots with `||v_s||^2 < tol_vdot`, each with its stationary residual.
pub fn extract_stationary_candidates(
    grid: &RadialGrid,
    params: &ModelParams,
    snapshots: &[Snapshot],
    tol_vdot: f64,
) -> Vec<StationaryCandidate> {
    snapshots
        .iter()
        .filter(|snap| snap.vdot_l2sq < tol_vdot)
        .map(|snap| {
            let rep = evaluate(grid, &snap.field, params, None);
            StationaryCandidate {
                s: snap.s,
                vdot_l2sq: snap.vdot_l2sq,
                residual: stationary_residual(grid, &snap.field, params),
                l2_sq: rep.l2_sq,
                energy: rep.energy,
                field: snap.field.clone(),
            }
        })
        .collect()
}

pub const TRACE_HEADER: &str = "s,l2_sq,a_val,b_val,energy,nehari,vdot_l2sq,f_cum";

/// Trace as delimited text: a header row, then one row per sample with
/// shortest round-trip formatting.
pub fn trace_to_csv(trace: &[TraceSample]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.s, t.l2_sq, t.a_val, t.b_val, t.energy, t.nehari, t.vdot_l2sq, t.f_cum
        );
    }
    out
}

pub fn write_trace<W: Write>(trace: &[TraceSample], mut w: W) -> io::Result<()> {
    w.write_all(trace_to_csv(trace).as_bytes())
}

/// One row of a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub s: f64,
    pub l2_sq: f64,
    pub a_val: f64,
    pub b_val: f64,
    pub energy: f64,
    pub nehari: f64,
    pub vdot_l2sq: f64,
    pub f_cum: f64,
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| LabError::InvalidParameter(e.to_string()))?
        .unwrap_or_default();
    if header.trim() != TRACE_HEADER {
        return Err(LabError::InvalidParameter(format!("unexpected trace header {header:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(k, line)| {
            let line = line.map_err(|e| LabError::InvalidParameter(e.to_string()))?;
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| LabError::InvalidParameter(format!("trace line {}: {e}", k + 2)))?;
            if cols.len() != 8 {
                return Err(LabError::InvalidParameter(format!(
                    "trace line {}: expected 8 columns, got {}",
                    k + 2,
                    cols.len()
                )));
            }
            Ok(TraceRecord {
                s: cols[0],
                l2_sq: cols[1],
                a_val: cols[2],
                b_val: cols[3],
                energy: cols[4],
                nehari: cols[5],
                vdot_l2sq: cols[6],
                f_cum: cols[7],
            })
        })
        .collect()
}
