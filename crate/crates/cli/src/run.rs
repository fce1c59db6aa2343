use std::collections::BTreeSet;
use std::fmt::Write as _;

use hardy_flow::evolution::{
    blowup_monitors, energy_identity_defect, extract_stationary_candidates, fit_decay_rate,
    max_energy_increase, stationary_residual, trace_to_csv, BlowupMonitors, DecayFit,
};
use hardy_flow::hardy::{discrete_hardy_constant, hardy_constant, optimality_sweep, SweepRow};
use hardy_flow::variational::{
    empirical_lambda_bounds, estimate_sk, high_energy_condition, nehari_scaling, DescentOptions,
    LambdaBounds,
};
use hardy_flow::{
    classify, evaluate, evolve, model_constants, EvolutionOutcome, FunctionalReport,
    ModelConstants, ModelParams, OutcomeLabel, RadialGrid, TraceSample, WellClassification,
    WellConstants,
};
use serde::{Deserialize, Serialize};

use crate::config::{Analysis, LoadedScenario, Scenario};
use crate::error::{CliError, CliResult};
use crate::sweep::{amplitude_sweep, sweep_csv, AmplitudeRow};

/// How the high-energy predicate reads the `L^2_K` term.
pub const HIGH_ENERGY_READING: &str =
    "high-energy condition evaluated with the squared L^2_K norm: 8(p+1)/(p-1) E <= ||v||^2 < (p-1)/(2(p+1)) B";

/// Relative tolerance on the decay envelope.
pub const ENVELOPE_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Prediction {
    GlobalDecay,
    BlowUp,
    Undetermined,
}

impl Prediction {
    pub fn agrees_with(self, observed: OutcomeLabel) -> Option<bool> {
        match self {
            Prediction::GlobalDecay => Some(observed == OutcomeLabel::GlobalDecay),
            Prediction::BlowUp => Some(observed == OutcomeLabel::BlowUp),
            Prediction::Undetermined => None,
        }
    }
}

/// Outcome predicted from the potential-well dichotomy below the depth `d`
/// and from the high-energy condition above it.
pub fn predict(
    report: &FunctionalReport,
    consts: &WellConstants,
    params: &ModelParams,
) -> (Prediction, &'static str) {
    if report.is_zero() {
        return (Prediction::GlobalDecay, "zero datum");
    }
    if report.energy < consts.depth {
        if report.nehari > 0.0 {
            return (Prediction::GlobalDecay, "E < d and D > 0");
        }
        if report.nehari < 0.0 {
            return (Prediction::BlowUp, "E < d and D < 0");
        }
    }
    if high_energy_condition(report, params) {
        return (Prediction::BlowUp, "high-energy condition");
    }
    (Prediction::Undetermined, "no criterion applies")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub delta: f64,
    pub d: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub s_k: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    pub restarts: Vec<f64>,
    pub below_lower_bound: bool,
    pub lower_bound: f64,
    pub well: WellConstants,
    pub table: Vec<DepthRow>,
    /// Stationary residual of the minimizer rescaled onto the Nehari set.
    pub minimizer_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub functionals: FunctionalReport,
    pub classification: WellClassification,
    pub high_energy_condition: bool,
    pub high_energy_reading: String,
    pub prediction: Prediction,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub outcome: EvolutionOutcome,
    pub samples: usize,
    pub initial: TraceSample,
    pub last: TraceSample,
    pub energy_identity_defect: f64,
    pub max_energy_increase: f64,
    pub monitors: BlowupMonitors,
    pub agreement: Option<bool>,
    pub trace_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub fit: Option<DecayFit>,
    pub tolerance: f64,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub m: usize,
    pub rows: Vec<SweepRow>,
    pub nondecreasing: bool,
    pub above_lower_bounds: bool,
    pub constant: f64,
    pub discrete_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub alpha: f64,
    pub bounds: LambdaBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub s: f64,
    pub vdot_l2sq: f64,
    pub residual: f64,
    pub l2_sq: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub tol_vdot: f64,
    pub candidates: Vec<CandidateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub analyses: Vec<Analysis>,
    pub constants: ModelConstants,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_fit: Option<DecayFitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hardy: Option<HardyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_bounds: Option<LambdaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationaryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<AmplitudeRow>>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn integrator_failed(&self) -> bool {
        self.evolve
            .as_ref()
            .is_some_and(|e| e.outcome.label == OutcomeLabel::IntegratorFailure)
    }
}

/// Everything a run produces, held in memory until it is written out.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub summary: String,
    /// Extra files as (file name, contents).
    pub files: Vec<(String, String)>,
}

/// Adds the analyses each requested one depends on.
pub fn expand_plan(requested: &[Analysis]) -> BTreeSet<Analysis> {
    let mut plan: BTreeSet<Analysis> = requested.iter().copied().collect();
    if plan.contains(&Analysis::DecayFit) || plan.contains(&Analysis::Stationary) {
        plan.insert(Analysis::Evolve);
    }
    if plan.contains(&Analysis::Evolve) {
        plan.insert(Analysis::Classify);
    }
    if plan.contains(&Analysis::Classify)
        || plan.contains(&Analysis::LambdaBounds)
        || plan.contains(&Analysis::Sweep)
    {
        plan.insert(Analysis::Depth);
    }
    plan
}

pub fn compute_depth(
    grid: &RadialGrid,
    params: &ModelParams,
    scenario: &Scenario,
    seed: u64,
) -> CliResult<DepthReport> {
    let opts = DescentOptions {
        max_iter: scenario.depth.max_iter,
        ..DescentOptions::default()
    };
    let est = estimate_sk(grid, params, scenario.depth.restarts, seed, &opts)?;
    let well = WellConstants::from_sk(params, est.value);
    let table = well
        .tabulate(scenario.depth.table_points)
        .into_iter()
        .map(|(delta, d, r)| DepthRow { delta, d, r })
        .collect();
    let rep = evaluate(grid, &est.minimizer, params, None);
    let minimizer_residual = nehari_scaling(&rep, 1.0, params)
        .ok()
        .map(|s| stationary_residual(grid, &est.minimizer.scaled(s), params));
    Ok(DepthReport {
        s_k: est.value,
        grad_norm: est.grad_norm,
        iterations: est.iterations,
        converged: est.converged,
        best_restart: est.best_restart,
        restarts: est.restarts,
        below_lower_bound: est.below_lower_bound,
        lower_bound: 0.5 * model_constants(params.dim)?.sobolev,
        well,
        table,
        minimizer_residual,
    })
}

pub fn compute_hardy(loaded: &LoadedScenario) -> CliResult<HardyReport> {
    let sc = &loaded.scenario;
    let grid = loaded.hardy_grid()?;
    let rows = optimality_sweep(&grid, &sc.hardy.epsilons, sc.hardy.variant)?;
    Ok(HardyReport {
        m: sc.hardy.m,
        nondecreasing: rows.windows(2).all(|w| w[1].quotient >= w[0].quotient),
        above_lower_bounds: rows.iter().all(|r| r.quotient >= r.lower_bound * (1.0 - 1e-2)),
        constant: hardy_constant(sc.dim),
        discrete_constant: discrete_hardy_constant(&grid),
        rows,
    })
}

/// Runs the analyses in `plan`. No file is touched.
pub fn run_plan(
    loaded: &LoadedScenario,
    plan: &BTreeSet<Analysis>,
    opts: RunOptions,
) -> CliResult<RunArtifacts> {
    loaded.validate()?;
    let sc = &loaded.scenario;
    let seed = opts.seed.unwrap_or(sc.seed);
    let params = loaded.params()?;
    let grid = loaded.grid()?;
    let mut report = RunReport {
        scenario: sc.clone(),
        seed,
        analyses: plan.iter().copied().collect(),
        constants: model_constants(sc.dim)?,
        depth: None,
        classify: None,
        evolve: None,
        decay_fit: None,
        hardy: None,
        lambda_bounds: None,
        stationary: None,
        sweep: None,
        artifacts: Vec::new(),
    };
    let mut files = Vec::new();

    if plan.contains(&Analysis::Depth) {
        report.depth = Some(compute_depth(&grid, &params, sc, seed)?);
    }
    let well = report.depth.as_ref().map(|d| d.well);

    let v0 = loaded.initial_field(&grid)?;
    let initial = evaluate(&grid, &v0, &params, Some(sc.evolution.delta_for_wells));
    if let (true, Some(well)) = (plan.contains(&Analysis::Classify), well) {
        let alpha = sc.lambda_bounds.alpha_factor * well.depth;
        let (prediction, basis) = predict(&initial, &well, &params);
        report.classify = Some(ClassifyReport {
            functionals: initial,
            classification: classify(&initial, &well, sc.evolution.delta_for_wells, Some(alpha)),
            high_energy_condition: high_energy_condition(&initial, &params),
            high_energy_reading: HIGH_ENERGY_READING.into(),
            prediction,
            basis: basis.into(),
        });
    }

    if plan.contains(&Analysis::Evolve) {
        let mut config = sc.evolution;
        if plan.contains(&Analysis::Stationary) && config.snapshot_every == 0 {
            config.snapshot_every = sc.stationary.snapshot_every;
        }
        let run = evolve(&grid, &v0, &params, &config)?;
        let trace_file = "trace.csv".to_string();
        files.push((trace_file.clone(), trace_to_csv(&run.trace)));
        let agreement = report
            .classify
            .as_ref()
            .and_then(|c| c.prediction.agrees_with(run.outcome.label));
        report.evolve = Some(EvolveReport {
            outcome: run.outcome.clone(),
            samples: run.trace.len(),
            initial: run.trace[0],
            last: *run.trace.last().expect("trace has the initial sample"),
            energy_identity_defect: energy_identity_defect(&run.trace),
            max_energy_increase: max_energy_increase(&run.trace),
            monitors: blowup_monitors(&run.trace),
            agreement,
            trace_file,
        });
        if plan.contains(&Analysis::DecayFit) {
            let well = well.expect("decay fit implies depth");
            let fit = fit_decay_rate(&run.trace, &well, initial.energy, ENVELOPE_TOL);
            report.decay_fit = Some(DecayFitReport {
                tolerance: ENVELOPE_TOL,
                skipped: fit.as_ref().err().map(|e| e.to_string()),
                fit: fit.ok(),
            });
        }
        if plan.contains(&Analysis::Stationary) {
            let candidates = extract_stationary_candidates(
                &grid,
                &params,
                &run.snapshots,
                sc.stationary.tol_vdot,
            );
            report.stationary = Some(StationaryReport {
                tol_vdot: sc.stationary.tol_vdot,
                candidates: candidates
                    .iter()
                    .map(|c| CandidateRow {
                        s: c.s,
                        vdot_l2sq: c.vdot_l2sq,
                        residual: c.residual,
                        l2_sq: c.l2_sq,
                        energy: c.energy,
                    })
                    .collect(),
            });
        }
    }

    if plan.contains(&Analysis::Hardy) {
        report.hardy = Some(compute_hardy(loaded)?);
    }

    if let (true, Some(well)) = (plan.contains(&Analysis::LambdaBounds), well) {
        let alpha = sc.lambda_bounds.alpha_factor * well.depth;
        let bounds =
            empirical_lambda_bounds(&grid, &params, &well, alpha, sc.lambda_bounds.samples, seed)?;
        report.lambda_bounds = Some(LambdaReport { alpha, bounds });
    }

    if let (true, Some(well)) = (plan.contains(&Analysis::Sweep), well) {
        let threads = opts.threads.unwrap_or(sc.sweep.threads);
        let shape = loaded.initial_shape(&grid)?;
        let rows = amplitude_sweep(
            &grid,
            &shape,
            &params,
            &well,
            &sc.evolution,
            &sc.sweep.lambdas,
            threads,
        )?;
        files.push(("sweep.csv".into(), sweep_csv(&rows)));
        report.sweep = Some(rows);
    }

    report.artifacts = std::iter::once("report.json".to_string())
        .chain(std::iter::once("summary.txt".to_string()))
        .chain(files.iter().map(|(name, _)| name.clone()))
        .collect();
    let summary = render_summary(&report);
    Ok(RunArtifacts {
        report,
        summary,
        files,
    })
}

pub fn render_summary(report: &RunReport) -> String {
    let mut s = String::new();
    let c = &report.constants;
    let sc = &report.scenario;
    let _ = writeln!(s, "scenario {} (N = {}, mu = {}, seed {})", sc.name, sc.dim, sc.mu, report.seed);
    let _ = writeln!(
        s,
        "  beta = {:.6}  p = {:.6}  2* = {:.6}  Hardy = {:.6}  lambda* = {:.6}  S0 = {:.6}",
        c.beta, c.p, c.two_star, c.hardy, c.lambda_star, c.sobolev
    );
    if let Some(d) = &report.depth {
        let _ = writeln!(
            s,
            "depth: S_K = {:.6} ({} iterations, converged {}), d = {:.6}, lower bound S0/2 = {:.6}{}",
            d.s_k,
            d.iterations,
            d.converged,
            d.well.depth,
            d.lower_bound,
            if d.below_lower_bound { "  [BELOW LOWER BOUND]" } else { "" }
        );
        if let Some(r) = d.minimizer_residual {
            let _ = writeln!(s, "  minimizer stationary residual on the Nehari set: {r:.3e}");
        }
    }
    if let Some(k) = &report.classify {
        let f = &k.functionals;
        let w = &k.classification;
        let _ = writeln!(
            s,
            "initial datum: E = {:.6e}  D = {:.6e}  A = {:.6e}  B = {:.6e}  ||v||^2 = {:.6e}",
            f.energy, f.nehari, f.a_val, f.b_val, f.l2_sq
        );
        let _ = writeln!(
            s,
            "  N+ {}  N- {}  W_delta {}  V_delta {}  B_delta {}  (delta = {})",
            w.in_nehari_plus, w.in_nehari_minus, w.in_w_delta, w.in_v_delta, w.in_b_delta, w.delta
        );
        let _ = writeln!(s, "  high-energy condition: {}", k.high_energy_condition);
        let _ = writeln!(s, "  note: {}", k.high_energy_reading);
        let _ = writeln!(s, "  prediction: {:?} ({})", k.prediction, k.basis);
    }
    if let Some(e) = &report.evolve {
        let _ = writeln!(
            s,
            "evolution: {} at s = {:.6} after {} steps ({})",
            e.outcome.label, e.outcome.s_final, e.outcome.steps, e.outcome.detail
        );
        let _ = writeln!(
            s,
            "  energy identity defect {:.3e}, max energy increase {:.3e}, D sign flips {}, convexity error {:.3e}",
            e.energy_identity_defect,
            e.max_energy_increase,
            e.monitors.dk_sign_flips,
            e.monitors.convexity_error
        );
        if let Some(a) = e.agreement {
            let _ = writeln!(s, "  agrees with prediction: {a}");
        }
    }
    if let Some(fit) = &report.decay_fit {
        match (&fit.fit, &fit.skipped) {
            (Some(f), _) => {
                let _ = writeln!(
                    s,
                    "decay fit: rate {:.4} vs predicted {:.4} (delta_1 = {:.4}), envelope ratio {:.4}, satisfied {}",
                    f.fitted_rate, f.predicted_rate, f.delta_1, f.worst_ratio, f.satisfied
                );
            }
            (None, Some(why)) => {
                let _ = writeln!(s, "decay fit skipped: {why}");
            }
            _ => {}
        }
    }
    if let Some(h) = &report.hardy {
        let _ = writeln!(
            s,
            "Hardy witness sweep on m = {}: nondecreasing {}, above 1/gamma^2 {}, discrete constant {:.6} (continuum {})",
            h.m, h.nondecreasing, h.above_lower_bounds, h.discrete_constant, h.constant
        );
        for r in &h.rows {
            let _ = writeln!(
                s,
                "  eps {:<8} gamma {:.4}  Q = {:.6}  1/gamma^2 = {:.6}",
                r.epsilon, r.gamma, r.quotient, r.lower_bound
            );
        }
    }
    if let Some(l) = &report.lambda_bounds {
        let _ = writeln!(
            s,
            "lambda bounds at alpha = {:.6}: lambda_alpha <= {:.6}, Lambda_alpha >= {:.6} ({} of {} samples)",
            l.alpha, l.bounds.lambda_upper, l.bounds.big_lambda_lower, l.bounds.keepers, l.bounds.samples
        );
    }
    if let Some(st) = &report.stationary {
        let _ = writeln!(
            s,
            "stationary candidates (||v_s||^2 < {}): {}",
            st.tol_vdot,
            st.candidates.len()
        );
        if let (Some(first), Some(last)) = (st.candidates.first(), st.candidates.last()) {
            let _ = writeln!(
                s,
                "  residual {:.3e} at s = {:.3} -> {:.3e} at s = {:.3}",
                first.residual, first.s, last.residual, last.s
            );
        }
    }
    if let Some(rows) = &report.sweep {
        let _ = writeln!(s, "amplitude sweep: {} rows", rows.len());
        for r in rows {
            let _ = writeln!(
                s,
                "  lambda {:<8} E {:>13.6e}  D {:>13.6e}  predicted {:<13} observed {:<18} agree {}",
                r.lambda,
                r.energy,
                r.nehari,
                format!("{:?}", r.predicted),
                r.observed.map(|o| o.to_string()).unwrap_or_else(|| "ERROR".into()),
                r.agreement.map(|a| a.to_string()).unwrap_or_else(|| "-".into())
            );
        }
    }
    s
}

/// Writes the report, summary and extra files into `out`, creating it.
pub fn write_artifacts(out: &std::path::Path, artifacts: &RunArtifacts) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let json = serde_json::to_string_pretty(&artifacts.report)
        .map_err(|e| CliError::Invalid(format!("report serialization: {e}")))?;
    let mut all = vec![
        ("report.json".to_string(), json + "\n"),
        ("summary.txt".to_string(), artifacts.summary.clone()),
    ];
    all.extend(artifacts.files.iter().cloned());
    for (name, contents) in all {
        let path = out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}
