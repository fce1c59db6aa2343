use hardy_flow::evolution::{blowup_monitors, evolve, EvolutionConfig};
use hardy_flow::fields::gaussian;
use hardy_flow::hardy::{
    discrete_hardy_constant, hardy_constant, optimality_sweep, SweepRow, WitnessVariant,
};
use hardy_flow::variational::{estimate_sk, fibering_energy, ray_peak, DescentOptions};
use hardy_flow::{
    classify, evaluate, FunctionalReport, ModelParams, RadialGrid, WellClassification,
    WellConstants,
};
use serde::Serialize;

const R_MAX: f64 = 12.0;
const MAX_CELLS: usize = 16384;
const CURVE_POINTS: usize = 200;
const TRACE_POINTS: usize = 400;
pub const WITNESS_EPSILONS: [f64; 5] = [1.0, 0.3, 0.1, 0.03, 0.01];

fn setup(dim: usize, mu: f64, m: usize) -> Result<(RadialGrid, ModelParams), String> {
    if m > MAX_CELLS {
        return Err(format!("at most {MAX_CELLS} cells"));
    }
    let grid = RadialGrid::new(dim, R_MAX, m).map_err(|e| e.to_string())?;
    let params = ModelParams::new(dim, mu).map_err(|e| e.to_string())?;
    Ok((grid, params))
}

fn well(grid: &RadialGrid, params: &ModelParams) -> Result<WellConstants, String> {
    let opts = DescentOptions {
        max_iter: 600,
        ..DescentOptions::default()
    };
    let est = estimate_sk(grid, params, 1, 1, &opts).map_err(|e| e.to_string())?;
    Ok(WellConstants::from_sk(params, est.value))
}

fn prediction(rep: &FunctionalReport, well: &WellConstants) -> &'static str {
    if rep.is_zero() || (rep.energy < well.depth && rep.nehari > 0.0) {
        "GLOBAL_DECAY"
    } else if rep.energy < well.depth && rep.nehari < 0.0 {
        "BLOW_UP"
    } else {
        "UNDETERMINED"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberingView {
    pub s: Vec<f64>,
    pub energy: Vec<f64>,
    pub s_star: f64,
    pub peak: f64,
    pub depth: f64,
    pub s_k: f64,
    pub functionals: FunctionalReport,
    pub classification: WellClassification,
    pub prediction: &'static str,
}

pub fn fibering(dim: usize, mu: f64, amplitude: f64, m: usize) -> Result<FiberingView, String> {
    let (grid, params) = setup(dim, mu, m)?;
    let v = gaussian(&grid, amplitude).map_err(|e| e.to_string())?;
    let rep = evaluate(&grid, &v, &params, None);
    let peak = ray_peak(&rep, &params).map_err(|e| e.to_string())?;
    let well = well(&grid, &params)?;
    let s_end = 1.6 * peak.s_star.max(1.0);
    let s: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| s_end * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect();
    let energy = s.iter().map(|&x| fibering_energy(&rep, x, &params)).collect();
    Ok(FiberingView {
        s,
        energy,
        s_star: peak.s_star,
        peak: peak.peak,
        depth: well.depth,
        s_k: well.s_k,
        functionals: rep,
        classification: classify(&rep, &well, 1.0, None),
        prediction: prediction(&rep, &well),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceView {
    pub s: Vec<f64>,
    pub l2_sq: Vec<f64>,
    pub energy: Vec<f64>,
    pub nehari: Vec<f64>,
    pub label: String,
    pub s_final: f64,
    pub steps: usize,
    pub detail: String,
    pub depth: f64,
    pub prediction: &'static str,
    pub dk_sign_flips: usize,
}

pub fn evolve_gaussian(
    dim: usize,
    mu: f64,
    amplitude: f64,
    m: usize,
    s_max: f64,
) -> Result<TraceView, String> {
    let (grid, params) = setup(dim, mu, m)?;
    let v0 = gaussian(&grid, amplitude).map_err(|e| e.to_string())?;
    let well = well(&grid, &params)?;
    let rep = evaluate(&grid, &v0, &params, None);
    let config = EvolutionConfig {
        s_max,
        ..EvolutionConfig::default()
    };
    let run = evolve(&grid, &v0, &params, &config).map_err(|e| e.to_string())?;
    let stride = run.trace.len().div_ceil(TRACE_POINTS).max(1);
    let last = run.trace.len() - 1;
    let kept: Vec<_> = run
        .trace
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, t)| t)
        .collect();
    Ok(TraceView {
        s: kept.iter().map(|t| t.s).collect(),
        l2_sq: kept.iter().map(|t| t.l2_sq).collect(),
        energy: kept.iter().map(|t| t.energy).collect(),
        nehari: kept.iter().map(|t| t.nehari).collect(),
        label: run.outcome.label.to_string(),
        s_final: run.outcome.s_final,
        steps: run.outcome.steps,
        detail: run.outcome.detail.clone(),
        depth: well.depth,
        prediction: prediction(&rep, &well),
        dk_sign_flips: blowup_monitors(&run.trace).dk_sign_flips,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyView {
    pub rows: Vec<SweepRow>,
    pub constant: f64,
    pub discrete_constant: f64,
}

pub fn hardy_sweep(dim: usize, m: usize, raw: bool) -> Result<HardyView, String> {
    let (grid, _) = setup(dim, 0.0, m)?;
    let variant = if raw {
        WitnessVariant::Raw
    } else {
        WitnessVariant::Continuous
    };
    let rows = optimality_sweep(&grid, &WITNESS_EPSILONS, variant).map_err(|e| e.to_string())?;
    Ok(HardyView {
        rows,
        constant: hardy_constant(dim),
        discrete_constant: discrete_hardy_constant(&grid),
    })
}
