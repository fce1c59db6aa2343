use std::fmt::Write as _;

use hardy_flow::evolution::blowup_monitors;
use hardy_flow::{
    evaluate, evolve, EvolutionConfig, ModelParams, OutcomeLabel, RadialField, RadialGrid,
    WellConstants,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::run::{predict, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRow {
    pub lambda: f64,
    pub energy: f64,
    pub nehari: f64,
    pub l2_sq: f64,
    pub predicted: Prediction,
    pub basis: String,
    pub observed: Option<OutcomeLabel>,
    pub s_final: Option<f64>,
    pub agreement: Option<bool>,
    pub dk_sign_flips: Option<usize>,
    pub error: Option<String>,
}

/// Evolves `lambda * shape` for every `lambda` on a pool of `threads`
/// workers. Rows come back sorted by `lambda`; a failed run is recorded in
/// its row and the others continue.
pub fn amplitude_sweep(
    grid: &RadialGrid,
    shape: &RadialField,
    params: &ModelParams,
    well: &WellConstants,
    config: &EvolutionConfig,
    lambdas: &[f64],
    threads: usize,
) -> CliResult<Vec<AmplitudeRow>> {
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        sorted
            .par_iter()
            .map(|&lambda| sweep_row(grid, shape, params, well, config, lambda))
            .collect()
    }))
}

fn sweep_row(
    grid: &RadialGrid,
    shape: &RadialField,
    params: &ModelParams,
    well: &WellConstants,
    config: &EvolutionConfig,
    lambda: f64,
) -> AmplitudeRow {
    let v0 = shape.scaled(lambda);
    let rep = evaluate(grid, &v0, params, None);
    let (predicted, basis) = predict(&rep, well, params);
    let mut row = AmplitudeRow {
        lambda,
        energy: rep.energy,
        nehari: rep.nehari,
        l2_sq: rep.l2_sq,
        predicted,
        basis: basis.into(),
        observed: None,
        s_final: None,
        agreement: None,
        dk_sign_flips: None,
        error: None,
    };
    match evolve(grid, &v0, params, config) {
        Ok(run) => {
            row.observed = Some(run.outcome.label);
            row.s_final = Some(run.outcome.s_final);
            row.agreement = predicted.agrees_with(run.outcome.label);
            row.dk_sign_flips = Some(blowup_monitors(&run.trace).dk_sign_flips);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn sweep_csv(rows: &[AmplitudeRow]) -> String {
    let mut s = String::from("lambda,energy,nehari,l2_sq,predicted,observed,s_final,agreement\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.lambda,
            r.energy,
            r.nehari,
            r.l2_sq,
            serde_json::to_value(r.predicted)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            r.observed.map(|o| o.to_string()).unwrap_or_else(|| "ERROR".into()),
            r.s_final.map(|x| x.to_string()).unwrap_or_default(),
            r.agreement.map(|a| a.to_string()).unwrap_or_default(),
        );
    }
    s
}
