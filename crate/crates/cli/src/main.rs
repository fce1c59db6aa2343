use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hardy_flow::model_constants;
use hardy_lab::{
    expand_plan, load_scenario, run_plan, write_artifacts, Analysis, CliError, CliResult,
    RunOptions,
};

#[derive(Parser)]
#[command(name = "hardy-lab", version, about = "Self-similar Hardy-Sobolev heat flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, default `out/<scenario name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print beta, p, 2*, the Hardy constant, lambda* and S0.
    Constants {
        /// Spatial dimension, ignored when --config is given.
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Witness sweep for the optimality of the Hardy constant.
    HardySweep(Common),
    /// Estimate S_K and classify the initial datum against the wells.
    Classify(Common),
    /// Evolve the initial datum and fit the decay envelope.
    Evolve(Common),
    /// Estimate S_K, tabulate d(delta) and bound lambda_alpha, Lambda_alpha.
    Depth(Common),
    /// Amplitude sweep over the scenario's lambdas.
    Sweep(Common),
    /// Evolve with snapshots and report stationary-state candidates.
    Stationary(Common),
    /// Run the analyses listed in the scenario.
    Run(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> CliResult<u8> {
    let (common, requested) = match command {
        Command::Constants { dim, config, out } => return constants(dim, config, out),
        Command::HardySweep(c) => (c, vec![Analysis::Hardy]),
        Command::Classify(c) => (c, vec![Analysis::Classify]),
        Command::Evolve(c) => (c, vec![Analysis::Evolve, Analysis::DecayFit]),
        Command::Depth(c) => (c, vec![Analysis::Depth, Analysis::LambdaBounds]),
        Command::Sweep(c) => (c, vec![Analysis::Sweep]),
        Command::Stationary(c) => (c, vec![Analysis::Stationary]),
        Command::Run(c) => (c, Vec::new()),
    };
    let loaded = load_scenario(&common.config)?;
    let requested = if requested.is_empty() {
        if loaded.scenario.analyses.is_empty() {
            vec![Analysis::Evolve, Analysis::DecayFit]
        } else {
            loaded.scenario.analyses.clone()
        }
    } else {
        requested
    };
    let plan = expand_plan(&requested);
    let opts = RunOptions {
        seed: common.seed,
        threads: common.threads,
    };
    let artifacts = run_plan(&loaded, &plan, opts)?;
    let out = common
        .out
        .unwrap_or_else(|| Path::new("out").join(&loaded.scenario.name));
    write_artifacts(&out, &artifacts)?;
    print!("{}", artifacts.summary);
    println!("wrote {}", out.display());
    if artifacts.report.integrator_failed() {
        let e = CliError::Integrator("evolution ended in INTEGRATOR_FAILURE".into());
        eprintln!("error: {e}");
        return Ok(e.exit_code() as u8);
    }
    Ok(0)
}

fn constants(dim: usize, config: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<u8> {
    let dim = match config {
        Some(path) => load_scenario(&path)?.scenario.dim,
        None => dim,
    };
    let c = model_constants(dim).map_err(|e| CliError::Invalid(e.to_string()))?;
    let json = serde_json::to_string_pretty(&c)
        .map_err(|e| CliError::Invalid(format!("serialization: {e}")))?;
    println!("{json}");
    if let Some(out) = out {
        std::fs::create_dir_all(&out).map_err(|e| CliError::Io {
            path: out.clone(),
            source: e,
        })?;
        let path = out.join("constants.json");
        std::fs::write(&path, json + "\n").map_err(|e| CliError::Io { path, source: e })?;
    }
    Ok(0)
}
