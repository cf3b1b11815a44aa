use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qrf_lab::{run_scenario, validate_config, LabError, ScenarioReport, Sink, SCENARIOS};

/// Quantum reference frame scenarios on discretized 1D grids.
#[derive(Debug, Parser)]
#[command(name = "qrf-lab", version, after_help = scenario_list())]
struct Args {
    /// Scenario name, e.g. `fig3`, `wep`, `doppler`.
    scenario: String,
    /// Configuration file in `key = value` form.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Case letter for `fig3`.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to QRF_LAB_THREADS.
    #[arg(long, env = "QRF_LAB_THREADS")]
    threads: Option<usize>,
}

fn scenario_list() -> String {
    format!("Scenarios: {}", SCENARIOS.join(", "))
}

#[cfg(feature = "parallel")]
fn set_threads(n: Option<usize>) -> Result<(), LabError> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Invalid(vec![format!("threads: {e}")]))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: Option<usize>) -> Result<(), LabError> {
    Ok(())
}

fn run(args: &Args) -> Result<ScenarioReport, LabError> {
    if args.threads == Some(0) {
        return Err(LabError::Invalid(vec!["threads must be positive".into()]));
    }
    set_threads(args.threads)?;
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| LabError::io(p, e))?,
        None => String::new(),
    };
    let mut cfg = validate_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qrf-lab-out"));
    run_scenario(&args.scenario, args.case.as_deref(), &cfg, Sink::to(&dir)?)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(report) => {
            for line in &report.text {
                println!("{line}");
            }
            for (name, v) in &report.verdicts {
                let value = report.value(&v.metric).unwrap_or(f64::NAN);
                let tag = if v.pass { "PASS" } else { "FAIL" };
                println!("{tag} {name}: {} = {value:.6e} ({})", v.metric, v.rule);
            }
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                eprintln!("tolerance failures: {}", report.failures().join(", "));
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
