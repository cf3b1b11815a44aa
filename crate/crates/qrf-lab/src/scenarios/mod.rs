//! Scenario registry. Each scenario builds its states from the config, runs
//! library operations, and records metrics with verdicts.

mod doppler;
mod fig3;
mod galilean;
mod measure;
mod wep;

use qrf_core::phase_space::Masses;
use qrf_core::Grid1D;

use crate::config::ScenarioConfig;
use crate::error::{LabError, Result};
use crate::report::{ScenarioReport, Sink};

pub const SCENARIOS: [&str; 15] = [
    "fig3-a",
    "fig3-b",
    "fig3-c",
    "fig3-d",
    "translation-symmetry",
    "boost-superposition",
    "relvel",
    "wep",
    "wep-linear",
    "wep-trotter",
    "doppler",
    "measurement-invariance",
    "canonicity-naive",
    "print-map",
    "fig3",
];

pub(crate) struct Ctx<'a> {
    pub cfg: &'a ScenarioConfig,
    pub report: ScenarioReport,
    pub sink: Sink,
}

impl Ctx<'_> {
    pub fn masses(&self) -> Masses {
        let m = &self.cfg.masses;
        Masses::new(&[("A", m.a), ("B", m.b), ("C", m.c)]).expect("validated masses")
    }
}

/// Nearest grid point to `x`.
pub(crate) fn snap(g: &Grid1D, x: f64) -> f64 {
    let k = (x / g.dx()).round() + (g.n() / 2) as f64;
    g.x(k.clamp(0.0, (g.n() - 1) as f64) as usize)
}

/// Nearest momentum grid point to `p`.
pub(crate) fn snap_p(g: &Grid1D, p: f64) -> f64 {
    let k = (p / g.dp()).round() + (g.n() / 2) as f64;
    g.p(k.clamp(0.0, (g.n() - 1) as f64) as usize)
}

/// Full scenario name from a name and an optional `--case`.
pub fn resolve(name: &str, case: Option<&str>) -> Result<String> {
    let full = match (name, case) {
        ("fig3", Some(c)) => format!("fig3-{c}"),
        ("fig3", None) => return Err(LabError::UnknownScenario("fig3 needs --case a|b|c|d".into())),
        (n, _) => n.to_string(),
    };
    if full == "fig3" || !SCENARIOS.contains(&full.as_str()) {
        return Err(LabError::UnknownScenario(full));
    }
    Ok(full)
}

/// Runs a scenario and writes its files into `sink`. Tolerance failures are
/// reported through the verdicts, not as errors.
pub fn run_scenario(name: &str, case: Option<&str>, cfg: &ScenarioConfig, sink: Sink) -> Result<ScenarioReport> {
    let full = resolve(name, case)?;
    let mut echo = cfg.clone();
    echo.scenario = Some(full.clone());
    let mut ctx = Ctx {
        cfg,
        report: ScenarioReport::new(&full, echo.to_text()),
        sink,
    };
    match full.as_str() {
        "fig3-a" => fig3::case_a(&mut ctx)?,
        "fig3-b" => fig3::case_b(&mut ctx)?,
        "fig3-c" => fig3::case_c(&mut ctx)?,
        "fig3-d" => fig3::case_d(&mut ctx)?,
        "translation-symmetry" => galilean::translation_symmetry(&mut ctx)?,
        "boost-superposition" => galilean::boost_superposition(&mut ctx)?,
        "relvel" => galilean::relvel(&mut ctx)?,
        "canonicity-naive" => galilean::canonicity_naive(&mut ctx)?,
        "print-map" => galilean::print_map(&mut ctx)?,
        "wep" => wep::wep(&mut ctx)?,
        "wep-linear" => wep::wep_linear(&mut ctx)?,
        "wep-trotter" => wep::wep_trotter(&mut ctx)?,
        "doppler" => doppler::doppler(&mut ctx)?,
        "measurement-invariance" => measure::measurement_invariance(&mut ctx)?,
        other => return Err(LabError::UnknownScenario(other.to_string())),
    }
    ctx.sink.finish(&ctx.report)?;
    Ok(ctx.report)
}
