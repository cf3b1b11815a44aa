//! Scenario reports and their CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qrf_core::measurement::Distribution;
use qrf_core::{AxisKind, MultiState, C64};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    /// Operation that produced the value.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// Name of the metric the verdict is about.
    pub metric: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub frame: String,
    pub subsystem: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub verdicts: BTreeMap<String, Verdict>,
    pub metrics: BTreeMap<String, Metric>,
    pub files: Vec<FileEntry>,
    pub config_echo: String,
    /// Pretty-printed text for scenarios whose result is a table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub text: Vec<String>,
}

impl ScenarioReport {
    pub fn new(scenario: &str, config_echo: String) -> Self {
        Self {
            scenario: scenario.to_string(),
            verdicts: BTreeMap::new(),
            metrics: BTreeMap::new(),
            files: Vec::new(),
            config_echo,
            text: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64, source: &str) -> f64 {
        self.metrics.insert(
            name.to_string(),
            Metric {
                value,
                source: source.to_string(),
            },
        );
        value
    }

    /// Records a verdict on an existing metric.
    pub fn check(&mut self, name: &str, metric: &str, pass: bool, rule: impl Into<String>) -> bool {
        debug_assert!(self.metrics.contains_key(metric), "verdict on unknown metric {metric}");
        self.verdicts.insert(
            name.to_string(),
            Verdict {
                pass,
                metric: metric.to_string(),
                rule: rule.into(),
            },
        );
        pass
    }

    /// Records a metric and a verdict `lo <= value <= hi` on it.
    pub fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64, source: &str) -> bool {
        self.metric(name, value, source);
        let pass = value >= lo && value <= hi;
        self.check(name, name, pass, format!("{lo:e} <= value <= {hi:e}"))
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|(_, v)| !v.pass).map(|(k, _)| k.as_str()).collect()
    }

    pub fn value(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.value)
    }
}

/// One CSV row: coordinate, amplitude, density.
pub type Row = (f64, C64, f64);

fn coordinate(kind: &AxisKind, k: usize) -> f64 {
    match kind {
        AxisKind::Continuous { grid, .. } | AxisKind::Photon { grid, .. } => grid.x(k),
        AxisKind::Discrete { .. } => k as f64,
    }
}

/// Position-representation marginal of one subsystem. The density column is
/// exact; the amplitude columns hold the leading Schmidt mode scaled by the
/// square root of its weight, which is the subsystem's wave function when the
/// state is a product across that subsystem.
pub fn marginal_rows(state: &MultiState, label: &str) -> Result<Vec<Row>> {
    let s = state.in_position();
    let sub = s.subsystem(label)?.clone();
    let dx = sub.kind.measure();
    let n = sub.kind.len();
    let amps: Vec<C64> = if s.subsystems().len() == 1 {
        s.amps().iter().copied().collect()
    } else {
        let rho = s.reduced_density(&[label])?;
        let eig = rho.symmetric_eigen();
        let top = (0..n)
            .max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
            .unwrap_or(0);
        let lambda = eig.eigenvalues[top].max(0.0);
        let v = eig.eigenvectors.column(top);
        let peak = (0..n).max_by(|&i, &j| v[i].norm().total_cmp(&v[j].norm())).unwrap_or(0);
        let phase = if v[peak].norm() > 0.0 { v[peak].conj() / v[peak].norm() } else { C64::new(1.0, 0.0) };
        let scale = (lambda / dx).sqrt();
        (0..n).map(|k| v[k] * phase * scale).collect()
    };
    let density = s.marginal(label)?;
    Ok((0..n).map(|k| (coordinate(&sub.kind, k), amps[k], density[k])).collect())
}

/// Outcome distribution as rows; the amplitude columns carry the square root
/// of the outcome density.
pub fn distribution_rows(d: &Distribution, bin: f64) -> Vec<Row> {
    d.outcomes
        .iter()
        .zip(&d.probs)
        .map(|(&b, &p)| {
            let density = p / bin;
            (b, C64::new(density.sqrt(), 0.0), density)
        })
        .collect()
}

fn fmt_num(x: f64) -> String {
    // Twelve significant digits; negative zero is written as zero so that
    // reruns compare byte for byte.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

pub fn emit_csv(rows: &[Row], path: &Path) -> Result<()> {
    let mut s = String::from("coordinate,re,im,abs2\n");
    for (x, a, d) in rows {
        writeln!(s, "{},{},{},{}", fmt_num(*x), fmt_num(a.re), fmt_num(a.im), fmt_num(*d)).unwrap();
    }
    fs::write(path, s).map_err(|e| LabError::io(path, e))
}

pub fn emit_json(report: &ScenarioReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| LabError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| LabError::io(path, e))
}

/// Where a scenario writes its files.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: Option<PathBuf>,
}

impl Sink {
    pub fn none() -> Self {
        Self { dir: None }
    }

    pub fn to(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
        })
    }

    fn write(&self, report: &mut ScenarioReport, name: &str, frame: &str, label: &str, source: &str, rows: &[Row]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let file = format!("{}_{}_{}.csv", report.scenario, name, label);
        emit_csv(rows, &dir.join(&file))?;
        report.files.push(FileEntry {
            path: file,
            frame: frame.to_string(),
            subsystem: label.to_string(),
            source: source.to_string(),
        });
        Ok(())
    }

    /// Writes one marginal file per subsystem of `state`. `tag` separates
    /// several states seen from the same frame.
    pub fn marginals(&self, report: &mut ScenarioReport, tag: &str, state: &MultiState, source: &str) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let frame = state.frame().label.clone();
        let name = if tag.is_empty() { frame.clone() } else { format!("{frame}-{tag}") };
        for label in state.labels() {
            let rows = marginal_rows(state, label)?;
            self.write(report, &name, &frame, label, source, &rows)?;
        }
        Ok(())
    }

    pub fn distribution(&self, report: &mut ScenarioReport, name: &str, frame: &str, label: &str, d: &Distribution, bin: f64) -> Result<()> {
        self.write(report, name, frame, label, "measure_via_pointer", &distribution_rows(d, bin))
    }

    pub fn finish(&self, report: &ScenarioReport) -> Result<()> {
        if let Some(dir) = &self.dir {
            emit_json(report, &dir.join(format!("{}.json", report.scenario)))?;
        }
        Ok(())
    }
}
