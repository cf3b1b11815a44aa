//! Line-oriented scenario configuration.
//!
//! ```text
//! # comment
//! [grid]
//! n = 256
//! dx = 0.1
//! A.n = 128        # same as `grid.A.n = 128` at top level
//! [masses]
//! mC = 2.0
//! ```
//!
//! Keys are joined with their section into dotted paths. Every path must be
//! known; anything else is rejected with its line number.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use qrf_core::Grid1D;

use crate::error::LabError;

/// Labels that may carry their own grid.
pub const GRID_LABELS: [&str; 5] = ["A", "B", "C", "E", "M"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub dx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Masses {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateParams {
    pub x0: f64,
    pub sigma: f64,
    /// Branch separation in units of `sigma`.
    pub separation: f64,
    pub l: f64,
    pub x_offset: f64,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub t: f64,
    pub dt: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialParams {
    pub breakpoint: f64,
    pub slope_left: f64,
    pub slope_right: f64,
    pub slope: f64,
}

/// Branches of the superposed frame in the equivalence-principle runs.
#[derive(Debug, Clone, PartialEq)]
pub struct WepParams {
    pub center: f64,
    pub sigma: f64,
    pub guard_band: f64,
}

/// Grid shared by every axis of the measurement runs, and the apparatus.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureParams {
    pub n: usize,
    pub dx: f64,
    pub x0: f64,
    pub sigma: f64,
    /// Fraction of the grid over which random states are centred.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonParams {
    pub n: usize,
    pub du: f64,
    pub omega_ref: f64,
    pub omega_b: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Option<String>,
    pub seed: u64,
    pub out: Option<String>,
    pub grid: GridSpec,
    pub grid_n: BTreeMap<String, usize>,
    pub grid_dx: BTreeMap<String, f64>,
    pub hbar: f64,
    pub c: f64,
    pub masses: Masses,
    pub state: StateParams,
    pub evolution: Evolution,
    pub potential: PotentialParams,
    pub wep: WepParams,
    pub photon: PhotonParams,
    pub measure: MeasureParams,
    pub samples: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 0,
            out: None,
            grid: GridSpec { n: 256, dx: 0.1 },
            grid_n: BTreeMap::new(),
            grid_dx: BTreeMap::new(),
            hbar: 1.0,
            c: 137.0,
            masses: Masses {
                a: 1.0,
                b: 1.0,
                c: 1.0,
                m: 1.0,
            },
            state: StateParams {
                x0: 2.0,
                sigma: 0.4,
                separation: 16.0,
                l: 3.0,
                x_offset: 2.0,
                p1: 2.0,
                p2: -1.5,
            },
            evolution: Evolution {
                t: 1.0,
                dt: 1e-3,
                tau: 0.25,
            },
            potential: PotentialParams {
                breakpoint: 0.0,
                slope_left: 0.5,
                slope_right: -0.5,
                slope: 0.3,
            },
            wep: WepParams {
                center: 5.5,
                sigma: 0.7,
                guard_band: 0.5,
            },
            photon: PhotonParams {
                n: 256,
                du: 0.005,
                omega_ref: 10.0,
                omega_b: 10.0,
                sigma: 0.015,
            },
            measure: MeasureParams {
                n: 64,
                dx: 0.25,
                x0: 0.5,
                sigma: 0.8,
                spread: 0.2,
            },
            samples: 10,
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

impl ScenarioConfig {
    /// Grid for a subsystem, honouring per-label overrides.
    pub fn grid_spec(&self, label: &str) -> GridSpec {
        GridSpec {
            n: self.grid_n.get(label).copied().unwrap_or(self.grid.n),
            dx: self.grid_dx.get(label).copied().unwrap_or(self.grid.dx),
        }
    }

    pub fn grid_for(&self, label: &str) -> Grid1D {
        let g = self.grid_spec(label);
        Grid1D::with_hbar(g.n, g.dx, self.hbar).expect("validated grid")
    }

    pub fn photon_grid(&self) -> Grid1D {
        Grid1D::with_hbar(self.photon.n, self.photon.du, self.hbar).expect("validated grid")
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let f = || parse_f64(value);
        match key {
            "scenario" | "run.scenario" => self.scenario = Some(value.to_string()),
            "seed" | "run.seed" => self.seed = value.parse().map_err(|_| format!("`{value}` is not a seed"))?,
            "out" | "run.out" => self.out = Some(value.to_string()),
            "samples" | "run.samples" => self.samples = parse_usize(value)?,
            "grid.n" => self.grid.n = parse_usize(value)?,
            "grid.dx" => self.grid.dx = f()?,
            "constants.hbar" => self.hbar = f()?,
            "constants.c" => self.c = f()?,
            "masses.mA" => self.masses.a = f()?,
            "masses.mB" => self.masses.b = f()?,
            "masses.mC" => self.masses.c = f()?,
            "masses.mM" => self.masses.m = f()?,
            "state.x0" => self.state.x0 = f()?,
            "state.sigma" => self.state.sigma = f()?,
            "state.separation" => self.state.separation = f()?,
            "state.L" => self.state.l = f()?,
            "state.X" => self.state.x_offset = f()?,
            "state.p1" => self.state.p1 = f()?,
            "state.p2" => self.state.p2 = f()?,
            "evolution.t" => self.evolution.t = f()?,
            "evolution.dt" => self.evolution.dt = f()?,
            "evolution.tau" => self.evolution.tau = f()?,
            "potential.breakpoint" => self.potential.breakpoint = f()?,
            "potential.slope_left" => self.potential.slope_left = f()?,
            "potential.slope_right" => self.potential.slope_right = f()?,
            "potential.slope" => self.potential.slope = f()?,
            "wep.center" => self.wep.center = f()?,
            "wep.sigma" => self.wep.sigma = f()?,
            "wep.guard_band" => self.wep.guard_band = f()?,
            "photon.n" => self.photon.n = parse_usize(value)?,
            "photon.du" => self.photon.du = f()?,
            "photon.omega_ref" => self.photon.omega_ref = f()?,
            "photon.omega_b" => self.photon.omega_b = f()?,
            "photon.sigma" => self.photon.sigma = f()?,
            "measure.n" => self.measure.n = parse_usize(value)?,
            "measure.dx" => self.measure.dx = f()?,
            "measure.x0" => self.measure.x0 = f()?,
            "measure.sigma" => self.measure.sigma = f()?,
            "measure.spread" => self.measure.spread = f()?,
            _ => {
                let parts: Vec<&str> = key.split('.').collect();
                match parts.as_slice() {
                    ["grid", l, "n"] if GRID_LABELS.contains(l) => {
                        self.grid_n.insert(l.to_string(), parse_usize(value)?);
                    }
                    ["grid", l, "dx"] if GRID_LABELS.contains(l) => {
                        self.grid_dx.insert(l.to_string(), f()?);
                    }
                    _ => return Err(format!("unknown key `{key}`")),
                }
            }
        }
        Ok(())
    }

    /// Range checks; every violation is reported.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut grid = |name: &str, g: GridSpec| {
            if g.n % 2 != 0 {
                v.push(format!("{name}: n must be even (got {})", g.n));
            } else if !(4..=4096).contains(&g.n) {
                v.push(format!("{name}: n must lie in 4..=4096 (got {})", g.n));
            }
            if !(g.dx > 0.0) {
                v.push(format!("{name}: dx must be positive (got {})", g.dx));
            }
        };
        grid("grid", self.grid);
        for l in GRID_LABELS {
            if self.grid_n.contains_key(l) || self.grid_dx.contains_key(l) {
                grid(&format!("grid.{l}"), self.grid_spec(l));
            }
        }
        grid(
            "photon",
            GridSpec {
                n: self.photon.n,
                dx: self.photon.du,
            },
        );
        grid(
            "measure",
            GridSpec {
                n: self.measure.n,
                dx: self.measure.dx,
            },
        );
        let mut positive = |name: &str, x: f64| {
            if !(x > 0.0) {
                v.push(format!("{name} must be positive (got {x})"));
            }
        };
        positive("constants.hbar", self.hbar);
        positive("constants.c", self.c);
        positive("masses.mA", self.masses.a);
        positive("masses.mB", self.masses.b);
        positive("masses.mC", self.masses.c);
        positive("masses.mM", self.masses.m);
        positive("state.sigma", self.state.sigma);
        positive("state.separation", self.state.separation);
        positive("evolution.dt", self.evolution.dt);
        positive("wep.sigma", self.wep.sigma);
        positive("wep.guard_band", self.wep.guard_band);
        positive("photon.omega_ref", self.photon.omega_ref);
        positive("photon.omega_b", self.photon.omega_b);
        positive("photon.sigma", self.photon.sigma);
        positive("measure.sigma", self.measure.sigma);
        if !(self.measure.spread > 0.0 && self.measure.spread < 1.0) {
            v.push(format!("measure.spread must lie in (0, 1) (got {})", self.measure.spread));
        }
        if self.evolution.t < 0.0 {
            v.push(format!("evolution.t must be nonnegative (got {})", self.evolution.t));
        }
        if self.samples == 0 || self.samples > 1000 {
            v.push(format!("run.samples must lie in 1..=1000 (got {})", self.samples));
        }
        v
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        writeln!(w, "[run]").unwrap();
        if let Some(name) = &self.scenario {
            writeln!(w, "scenario = {name}").unwrap();
        }
        writeln!(w, "seed = {}", self.seed).unwrap();
        if let Some(out) = &self.out {
            writeln!(w, "out = {out}").unwrap();
        }
        writeln!(w, "samples = {}", self.samples).unwrap();
        writeln!(w, "[grid]\nn = {}\ndx = {:?}", self.grid.n, self.grid.dx).unwrap();
        for (l, n) in &self.grid_n {
            writeln!(w, "{l}.n = {n}").unwrap();
        }
        for (l, dx) in &self.grid_dx {
            writeln!(w, "{l}.dx = {dx:?}").unwrap();
        }
        writeln!(w, "[constants]\nhbar = {:?}\nc = {:?}", self.hbar, self.c).unwrap();
        let m = &self.masses;
        writeln!(w, "[masses]\nmA = {:?}\nmB = {:?}\nmC = {:?}\nmM = {:?}", m.a, m.b, m.c, m.m).unwrap();
        let st = &self.state;
        writeln!(
            w,
            "[state]\nx0 = {:?}\nsigma = {:?}\nseparation = {:?}\nL = {:?}\nX = {:?}\np1 = {:?}\np2 = {:?}",
            st.x0, st.sigma, st.separation, st.l, st.x_offset, st.p1, st.p2
        )
        .unwrap();
        let e = &self.evolution;
        writeln!(w, "[evolution]\nt = {:?}\ndt = {:?}\ntau = {:?}", e.t, e.dt, e.tau).unwrap();
        let p = &self.potential;
        writeln!(
            w,
            "[potential]\nbreakpoint = {:?}\nslope_left = {:?}\nslope_right = {:?}\nslope = {:?}",
            p.breakpoint, p.slope_left, p.slope_right, p.slope
        )
        .unwrap();
        let wp = &self.wep;
        writeln!(w, "[wep]\ncenter = {:?}\nsigma = {:?}\nguard_band = {:?}", wp.center, wp.sigma, wp.guard_band).unwrap();
        let ph = &self.photon;
        writeln!(
            w,
            "[photon]\nn = {}\ndu = {:?}\nomega_ref = {:?}\nomega_b = {:?}\nsigma = {:?}",
            ph.n, ph.du, ph.omega_ref, ph.omega_b, ph.sigma
        )
        .unwrap();
        let me = &self.measure;
        writeln!(
            w,
            "[measure]\nn = {}\ndx = {:?}\nx0 = {:?}\nsigma = {:?}\nspread = {:?}",
            me.n, me.dx, me.x0, me.sigma, me.spread
        )
        .unwrap();
        s
    }

    pub fn measure_grid(&self) -> Grid1D {
        Grid1D::with_hbar(self.measure.n, self.measure.dx, self.hbar).expect("validated grid")
    }
}

/// Parses and validates configuration text. Missing keys take defaults.
pub fn validate_config(text: &str) -> Result<ScenarioConfig, LabError> {
    let mut cfg = ScenarioConfig::default();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| LabError::Parse { line: line_no, msg: "unterminated section header".into() })?
                .trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(LabError::Parse { line: line_no, msg: format!("bad section name `{name}`") });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| LabError::Parse { line: line_no, msg: format!("expected `key = value`, got `{line}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(LabError::Parse { line: line_no, msg: "empty key or value".into() });
        }
        let path = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        cfg.set(&path, value).map_err(|msg| LabError::Parse { line: line_no, msg })?;
    }
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(LabError::Invalid(v));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = validate_config("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.grid, GridSpec { n: 256, dx: 0.1 });
        assert_eq!((c.hbar, c.c, c.seed), (1.0, 137.0, 0));
    }

    #[test]
    fn odd_grid_is_rejected() {
        let e = validate_config("grid.A.n = 15").unwrap_err();
        assert!(e.to_string().contains("n must be even"), "{e}");
    }

    #[test]
    fn sections_prefix_keys() {
        let c = validate_config("[grid]\nA.n = 64\n[masses]\nmC = 1000.0\n").unwrap();
        assert_eq!(c.grid_spec("A").n, 64);
        assert_eq!(c.grid_spec("B").n, 256);
        assert_eq!(c.masses.c, 1000.0);
    }

    #[test]
    fn unknown_keys_name_the_line() {
        let e = validate_config("seed = 3\n\nmasses.mZ = 1\n").unwrap_err();
        assert_eq!(e, LabError::Parse { line: 3, msg: "unknown key `masses.mZ`".into() });
        let e = validate_config("[grid\n").unwrap_err();
        assert!(matches!(e, LabError::Parse { line: 1, .. }));
        let e = validate_config("n 5").unwrap_err();
        assert!(matches!(e, LabError::Parse { line: 1, .. }));
    }

    #[test]
    fn all_violations_are_listed() {
        let e = validate_config("[constants]\nhbar = -1\nc = 0\n").unwrap_err();
        match e {
            LabError::Invalid(v) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_text_round_trips() {
        let src = "[run]\nseed = 7\nscenario = wep\n[grid]\nB.dx = 0.05\n[state]\nx0 = -1.25\n[photon]\nsigma = 0.02\n";
        let c = validate_config(src).unwrap();
        assert_eq!(validate_config(&c.to_text()).unwrap(), c);
    }
}
