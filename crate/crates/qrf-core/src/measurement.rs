//! Pointer-model measurements, their frame transformation, and the Doppler
//! absorption channel.

use std::collections::BTreeMap;

use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{QrfError, Result};
use crate::grid::Grid1D;
use crate::kernel;
use crate::operators::{pair_phase, Family, QrfUnitary};
use crate::phase_space::{FrameChange, Masses, Op, PhaseSpaceMap, QuadObservable};
use crate::state::{coherent_state, tensor, AxisKind, Frame, Level, MultiState, Rep, Subsystem, Wave};

/// Ancilla whose position records the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointer {
    pub label: String,
    pub grid: Grid1D,
    /// `None` is the projective limit: a single-point spike at the origin.
    pub width: Option<f64>,
}

impl Pointer {
    pub fn spike(label: &str, grid: Grid1D) -> Self {
        Self {
            label: label.to_string(),
            grid,
            width: None,
        }
    }

    fn initial(&self) -> Result<MultiState> {
        let wave = match self.width {
            None => {
                let mut a = ndarray::Array1::<C64>::zeros(self.grid.n());
                a[self.grid.n() / 2] = C64::new(1.0 / self.grid.dx().sqrt(), 0.0);
                Wave::normalize(self.grid, a)?
            }
            Some(w) if w > 0.0 && w.is_finite() => coherent_state(self.grid, 0.0, 0.0, w)?,
            Some(_) => return Err(QrfError::NonNormalizablePointer),
        };
        wave.labeled(&self.label, 1.0)
    }
}

/// External degree of freedom of the apparatus.
#[derive(Debug, Clone, PartialEq)]
pub struct Apparatus {
    pub label: String,
    pub wave: Wave,
    pub mass: f64,
}

impl Apparatus {
    /// Gaussian at the nominal position `x0`.
    pub fn at(label: &str, grid: Grid1D, x0: f64, sigma: f64, mass: f64) -> Result<Self> {
        Ok(Self {
            label: label.to_string(),
            wave: coherent_state(grid, x0, 0.0, sigma)?,
            mass,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// The pointer channel evaluated once per distinct observable value.
    /// Branches with different values are orthogonal before the coupling, so
    /// this equals the explicit channel.
    #[default]
    Pointer,
    /// Entangle with the pointer on the full tensor and read its marginal.
    Explicit,
    /// Bin the observable's values directly; equal to the pointer in the
    /// projective limit whenever the values fall on the pointer lattice.
    Projective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    /// Linear in the canonical coordinates; each label may enter through its
    /// position or its momentum but not both.
    pub observable: QuadObservable,
    pub pointer: Pointer,
    pub apparatus: Option<Apparatus>,
    pub readout: Readout,
}

impl MeasurementModel {
    pub fn new(observable: QuadObservable, pointer: Pointer) -> Self {
        Self {
            observable,
            pointer,
            apparatus: None,
            readout: Readout::Pointer,
        }
    }

    pub fn with_apparatus(mut self, apparatus: Apparatus) -> Self {
        self.apparatus = Some(apparatus);
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }
}

/// Outcome probabilities per pointer bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub outcomes: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.probs.len() != other.probs.len() {
            return Err(QrfError::Dimension("distributions over different outcome grids".into()));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().zip(&self.probs).map(|(x, p)| x * p).sum::<f64>() / self.total()
    }

    /// Outcome with the largest probability.
    pub fn peak(&self) -> f64 {
        let k = self
            .probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.outcomes[k]
    }
}

/// Per-label representation and coefficient of a linear observable.
struct Diagonal {
    axes: Vec<(usize, Vec<f64>)>,
    constant: f64,
}

fn diagonalize(state: &mut MultiState, obs: &QuadObservable) -> Result<Diagonal> {
    if obs.quad().iter().any(|v| *v != 0.0) {
        return Err(QrfError::Unsupported("pointer coupling needs an observable linear in x and p".into()));
    }
    let mut axes = Vec::new();
    for (i, l) in obs.labels().iter().enumerate() {
        let (cx, cp) = (obs.lin()[2 * i], obs.lin()[2 * i + 1]);
        if cx != 0.0 && cp != 0.0 {
            return Err(QrfError::RepresentationMixing(format!("observable uses both x and p of `{l}`")));
        }
        if cx == 0.0 && cp == 0.0 {
            continue;
        }
        let (rep, coef) = if cx != 0.0 { (Rep::Position, cx) } else { (Rep::Momentum, cp) };
        let (grid, _) = state.continuous(l)?;
        state.set_rep_of(l, rep)?;
        let coords = match rep {
            Rep::Position => grid.positions(),
            Rep::Momentum => grid.momenta(),
        };
        axes.push((state.axis(l)?, coords.into_iter().map(|c| coef * c).collect()));
    }
    Ok(Diagonal {
        axes,
        constant: obs.constant(),
    })
}

impl Diagonal {
    fn value(&self, idx: &[usize]) -> f64 {
        self.constant + self.axes.iter().map(|(a, c)| c[idx[*a]]).sum::<f64>()
    }
}

fn attach_apparatus(state: &MultiState, model: &MeasurementModel) -> Result<MultiState> {
    match &model.apparatus {
        Some(m) if !state.labels().contains(&m.label.as_str()) => {
            let s = tensor(&[state, &m.wave.labeled(&m.label, m.mass)?])?;
            Ok(s.with_frame(&state.frame().label, state.frame().mass).with_time(state.time()))
        }
        _ => Ok(state.clone()),
    }
}

/// Outcome distribution of `model` on `state`. With the pointer readout the
/// channel `exp(-(i/hbar) O p_E)` is applied explicitly and the pointer's
/// position marginal is returned.
pub fn measure_via_pointer(state: &MultiState, model: &MeasurementModel) -> Result<Distribution> {
    let s = attach_apparatus(state, model)?;
    match model.readout {
        Readout::Pointer => grouped_pointer_distribution(&s, model),
        Readout::Explicit => pointer_distribution(&s, model),
        Readout::Projective => born_distribution(&s, &model.observable, &model.pointer.grid),
    }
}

fn pointer_distribution(state: &MultiState, model: &MeasurementModel) -> Result<Distribution> {
    let e = &model.pointer;
    if state.labels().contains(&e.label.as_str()) {
        return Err(QrfError::DuplicateLabel(e.label.clone()));
    }
    let mut s = tensor(&[state, &e.initial()?])?.with_frame(&state.frame().label, state.frame().mass);
    let diag = diagonalize(&mut s, &model.observable)?;
    s.set_rep_of(&e.label, Rep::Momentum)?;
    let ea = s.axis(&e.label)?;
    let pe = e.grid.momenta();
    let hbar = e.grid.hbar();
    let before = s.norm_sqr();
    kernel::for_each_lane(s.amps_mut(), ea, |idx, lane| {
        let v = diag.value(idx);
        for (a, &p) in lane.iter_mut().zip(&pe) {
            *a *= C64::from_polar(1.0, -v * p / hbar);
        }
    });
    let after = s.norm_sqr();
    if (after - before).abs() > 1e-10 {
        return Err(QrfError::UnitarityLoss((after - before).abs()));
    }
    let probs: Vec<f64> = s.position_marginal(&e.label)?.into_iter().map(|w| w * e.grid.dx()).collect();
    Ok(Distribution {
        outcomes: e.grid.positions(),
        probs,
    })
}

fn grouped_pointer_distribution(state: &MultiState, model: &MeasurementModel) -> Result<Distribution> {
    let e = &model.pointer;
    let mut s = state.clone();
    let diag = diagonalize(&mut s, &model.observable)?;
    let measure: f64 = s.subsystems().iter().zip(s.reps()).map(|(sub, r)| sub.kind.measure_in(*r)).product();
    let mut groups: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for (idx, a) in s.amps().indexed_iter() {
        let v = diag.value(idx.slice());
        let g = groups.entry((v / e.grid.dx() * 1e9).round() as i64).or_insert((v, 0.0));
        g.1 += a.norm_sqr() * measure;
    }
    let xi = e.initial()?.to_momentum_rep(&e.label)?;
    let pe = e.grid.momenta();
    let hbar = e.grid.hbar();
    let mut probs = vec![0.0; e.grid.n()];
    for (v, w) in groups.into_values() {
        if w == 0.0 {
            continue;
        }
        let mut moved = xi.clone();
        for (a, &p) in moved.amps_mut().iter_mut().zip(&pe) {
            *a *= C64::from_polar(1.0, -v * p / hbar);
        }
        for (acc, q) in probs.iter_mut().zip(moved.position_marginal(&e.label)?) {
            *acc += w * q * e.grid.dx();
        }
    }
    Ok(Distribution {
        outcomes: e.grid.positions(),
        probs,
    })
}

/// Born-rule distribution of a linear observable, binned onto `grid` with the
/// same cyclic convention as the pointer translation.
pub fn born_distribution(state: &MultiState, obs: &QuadObservable, grid: &Grid1D) -> Result<Distribution> {
    let mut s = state.clone();
    let diag = diagonalize(&mut s, obs)?;
    let measure: f64 = s
        .subsystems()
        .iter()
        .zip(s.reps())
        .map(|(sub, r)| sub.kind.measure_in(*r))
        .product();
    let n = grid.n() as i64;
    let mut probs = vec![0.0; grid.n()];
    for (idx, a) in s.amps().indexed_iter() {
        let k = (diag.value(idx.slice()) / grid.dx()).round() as i64 + n / 2;
        probs[k.rem_euclid(n) as usize] += a.norm_sqr() * measure;
    }
    Ok(Distribution {
        outcomes: grid.positions(),
        probs,
    })
}

/// The unitary with the apparatus added to its targets, so it is carried
/// along with the measured systems.
pub fn extend_with_apparatus(unitary: &QrfUnitary, model: &MeasurementModel) -> QrfUnitary {
    let mut u = unitary.clone();
    if let Some(m) = &model.apparatus {
        if !u.frames.targets.contains(&m.label) {
            u.frames.targets.push(m.label.clone());
        }
    }
    u
}

/// Model whose observable is the conjugated `S O S^dagger` under `map`.
pub fn conjugate_model(map: &PhaseSpaceMap, model: &MeasurementModel) -> Result<MeasurementModel> {
    let observable = map.conjugate_observable(&model.observable)?.trimmed();
    Ok(MeasurementModel {
        observable,
        ..model.clone()
    })
}

/// The same measurement described in the target frame of `unitary`. The
/// pointer is left untouched; the apparatus joins the frame change.
pub fn transform_measurement_model(
    unitary: &QrfUnitary,
    model: &MeasurementModel,
    masses: &Masses,
) -> Result<MeasurementModel> {
    let u = extend_with_apparatus(unitary, model);
    let mut masses = masses.clone();
    if let Some(m) = &model.apparatus {
        masses.insert(&m.label, m.mass)?;
    }
    let map = u
        .phase_space_map(&masses)
        .ok_or_else(|| QrfError::Unsupported(format!("{} has no linear phase-space map", u.name())))??;
    conjugate_model(&map, model)
}

/// `max_b |p_source(b) - p_target(b)|` for the model measured before and after
/// the frame change.
pub fn probability_invariance_residual(state: &MultiState, model: &MeasurementModel, unitary: &QrfUnitary) -> Result<f64> {
    let source = attach_apparatus(state, model)?;
    let p = measure_via_pointer(&source, model)?;
    let u = extend_with_apparatus(unitary, model);
    let target_model = transform_measurement_model(&u, model, &Masses::from_state(&source))?;
    let q = measure_via_pointer(&u.apply(&source)?, &target_model)?;
    p.max_abs_diff(&q)
}

/// Resonant two-level absorber and the photon mode it absorbs.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionModel {
    pub atom: String,
    pub photon: String,
    pub delta_e: f64,
    pub hbar: f64,
    /// Half-width of the resonance window in `u = ln(omega / omega_ref)`.
    pub half_width_u: f64,
}

impl AbsorptionModel {
    /// Window of one frequency bin around `delta_e / hbar`.
    pub fn one_bin(atom: &str, photon: &str, delta_e: f64, hbar: f64, photon_grid: &Grid1D) -> Self {
        Self {
            atom: atom.to_string(),
            photon: photon.to_string(),
            delta_e,
            hbar,
            half_width_u: photon_grid.dx() / 2.0,
        }
    }

    pub fn levels(&self) -> Vec<Level> {
        vec![Level::new("g", 0.0), Level::new("e", self.delta_e)]
    }

    pub fn resonance(&self) -> f64 {
        self.delta_e / self.hbar
    }
}

/// Which observer evaluates the absorption.
#[derive(Debug, Clone, PartialEq)]
pub enum AbsorptionFrame {
    /// The absorbing atom is the reference frame.
    Rest,
    /// The lab is the reference; `atom` is the atom's centre-of-mass axis.
    Lab { atom: String },
}

fn photon_axis(state: &MultiState, label: &str) -> Result<(Grid1D, f64, f64)> {
    match &state.subsystem(label)?.kind {
        AxisKind::Photon { grid, omega_ref, c } => Ok((*grid, *omega_ref, *c)),
        _ => Err(QrfError::InvalidParameter(format!("`{label}` is not a photon axis"))),
    }
}

/// Probability that the atom ends excited after the resonant channel
/// `|e><g| (x) |0><1,omega| + h.c.` acts on the window. In the lab the window
/// is Doppler dressed: each atom-momentum slice of the photon is dilated to
/// the atom's rest frequency `omega / (1 - p / (m c))` before the window is
/// applied.
pub fn absorption_probability(frame: &AbsorptionFrame, state: &MultiState, model: &AbsorptionModel) -> Result<f64> {
    let (grid, omega_ref, c) = photon_axis(state, &model.photon)?;
    let u0 = (model.resonance() / omega_ref).ln();
    let (lo, hi) = (u0 - model.half_width_u, u0 + model.half_width_u);
    if !(model.half_width_u > 0.0) || hi < grid.x(0) || lo > grid.x(grid.n() - 1) {
        return Err(QrfError::WindowOffGrid(format!(
            "window [{lo:.4}, {hi:.4}] in ln(omega/omega_ref) misses the photon grid"
        )));
    }
    let mut s = state.clone();
    if let AbsorptionFrame::Lab { atom } = frame {
        let (ga, m) = s.continuous(atom)?;
        for p in ga.momenta() {
            if 1.0 - p / (m * c) <= 0.0 {
                return Err(QrfError::Dilation(1.0 - p / (m * c)));
            }
        }
        let hk = grid.hbar();
        pair_phase(&mut s, atom, Rep::Momentum, &model.photon, Rep::Momentum, move |p, k| {
            let shift = -(1.0 - p / (m * c)).ln();
            -shift * k / hk
        })?;
    }
    let s = s.in_position();
    let pa = s.axis(&model.photon)?;
    let la = s.axis(&model.atom)?;
    let g = match &s.subsystems()[la].kind {
        AxisKind::Discrete { levels } => levels
            .iter()
            .position(|l| l.name == "g")
            .ok_or_else(|| QrfError::UnknownLabel("g".into()))?,
        _ => return Err(QrfError::InvalidParameter(format!("`{}` is not a level axis", model.atom))),
    };
    let measure: f64 = s.subsystems().iter().map(|sub| sub.kind.measure()).product();
    let inside: Vec<bool> = grid.positions().iter().map(|&u| u >= lo - 1e-12 && u <= hi + 1e-12).collect();
    Ok(s
        .amps()
        .indexed_iter()
        .filter(|(idx, _)| idx[la] == g && inside[idx[pa]])
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        * measure)
}

/// The first-order lab observable `(1 + p/(m c)) omega` with a sharp window,
/// evaluated without any photon interpolation.
pub fn first_order_lab_probability(state: &MultiState, atom: &str, model: &AbsorptionModel) -> Result<f64> {
    let (grid, omega_ref, c) = photon_axis(state, &model.photon)?;
    let (ga, m) = state.continuous(atom)?;
    let mut s = state.in_position();
    s.set_rep_of(atom, Rep::Momentum)?;
    let (aa, pa, la) = (s.axis(atom)?, s.axis(&model.photon)?, s.axis(&model.atom)?);
    let u0 = (model.resonance() / omega_ref).ln();
    let measure: f64 = s.subsystems().iter().zip(s.reps()).map(|(sub, r)| sub.kind.measure_in(*r)).product();
    let momenta = ga.momenta();
    Ok(s
        .amps()
        .indexed_iter()
        .filter(|(idx, _)| {
            let u = grid.x(idx[pa]) + (1.0 + momenta[idx[aa]] / (m * c)).ln();
            idx[la] == 0 && (u - u0).abs() <= model.half_width_u + 1e-12
        })
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        * measure)
}

/// Labels, grids and constants of the Doppler absorption setup.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerSetup {
    pub atom: String,
    pub atom_grid: Grid1D,
    pub atom_mass: f64,
    pub photon: String,
    pub photon_grid: Grid1D,
    pub omega_ref: f64,
    pub c: f64,
    /// Bare photon frequency, resonant in the atom's rest frame.
    pub omega_b: f64,
    /// Photon packet width in `u`.
    pub photon_sigma: f64,
    pub level: String,
    pub lab: String,
    pub lab_mass: f64,
}

impl DopplerSetup {
    pub fn model(&self) -> AbsorptionModel {
        AbsorptionModel {
            atom: self.level.clone(),
            photon: self.photon.clone(),
            delta_e: self.atom_grid.hbar() * self.omega_b,
            hbar: self.atom_grid.hbar(),
            half_width_u: 3.0 * self.photon_sigma,
        }
    }

    fn levels(&self) -> Vec<Level> {
        vec![Level::new("g", 0.0), Level::new("e", self.atom_grid.hbar() * self.omega_b)]
    }

    /// Photon amplitude on the u grid, a Gaussian centred at `omega`.
    fn photon_packet(&self, omega: f64) -> Result<Vec<C64>> {
        let g = self.photon_grid;
        let u = (omega / self.omega_ref).ln();
        if (u.abs() + 6.0 * self.photon_sigma) > g.half_width() {
            return Err(QrfError::SupportOverflow { mass: 1.0 });
        }
        let norm = (2.0 * std::f64::consts::PI * self.photon_sigma.powi(2)).powf(-0.25);
        Ok(g.positions()
            .into_iter()
            .map(|x| C64::new(norm * (-(x - u).powi(2) / (4.0 * self.photon_sigma.powi(2))).exp(), 0.0))
            .collect())
    }

    fn subsystems(&self, massive: &str, mass: f64) -> Vec<Subsystem> {
        vec![
            Subsystem::continuous(massive, self.atom_grid, mass),
            Subsystem::photon(&self.photon, self.photon_grid, self.omega_ref, self.c),
            Subsystem::discrete(&self.level, self.levels()),
        ]
    }

    /// The rest-frame product: lab wave, photon at the bare frequency, atom in
    /// its ground state.
    pub fn rest_product_state(&self, lab_wave: &Wave) -> Result<MultiState> {
        let packet = self.photon_packet(self.omega_b)?;
        let (n, np) = (self.atom_grid.n(), self.photon_grid.n());
        let mut amps = ArrayD::<C64>::zeros(IxDyn(&[n, np, 2]));
        for (i, a) in lab_wave.amps.iter().enumerate() {
            for (k, b) in packet.iter().enumerate() {
                amps[[i, k, 0]] = a * b;
            }
        }
        MultiState::normalized(
            self.subsystems(&self.lab, self.lab_mass),
            amps,
            Frame::new(&self.atom, self.atom_mass),
            0.0,
        )
    }

    /// Frame change from the lab (frame `lab`) to the atom's rest frame.
    pub fn to_rest(&self) -> FrameChange {
        FrameChange::new(&self.atom, &[self.photon.as_str()], &self.lab)
    }

    pub fn sd_inverse(&self, t: f64) -> QrfUnitary {
        QrfUnitary::new(Family::SDInverse { t }, self.to_rest())
    }
}

/// Lab-frame state that maximizes absorption: every atom momentum `p` is
/// paired with a photon Doppler shifted to `omega_b (1 - p/(m c))`, and the
/// atom carries its free phase `exp(-i p^2 t / (2 m hbar))`.
pub fn prepare_resonant_lab_state(setup: &DopplerSetup, psi_a: &Wave, t: f64) -> Result<MultiState> {
    let g = setup.atom_grid;
    if psi_a.grid != g {
        return Err(QrfError::Dimension("atom wave lives on a different grid".into()));
    }
    let (m, c, hbar) = (setup.atom_mass, setup.c, g.hbar());
    let mut spectrum = psi_a.labeled(&setup.atom, m)?;
    spectrum.set_rep_of(&setup.atom, Rep::Momentum)?;
    let phi = spectrum.amps().clone();
    let np = setup.photon_grid.n();
    let mut amps = ArrayD::<C64>::zeros(IxDyn(&[g.n(), np, 2]));
    let total: f64 = phi.iter().map(|v| v.norm_sqr()).sum();
    for (j, p) in g.momenta().into_iter().enumerate() {
        let a = phi[[j]];
        if a.norm_sqr() <= 1e-14 * total {
            continue;
        }
        let f = 1.0 - p / (m * c);
        if f <= 0.0 {
            return Err(QrfError::Dilation(f));
        }
        let packet = setup.photon_packet(setup.omega_b * f)?;
        let a = a * C64::from_polar(1.0, -p * p * t / (2.0 * m * hbar));
        for (k, b) in packet.iter().enumerate() {
            amps[[j, k, 0]] = a * b;
        }
    }
    let mut s = MultiState::from_raw(
        setup.subsystems(&setup.atom, m),
        amps,
        vec![Rep::Momentum, Rep::Position, Rep::Position],
        Frame::new(&setup.lab, setup.lab_mass),
        t,
    );
    s.make_position();
    let norm = s.norm();
    s.amps_mut().mapv_inplace(|v| v / norm);
    Ok(s)
}

/// Photon frequency at the marginal peak of the branch whose atom momenta lie
/// within `window` of `p`.
pub fn branch_photon_peak(state: &MultiState, atom: &str, photon: &str, p: f64, window: f64) -> Result<f64> {
    let (ga, _) = state.continuous(atom)?;
    let (grid, omega_ref, _) = photon_axis(state, photon)?;
    let mut s = state.in_position();
    s.set_rep_of(atom, Rep::Momentum)?;
    let (aa, pa) = (s.axis(atom)?, s.axis(photon)?);
    let momenta = ga.momenta();
    let mut w = vec![0.0; grid.n()];
    for (idx, a) in s.amps().indexed_iter() {
        if (momenta[idx[aa]] - p).abs() <= window {
            w[idx[pa]] += a.norm_sqr();
        }
    }
    let k = w
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    Ok(omega_ref * grid.x(k).exp())
}

/// Observable `x_label` for a measurement model.
pub fn position_observable(label: &str) -> QuadObservable {
    QuadObservable::of(&Op::X(label.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::map_sx;
    use crate::sample::{random_localized, random_state};
    use crate::state::{level_state, momentum_sharp_state, sharp_state, PhotonState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid1D {
        Grid1D::new(64, 0.25).unwrap()
    }

    #[test]
    fn sharp_input_gives_sharp_outcome() {
        let g = grid();
        let s = sharp_state(g, 1.5).unwrap().labeled("B", 1.0).unwrap();
        let m = MeasurementModel::new(position_observable("B"), Pointer::spike("E", g));
        let d = measure_via_pointer(&s, &m).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-10);
        assert!((d.peak() - 1.5).abs() < 1e-12);
        assert!(d.probs[g.index_of(1.5).unwrap()] > 1.0 - 1e-10);
    }

    #[test]
    fn equal_superposition_splits_evenly() {
        let g = grid();
        let a = sharp_state(g, -1.0).unwrap();
        let b = sharp_state(g, 2.0).unwrap();
        let w = Wave::superpose(&[(C64::new(1.0, 0.0), &a), (C64::new(1.0, 0.0), &b)]).unwrap();
        let s = w.labeled("B", 1.0).unwrap();
        let d = measure_via_pointer(&s, &MeasurementModel::new(position_observable("B"), Pointer::spike("E", g))).unwrap();
        assert!((d.probs[g.index_of(-1.0).unwrap()] - 0.5).abs() < 1e-8);
        assert!((d.probs[g.index_of(2.0).unwrap()] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn pointer_reproduces_born_marginal() {
        let g = grid();
        let subs = vec![Subsystem::continuous("A", g, 1.0), Subsystem::continuous("B", g, 2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = MeasurementModel::new(position_observable("B"), Pointer::spike("E", g));
        for _ in 0..20 {
            let s = random_state(&mut rng, &subs, &Frame::new("C", 1.0)).unwrap();
            let d = measure_via_pointer(&s, &m).unwrap();
            let born: Vec<f64> = s.position_marginal("B").unwrap().iter().map(|w| w * g.dx()).collect();
            let diff = d.probs.iter().zip(&born).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-8, "{diff}");
            let fast = measure_via_pointer(&s, &m.clone().with_readout(Readout::Projective)).unwrap();
            assert!(d.max_abs_diff(&fast).unwrap() < 1e-8);
            let full = measure_via_pointer(&s, &m.clone().with_readout(Readout::Explicit)).unwrap();
            assert!(d.max_abs_diff(&full).unwrap() < 1e-10);
        }
    }

    #[test]
    fn smeared_pointer_needs_positive_width() {
        let g = grid();
        let s = sharp_state(g, 0.0).unwrap().labeled("B", 1.0).unwrap();
        let mut p = Pointer::spike("E", g);
        p.width = Some(0.0);
        let r = measure_via_pointer(&s, &MeasurementModel::new(position_observable("B"), p));
        assert_eq!(r.unwrap_err(), QrfError::NonNormalizablePointer);
    }

    #[test]
    fn relative_position_in_new_frame() {
        let g = grid();
        let masses = Masses::new(&[("A", 1.0), ("B", 1.0), ("C", 1.0), ("M", 1.0)]).unwrap();
        let m = MeasurementModel::new(position_observable("B"), Pointer::spike("E", g));
        let u = QrfUnitary::new(Family::Sx, FrameChange::standard());
        let t = transform_measurement_model(&u, &m, &masses).unwrap();
        let want = QuadObservable::x("B").sub(&QuadObservable::x("C"));
        assert!(t.observable.approx_eq(&want, 1e-12), "{}", t.observable);
        let back = map_sx(&FrameChange::standard(), &masses).unwrap().inverse().unwrap();
        let q = back.conjugate_observable(&QuadObservable::x("B")).unwrap().trimmed();
        assert!(q.approx_eq(&QuadObservable::x("B").sub(&QuadObservable::x("A")), 1e-12), "{q}");
    }

    #[test]
    fn identity_map_leaves_model_unchanged() {
        let g = grid();
        let m = MeasurementModel::new(position_observable("B"), Pointer::spike("E", g));
        let same = conjugate_model(&PhaseSpaceMap::identity(&["A", "B"]), &m).unwrap();
        assert!(same.observable.approx_eq(&m.observable, 0.0));
    }

    #[test]
    fn sx_outcomes_are_frame_independent() {
        let g = grid();
        let subs = vec![Subsystem::continuous("A", g, 1.0), Subsystem::continuous("B", g, 1.0)];
        let m = MeasurementModel::new(position_observable("B"), Pointer::spike("E", g))
            .with_apparatus(Apparatus::at("M", g, 0.5, 0.8, 3.0).unwrap());
        let u = QrfUnitary::new(Family::Sx, FrameChange::standard());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let s = random_localized(&mut rng, &subs, &Frame::new("C", 1.0), 0.2).unwrap();
            let r = probability_invariance_residual(&s, &m, &u).unwrap();
            assert!(r < 1e-6, "{r}");
        }
    }

    fn setup() -> DopplerSetup {
        DopplerSetup {
            atom: "A".into(),
            atom_grid: Grid1D::new(64, 0.5).unwrap(),
            atom_mass: 1.0,
            photon: "B".into(),
            photon_grid: Grid1D::new(256, 0.005).unwrap(),
            omega_ref: 10.0,
            c: 20.0,
            omega_b: 10.0,
            photon_sigma: 0.015,
            level: "T".into(),
            lab: "C".into(),
            lab_mass: 50.0,
        }
    }

    #[test]
    fn rest_frame_resonance() {
        let s = setup();
        let model = AbsorptionModel::one_bin("T", "B", 10.0, 1.0, &s.photon_grid);
        let on = PhotonState::sharp(s.photon_grid, 10.0, 20.0, 10.0).unwrap().labeled("B").unwrap();
        let g = level_state("T", model.levels(), "g").unwrap();
        let p = absorption_probability(&AbsorptionFrame::Rest, &tensor(&[&on, &g]).unwrap(), &model).unwrap();
        assert!((p - 1.0).abs() < 1e-8);
        let k = s.photon_grid.index_of(20f64.ln() - 10f64.ln());
        let off_omega = 10.0 * s.photon_grid.x(k.unwrap_or(0)).exp();
        let off = PhotonState::sharp(s.photon_grid, 10.0, 20.0, off_omega).unwrap().labeled("B").unwrap();
        let p = absorption_probability(&AbsorptionFrame::Rest, &tensor(&[&off, &g]).unwrap(), &model).unwrap();
        assert!(p.abs() < 1e-12);
    }

    #[test]
    fn window_off_grid_is_an_error() {
        let s = setup();
        let mut model = AbsorptionModel::one_bin("T", "B", 1000.0, 1.0, &s.photon_grid);
        model.half_width_u = 0.01;
        let on = PhotonState::sharp(s.photon_grid, 10.0, 20.0, 10.0).unwrap().labeled("B").unwrap();
        let g = level_state("T", model.levels(), "g").unwrap();
        let r = absorption_probability(&AbsorptionFrame::Rest, &tensor(&[&on, &g]).unwrap(), &model);
        assert!(matches!(r, Err(QrfError::WindowOffGrid(_))));
    }

    fn two_momenta(s: &DopplerSetup, p1: f64, p2: f64) -> Wave {
        let a = momentum_sharp_state(s.atom_grid, p1).unwrap();
        let b = momentum_sharp_state(s.atom_grid, p2).unwrap();
        Wave::superpose(&[(C64::new(1.0, 0.0), &a), (C64::new(0.0, 1.0), &b)]).unwrap()
    }

    #[test]
    fn resonant_preparation_has_doppler_branches() {
        let s = setup();
        let dp = s.atom_grid.dp();
        let rest = prepare_resonant_lab_state(&s, &momentum_sharp_state(s.atom_grid, 0.0).unwrap(), 0.0).unwrap();
        let w = branch_photon_peak(&rest, "A", "B", 0.0, dp / 2.0).unwrap();
        assert!((w - s.omega_b).abs() < 1e-9);
        let (p1, p2) = (8.0 * dp, -6.0 * dp);
        let lab = prepare_resonant_lab_state(&s, &two_momenta(&s, p1, p2), 0.3).unwrap();
        for p in [p1, p2] {
            let w = branch_photon_peak(&lab, "A", "B", p, dp / 2.0).unwrap();
            let want = s.omega_b * (1.0 - p / (s.atom_mass * s.c));
            let bin = want * s.photon_grid.dx();
            assert!((w - want).abs() <= bin, "{w} vs {want}");
        }
    }

    #[test]
    fn lab_and_rest_absorption_agree() {
        let s = setup();
        let dp = s.atom_grid.dp();
        let model = s.model();
        let lab = prepare_resonant_lab_state(&s, &two_momenta(&s, 8.0 * dp, -6.0 * dp), 0.3).unwrap();
        let p_lab = absorption_probability(&AbsorptionFrame::Lab { atom: "A".into() }, &lab, &model).unwrap();
        let rest = s.sd_inverse(0.3).apply(&lab).unwrap();
        let p_rest = absorption_probability(&AbsorptionFrame::Rest, &rest, &model).unwrap();
        assert!((p_lab - p_rest).abs() < 1e-3, "{p_lab} {p_rest}");
        assert!(p_rest > 0.99);
        let naive = absorption_probability(&AbsorptionFrame::Rest, &lab, &model).unwrap();
        assert!(naive < 0.5, "{naive}");
    }
}
