//! Grid realizations of the frame-change unitaries.
//!
//! Every conditional factor is a phase `exp(i f(c, t))` that is diagonal once
//! the controlling and the target axis are put in suitable representations.
//! The phase is applied lane by lane along the target axis, with the control
//! coordinate read from the lane index, so all operators are exactly unitary.

use num_complex::Complex64 as C64;

use crate::dynamics::{evolve, HamiltonianSpec, Potential, Term};
use crate::error::{QrfError, Result};
use crate::kernel;
use crate::phase_space::{map_sb, map_sp, map_st, map_sv, map_sx, FrameChange, Masses, PhaseSpaceMap};
#[cfg(test)]
use crate::phase_space::QuadObservable;
use crate::state::{AxisKind, Frame, MultiState, Rep, Subsystem};

/// Slices whose probability falls below this are ignored by wraparound guards.
const GUARD_WEIGHT: f64 = 1e-12;

fn coords(kind: &AxisKind, rep: Rep) -> Result<Vec<f64>> {
    match (kind, rep) {
        (AxisKind::Continuous { grid, .. } | AxisKind::Photon { grid, .. }, Rep::Position) => Ok(grid.positions()),
        (AxisKind::Continuous { grid, .. } | AxisKind::Photon { grid, .. }, Rep::Momentum) => Ok(grid.momenta()),
        (AxisKind::Discrete { levels }, Rep::Position) => Ok(levels.iter().map(|l| l.energy).collect()),
        (AxisKind::Discrete { .. }, Rep::Momentum) => Err(QrfError::Unsupported("momentum of a discrete axis".into())),
    }
}

fn hbar_of(kind: &AxisKind) -> f64 {
    kind.grid().map(|g| g.hbar()).unwrap_or(1.0)
}

/// Multiplies by `exp(i f(coord))` along one axis in the given representation.
pub(crate) fn phase_axis(s: &mut MultiState, label: &str, rep: Rep, f: impl Fn(f64) -> f64 + Sync + Send) -> Result<()> {
    s.set_rep_of(label, rep)?;
    let axis = s.axis(label)?;
    let c = coords(&s.subsystems()[axis].kind, rep)?;
    let phases: Vec<C64> = c.iter().map(|&v| C64::from_polar(1.0, f(v))).collect();
    kernel::for_each_lane(s.amps_mut(), axis, |_, lane| {
        for (v, ph) in lane.iter_mut().zip(&phases) {
            *v *= ph;
        }
    });
    Ok(())
}

/// Multiplies by `exp(i f(c, t))` with `c` the coordinate of `control` and
/// `t` that of `target`.
pub(crate) fn pair_phase(
    s: &mut MultiState,
    control: &str,
    crep: Rep,
    target: &str,
    trep: Rep,
    f: impl Fn(f64, f64) -> f64 + Sync + Send,
) -> Result<()> {
    s.set_rep_of(control, crep)?;
    s.set_rep_of(target, trep)?;
    let ca = s.axis(control)?;
    let ta = s.axis(target)?;
    let cc = coords(&s.subsystems()[ca].kind, crep)?;
    let tc = coords(&s.subsystems()[ta].kind, trep)?;
    kernel::for_each_lane(s.amps_mut(), ta, |idx, lane| {
        let c = cc[idx[ca]];
        for (v, &t) in lane.iter_mut().zip(&tc) {
            *v *= C64::from_polar(1.0, f(c, t));
        }
    });
    Ok(())
}

/// Marginal probabilities of `label` in representation `rep`.
fn weights(s: &MultiState, label: &str, rep: Rep) -> Result<Vec<f64>> {
    let mut w = s.clone();
    w.set_rep_of(label, rep)?;
    let axis = w.axis(label)?;
    let m = w.subsystems()[axis].kind.measure_in(rep);
    Ok(w.marginal(label)?.into_iter().map(|d| d * m).collect())
}

/// Errors if a control slice carrying weight displaces the target by more
/// than `limit`.
fn guard(
    s: &MultiState,
    control: &str,
    crep: Rep,
    target: &str,
    limit: f64,
    displacement: impl Fn(f64) -> f64,
) -> Result<()> {
    let w = weights(s, control, crep)?;
    let c = coords(&s.subsystem(control)?.kind, crep)?;
    let worst = w
        .iter()
        .zip(&c)
        .filter(|(w, _)| **w > GUARD_WEIGHT)
        .map(|(_, &c)| displacement(c).abs())
        .fold(0.0f64, f64::max);
    if worst > limit * (1.0 + 1e-12) {
        return Err(QrfError::Wraparound {
            label: target.to_string(),
            displacement: worst,
            half_width: limit,
        });
    }
    Ok(())
}

fn target_limits(s: &MultiState, target: &str) -> Result<(f64, f64, f64)> {
    let (g, m) = s.continuous(target)?;
    Ok((g.half_width(), g.momentum_half_width(), m))
}

fn check_frame(s: &MultiState, fc: &FrameChange) -> Result<()> {
    if s.frame().label != fc.old_frame {
        return Err(QrfError::LabelMismatch(format!(
            "state is in frame `{}`, transformation expects `{}`",
            s.frame().label,
            fc.old_frame
        )));
    }
    s.continuous(&fc.new_frame)?;
    for b in &fc.targets {
        s.subsystem(b)?;
        if *b == fc.new_frame {
            return Err(QrfError::LabelMismatch("the new frame cannot be its own target".into()));
        }
    }
    if s.labels().contains(&fc.old_frame.as_str()) {
        return Err(QrfError::DuplicateLabel(fc.old_frame.clone()));
    }
    Ok(())
}

/// Exact parity on one axis, relabeled as `to` with the given kind.
fn parity_relabel(s: &mut MultiState, from: &str, to: Subsystem) -> Result<()> {
    s.make_position();
    let axis = s.axis(from)?;
    if to.label != from && s.labels().contains(&to.label.as_str()) {
        return Err(QrfError::DuplicateLabel(to.label));
    }
    let n = s.amps().shape()[axis];
    kernel::permute_axis(s.amps_mut(), axis, move |k| (n - k) % n);
    s.subsystems_mut()[axis] = to;
    Ok(())
}

/// `psi_to(x) = psi_from(-x)` on grid points.
pub fn apply_parity_swap(state: &MultiState, from: &str, to: &str) -> Result<MultiState> {
    let mut s = state.in_position();
    let (grid, mass) = s.continuous(from)?;
    parity_relabel(&mut s, from, Subsystem::continuous(to, grid, mass))?;
    Ok(s)
}

/// Parity with a mass-ratio dilation: positions scale by `-m_from/m_to` and
/// momenta by `-m_to/m_from`, so velocities flip sign and keep magnitude.
pub fn apply_velocity_parity(state: &MultiState, from: &str, to: &str, m_from: f64, m_to: f64) -> Result<MultiState> {
    if !(m_from > 0.0 && m_to > 0.0) {
        return Err(QrfError::InvalidParameter("velocity parity needs positive masses".into()));
    }
    let s = state.rescale_axis(from, m_from / m_to)?;
    let mut s = s;
    let (grid, _) = s.continuous(from)?;
    parity_relabel(&mut s, from, Subsystem::continuous(to, grid, m_to))?;
    Ok(s)
}

/// Turns the new-frame axis into the old frame by plain parity.
fn parity_to_old_frame(s: &mut MultiState, fc: &FrameChange) -> Result<()> {
    let (grid, ma) = s.continuous(&fc.new_frame)?;
    let mc = s.frame().mass;
    parity_relabel(s, &fc.new_frame, Subsystem::continuous(&fc.old_frame, grid, mc))?;
    s.set_frame(Frame::new(&fc.new_frame, ma));
    Ok(())
}

/// Turns the new-frame axis into the old frame by velocity parity.
fn velocity_parity_to_old_frame(s: &mut MultiState, fc: &FrameChange) -> Result<()> {
    let (_, ma) = s.continuous(&fc.new_frame)?;
    let mc = s.frame().mass;
    let mut r = apply_velocity_parity(s, &fc.new_frame, &fc.old_frame, ma, mc)?;
    r.set_frame(Frame::new(&fc.new_frame, ma));
    *s = r;
    Ok(())
}

/// Controlled translation `exp(i x_a p_b / hbar)` for every target.
fn controlled_translation(s: &mut MultiState, a: &str, targets: &[String]) -> Result<()> {
    for b in targets {
        let (half, _, _) = target_limits(s, b)?;
        guard(s, a, Rep::Position, b, half, |x| x)?;
        let hbar = hbar_of(&s.subsystem(b)?.kind);
        pair_phase(s, a, Rep::Position, b, Rep::Momentum, move |x, p| x * p / hbar)?;
    }
    Ok(())
}

/// Relative-position frame change `P exp(i x_a p_b / hbar)`.
pub fn apply_sx(state: &MultiState, fc: &FrameChange) -> Result<MultiState> {
    check_frame(state, fc)?;
    let mut s = state.in_position();
    controlled_translation(&mut s, &fc.new_frame, &fc.targets)?;
    parity_to_old_frame(&mut s, fc)?;
    s.make_position();
    Ok(s)
}

/// Relative-momentum frame change `P exp(-i p_a x_b / hbar)`.
pub fn apply_sp(state: &MultiState, fc: &FrameChange) -> Result<MultiState> {
    check_frame(state, fc)?;
    let mut s = state.in_position();
    let a = fc.new_frame.as_str();
    for b in &fc.targets {
        let (_, phalf, _) = target_limits(&s, b)?;
        guard(&s, a, Rep::Momentum, b, phalf, |p| p)?;
        let hbar = hbar_of(&s.subsystem(b)?.kind);
        pair_phase(&mut s, a, Rep::Momentum, b, Rep::Position, move |p, x| -p * x / hbar)?;
    }
    parity_to_old_frame(&mut s, fc)?;
    s.make_position();
    Ok(s)
}

/// Time-dependent translation with elapsed time `t - tau`.
pub fn apply_st(state: &MultiState, fc: &FrameChange, t: f64, tau: f64) -> Result<MultiState> {
    check_frame(state, fc)?;
    let mut s = state.in_position();
    let a = fc.new_frame.as_str();
    let el = t - tau;
    let (ga, ma) = s.continuous(a)?;
    let mc = s.frame().mass;
    let hbar = ga.hbar();
    phase_axis(&mut s, a, Rep::Momentum, move |p| p * p * el / (2.0 * ma * hbar))?;
    s.make_position();
    controlled_translation(&mut s, a, &fc.targets)?;
    parity_to_old_frame(&mut s, fc)?;
    phase_axis(&mut s, &fc.old_frame, Rep::Momentum, move |p| -p * p * el / (2.0 * mc * hbar))?;
    s.make_position();
    Ok(s)
}

/// Conditional Galilean boost `exp(i (p_a/m_a) G_b / hbar)` with
/// `G_b = t p_b - m_b x_b`, factorized per control slice as
/// `exp(i v t p_b) exp(-i v m_b x_b) exp(i v^2 t m_b / 2)` (units of hbar).
fn conditional_boost(s: &mut MultiState, a: &str, ma: f64, targets: &[String], t: f64) -> Result<()> {
    for b in targets {
        let (half, phalf, mb) = target_limits(s, b)?;
        let hbar = hbar_of(&s.subsystem(b)?.kind);
        guard(s, a, Rep::Momentum, b, half, |p| p / ma * t)?;
        guard(s, a, Rep::Momentum, b, phalf, |p| p / ma * mb)?;
        phase_axis(s, a, Rep::Momentum, move |p| {
            let v = p / ma;
            BCH_SIGN * v * v * t * mb / (2.0 * hbar)
        })?;
        pair_phase(s, a, Rep::Momentum, b, Rep::Position, move |p, x| -(p / ma) * mb * x / hbar)?;
        pair_phase(s, a, Rep::Momentum, b, Rep::Momentum, move |p, pb| (p / ma) * t * pb / hbar)?;
    }
    Ok(())
}

/// Sign of the scalar phase in the boost factorization, fixed by comparing
/// against the exponential of the generator on the dense oracle.
pub const BCH_SIGN: f64 = 1.0;

/// Boost between frames at time `t`.
pub fn apply_sb(state: &MultiState, fc: &FrameChange, t: f64) -> Result<MultiState> {
    check_frame(state, fc)?;
    let mut s = state.in_position();
    let a = fc.new_frame.as_str();
    let (ga, ma) = s.continuous(a)?;
    let mc = s.frame().mass;
    let hbar = ga.hbar();
    phase_axis(&mut s, a, Rep::Momentum, move |p| p * p * t / (2.0 * ma * hbar))?;
    conditional_boost(&mut s, a, ma, &fc.targets, t)?;
    velocity_parity_to_old_frame(&mut s, fc)?;
    phase_axis(&mut s, &fc.old_frame, Rep::Momentum, move |p| -p * p * t / (2.0 * mc * hbar))?;
    s.make_position();
    Ok(s)
}

/// Instantaneous change to relative velocities.
pub fn apply_sv(state: &MultiState, fc: &FrameChange) -> Result<MultiState> {
    apply_sb(state, fc, 0.0)
}

/// Parameters of the equivalence-principle frame change.
#[derive(Debug, Clone, PartialEq)]
pub struct SepParams {
    pub t: f64,
    pub potential: Potential,
    /// Split-step size for the two free-plus-potential propagators.
    pub dt: f64,
    /// Half-width of the band around each breakpoint that must be empty.
    pub guard_band: f64,
}

/// Largest probability found within `band` of a breakpoint along `label`.
pub fn breakpoint_mass(state: &MultiState, label: &str, potential: &Potential, band: f64) -> Result<f64> {
    let (g, _) = state.continuous(label)?;
    let w = weights(state, label, Rep::Position)?;
    Ok(w.iter()
        .enumerate()
        .filter(|(k, _)| potential.breakpoints().iter().any(|b| (g.x(*k) - b).abs() <= band))
        .map(|(_, w)| w)
        .sum())
}

/// Equivalence-principle frame change for a piecewise-linear potential on
/// the new frame's axis.
pub fn apply_sep(state: &MultiState, fc: &FrameChange, params: &SepParams) -> Result<MultiState> {
    check_frame(state, fc)?;
    if !params.potential.is_piecewise_linear() {
        return Err(QrfError::Unsupported(
            "apply_sep needs a piecewise-linear potential; use the Trotter path for general ones".into(),
        ));
    }
    let a = fc.new_frame.as_str();
    let (ga, ma) = state.continuous(a)?;
    let mc = state.frame().mass;
    let t = params.t;
    let back = HamiltonianSpec::new(vec![
        Term::kinetic(a, ma),
        Term::Potential {
            label: a.to_string(),
            v: params.potential.clone(),
            coeff: 1.0,
            arg_scale: 1.0,
        },
    ]);
    let s0 = evolve(state, &back, -t, params.dt)?;
    let mass = breakpoint_mass(&s0, a, &params.potential, params.guard_band)?;
    if mass > 1e-6 {
        return Err(QrfError::Delocalized { mass });
    }
    let mut total: Option<MultiState> = None;
    for (lo, hi, slope) in params.potential.regions() {
        let mut part = s0.in_position();
        let axis = part.axis(a)?;
        kernel::for_each_lane(part.amps_mut(), axis, |_, lane| {
            for (k, v) in lane.iter_mut().enumerate() {
                let x = ga.x(k);
                let inside = (x > lo || lo == f64::NEG_INFINITY) && x <= hi;
                if !inside {
                    *v = C64::new(0.0, 0.0);
                }
            }
        });
        if part.norm_sqr() < 1e-30 {
            continue;
        }
        apply_q(&mut part, a, ma, &fc.targets, t, slope)?;
        part.make_position();
        total = Some(match total {
            None => part,
            Some(mut acc) => {
                acc.amps_mut().zip_mut_with(part.amps(), |x, y| *x += *y);
                acc
            }
        });
    }
    let mut s = total.ok_or_else(|| QrfError::NotNormalized(0.0))?;
    velocity_parity_to_old_frame(&mut s, fc)?;
    let c = fc.old_frame.as_str();
    let fwd = HamiltonianSpec::new(vec![
        Term::kinetic(c, mc),
        Term::Potential {
            label: c.to_string(),
            v: params.potential.clone(),
            coeff: 1.0,
            arg_scale: -mc / ma,
        },
    ]);
    let out = evolve(&s, &fwd, t, params.dt)?;
    Ok(out.with_time(state.time()))
}

/// Accelerated-frame operator for one constant-slope region:
/// `exp(-i (m_b/m_a)(p_a - s t) x_b) exp(i (p_a t - s t^2/2) p_b / m_a)
///  exp(-i (m_b / 2 m_a^2) int_0^t (p_a - s u)^2 du)`, rightmost first.
pub(crate) fn apply_q(s: &mut MultiState, a: &str, ma: f64, targets: &[String], t: f64, slope: f64) -> Result<()> {
    for b in targets {
        let (half, phalf, mb) = target_limits(s, b)?;
        let hbar = hbar_of(&s.subsystem(b)?.kind);
        guard(s, a, Rep::Momentum, b, half, |p| (p * t - 0.5 * slope * t * t) / ma)?;
        guard(s, a, Rep::Momentum, b, phalf, |p| mb / ma * (p - slope * t))?;
        phase_axis(s, a, Rep::Momentum, move |p| {
            let integral = p * p * t - p * slope * t * t + slope * slope * t * t * t / 3.0;
            -mb / (2.0 * ma * ma) * integral / hbar
        })?;
        pair_phase(s, a, Rep::Momentum, b, Rep::Momentum, move |p, pb| {
            (p * t - 0.5 * slope * t * t) * pb / (ma * hbar)
        })?;
        pair_phase(s, a, Rep::Momentum, b, Rep::Position, move |p, xb| {
            -mb / ma * (p - slope * t) * xb / hbar
        })?;
    }
    Ok(())
}

fn photon_target(s: &MultiState, fc: &FrameChange) -> Result<(String, f64)> {
    let b = fc
        .targets
        .first()
        .ok_or_else(|| QrfError::InvalidParameter("the Doppler transformation needs a photon target".into()))?;
    match &s.subsystem(b)?.kind {
        AxisKind::Photon { c, .. } => Ok((b.clone(), *c)),
        _ => Err(QrfError::InvalidParameter(format!("`{b}` is not a photon axis"))),
    }
}

/// Doppler factors `f = 1 + pi / (c m)` over a momentum grid; errors unless
/// `|pi / (c m)| < 1/2` everywhere.
fn doppler_factors(momenta: &[f64], c: f64, m: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(momenta.len());
    for &p in momenta {
        let r = p / (c * m);
        let f = 1.0 + r;
        if f <= 0.0 {
            return Err(QrfError::Dilation(f));
        }
        if r.abs() >= 0.5 {
            return Err(QrfError::InvalidParameter(format!(
                "|pi/(c m)| = {} must stay below 1/2 on the grid",
                r.abs()
            )));
        }
        out.push(f);
    }
    Ok(out)
}

/// Per-slice photon dilation `omega -> f(pi_lab) omega`, which on the log
/// frequency axis is the translation `u -> u + ln f`. `sign = -1` inverts it.
fn conditional_dilation(s: &mut MultiState, lab: &str, photon: &str, c: f64, sign: f64) -> Result<()> {
    let (g, m) = s.continuous(lab)?;
    let f = doppler_factors(&g.momenta(), c, m)?;
    let before = s.norm_sqr();
    s.set_rep_of(lab, Rep::Momentum)?;
    s.set_rep_of(photon, Rep::Momentum)?;
    let la = s.axis(lab)?;
    let pa = s.axis(photon)?;
    let k = coords(&s.subsystems()[pa].kind, Rep::Momentum)?;
    let hk = hbar_of(&s.subsystems()[pa].kind);
    kernel::for_each_lane(s.amps_mut(), pa, |idx, lane| {
        let shift = sign * f[idx[la]].ln() / hk;
        for (v, &kk) in lane.iter_mut().zip(&k) {
            *v *= C64::from_polar(1.0, -shift * kk);
        }
    });
    let loss = (s.norm_sqr() - before).abs();
    if loss > 1e-3 {
        return Err(QrfError::UnitarityLoss(loss));
    }
    Ok(())
}

/// Doppler frame change from the atom's rest frame to the lab: the state is
/// in frame `old_frame` (the atom) with the lab as axis `new_frame` and the
/// photon as the first target.
pub fn apply_sd(state: &MultiState, fc: &FrameChange, t: f64) -> Result<MultiState> {
    check_frame(state, fc)?;
    let mut s = state.in_position();
    let lab = fc.new_frame.as_str();
    let (photon, c) = photon_target(&s, fc)?;
    let (gl, ml) = s.continuous(lab)?;
    let m_atom = s.frame().mass;
    let hbar = gl.hbar();
    phase_axis(&mut s, lab, Rep::Momentum, move |p| p * p * t / (2.0 * ml * hbar))?;
    conditional_dilation(&mut s, lab, &photon, c, 1.0)?;
    velocity_parity_to_old_frame(&mut s, fc)?;
    phase_axis(&mut s, &fc.old_frame, Rep::Momentum, move |p| -p * p * t / (2.0 * m_atom * hbar))?;
    s.make_position();
    Ok(s)
}

/// Inverse Doppler frame change, from the lab (frame `old_frame`) to the
/// rest frame of the atom (axis `new_frame`).
pub fn apply_sd_inverse(state: &MultiState, fc: &FrameChange, t: f64) -> Result<MultiState> {
    check_frame(state, fc)?;
    let mut s = state.in_position();
    let atom = fc.new_frame.as_str();
    let (photon, c) = photon_target(&s, fc)?;
    let (ga, m_atom) = s.continuous(atom)?;
    let ml = s.frame().mass;
    let hbar = ga.hbar();
    phase_axis(&mut s, atom, Rep::Momentum, move |p| p * p * t / (2.0 * m_atom * hbar))?;
    velocity_parity_to_old_frame(&mut s, fc)?;
    let lab = fc.old_frame.as_str();
    conditional_dilation(&mut s, lab, &photon, c, -1.0)?;
    phase_axis(&mut s, lab, Rep::Momentum, move |p| -p * p * t / (2.0 * ml * hbar))?;
    s.make_position();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Sx,
    Sp,
    ST { t: f64, tau: f64 },
    Sb { t: f64 },
    Sv,
    SEP(SepParams),
    SD { t: f64 },
    SDInverse { t: f64 },
}

/// A frame change together with the labels it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct QrfUnitary {
    pub family: Family,
    pub frames: FrameChange,
}

impl QrfUnitary {
    pub fn new(family: Family, frames: FrameChange) -> Self {
        Self { family, frames }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Sx => "Sx",
            Family::Sp => "Sp",
            Family::ST { .. } => "ST",
            Family::Sb { .. } => "Sb",
            Family::Sv => "Sv",
            Family::SEP(_) => "SEP",
            Family::SD { .. } => "SD",
            Family::SDInverse { .. } => "SD^-1",
        }
    }

    pub fn source_frame(&self) -> &str {
        &self.frames.old_frame
    }

    pub fn target_frame(&self) -> &str {
        &self.frames.new_frame
    }

    pub fn apply(&self, state: &MultiState) -> Result<MultiState> {
        let fc = &self.frames;
        match &self.family {
            Family::Sx => apply_sx(state, fc),
            Family::Sp => apply_sp(state, fc),
            Family::ST { t, tau } => apply_st(state, fc, *t, *tau),
            Family::Sb { t } => apply_sb(state, fc, *t),
            Family::Sv => apply_sv(state, fc),
            Family::SEP(p) => apply_sep(state, fc, p),
            Family::SD { t } => apply_sd(state, fc, *t),
            Family::SDInverse { t } => apply_sd_inverse(state, fc, *t),
        }
    }

    /// The same family evaluated at coordinate time `t`.
    pub fn at_time(&self, t: f64) -> Self {
        let family = match &self.family {
            Family::ST { tau, .. } => Family::ST { t, tau: *tau },
            Family::Sb { .. } => Family::Sb { t },
            Family::SEP(p) => Family::SEP(SepParams { t, ..p.clone() }),
            Family::SD { .. } => Family::SD { t },
            Family::SDInverse { .. } => Family::SDInverse { t },
            f => f.clone(),
        };
        Self {
            family,
            frames: self.frames.clone(),
        }
    }

    /// Linear phase-space shadow, where one exists.
    pub fn phase_space_map(&self, masses: &Masses) -> Option<Result<PhaseSpaceMap>> {
        let fc = &self.frames;
        match &self.family {
            Family::Sx => Some(map_sx(fc, masses)),
            Family::Sp => Some(map_sp(fc, masses)),
            Family::ST { t, tau } => Some(map_st(fc, *t, *tau, masses)),
            Family::Sb { t } => Some(map_sb(fc, *t, masses)),
            Family::Sv => Some(map_sv(fc, masses)),
            _ => None,
        }
    }
}

/// Extended Galilean operators acting on a single particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classical {
    /// `exp(i X0 p / hbar)`
    Translation { x0: f64 },
    /// `exp(i v G / hbar)`, `G = t p - m x`
    Boost { v: f64, t: f64 },
    /// Frame with trajectory `X(t) = a t^2 / 2`.
    Acceleration { a: f64, t: f64 },
}

pub fn classical_oracle(kind: Classical, state: &MultiState) -> Result<MultiState> {
    if state.subsystems().len() != 1 {
        return Err(QrfError::InvalidParameter("classical operators act on one subsystem".into()));
    }
    let label = state.subsystems()[0].label.clone();
    let (g, m) = state.continuous(&label)?;
    let hbar = g.hbar();
    let mut s = state.in_position();
    let translate = |s: &mut MultiState, d: f64| phase_axis(s, &label, Rep::Momentum, move |p| d * p / hbar);
    let kick = |s: &mut MultiState, k: f64| phase_axis(s, &label, Rep::Position, move |x| k * x / hbar);
    let scalar = |s: &mut MultiState, phi: f64| {
        let z = C64::from_polar(1.0, phi);
        s.amps_mut().mapv_inplace(|v| v * z);
    };
    match kind {
        Classical::Translation { x0 } => translate(&mut s, x0)?,
        Classical::Boost { v, t } => {
            scalar(&mut s, BCH_SIGN * v * v * t * m / (2.0 * hbar));
            kick(&mut s, -v * m)?;
            translate(&mut s, v * t)?;
        }
        Classical::Acceleration { a, t } => {
            let x = 0.5 * a * t * t;
            let xdot = a * t;
            scalar(&mut s, -0.5 * m * a * a * t * t * t / 3.0 / hbar);
            translate(&mut s, x)?;
            kick(&mut s, -m * xdot)?;
        }
    }
    s.make_position();
    Ok(s)
}
