//! Hamiltonians, split-step evolution and Hamiltonian transformation between
//! frames.

use std::fmt;

use ndarray::ArrayD;
use num_complex::Complex64 as C64;

use crate::error::{QrfError, Result};
use crate::operators::{Family, QrfUnitary};
use crate::phase_space::{Masses, QuadObservable};
use crate::state::{AxisKind, MultiState, Rep, Wave};

/// One-dimensional real potential.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// Continuous, with `slopes[r]` on `(breakpoints[r-1], breakpoints[r]]`
    /// and `V(0) = offset`.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        offset: f64,
    },
    /// `sum_k c_k x^k`
    Polynomial(Vec<f64>),
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Polynomial(vec![])
    }

    pub fn linear(slope: f64) -> Self {
        Potential::PiecewiseLinear {
            breakpoints: vec![],
            slopes: vec![slope],
            offset: 0.0,
        }
    }

    pub fn piecewise_linear(breakpoints: Vec<f64>, slopes: Vec<f64>, offset: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(QrfError::InvalidParameter(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) || breakpoints.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return Err(QrfError::InvalidParameter("breakpoints must be finite and increasing".into()));
        }
        Ok(Potential::PiecewiseLinear {
            breakpoints,
            slopes,
            offset,
        })
    }

    pub fn is_piecewise_linear(&self) -> bool {
        match self {
            Potential::PiecewiseLinear { .. } => true,
            Potential::Polynomial(c) => c.iter().skip(2).all(|v| *v == 0.0),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Potential::PiecewiseLinear { breakpoints, .. } => breakpoints,
            Potential::Polynomial(_) => &[],
        }
    }

    /// `(lo, hi, slope)` for every constant-slope region. Empty for curved
    /// polynomials.
    pub fn regions(&self) -> Vec<(f64, f64, f64)> {
        match self {
            Potential::PiecewiseLinear { breakpoints, slopes, .. } => {
                let mut edges = vec![f64::NEG_INFINITY];
                edges.extend(breakpoints);
                edges.push(f64::INFINITY);
                edges.windows(2).zip(slopes).map(|(w, s)| (w[0], w[1], *s)).collect()
            }
            Potential::Polynomial(c) if self.is_piecewise_linear() => {
                vec![(f64::NEG_INFINITY, f64::INFINITY, c.get(1).copied().unwrap_or(0.0))]
            }
            Potential::Polynomial(_) => vec![],
        }
    }

    /// Index of the region containing `x`; a breakpoint belongs to its left.
    fn region_of(breakpoints: &[f64], x: f64) -> usize {
        breakpoints.iter().take_while(|b| x > **b).count()
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::PiecewiseLinear {
                breakpoints,
                slopes,
                offset,
            } => {
                let r0 = Self::region_of(breakpoints, 0.0);
                let r = Self::region_of(breakpoints, x);
                let mut v = *offset;
                let mut pos = 0.0;
                if r >= r0 {
                    for k in r0..r {
                        v += slopes[k] * (breakpoints[k] - pos);
                        pos = breakpoints[k];
                    }
                } else {
                    for k in (r + 1..=r0).rev() {
                        v += slopes[k] * (breakpoints[k - 1] - pos);
                        pos = breakpoints[k - 1];
                    }
                }
                v + slopes[r] * (x - pos)
            }
            Potential::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ck| acc * x + ck),
        }
    }

    /// `dV/dx`, using the left slope at breakpoints.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::PiecewiseLinear { breakpoints, slopes, .. } => slopes[Self::region_of(breakpoints, x)],
            Potential::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, ck)| acc * x + k as f64 * ck),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Potential::PiecewiseLinear { .. } => 0.0,
            Potential::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, ck)| acc * x + (k * (k - 1)) as f64 * ck),
        }
    }

    /// The derivative as a potential in its own right.
    pub fn derivative_potential(&self) -> Potential {
        match self {
            Potential::PiecewiseLinear { slopes, .. } if slopes.iter().all(|s| *s == slopes[0]) => {
                Potential::Polynomial(vec![slopes[0]])
            }
            Potential::PiecewiseLinear { .. } => Potential::Polynomial(vec![]),
            Potential::Polynomial(c) => {
                Potential::Polynomial(c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect())
            }
        }
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let close = |a: &[f64], b: &[f64]| {
            let n = a.len().max(b.len());
            (0..n).all(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs() <= tol)
        };
        match (self, other) {
            (
                Potential::PiecewiseLinear {
                    breakpoints: b1,
                    slopes: s1,
                    offset: o1,
                },
                Potential::PiecewiseLinear {
                    breakpoints: b2,
                    slopes: s2,
                    offset: o2,
                },
            ) => b1.len() == b2.len() && close(b1, b2) && close(s1, s2) && (o1 - o2).abs() <= tol,
            (Potential::Polynomial(a), Potential::Polynomial(b)) => close(a, b),
            _ => false,
        }
    }
}

/// A Hamiltonian term. Every term is diagonal in either the position or the
/// momentum representation of the axes it touches.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `p^2 / 2m`
    Kinetic { label: String, mass: f64 },
    /// Quadratic form in positions and momenta with no position-momentum
    /// cross terms.
    Quadratic(QuadObservable),
    /// `coeff * V(arg_scale * x_label)`
    Potential {
        label: String,
        v: Potential,
        coeff: f64,
        arg_scale: f64,
    },
    /// `coeff * V'(arg_scale * x_field) * x_linear`
    Coupling {
        field: String,
        v: Potential,
        coeff: f64,
        arg_scale: f64,
        linear: String,
    },
    /// `hbar * omega` on a photon axis.
    PhotonEnergy { label: String },
    /// Level energies on a discrete axis.
    LevelEnergies { label: String },
}

impl Term {
    pub fn kinetic(label: &str, mass: f64) -> Self {
        Term::Kinetic {
            label: label.to_string(),
            mass,
        }
    }

    /// The term as a quadratic form, if it is one.
    pub fn as_quadratic(&self) -> Option<QuadObservable> {
        match self {
            Term::Kinetic { label, mass } => Some(QuadObservable::kinetic(label, *mass)),
            Term::Quadratic(q) => Some(q.clone()),
            _ => None,
        }
    }

    pub fn potential(label: &str, v: Potential) -> Self {
        Term::Potential {
            label: label.to_string(),
            v,
            coeff: 1.0,
            arg_scale: 1.0,
        }
    }

    fn relabel(&self, f: &impl Fn(&str) -> String) -> Self {
        match self {
            Term::Quadratic(q) => {
                let mut out = q.clone();
                let labels: Vec<String> = q.labels().to_vec();
                let tmp: Vec<String> = labels.iter().map(|l| format!("\u{1}{l}")).collect();
                for (l, t) in labels.iter().zip(&tmp) {
                    out = out.rename(l, t);
                }
                for (l, t) in labels.iter().zip(&tmp) {
                    out = out.rename(t, &f(l));
                }
                Term::Quadratic(out)
            }
            Term::Potential {
                label,
                v,
                coeff,
                arg_scale,
            } => Term::Potential {
                label: f(label),
                v: v.clone(),
                coeff: *coeff,
                arg_scale: *arg_scale,
            },
            Term::Coupling {
                field,
                v,
                coeff,
                arg_scale,
                linear,
            } => Term::Coupling {
                field: f(field),
                v: v.clone(),
                coeff: *coeff,
                arg_scale: *arg_scale,
                linear: f(linear),
            },
            Term::Kinetic { label, mass } => Term::Kinetic {
                label: f(label),
                mass: *mass,
            },
            Term::PhotonEnergy { label } => Term::PhotonEnergy { label: f(label) },
            Term::LevelEnergies { label } => Term::LevelEnergies { label: f(label) },
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Term::Quadratic(q) => q.labels().to_vec(),
            Term::Kinetic { label, .. }
            | Term::Potential { label, .. }
            | Term::PhotonEnergy { label }
            | Term::LevelEnergies { label } => {
                vec![label.clone()]
            }
            Term::Coupling { field, linear, .. } => vec![field.clone(), linear.clone()],
        }
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (
                Term::Potential {
                    label: l1,
                    v: v1,
                    coeff: c1,
                    arg_scale: s1,
                },
                Term::Potential {
                    label: l2,
                    v: v2,
                    coeff: c2,
                    arg_scale: s2,
                },
            ) => l1 == l2 && v1.approx_eq(v2, tol) && (c1 - c2).abs() <= tol && (s1 - s2).abs() <= tol,
            (
                Term::Coupling {
                    field: f1,
                    v: v1,
                    coeff: c1,
                    arg_scale: s1,
                    linear: n1,
                },
                Term::Coupling {
                    field: f2,
                    v: v2,
                    coeff: c2,
                    arg_scale: s2,
                    linear: n2,
                },
            ) => {
                f1 == f2 && n1 == n2 && v1.approx_eq(v2, tol) && (c1 - c2).abs() <= tol && (s1 - s2).abs() <= tol
            }
            (a, b) => a == b,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Quadratic(q) => write!(f, "{q}"),
            Term::Kinetic { label, mass } => write!(f, "p_{label}^2/(2*{mass})"),
            Term::Potential {
                label, coeff, arg_scale, ..
            } => write!(f, "{coeff} V({arg_scale} x_{label})"),
            Term::Coupling {
                field,
                coeff,
                arg_scale,
                linear,
                ..
            } => write!(f, "{coeff} V'({arg_scale} x_{field}) x_{linear}"),
            Term::PhotonEnergy { label } => write!(f, "hbar omega_{label}"),
            Term::LevelEnergies { label } => write!(f, "E_{label}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub terms: Vec<Term>,
    pub frame: String,
}

impl HamiltonianSpec {
    pub fn new(terms: Vec<Term>) -> Self {
        Self {
            terms,
            frame: "C".to_string(),
        }
    }

    pub fn in_frame(mut self, frame: &str) -> Self {
        self.frame = frame.to_string();
        self
    }

    /// Sum of `p^2 / 2m` over the given particles.
    pub fn free(particles: &[(&str, f64)]) -> Self {
        Self::new(particles.iter().map(|(l, m)| Term::kinetic(l, *m)).collect())
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.terms {
            for l in t.labels() {
                if !out.contains(&l) {
                    out.push(l);
                }
            }
        }
        out
    }

    /// All quadratic terms merged into one observable, plus the other terms.
    fn canonical(&self) -> (QuadObservable, Vec<Term>) {
        let mut labels: Vec<String> = self
            .terms
            .iter()
            .filter_map(|t| t.as_quadratic().map(|q| q.labels().to_vec()))
            .flatten()
            .collect();
        labels.sort();
        labels.dedup();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let mut q = QuadObservable::zero(&refs);
        let mut rest = Vec::new();
        for t in &self.terms {
            match t.as_quadratic() {
                Some(o) => q = q.add(&o),
                None => rest.push(t.clone()),
            }
        }
        (q.trimmed(), rest)
    }

    /// Term-by-term comparison with quadratic parts merged.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let (q1, r1) = self.canonical();
        let (q2, r2) = other.canonical();
        if !q1.approx_eq(&q2, tol) || r1.len() != r2.len() {
            return false;
        }
        let mut used = vec![false; r2.len()];
        r1.iter().all(|a| {
            match (0..r2.len()).find(|&j| !used[j] && a.approx_eq(&r2[j], tol)) {
                Some(j) => {
                    used[j] = true;
                    true
                }
                None => false,
            }
        })
    }

    pub fn swap_labels(&self, a: &str, b: &str) -> Self {
        let f = |l: &str| {
            if l == a {
                b.to_string()
            } else if l == b {
                a.to_string()
            } else {
                l.to_string()
            }
        };
        Self {
            terms: self.terms.iter().map(|t| t.relabel(&f)).collect(),
            frame: f(&self.frame),
        }
    }
}

impl fmt::Display for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (q, rest) = self.canonical();
        write!(f, "H^({}) = {q}", self.frame)?;
        for t in rest {
            write!(f, " + {t}")?;
        }
        Ok(())
    }
}

/// Planck constant used by a state: that of its first grid, 1 otherwise.
pub(crate) fn state_hbar(s: &MultiState) -> f64 {
    s.subsystems()
        .iter()
        .find_map(|sub| sub.kind.grid().map(|g| g.hbar()))
        .unwrap_or(1.0)
}

/// Energies on the full tensor grid, each axis read in representation `rep`.
struct DiagonalGroup {
    rep: Rep,
    axes: Vec<usize>,
    energy: ArrayD<f64>,
}

fn coordinates(kind: &AxisKind, rep: Rep) -> Vec<f64> {
    match (kind.grid(), rep) {
        (Some(g), Rep::Position) => g.positions(),
        (Some(g), Rep::Momentum) => g.momenta(),
        (None, _) => vec![0.0; kind.len()],
    }
}

fn split_quadratic(q: &QuadObservable) -> Result<(QuadObservable, QuadObservable)> {
    let d = q.lin().len();
    let mut xq = q.clone().scale(0.0);
    let mut pq = q.clone().scale(0.0);
    let mut xl = xq.lin().clone();
    let mut pl = pq.lin().clone();
    let mut xm = xq.quad().clone();
    let mut pm = pq.quad().clone();
    for i in 0..d {
        if i % 2 == 0 {
            xl[i] = q.lin()[i];
        } else {
            pl[i] = q.lin()[i];
        }
        for j in 0..d {
            let v = q.quad()[(i, j)];
            match (i % 2, j % 2) {
                (0, 0) => xm[(i, j)] = v,
                (1, 1) => pm[(i, j)] = v,
                _ if v != 0.0 => {
                    return Err(QrfError::RepresentationMixing(format!(
                        "term {q} couples a position and a momentum"
                    )))
                }
                _ => {}
            }
        }
    }
    xq = QuadObservable::from_parts(q.labels().to_vec(), xl, xm, q.constant())?;
    pq = QuadObservable::from_parts(q.labels().to_vec(), pl, pm, 0.0)?;
    Ok((xq, pq))
}

fn quad_value(q: &QuadObservable, coords: &[f64]) -> f64 {
    let d = coords.len();
    let mut v = q.constant();
    for i in 0..d {
        if coords[i] == 0.0 {
            continue;
        }
        v += q.lin()[i] * coords[i];
        for j in 0..d {
            v += q.quad()[(i, j)] * coords[i] * coords[j];
        }
    }
    v
}

fn build_groups(s: &MultiState, h: &HamiltonianSpec) -> Result<(DiagonalGroup, DiagonalGroup)> {
    for l in h.labels() {
        s.axis(&l)?;
    }
    let subs = s.subsystems();
    let shape = s.amps().shape().to_vec();
    let xs: Vec<Vec<f64>> = subs.iter().map(|sub| coordinates(&sub.kind, Rep::Position)).collect();
    let ps: Vec<Vec<f64>> = subs.iter().map(|sub| coordinates(&sub.kind, Rep::Momentum)).collect();
    let hbar = state_hbar(s);
    let mut pos = ArrayD::<f64>::zeros(shape.clone());
    let mut mom = ArrayD::<f64>::zeros(shape.clone());
    let mut pos_axes: Vec<usize> = Vec::new();
    let mut mom_axes: Vec<usize> = Vec::new();
    let touch = |axes: &mut Vec<usize>, a: usize| {
        if !axes.contains(&a) {
            axes.push(a);
        }
    };
    for term in &h.terms {
        match term {
            Term::Kinetic { .. } | Term::Quadratic(_) => {
                let q = term.as_quadratic().expect("quadratic term");
                let q = &q;
                let (xq, pq) = split_quadratic(q)?;
                let axes: Vec<usize> = q.labels().iter().map(|l| s.axis(l)).collect::<Result<_>>()?;
                for (&a, l) in axes.iter().zip(q.labels()) {
                    if subs[a].kind.grid().is_none() {
                        return Err(QrfError::NotContinuous(l.clone()));
                    }
                }
                let d = 2 * axes.len();
                let has_x = (0..d).any(|i| i % 2 == 0 && (xq.lin()[i] != 0.0 || xq.quad().row(i).iter().any(|v| *v != 0.0)));
                let has_p = (0..d).any(|i| i % 2 == 1 && (pq.lin()[i] != 0.0 || pq.quad().row(i).iter().any(|v| *v != 0.0)));
                let mut buf = vec![0.0; d];
                if has_x || xq.constant() != 0.0 {
                    for (i, &a) in axes.iter().enumerate() {
                        if xq.lin()[2 * i] != 0.0 || xq.quad().row(2 * i).iter().any(|v| *v != 0.0) {
                            touch(&mut pos_axes, a);
                        }
                    }
                    pos.indexed_iter_mut().for_each(|(idx, e)| {
                        for (i, &a) in axes.iter().enumerate() {
                            buf[2 * i] = xs[a][idx[a]];
                        }
                        *e += quad_value(&xq, &buf);
                    });
                    buf.iter_mut().for_each(|v| *v = 0.0);
                }
                if has_p {
                    for (i, &a) in axes.iter().enumerate() {
                        if pq.lin()[2 * i + 1] != 0.0 || pq.quad().row(2 * i + 1).iter().any(|v| *v != 0.0) {
                            touch(&mut mom_axes, a);
                        }
                    }
                    mom.indexed_iter_mut().for_each(|(idx, e)| {
                        for (i, &a) in axes.iter().enumerate() {
                            buf[2 * i + 1] = ps[a][idx[a]];
                        }
                        *e += quad_value(&pq, &buf);
                    });
                }
            }
            Term::Potential {
                label,
                v,
                coeff,
                arg_scale,
            } => {
                let a = s.axis(label)?;
                s.continuous(label)?;
                touch(&mut pos_axes, a);
                let table: Vec<f64> = xs[a].iter().map(|x| coeff * v.value(arg_scale * x)).collect();
                pos.indexed_iter_mut().for_each(|(idx, e)| *e += table[idx[a]]);
            }
            Term::Coupling {
                field,
                v,
                coeff,
                arg_scale,
                linear,
            } => {
                let fa = s.axis(field)?;
                let la = s.axis(linear)?;
                s.continuous(field)?;
                s.continuous(linear)?;
                touch(&mut pos_axes, fa);
                touch(&mut pos_axes, la);
                let g: Vec<f64> = xs[fa].iter().map(|x| coeff * v.derivative(arg_scale * x)).collect();
                pos.indexed_iter_mut()
                    .for_each(|(idx, e)| *e += g[idx[fa]] * xs[la][idx[la]]);
            }
            Term::PhotonEnergy { label } => {
                let a = s.axis(label)?;
                let kind = &subs[a].kind;
                if !matches!(kind, AxisKind::Photon { .. }) {
                    return Err(QrfError::InvalidParameter(format!("`{label}` is not a photon axis")));
                }
                touch(&mut pos_axes, a);
                let table: Vec<f64> = (0..kind.len()).map(|k| hbar * kind.omega(k).unwrap_or(0.0)).collect();
                pos.indexed_iter_mut().for_each(|(idx, e)| *e += table[idx[a]]);
            }
            Term::LevelEnergies { label } => {
                let a = s.axis(label)?;
                let AxisKind::Discrete { levels } = &subs[a].kind else {
                    return Err(QrfError::InvalidParameter(format!("`{label}` is not a discrete axis")));
                };
                let table: Vec<f64> = levels.iter().map(|l| l.energy).collect();
                pos.indexed_iter_mut().for_each(|(idx, e)| *e += table[idx[a]]);
            }
        }
    }
    Ok((
        DiagonalGroup {
            rep: Rep::Position,
            axes: pos_axes,
            energy: pos,
        },
        DiagonalGroup {
            rep: Rep::Momentum,
            axes: mom_axes,
            energy: mom,
        },
    ))
}

impl DiagonalGroup {
    fn factor(&self, tau: f64, hbar: f64) -> ArrayD<C64> {
        self.energy.mapv(|e| C64::from_polar(1.0, -e * tau / hbar))
    }

    fn apply(&self, s: &mut MultiState, factor: &ArrayD<C64>) -> Result<()> {
        for &a in &self.axes {
            let l = s.subsystems()[a].label.clone();
            s.set_rep_of(&l, self.rep)?;
        }
        s.amps_mut().zip_mut_with(factor, |v, f| *v *= f);
        Ok(())
    }
}

/// Strang split-step evolution `V/2, T, V/2` with the step shrunk so that it
/// divides `t_total`. Negative `t_total` evolves backwards.
pub fn evolve(state: &MultiState, h: &HamiltonianSpec, t_total: f64, dt: f64) -> Result<MultiState> {
    if !(dt > 0.0) || !t_total.is_finite() {
        return Err(QrfError::InvalidParameter(format!("evolve needs dt > 0, got {dt}")));
    }
    let (pos, mom) = build_groups(state, h)?;
    let mut s = state.in_position();
    if t_total == 0.0 {
        return Ok(s);
    }
    let steps = (t_total.abs() / dt).ceil().max(1.0) as usize;
    let tau = t_total / steps as f64;
    let hbar = state_hbar(state);
    let half = pos.factor(0.5 * tau, hbar);
    let full = mom.factor(tau, hbar);
    let whole = pos.factor(tau, hbar);
    pos.apply(&mut s, &half)?;
    for k in 0..steps {
        mom.apply(&mut s, &full)?;
        let last = k + 1 == steps;
        pos.apply(&mut s, if last { &half } else { &whole })?;
    }
    s.make_position();
    let t = state.time() + t_total;
    Ok(s.with_time(t))
}

/// Image of a position term argument: `x_label -> c q_m` with no shift.
fn position_image(
    map: &crate::phase_space::PhaseSpaceMap,
    label: &str,
) -> Result<(String, f64)> {
    let img = map.conjugate_observable(&QuadObservable::x(label))?.trimmed();
    let nz: Vec<usize> = (0..img.lin().len()).filter(|&i| img.lin()[i].abs() > 1e-14).collect();
    if nz.len() != 1 || nz[0] % 2 != 0 || img.constant().abs() > 1e-14 {
        return Err(QrfError::Unsupported(format!(
            "x_{label} is not mapped to a single position ({img})"
        )));
    }
    Ok((img.labels()[nz[0] / 2].clone(), img.lin()[nz[0]]))
}

/// `S H S^dagger + i hbar (dS/dt) S^dagger`, computed algebraically.
pub fn transform_hamiltonian(unitary: &QrfUnitary, h: &HamiltonianSpec, masses: &Masses) -> Result<HamiltonianSpec> {
    let fc = &unitary.frames;
    if h.frame != fc.old_frame {
        return Err(QrfError::LabelMismatch(format!(
            "Hamiltonian is in frame `{}`, transformation starts from `{}`",
            h.frame, fc.old_frame
        )));
    }
    let (a, c) = (fc.new_frame.as_str(), fc.old_frame.as_str());
    if let Family::SEP(p) = &unitary.family {
        return transform_sep(fc, &p.potential, h, masses);
    }
    let map = unitary
        .phase_space_map(masses)
        .ok_or_else(|| QrfError::Unsupported(format!("no algebraic transformation for {}", unitary.name())))??;
    let mut terms = Vec::new();
    for term in &h.terms {
        terms.push(match term {
            Term::Kinetic { .. } | Term::Quadratic(_) => {
                let q = term.as_quadratic().expect("quadratic term");
                Term::Quadratic(map.conjugate_observable(&q)?.trimmed())
            }
            Term::Potential {
                label,
                v,
                coeff,
                arg_scale,
            } => {
                let (m, k) = position_image(&map, label)?;
                Term::Potential {
                    label: m,
                    v: v.clone(),
                    coeff: *coeff,
                    arg_scale: arg_scale * k,
                }
            }
            Term::Coupling {
                field,
                v,
                coeff,
                arg_scale,
                linear,
            } => {
                let (fm, fk) = position_image(&map, field)?;
                let (lm, lk) = position_image(&map, linear)?;
                Term::Coupling {
                    field: fm,
                    v: v.clone(),
                    coeff: coeff * lk,
                    arg_scale: arg_scale * fk,
                    linear: lm,
                }
            }
            other => {
                return Err(QrfError::Unsupported(format!("term {other} under {}", unitary.name())));
            }
        });
    }
    let ma = masses.get(a)?;
    let mc = masses.get(c)?;
    let kc = QuadObservable::kinetic(c, mc);
    let ka = map.conjugate_observable(&QuadObservable::kinetic(a, ma))?;
    match unitary.family {
        Family::ST { .. } => {
            terms.push(Term::Quadratic(kc.add(&ka.scale(-1.0)).trimmed()));
        }
        Family::Sb { .. } => {
            let mut extra = kc.add(&ka.scale(-1.0));
            for b in &fc.targets {
                let mb = masses.get(b)?;
                let cross = QuadObservable::p(c).sym_product(&QuadObservable::p(b))?.scale(1.0 / mc);
                let sq = QuadObservable::p(c).square().scale(-mb / (2.0 * mc * mc));
                extra = extra.add(&cross).add(&sq);
            }
            terms.push(Term::Quadratic(extra.trimmed()));
        }
        _ => {}
    }
    Ok(HamiltonianSpec { terms, frame: a.to_string() })
}

/// Source Hamiltonian must be the free targets plus `p_a^2/2m_a + V(x_a)`;
/// the result is the free targets and old frame plus
/// `V(-(m_c/m_a) q_c) - sum_b (m_b/m_a) V'(-(m_c/m_a) q_c) q_b`.
fn transform_sep(
    fc: &crate::phase_space::FrameChange,
    v: &Potential,
    h: &HamiltonianSpec,
    masses: &Masses,
) -> Result<HamiltonianSpec> {
    let (a, c) = (fc.new_frame.as_str(), fc.old_frame.as_str());
    let ma = masses.get(a)?;
    let mc = masses.get(c)?;
    let mut expected = vec![Term::kinetic(a, ma), Term::potential(a, v.clone())];
    for b in &fc.targets {
        expected.push(Term::kinetic(b, masses.get(b)?));
    }
    let expected = HamiltonianSpec::new(expected).in_frame(c);
    if !h.approx_eq(&expected, 1e-12) {
        return Err(QrfError::Unsupported(format!(
            "the equivalence-principle transformation needs {expected}, got {h}"
        )));
    }
    let scale = -mc / ma;
    let mut terms = vec![
        Term::kinetic(c, mc),
        Term::Potential {
            label: c.to_string(),
            v: v.clone(),
            coeff: 1.0,
            arg_scale: scale,
        },
    ];
    for b in &fc.targets {
        let mb = masses.get(b)?;
        terms.insert(0, Term::kinetic(b, mb));
        terms.push(Term::Coupling {
            field: c.to_string(),
            v: v.clone(),
            coeff: -mb / ma,
            arg_scale: scale,
            linear: b.clone(),
        });
    }
    Ok(HamiltonianSpec { terms, frame: a.to_string() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub transformed: HamiltonianSpec,
    pub expected: HamiltonianSpec,
}

/// Whether the transformed Hamiltonian has the source's functional form with
/// the two frame labels exchanged.
pub fn is_symmetry(unitary: &QrfUnitary, h: &HamiltonianSpec, masses: &Masses) -> Result<SymmetryReport> {
    let transformed = transform_hamiltonian(unitary, h, masses)?;
    let expected = h.swap_labels(&unitary.frames.new_frame, &unitary.frames.old_frame);
    let terms = expected
        .terms
        .into_iter()
        .map(|t| match t {
            Term::Kinetic { label, .. } => masses.get(&label).map(|mass| Term::Kinetic { label, mass }),
            other => Ok(other),
        })
        .collect::<Result<Vec<_>>>()?;
    let expected = HamiltonianSpec { terms, ..expected };
    Ok(SymmetryReport {
        symmetric: transformed.approx_eq(&expected, 1e-12),
        transformed,
        expected,
    })
}

/// `||S(t) U_source(t) psi0 - U_target(t) S(0) psi0||`
pub fn commuting_diagram_residual(
    unitary: &QrfUnitary,
    h_source: &HamiltonianSpec,
    h_target: &HamiltonianSpec,
    psi0: &MultiState,
    t: f64,
    dt: f64,
) -> Result<f64> {
    let left = unitary.at_time(t).apply(&evolve(psi0, h_source, t, dt)?)?;
    let right = evolve(&unitary.at_time(0.0).apply(psi0)?, h_target, t, dt)?;
    left.distance(&right)
}

/// Gaussian branch parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub x0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl Branch {
    pub fn center(&self, slope: f64, t: f64) -> f64 {
        self.x0 + self.p0 / self.mass * t - 0.5 * slope / self.mass * t * t
    }

    pub fn width(&self, t: f64) -> f64 {
        let s = self.hbar * t / (2.0 * self.mass * self.sigma);
        (self.sigma * self.sigma + s * s).sqrt()
    }
}

/// Largest time for which the branch centre plus five widths stays inside
/// its constant-slope region. Infinite when nothing ever leaves.
pub fn localization_window(v: &Potential, branch: &Branch) -> Result<f64> {
    let regions = v.regions();
    if regions.is_empty() {
        return Err(QrfError::Unsupported("localization windows need a piecewise-linear potential".into()));
    }
    let (lo, hi, slope) = regions
        .into_iter()
        .find(|(lo, hi, _)| branch.x0 > *lo && branch.x0 <= *hi)
        .expect("regions cover the line");
    let inside = |t: f64| {
        let c = branch.center(slope, t);
        let w = 5.0 * branch.width(t);
        c - w > lo && c + w <= hi
    };
    if !inside(0.0) {
        return Err(QrfError::Straddle { center: branch.x0 });
    }
    if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let mut good = 0.0;
    let mut bad = 1e-6;
    while inside(bad) {
        good = bad;
        bad *= 2.0;
        if bad > 1e15 {
            return Ok(f64::INFINITY);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if inside(mid) {
            good = mid;
        } else {
            bad = mid;
        }
        if bad - good <= 1e-14 * bad {
            break;
        }
    }
    Ok(good)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccelerationReport {
    pub accelerations: Vec<f64>,
    pub residual: f64,
}

/// Compares `-(1/m) V'(x) psi` with `sum_i a_i psi_i / sqrt(n)` for an equal
/// superposition of disjoint branches.
pub fn acceleration_superposition_check(v: &Potential, branches: &[Wave], mass: f64) -> Result<AccelerationReport> {
    let Some(first) = branches.first() else {
        return Err(QrfError::InvalidParameter("no branches".into()));
    };
    let g = first.grid;
    let dx = g.dx();
    for (i, a) in branches.iter().enumerate() {
        if !a.grid.same_lattice(&g) {
            return Err(QrfError::InvalidParameter("branches on different grids".into()));
        }
        for b in &branches[i + 1..] {
            let ov: C64 = a.amps.iter().zip(b.amps.iter()).map(|(u, w)| u.conj() * w).sum::<C64>() * dx;
            if ov.norm() > 1e-8 {
                return Err(QrfError::Overlap(ov.norm()));
            }
        }
    }
    let k = 1.0 / (branches.len() as f64).sqrt();
    let accelerations: Vec<f64> = branches
        .iter()
        .map(|w| {
            let mean: f64 = w.amps.iter().enumerate().map(|(i, z)| z.norm_sqr() * g.x(i)).sum::<f64>() * dx;
            -v.derivative(mean) / mass
        })
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g.n() {
        let psi: C64 = branches.iter().map(|w| w.amps[i]).sum::<C64>() * k;
        let lhs = psi * (-v.derivative(g.x(i)) / mass);
        let rhs: C64 = branches.iter().zip(&accelerations).map(|(w, a)| w.amps[i] * *a).sum::<C64>() * k;
        num += (lhs - rhs).norm_sqr();
        den += rhs.norm_sqr();
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else { (num * dx).sqrt() };
    Ok(AccelerationReport { accelerations, residual })
}

/// Second-order displacement operator
/// `X_A(dt) = (p_A/m_A) dt - (1/2m_A) V'(x_A) dt^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterXa {
    pub dt: f64,
    pub mass: f64,
    pub potential: Potential,
    /// Estimated third-order remainder.
    pub bound: f64,
}

impl TrotterXa {
    pub fn displacement(&self, x: f64, p: f64) -> f64 {
        p / self.mass * self.dt - self.potential.derivative(x) * self.dt * self.dt / (2.0 * self.mass)
    }

    /// `<X_A(dt)>` in a state.
    pub fn expectation(&self, state: &MultiState, label: &str) -> Result<f64> {
        let (g, _) = state.continuous(label)?;
        let rho = state.position_marginal(label)?;
        let force: f64 = rho.iter().enumerate().map(|(k, r)| r * self.potential.derivative(g.x(k))).sum::<f64>() * g.dx();
        let p = crate::state::expectation(state, &QuadObservable::p(label))?;
        Ok(p / self.mass * self.dt - force * self.dt * self.dt / (2.0 * self.mass))
    }
}

/// Builds `X_A(dt)` and refuses steps whose third-order remainder
/// `dt^3 max|V''| p_max / (6 m^2)` over `x_range` exceeds 1e-6.
pub fn trotter_xa(v: &Potential, dt: f64, mass: f64, x_range: (f64, f64), p_max: f64) -> Result<TrotterXa> {
    if !(dt > 0.0 && mass > 0.0) {
        return Err(QrfError::InvalidParameter("trotter_xa needs dt > 0 and m > 0".into()));
    }
    let curv = (0..=256)
        .map(|i| x_range.0 + (x_range.1 - x_range.0) * i as f64 / 256.0)
        .map(|x| v.second_derivative(x).abs())
        .fold(0.0, f64::max);
    let bound = dt.powi(3) * curv * p_max.abs() / (6.0 * mass * mass);
    if bound > 1e-6 {
        return Err(QrfError::TrotterBound(bound));
    }
    Ok(TrotterXa {
        dt,
        mass,
        potential: v.clone(),
        bound,
    })
}
