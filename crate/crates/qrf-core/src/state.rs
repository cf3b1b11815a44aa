//! Labeled multipartite wavefunctions on product grids.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{QrfError, Result};
use crate::grid::Grid1D;
use crate::kernel::{self, Direction};
use crate::phase_space::{Op, QuadObservable};

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub name: String,
    pub energy: f64,
}

impl Level {
    pub fn new(name: &str, energy: f64) -> Self {
        Self {
            name: name.to_string(),
            energy,
        }
    }
}

/// What an axis of the amplitude tensor represents.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisKind {
    /// A massive particle on a position grid.
    Continuous { grid: Grid1D, mass: f64 },
    /// A one-photon mode. The grid samples `u = ln(omega / omega_ref)` and the
    /// stored amplitude is `sqrt(omega) psi(omega)`, so the measure is `du`.
    /// The dispersion is `hbar omega = c |pi|`.
    Photon { grid: Grid1D, omega_ref: f64, c: f64 },
    /// A finite set of internal levels with counting measure.
    Discrete { levels: Vec<Level> },
}

impl AxisKind {
    pub fn len(&self) -> usize {
        match self {
            AxisKind::Continuous { grid, .. } | AxisKind::Photon { grid, .. } => grid.n(),
            AxisKind::Discrete { levels } => levels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn measure(&self) -> f64 {
        match self {
            AxisKind::Continuous { grid, .. } | AxisKind::Photon { grid, .. } => grid.dx(),
            AxisKind::Discrete { .. } => 1.0,
        }
    }

    pub fn grid(&self) -> Option<&Grid1D> {
        match self {
            AxisKind::Continuous { grid, .. } | AxisKind::Photon { grid, .. } => Some(grid),
            AxisKind::Discrete { .. } => None,
        }
    }

    pub fn mass(&self) -> Option<f64> {
        match self {
            AxisKind::Continuous { mass, .. } => Some(*mass),
            _ => None,
        }
    }

    /// Frequency at photon grid index `k`.
    pub fn omega(&self, k: usize) -> Option<f64> {
        match self {
            AxisKind::Photon { grid, omega_ref, .. } => Some(omega_ref * grid.x(k).exp()),
            _ => None,
        }
    }

    fn validate(&self, label: &str) -> Result<()> {
        match self {
            AxisKind::Continuous { mass, .. } if !(*mass > 0.0 && mass.is_finite()) => Err(
                QrfError::InvalidParameter(format!("mass of `{label}` must be positive, got {mass}")),
            ),
            AxisKind::Photon { omega_ref, c, .. } if !(*omega_ref > 0.0 && *c > 0.0) => Err(
                QrfError::InvalidParameter(format!("photon axis `{label}` needs omega_ref > 0 and c > 0")),
            ),
            AxisKind::Discrete { levels } if levels.is_empty() => {
                Err(QrfError::InvalidParameter(format!("discrete axis `{label}` has no levels")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    pub label: String,
    pub kind: AxisKind,
}

impl Subsystem {
    pub fn continuous(label: &str, grid: Grid1D, mass: f64) -> Self {
        Self {
            label: label.to_string(),
            kind: AxisKind::Continuous { grid, mass },
        }
    }

    pub fn photon(label: &str, grid: Grid1D, omega_ref: f64, c: f64) -> Self {
        Self {
            label: label.to_string(),
            kind: AxisKind::Photon { grid, omega_ref, c },
        }
    }

    pub fn discrete(label: &str, levels: Vec<Level>) -> Self {
        Self {
            label: label.to_string(),
            kind: AxisKind::Discrete { levels },
        }
    }
}

/// The reference system whose perspective a state describes. The mass is
/// carried so that a frame change can turn the old frame into a subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub label: String,
    pub mass: f64,
}

impl Frame {
    pub fn new(label: &str, mass: f64) -> Self {
        Self {
            label: label.to_string(),
            mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    Position,
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiState {
    subsystems: Vec<Subsystem>,
    amps: ArrayD<C64>,
    reps: Vec<Rep>,
    frame: Frame,
    time: f64,
}

const NORM_TOL: f64 = 1e-10;

impl MultiState {
    /// Validated constructor; the amplitudes must already be normalized.
    pub fn new(subsystems: Vec<Subsystem>, amps: ArrayD<C64>, frame: Frame, time: f64) -> Result<Self> {
        let s = Self::checked_parts(subsystems, amps, frame, time)?;
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QrfError::NotNormalized(norm));
        }
        Ok(s)
    }

    /// Validated constructor that rescales the amplitudes to unit norm.
    pub fn normalized(subsystems: Vec<Subsystem>, amps: ArrayD<C64>, frame: Frame, time: f64) -> Result<Self> {
        let mut s = Self::checked_parts(subsystems, amps, frame, time)?;
        let norm = s.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(QrfError::NotNormalized(norm));
        }
        s.amps.mapv_inplace(|v| v / norm);
        Ok(s)
    }

    fn checked_parts(subsystems: Vec<Subsystem>, amps: ArrayD<C64>, frame: Frame, time: f64) -> Result<Self> {
        for (i, s) in subsystems.iter().enumerate() {
            if subsystems[..i].iter().any(|o| o.label == s.label) {
                return Err(QrfError::DuplicateLabel(s.label.clone()));
            }
            s.kind.validate(&s.label)?;
        }
        let dims: Vec<usize> = subsystems.iter().map(|s| s.kind.len()).collect();
        if amps.shape() != dims.as_slice() {
            return Err(QrfError::Dimension(format!(
                "amplitude shape {:?} does not match subsystems {:?}",
                amps.shape(),
                dims
            )));
        }
        if !(frame.mass > 0.0) {
            return Err(QrfError::InvalidParameter(format!("frame mass must be positive, got {}", frame.mass)));
        }
        let reps = vec![Rep::Position; subsystems.len()];
        Ok(Self {
            subsystems,
            amps,
            reps,
            frame,
            time,
        })
    }

    pub(crate) fn from_raw(subsystems: Vec<Subsystem>, amps: ArrayD<C64>, reps: Vec<Rep>, frame: Frame, time: f64) -> Self {
        Self {
            subsystems,
            amps,
            reps,
            frame,
            time,
        }
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn amps(&self) -> &ArrayD<C64> {
        &self.amps
    }

    pub fn reps(&self) -> &[Rep] {
        &self.reps
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn with_frame(mut self, label: &str, mass: f64) -> Self {
        self.frame = Frame::new(label, mass);
        self
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn axis(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| QrfError::UnknownLabel(label.to_string()))
    }

    pub fn subsystem(&self, label: &str) -> Result<&Subsystem> {
        Ok(&self.subsystems[self.axis(label)?])
    }

    /// Grid and mass of a continuous axis.
    pub fn continuous(&self, label: &str) -> Result<(Grid1D, f64)> {
        match &self.subsystem(label)?.kind {
            AxisKind::Continuous { grid, mass } => Ok((*grid, *mass)),
            _ => Err(QrfError::NotContinuous(label.to_string())),
        }
    }

    /// Mass of a subsystem or of the frame.
    pub fn mass_of(&self, label: &str) -> Result<f64> {
        if label == self.frame.label {
            return Ok(self.frame.mass);
        }
        self.continuous(label).map(|(_, m)| m)
    }

    fn measure_product(&self) -> f64 {
        self.subsystems.iter().map(|s| s.kind.measure_in(Rep::Position)).product::<f64>()
    }

    fn current_measure(&self) -> f64 {
        self.subsystems
            .iter()
            .zip(&self.reps)
            .map(|(s, r)| s.kind.measure_in(*r))
            .product()
    }

    pub fn norm_sqr(&self) -> f64 {
        kernel::norm_sqr_sum(&self.amps) * self.current_measure()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn set_rep(&mut self, axis: usize, rep: Rep) -> Result<()> {
        if self.reps[axis] == rep {
            return Ok(());
        }
        let grid = match &self.subsystems[axis].kind {
            AxisKind::Continuous { grid, .. } | AxisKind::Photon { grid, .. } => *grid,
            AxisKind::Discrete { .. } => return Err(QrfError::NotContinuous(self.subsystems[axis].label.clone())),
        };
        let dir = match rep {
            Rep::Momentum => Direction::Forward,
            Rep::Position => Direction::Inverse,
        };
        kernel::dft_axis(&mut self.amps, axis, &grid, dir);
        self.reps[axis] = rep;
        Ok(())
    }

    pub(crate) fn set_rep_of(&mut self, label: &str, rep: Rep) -> Result<()> {
        let axis = self.axis(label)?;
        self.set_rep(axis, rep)
    }

    pub fn to_momentum_rep(&self, label: &str) -> Result<Self> {
        let mut s = self.clone();
        s.set_rep_of(label, Rep::Momentum)?;
        Ok(s)
    }

    pub fn from_momentum_rep(&self, label: &str) -> Result<Self> {
        let mut s = self.clone();
        s.set_rep_of(label, Rep::Position)?;
        Ok(s)
    }

    pub(crate) fn make_position(&mut self) {
        for axis in 0..self.reps.len() {
            if self.reps[axis] == Rep::Momentum {
                self.set_rep(axis, Rep::Position).expect("momentum axes are continuous");
            }
        }
    }

    /// Copy with every axis in position representation.
    pub fn in_position(&self) -> Self {
        let mut s = self.clone();
        s.make_position();
        s
    }

    /// Copy with axes reordered to `labels`.
    pub fn aligned_to(&self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.subsystems.len() {
            return Err(QrfError::LabelMismatch(format!("{:?} vs {:?}", labels, self.labels())));
        }
        let perm = labels.iter().map(|l| self.axis(l)).collect::<Result<Vec<_>>>()?;
        let amps = self
            .amps
            .view()
            .permuted_axes(IxDyn(&perm))
            .as_standard_layout()
            .into_owned();
        Ok(Self {
            subsystems: perm.iter().map(|&i| self.subsystems[i].clone()).collect(),
            amps,
            reps: perm.iter().map(|&i| self.reps[i]).collect(),
            frame: self.frame.clone(),
            time: self.time,
        })
    }

    fn comparable(&self, other: &Self) -> Result<(Self, Self)> {
        let a = self.in_position();
        let b = other.in_position().aligned_to(&a.labels())?;
        for (x, y) in a.subsystems.iter().zip(&b.subsystems) {
            let same = match (&x.kind, &y.kind) {
                (AxisKind::Continuous { grid: g1, .. }, AxisKind::Continuous { grid: g2, .. })
                | (AxisKind::Photon { grid: g1, .. }, AxisKind::Photon { grid: g2, .. }) => g1.same_lattice(g2),
                (AxisKind::Discrete { levels: l1 }, AxisKind::Discrete { levels: l2 }) => l1.len() == l2.len(),
                _ => false,
            };
            if !same {
                return Err(QrfError::LabelMismatch(format!("axis `{}` differs between states", x.label)));
            }
        }
        Ok((a, b))
    }

    /// `<self|other>` after aligning labels.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        let (a, b) = self.comparable(other)?;
        let s: C64 = a.amps.iter().zip(b.amps.iter()).map(|(x, y)| x.conj() * y).sum();
        Ok(s * a.measure_product())
    }

    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `||self - other||` after aligning labels.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        let (a, b) = self.comparable(other)?;
        let s: f64 = a.amps.iter().zip(b.amps.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
        Ok((s * a.measure_product()).sqrt())
    }

    /// Probability density of one axis per unit of its measure, in the current
    /// representation of that axis.
    pub fn marginal(&self, label: &str) -> Result<Vec<f64>> {
        let axis = self.axis(label)?;
        let n = self.amps.shape()[axis];
        let others: f64 = self
            .subsystems
            .iter()
            .zip(&self.reps)
            .enumerate()
            .filter(|(i, _)| *i != axis)
            .map(|(_, (s, r))| s.kind.measure_in(*r))
            .product();
        let mut out = vec![0.0; n];
        for (idx, v) in self.amps.indexed_iter() {
            out[idx[axis]] += v.norm_sqr() * others;
        }
        Ok(out)
    }

    pub fn position_marginal(&self, label: &str) -> Result<Vec<f64>> {
        self.in_position().marginal(label)
    }

    pub fn momentum_marginal(&self, label: &str) -> Result<Vec<f64>> {
        let mut s = self.in_position();
        s.set_rep_of(label, Rep::Momentum)?;
        s.marginal(label)
    }

    /// Amplitudes reshaped to `(kept, rest)` with measure weights folded in, so
    /// that the matrix has unit Frobenius norm.
    fn coefficient_matrix(&self, keep: &[&str]) -> Result<(DMatrix<C64>, Vec<usize>)> {
        if keep.is_empty() || keep.len() >= self.subsystems.len() {
            return Err(QrfError::Bipartition(format!(
                "kept set {:?} must be a nonempty proper subset of {:?}",
                keep,
                self.labels()
            )));
        }
        let mut order: Vec<&str> = keep.to_vec();
        for l in self.labels() {
            if !keep.contains(&l) {
                order.push(l);
            }
        }
        for (i, l) in keep.iter().enumerate() {
            if keep[..i].contains(l) {
                return Err(QrfError::Bipartition(format!("`{l}` listed twice")));
            }
        }
        let s = self.in_position().aligned_to(&order)?;
        let dims: Vec<usize> = s.amps.shape().to_vec();
        let rows: usize = dims[..keep.len()].iter().product();
        let cols: usize = dims[keep.len()..].iter().product();
        let w = s.measure_product().sqrt();
        let flat: Vec<C64> = s.amps.iter().map(|v| v * w).collect();
        Ok((DMatrix::from_fn(rows, cols, |i, j| flat[i * cols + j]), dims[..keep.len()].to_vec()))
    }

    /// Reduced density matrix on the kept axes in the listed order, trace 1.
    pub fn reduced_density(&self, keep: &[&str]) -> Result<DMatrix<C64>> {
        let (c, _) = self.coefficient_matrix(keep)?;
        Ok(&c * c.adjoint())
    }

    pub fn purity(&self, keep: &[&str]) -> Result<f64> {
        let lambdas = self.schmidt_weights(keep)?;
        Ok(lambdas.iter().map(|l| l * l).sum())
    }

    /// Squared Schmidt coefficients across the cut `keep | rest`, descending.
    pub fn schmidt_weights(&self, keep: &[&str]) -> Result<Vec<f64>> {
        let (c, _) = self.coefficient_matrix(keep)?;
        let gram = if c.nrows() <= c.ncols() {
            &c * c.adjoint()
        } else {
            c.adjoint() * &c
        };
        let eig = SymmetricEigen::new(gram);
        let mut w: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        w.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        Ok(w)
    }

    /// Von Neumann entropy (nats) of either side of the cut.
    pub fn schmidt_entropy(&self, keep: &[&str]) -> Result<f64> {
        Ok(self
            .schmidt_weights(keep)?
            .into_iter()
            .filter(|&l| l > 1e-300)
            .map(|l| -l * l.ln())
            .sum::<f64>()
            .max(0.0))
    }

    /// Exact metadata dilation `dx -> factor dx` with amplitudes divided by
    /// `sqrt(factor)`.
    pub fn rescale_axis(&self, label: &str, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(QrfError::InvalidParameter(format!("rescale factor must be positive, got {factor}")));
        }
        let axis = self.axis(label)?;
        let mut s = self.in_position();
        match &mut s.subsystems[axis].kind {
            AxisKind::Continuous { grid, .. } => *grid = grid.scaled(factor)?,
            _ => return Err(QrfError::NotContinuous(label.to_string())),
        }
        let k = 1.0 / factor.sqrt();
        s.amps.mapv_inplace(|v| v * k);
        Ok(s)
    }

    pub(crate) fn amps_mut(&mut self) -> &mut ArrayD<C64> {
        &mut self.amps
    }

    pub(crate) fn subsystems_mut(&mut self) -> &mut Vec<Subsystem> {
        &mut self.subsystems
    }

    pub(crate) fn set_frame(&mut self, frame: Frame) {
        self.frame = frame;
    }
}

impl AxisKind {
    pub(crate) fn measure_in(&self, rep: Rep) -> f64 {
        match (self, rep) {
            (AxisKind::Discrete { .. }, _) => 1.0,
            (_, Rep::Position) => self.measure(),
            (_, Rep::Momentum) => self.grid().map(|g| g.dp()).unwrap_or(1.0),
        }
    }
}

/// Single-axis wavefunction sampled on a grid, measure `dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wave {
    pub grid: Grid1D,
    pub amps: Array1<C64>,
}

impl Wave {
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> C64) -> Result<Self> {
        let amps: Array1<C64> = (0..grid.n()).map(|k| f(grid.x(k))).collect();
        Self::normalize(grid, amps)
    }

    pub fn normalize(grid: Grid1D, mut amps: Array1<C64>) -> Result<Self> {
        let norm = (amps.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(QrfError::NotNormalized(norm));
        }
        amps.mapv_inplace(|v| v / norm);
        Ok(Self { grid, amps })
    }

    /// Superposition `sum_i c_i w_i` on a common grid, renormalized.
    pub fn superpose(terms: &[(C64, &Wave)]) -> Result<Self> {
        let grid = terms
            .first()
            .ok_or_else(|| QrfError::InvalidParameter("empty superposition".into()))?
            .1
            .grid;
        let mut amps = Array1::<C64>::zeros(grid.n());
        for (c, w) in terms {
            if !w.grid.same_lattice(&grid) {
                return Err(QrfError::Dimension("superposed waves live on different grids".into()));
            }
            amps.scaled_add(*c, &w.amps);
        }
        Self::normalize(grid, amps)
    }

    /// Wraps the wave as a single continuous subsystem seen from frame `C`
    /// of unit mass; use [`MultiState::with_frame`] to change that.
    pub fn labeled(&self, label: &str, mass: f64) -> Result<MultiState> {
        MultiState::new(
            vec![Subsystem::continuous(label, self.grid, mass)],
            self.amps.clone().into_dyn(),
            Frame::new("C", 1.0),
            0.0,
        )
    }

    pub fn norm(&self) -> f64 {
        (self.amps.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }
}

/// Gaussian `exp(-(x - x0)^2 / (4 sigma^2) + i p0 x / hbar)`, normalized.
pub fn coherent_state(grid: Grid1D, x0: f64, p0: f64, sigma: f64) -> Result<Wave> {
    if !(sigma > 2.0 * grid.dx()) {
        return Err(QrfError::InvalidParameter(format!(
            "sigma = {sigma} must exceed 2 dx = {}",
            2.0 * grid.dx()
        )));
    }
    let lo = grid.x(0) - 0.5 * grid.dx();
    let hi = grid.x(grid.n() - 1) + 0.5 * grid.dx();
    if x0 - 5.0 * sigma < lo || x0 + 5.0 * sigma > hi {
        return Err(QrfError::SupportOverflow { mass: gaussian_tail(x0, sigma, lo, hi) });
    }
    let tail = gaussian_tail(x0, sigma, lo, hi);
    if tail > 1e-12 {
        return Err(QrfError::SupportOverflow { mass: tail });
    }
    let hbar = grid.hbar();
    Wave::from_fn(grid, |x| {
        let d = x - x0;
        C64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), p0 * x / hbar)
    })
}

/// Probability of a Gaussian density with standard deviation `sigma` outside `[lo, hi]`.
fn gaussian_tail(x0: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let steps = 4000;
    let h = 40.0 * sigma / steps as f64;
    let density = |x: f64| (-(x - x0) * (x - x0) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    let side = |start: f64, dir: f64| -> f64 {
        let mut s = 0.5 * density(start);
        for i in 1..steps {
            s += density(start + dir * i as f64 * h);
        }
        s * h
    };
    side(hi, 1.0) + side(lo, -1.0)
}

/// Grid-point spike of height `1/sqrt(dx)` at `x0`, which must be a lattice point.
pub fn sharp_state(grid: Grid1D, x0: f64) -> Result<Wave> {
    let k = grid.index_of(x0).ok_or(QrfError::OffGrid { what: "x0", value: x0 })?;
    let mut amps = Array1::<C64>::zeros(grid.n());
    amps[k] = C64::new(1.0 / grid.dx().sqrt(), 0.0);
    Ok(Wave { grid, amps })
}

/// Plane wave at lattice momentum `p0`.
pub fn momentum_sharp_state(grid: Grid1D, p0: f64) -> Result<Wave> {
    grid.momentum_index_of(p0).ok_or(QrfError::OffGrid { what: "p0", value: p0 })?;
    let hbar = grid.hbar();
    Wave::from_fn(grid, |x| C64::from_polar(1.0, p0 * x / hbar))
}

/// Product state; the frame and time of the first factor are kept.
pub fn tensor(states: &[&MultiState]) -> Result<MultiState> {
    let first = states
        .first()
        .ok_or_else(|| QrfError::InvalidParameter("tensor of no states".into()))?;
    let mut subsystems: Vec<Subsystem> = Vec::new();
    let mut flat: Vec<C64> = vec![C64::new(1.0, 0.0)];
    let mut shape: Vec<usize> = Vec::new();
    for s in states {
        let s = s.in_position();
        for sub in &s.subsystems {
            if subsystems.iter().any(|o| o.label == sub.label) {
                return Err(QrfError::DuplicateLabel(sub.label.clone()));
            }
            subsystems.push(sub.clone());
        }
        let other: Vec<C64> = s.amps.iter().copied().collect();
        let mut next = Vec::with_capacity(flat.len() * other.len());
        for a in &flat {
            for b in &other {
                next.push(a * b);
            }
        }
        flat = next;
        shape.extend_from_slice(s.amps.shape());
    }
    let amps = ArrayD::from_shape_vec(IxDyn(&shape), flat).expect("shape matches product length");
    MultiState::normalized(subsystems, amps, first.frame.clone(), first.time)
}

/// Expectation of a symmetrically ordered quadratic observable.
pub fn expectation(state: &MultiState, obs: &QuadObservable) -> Result<f64> {
    let s = state.in_position();
    let labels = obs.labels();
    let dim = 2 * labels.len();
    for l in labels {
        s.continuous(l)?;
    }
    let needed: Vec<usize> = (0..dim)
        .filter(|&i| obs.lin()[i] != 0.0 || (0..dim).any(|j| obs.quad()[(i, j)] != 0.0))
        .collect();
    let mut applied: Vec<Option<ArrayD<C64>>> = vec![None; dim];
    for &i in &needed {
        let op = obs.op(i);
        applied[i] = Some(apply_canonical(&s, &op)?);
    }
    let w = s.measure_product();
    let dot = |a: &ArrayD<C64>, b: &ArrayD<C64>| -> C64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>() * w
    };
    let mut total = obs.constant() * s.norm_sqr();
    for &i in &needed {
        let vi = applied[i].as_ref().expect("computed");
        if obs.lin()[i] != 0.0 {
            total += obs.lin()[i] * dot(&s.amps, vi).re;
        }
        for &j in &needed {
            let q = obs.quad()[(i, j)];
            if q != 0.0 {
                total += q * dot(vi, applied[j].as_ref().expect("computed")).re;
            }
        }
    }
    Ok(total)
}

/// `x_label psi` or `p_label psi` in position representation.
pub fn apply_canonical(state: &MultiState, op: &Op) -> Result<ArrayD<C64>> {
    let s = state.in_position();
    let (label, momentum) = match op {
        Op::X(l) => (l.as_str(), false),
        Op::P(l) => (l.as_str(), true),
    };
    let axis = s.axis(label)?;
    let (grid, _) = s.continuous(label)?;
    let mut a = s.amps.clone();
    if momentum {
        kernel::dft_axis(&mut a, axis, &grid, Direction::Forward);
        kernel::for_each_lane(&mut a, axis, |_, lane| {
            for (j, v) in lane.iter_mut().enumerate() {
                *v *= grid.p(j);
            }
        });
        kernel::dft_axis(&mut a, axis, &grid, Direction::Inverse);
    } else {
        kernel::for_each_lane(&mut a, axis, |_, lane| {
            for (k, v) in lane.iter_mut().enumerate() {
                *v *= grid.x(k);
            }
        });
    }
    Ok(a)
}

/// Photon state in the zero/one-photon sector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState {
    pub vacuum_amplitude: C64,
    pub mode: Array1<C64>,
    pub grid: Grid1D,
    pub omega_ref: f64,
    pub c: f64,
}

impl PhotonState {
    pub fn new(vacuum_amplitude: C64, mode: Array1<C64>, grid: Grid1D, omega_ref: f64, c: f64) -> Result<Self> {
        if mode.len() != grid.n() {
            return Err(QrfError::Dimension("photon mode length differs from its grid".into()));
        }
        let s = Self {
            vacuum_amplitude,
            mode,
            grid,
            omega_ref,
            c,
        };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(QrfError::NotNormalized(n.sqrt()));
        }
        Ok(s)
    }

    /// One photon sharp at the grid frequency `omega`.
    pub fn sharp(grid: Grid1D, omega_ref: f64, c: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(QrfError::InvalidParameter(format!("photon frequency must be positive, got {omega}")));
        }
        let u = (omega / omega_ref).ln();
        let k = grid.index_of(u).ok_or(QrfError::OffGrid { what: "omega", value: omega })?;
        let mut mode = Array1::<C64>::zeros(grid.n());
        mode[k] = C64::new(1.0 / grid.dx().sqrt(), 0.0);
        Self::new(C64::new(0.0, 0.0), mode, grid, omega_ref, c)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.vacuum_amplitude.norm_sqr() + self.mode.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// The one-photon mode as a labeled axis; requires an empty vacuum component.
    pub fn labeled(&self, label: &str) -> Result<MultiState> {
        if self.vacuum_amplitude.norm() > 1e-12 {
            return Err(QrfError::Unsupported("photon axes carry only the one-photon sector".into()));
        }
        MultiState::new(
            vec![Subsystem::photon(label, self.grid, self.omega_ref, self.c)],
            self.mode.clone().into_dyn(),
            Frame::new("C", 1.0),
            0.0,
        )
    }
}

/// Single discrete axis in the named level.
pub fn level_state(label: &str, levels: Vec<Level>, occupied: &str) -> Result<MultiState> {
    let k = levels
        .iter()
        .position(|l| l.name == occupied)
        .ok_or_else(|| QrfError::UnknownLabel(occupied.to_string()))?;
    let mut amps = ArrayD::<C64>::zeros(IxDyn(&[levels.len()]));
    amps[[k]] = C64::new(1.0, 0.0);
    MultiState::new(vec![Subsystem::discrete(label, levels)], amps, Frame::new("C", 1.0), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::QuadObservable;

    fn g256() -> Grid1D {
        Grid1D::new(256, 0.1).unwrap()
    }

    #[test]
    fn coherent_moments_match_construction() {
        let w = coherent_state(g256(), 2.0, 1.0, 0.5).unwrap();
        let s = w.labeled("A", 1.0).unwrap();
        let x = expectation(&s, &QuadObservable::x("A")).unwrap();
        let p = expectation(&s, &QuadObservable::p("A")).unwrap();
        let x2 = expectation(&s, &QuadObservable::x("A").square()).unwrap();
        let p2 = expectation(&s, &QuadObservable::p("A").square()).unwrap();
        assert!((x - 2.0).abs() < 1e-6);
        assert!((p - 1.0).abs() < 1e-6);
        let sx = (x2 - x * x).sqrt();
        let sp = (p2 - p * p).sqrt();
        assert!((sx * sp - 0.5).abs() < 1e-6, "{}", sx * sp);
    }

    #[test]
    fn coherent_rejects_narrow_and_overflowing() {
        assert!(coherent_state(g256(), 0.0, 0.0, 0.15).is_err());
        assert!(matches!(
            coherent_state(g256(), 11.0, 0.0, 1.0),
            Err(QrfError::SupportOverflow { .. })
        ));
    }

    #[test]
    fn sharp_state_requires_lattice_point() {
        assert!(sharp_state(g256(), 0.05).is_err());
        let w = sharp_state(g256(), 0.3).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-14);
        let s = w.labeled("A", 1.0).unwrap();
        assert!((expectation(&s, &QuadObservable::x("A")).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn sharp_state_has_flat_momentum_magnitude_and_linear_phase() {
        let g = Grid1D::new(64, 0.25).unwrap();
        let x0 = 5.0 * g.dx();
        let s = sharp_state(g, x0).unwrap().labeled("A", 1.0).unwrap().to_momentum_rep("A").unwrap();
        let phi: Vec<C64> = s.amps().iter().copied().collect();
        let mag = phi[0].norm();
        for j in 0..64 {
            assert!((phi[j].norm() - mag).abs() < 1e-12);
            let expect = C64::from_polar(mag, -g.p(j) * x0);
            assert!((phi[j] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn momentum_width_of_gaussian() {
        let sigma = 0.8;
        let s = coherent_state(g256(), 0.0, 0.0, sigma).unwrap().labeled("A", 1.0).unwrap();
        let p2 = expectation(&s, &QuadObservable::p("A").square()).unwrap();
        assert!((p2.sqrt() - 1.0 / (2.0 * sigma)).abs() < 1e-6);
        let m = s.to_momentum_rep("A").unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-12);
        let back = m.from_momentum_rep("A").unwrap();
        assert!(back.distance(&s).unwrap() < 1e-12);
    }

    #[test]
    fn correlated_pair_has_half_purity_and_ln2_entropy() {
        let g = Grid1D::new(32, 0.5).unwrap();
        let a1 = sharp_state(g, -2.0).unwrap().labeled("A", 1.0).unwrap();
        let b1 = sharp_state(g, 1.0).unwrap().labeled("B", 1.0).unwrap();
        let a2 = sharp_state(g, 3.0).unwrap().labeled("A", 1.0).unwrap();
        let b2 = sharp_state(g, 6.0).unwrap().labeled("B", 1.0).unwrap();
        let t1 = tensor(&[&a1, &b1]).unwrap();
        let t2 = tensor(&[&a2, &b2]).unwrap();
        let amps = t1.amps() + t2.amps();
        let s = MultiState::normalized(t1.subsystems().to_vec(), amps, Frame::new("C", 1.0), 0.0).unwrap();
        assert!((s.purity(&["A"]).unwrap() - 0.5).abs() < 1e-12);
        assert!((s.schmidt_entropy(&["B"]).unwrap() - 2f64.ln()).abs() < 1e-8);
        let rel = QuadObservable::x("B").sub(&QuadObservable::x("A"));
        assert!((expectation(&s, &rel).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bipartition_errors() {
        let g = Grid1D::new(8, 0.5).unwrap();
        let a = sharp_state(g, 0.0).unwrap().labeled("A", 1.0).unwrap();
        let b = sharp_state(g, 0.0).unwrap().labeled("B", 1.0).unwrap();
        let s = tensor(&[&a, &b]).unwrap();
        assert!(s.reduced_density(&[]).is_err());
        assert!(s.reduced_density(&["A", "B"]).is_err());
        assert!(tensor(&[&a, &a]).is_err());
    }

    #[test]
    fn rescale_scales_width() {
        let s = coherent_state(g256(), 0.0, 0.0, 0.5).unwrap().labeled("A", 1.0).unwrap();
        let r = s.rescale_axis("A", 2.0).unwrap();
        assert!((r.norm() - 1.0).abs() < 1e-14);
        let x2 = expectation(&r, &QuadObservable::x("A").square()).unwrap();
        assert!((x2.sqrt() - 1.0).abs() < 1e-10);
        assert!(s.rescale_axis("A", 0.0).is_err());
        assert_eq!(s.rescale_axis("A", 1.0).unwrap(), s);
    }

    #[test]
    fn photon_state_sharp_is_normalized() {
        let g = Grid1D::new(16, 0.01).unwrap();
        let p = PhotonState::sharp(g, 1.0, 137.0, 1.0).unwrap();
        assert!((p.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(p.labeled("B").is_ok());
    }
}
