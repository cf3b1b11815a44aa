//! Explicit-matrix oracle for tiny grids.
//!
//! Operators are products of per-axis matrices (direct DFT sums, parity
//! permutations, generator exponentials) and joint diagonal phases, applied
//! with plain index arithmetic. Nothing here goes through the FFT or the lane
//! kernel, so agreement with `operators` is an independent check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{QrfError, Result};
use crate::grid::Grid1D;
use crate::operators::{Family, QrfUnitary};
use crate::phase_space::{Op, PhaseSpaceMap};
use crate::state::{AxisKind, Frame, MultiState, Rep, Subsystem};

/// Largest joint dimension for which a full matrix is materialized.
pub const DENSE_LIMIT: usize = 4096;

/// Unitary DFT on normalized amplitudes: `F[j,k] = exp(-i p_j x_k / hbar) / sqrt(n)`.
pub fn dft_matrix(g: &Grid1D) -> DMatrix<C64> {
    let n = g.n();
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |j, k| C64::from_polar(s, -g.p(j) * g.x(k) / g.hbar()))
}

/// Permutation matrix of `k -> (n - k) mod n`.
pub fn parity_matrix(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |r, c| if r == (n - c) % n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Discretized position operator of one grid.
pub fn x_matrix(g: &Grid1D) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_iterator(g.n(), g.positions().into_iter().map(|x| C64::new(x, 0.0))))
}

/// Discretized momentum operator `F^dagger diag(p) F`.
pub fn p_matrix(g: &Grid1D) -> DMatrix<C64> {
    let f = dft_matrix(g);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(g.n(), g.momenta().into_iter().map(|p| C64::new(p, 0.0))));
    f.adjoint() * d * f
}

/// `exp(i H)` for a Hermitian matrix, through its eigendecomposition.
pub fn expi_hermitian(h: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(h.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, l)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone)]
enum Step {
    /// Matrix acting on one axis.
    Axis { axis: usize, m: DMatrix<C64> },
    /// Diagonal in the joint position basis.
    Diag(Vec<C64>),
    /// Block-diagonal controlled operator: `blocks[k]` acts on `target`
    /// where `control` has index `k`.
    Controlled {
        control: usize,
        target: usize,
        blocks: Vec<DMatrix<C64>>,
    },
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn unravel(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        idx[a] = i % dims[a];
        i /= dims[a];
    }
    idx
}

fn apply_lane_matrix(dims: &[usize], axis: usize, v: &mut [C64], pick: impl Fn(usize) -> Option<(usize, usize)>, mats: &[DMatrix<C64>]) {
    let st = strides(dims);
    let n = dims[axis];
    let total: usize = dims.iter().product();
    let mut lane = DVector::<C64>::zeros(n);
    for base in 0..total {
        if (base / st[axis]) % n != 0 {
            continue;
        }
        let Some((_, which)) = pick(base) else { continue };
        for k in 0..n {
            lane[k] = v[base + k * st[axis]];
        }
        let out = &mats[which] * &lane;
        for k in 0..n {
            v[base + k * st[axis]] = out[k];
        }
    }
}

impl Step {
    fn apply(&self, dims: &[usize], v: &mut [C64]) {
        match self {
            Step::Axis { axis, m } => apply_lane_matrix(dims, *axis, v, |b| Some((b, 0)), std::slice::from_ref(m)),
            Step::Diag(d) => v.iter_mut().zip(d).for_each(|(x, y)| *x *= y),
            Step::Controlled { control, target, blocks } => {
                let st = strides(dims);
                let n = dims[*control];
                apply_lane_matrix(dims, *target, v, |b| Some((b, (b / st[*control]) % n)), blocks)
            }
        }
    }

    fn adjoint(&self) -> Step {
        match self {
            Step::Axis { axis, m } => Step::Axis {
                axis: *axis,
                m: m.adjoint(),
            },
            Step::Diag(d) => Step::Diag(d.iter().map(|z| z.conj()).collect()),
            Step::Controlled { control, target, blocks } => Step::Controlled {
                control: *control,
                target: *target,
                blocks: blocks.iter().map(|b| b.adjoint()).collect(),
            },
        }
    }
}

fn grid_of(sub: &Subsystem) -> Result<Grid1D> {
    sub.kind.grid().copied().ok_or_else(|| QrfError::NotContinuous(sub.label.clone()))
}

/// Coordinates of an axis in a representation.
fn axis_coords(sub: &Subsystem, rep: Rep) -> Result<Vec<f64>> {
    match (&sub.kind, rep) {
        (AxisKind::Discrete { levels }, Rep::Position) => Ok(levels.iter().map(|l| l.energy).collect()),
        (_, Rep::Position) => Ok(grid_of(sub)?.positions()),
        (_, Rep::Momentum) => Ok(grid_of(sub)?.momenta()),
    }
}

/// Builder for a product of explicit factors over a fixed list of axes.
struct Circuit {
    subs: Vec<Subsystem>,
    steps: Vec<Step>,
}

impl Circuit {
    fn dims(&self) -> Vec<usize> {
        self.subs.iter().map(|s| s.kind.len()).collect()
    }

    fn axis(&self, label: &str) -> Result<usize> {
        self.subs
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| QrfError::UnknownLabel(label.to_string()))
    }

    /// `exp(i f(coords))` with each listed axis read in its representation.
    fn phase(&mut self, axes: &[(&str, Rep)], f: impl Fn(&[f64]) -> f64) -> Result<()> {
        let dims = self.dims();
        let mut ax = Vec::new();
        let mut coords = Vec::new();
        for (l, r) in axes {
            let a = self.axis(l)?;
            coords.push(axis_coords(&self.subs[a], *r)?);
            ax.push((a, *r));
        }
        for &(a, r) in &ax {
            if r == Rep::Momentum {
                self.steps.push(Step::Axis {
                    axis: a,
                    m: dft_matrix(&grid_of(&self.subs[a])?),
                });
            }
        }
        let total: usize = dims.iter().product();
        let mut buf = vec![0.0; ax.len()];
        let diag = (0..total)
            .map(|i| {
                let idx = unravel(i, &dims);
                for (j, &(a, _)) in ax.iter().enumerate() {
                    buf[j] = coords[j][idx[a]];
                }
                C64::from_polar(1.0, f(&buf))
            })
            .collect();
        self.steps.push(Step::Diag(diag));
        for &(a, r) in &ax {
            if r == Rep::Momentum {
                self.steps.push(Step::Axis {
                    axis: a,
                    m: dft_matrix(&grid_of(&self.subs[a])?).adjoint(),
                });
            }
        }
        Ok(())
    }

    fn parity(&mut self, label: &str, to: Subsystem) -> Result<()> {
        let a = self.axis(label)?;
        self.steps.push(Step::Axis {
            axis: a,
            m: parity_matrix(self.subs[a].kind.len()),
        });
        self.subs[a] = to;
        Ok(())
    }

    /// Controlled `exp(i v(p_a) G_b / hbar)` with the generator exponentiated
    /// exactly on the target grid for every control momentum.
    fn boost(&mut self, a: &str, ma: f64, b: &str, mb: f64, t: f64) -> Result<()> {
        let ia = self.axis(a)?;
        let ib = self.axis(b)?;
        let ga = grid_of(&self.subs[ia])?;
        let gb = grid_of(&self.subs[ib])?;
        let g = p_matrix(&gb) * C64::new(t, 0.0) - x_matrix(&gb) * C64::new(mb, 0.0);
        let eig = SymmetricEigen::new(g);
        let blocks = ga
            .momenta()
            .into_iter()
            .map(|p| {
                let v = p / ma;
                let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, v * l / gb.hbar())));
                &eig.eigenvectors * d * eig.eigenvectors.adjoint()
            })
            .collect();
        let f = dft_matrix(&ga);
        self.steps.push(Step::Axis { axis: ia, m: f.clone() });
        self.steps.push(Step::Controlled {
            control: ia,
            target: ib,
            blocks,
        });
        self.steps.push(Step::Axis { axis: ia, m: f.adjoint() });
        Ok(())
    }
}

/// Explicit realization of a frame change on a fixed set of axes.
#[derive(Debug, Clone)]
pub struct DenseUnitary {
    pub input: Vec<Subsystem>,
    pub output: Vec<Subsystem>,
    pub input_frame: Frame,
    pub output_frame: Frame,
    steps: Vec<Step>,
}

fn masses_of(template: &MultiState, label: &str) -> Result<f64> {
    template.mass_of(label)
}

/// Builds the explicit realization of `u` on the axes of `template`.
pub fn dense_unitary(u: &QrfUnitary, template: &MultiState) -> Result<DenseUnitary> {
    let fc = &u.frames;
    let subs = template.subsystems().to_vec();
    let dim: usize = subs.iter().map(|s| s.kind.len()).product();
    if dim > DENSE_LIMIT {
        return Err(QrfError::DenseOverflow { dim, limit: DENSE_LIMIT });
    }
    if template.frame().label != fc.old_frame {
        return Err(QrfError::LabelMismatch(format!(
            "template is in frame `{}`, transformation expects `{}`",
            template.frame().label,
            fc.old_frame
        )));
    }
    let a = fc.new_frame.as_str();
    let c = fc.old_frame.as_str();
    let ma = masses_of(template, a)?;
    let mc = template.frame().mass;
    let mut k = Circuit { subs, steps: Vec::new() };
    let ia = k.axis(a)?;
    let ga = grid_of(&k.subs[ia])?;
    let hbar = ga.hbar();
    let plain_parity = |k: &mut Circuit| k.parity(a, Subsystem::continuous(c, ga, mc));
    let velocity_parity = |k: &mut Circuit| k.parity(a, Subsystem::continuous(c, ga.scaled(ma / mc)?, mc));
    let translate = |k: &mut Circuit| -> Result<()> {
        for b in &fc.targets {
            let hb = grid_of(&k.subs[k.axis(b)?])?.hbar();
            k.phase(&[(a, Rep::Position), (b, Rep::Momentum)], |z| z[0] * z[1] / hb)?;
        }
        Ok(())
    };
    match &u.family {
        Family::Sx => {
            translate(&mut k)?;
            plain_parity(&mut k)?;
        }
        Family::Sp => {
            for b in &fc.targets {
                let hb = grid_of(&k.subs[k.axis(b)?])?.hbar();
                k.phase(&[(a, Rep::Momentum), (b, Rep::Position)], |z| -z[0] * z[1] / hb)?;
            }
            plain_parity(&mut k)?;
        }
        Family::ST { t, tau } => {
            let el = t - tau;
            k.phase(&[(a, Rep::Momentum)], |z| z[0] * z[0] * el / (2.0 * ma * hbar))?;
            translate(&mut k)?;
            plain_parity(&mut k)?;
            k.phase(&[(c, Rep::Momentum)], |z| -z[0] * z[0] * el / (2.0 * mc * hbar))?;
        }
        Family::Sb { t } => {
            let t = *t;
            k.phase(&[(a, Rep::Momentum)], |z| z[0] * z[0] * t / (2.0 * ma * hbar))?;
            for b in &fc.targets {
                let mb = masses_of(template, b)?;
                k.boost(a, ma, b, mb, t)?;
            }
            velocity_parity(&mut k)?;
            k.phase(&[(c, Rep::Momentum)], |z| -z[0] * z[0] * t / (2.0 * mc * hbar))?;
        }
        Family::Sv => {
            for b in &fc.targets {
                let mb = masses_of(template, b)?;
                k.boost(a, ma, b, mb, 0.0)?;
            }
            velocity_parity(&mut k)?;
        }
        Family::SD { t } => {
            let t = *t;
            let (photon, cl, hk) = photon_axis(&k, fc)?;
            k.phase(&[(a, Rep::Momentum)], |z| z[0] * z[0] * t / (2.0 * ma * hbar))?;
            k.phase(&[(a, Rep::Momentum), (&photon, Rep::Momentum)], |z| {
                -(1.0 + z[0] / (cl * ma)).ln() * z[1] / hk
            })?;
            velocity_parity(&mut k)?;
            k.phase(&[(c, Rep::Momentum)], |z| -z[0] * z[0] * t / (2.0 * mc * hbar))?;
        }
        Family::SDInverse { t } => {
            let t = *t;
            let (photon, cl, hk) = photon_axis(&k, fc)?;
            k.phase(&[(a, Rep::Momentum)], |z| z[0] * z[0] * t / (2.0 * ma * hbar))?;
            velocity_parity(&mut k)?;
            k.phase(&[(c, Rep::Momentum), (&photon, Rep::Momentum)], |z| {
                (1.0 + z[0] / (cl * mc)).ln() * z[1] / hk
            })?;
            k.phase(&[(c, Rep::Momentum)], |z| -z[0] * z[0] * t / (2.0 * mc * hbar))?;
        }
        Family::SEP(_) => {
            return Err(QrfError::Unsupported("no explicit realization of the equivalence-principle operator".into()));
        }
    }
    Ok(DenseUnitary {
        input: template.subsystems().to_vec(),
        output: k.subs,
        input_frame: template.frame().clone(),
        output_frame: Frame::new(a, ma),
        steps: k.steps,
    })
}

fn photon_axis(k: &Circuit, fc: &crate::phase_space::FrameChange) -> Result<(String, f64, f64)> {
    let b = fc
        .targets
        .first()
        .ok_or_else(|| QrfError::InvalidParameter("the Doppler transformation needs a photon target".into()))?;
    match &k.subs[k.axis(b)?].kind {
        AxisKind::Photon { c, grid, .. } => Ok((b.clone(), *c, grid.hbar())),
        _ => Err(QrfError::InvalidParameter(format!("`{b}` is not a photon axis"))),
    }
}

/// Parity swap as an explicit permutation.
pub fn dense_parity_swap(template: &MultiState, from: &str, to: &str) -> Result<DenseUnitary> {
    let mut k = Circuit {
        subs: template.subsystems().to_vec(),
        steps: Vec::new(),
    };
    let (g, m) = template.continuous(from)?;
    k.parity(from, Subsystem::continuous(to, g, m))?;
    Ok(DenseUnitary {
        input: template.subsystems().to_vec(),
        output: k.subs,
        input_frame: template.frame().clone(),
        output_frame: template.frame().clone(),
        steps: k.steps,
    })
}

/// Normalized position-basis amplitudes `psi * sqrt(measure)`.
pub fn to_vector(state: &MultiState) -> DVector<C64> {
    let s = state.in_position();
    let w: f64 = s.subsystems().iter().map(|x| x.kind.measure()).product::<f64>().sqrt();
    DVector::from_iterator(s.amps().len(), s.amps().iter().map(|z| z * w))
}

pub fn from_vector(v: &DVector<C64>, subs: &[Subsystem], frame: &Frame, time: f64) -> Result<MultiState> {
    let dims: Vec<usize> = subs.iter().map(|s| s.kind.len()).collect();
    let w: f64 = subs.iter().map(|x| x.kind.measure()).product::<f64>().sqrt();
    let amps = ArrayD::from_shape_vec(IxDyn(&dims), v.iter().map(|z| z / w).collect())
        .map_err(|e| QrfError::Dimension(e.to_string()))?;
    MultiState::new(subs.to_vec(), amps, frame.clone(), time)
}

impl DenseUnitary {
    pub fn dim(&self) -> usize {
        self.input.iter().map(|s| s.kind.len()).product()
    }

    fn dims(&self) -> Vec<usize> {
        self.input.iter().map(|s| s.kind.len()).collect()
    }

    pub fn apply_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        let dims = self.dims();
        let mut w = v.as_slice().to_vec();
        for s in &self.steps {
            s.apply(&dims, &mut w);
        }
        DVector::from_vec(w)
    }

    pub fn apply_adjoint_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        let dims = self.dims();
        let mut w = v.as_slice().to_vec();
        for s in self.steps.iter().rev() {
            s.adjoint().apply(&dims, &mut w);
        }
        DVector::from_vec(w)
    }

    /// Applies the realization to a state whose axes match the template.
    pub fn apply(&self, state: &MultiState) -> Result<MultiState> {
        let labels: Vec<&str> = self.input.iter().map(|s| s.label.as_str()).collect();
        let s = state.aligned_to(&labels)?;
        let out = self.apply_vec(&to_vector(&s));
        from_vector(&out, &self.output, &self.output_frame, state.time())
    }

    /// Full matrix, column by column.
    pub fn matrix(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        let mut e = DVector::<C64>::zeros(d);
        for j in 0..d {
            e[j] = C64::new(1.0, 0.0);
            m.set_column(j, &self.apply_vec(&e));
            e[j] = C64::new(0.0, 0.0);
        }
        m
    }

    /// `||U^dagger U - 1||_F`
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.matrix();
        (m.adjoint() * &m - DMatrix::<C64>::identity(m.nrows(), m.ncols())).norm()
    }
}

/// Matrix-free linear operator on a list of axes.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    subs: Vec<Subsystem>,
    steps: Vec<Step>,
    /// Multiple of the identity added after the steps.
    constant: f64,
}

impl DenseOperator {
    fn single(subs: &[Subsystem], label: &str, rep: Rep, f: impl Fn(f64) -> f64) -> Result<Self> {
        let k = Circuit {
            subs: subs.to_vec(),
            steps: Vec::new(),
        };
        let a = k.axis(label)?;
        let dims = k.dims();
        let coords = axis_coords(&subs[a], rep)?;
        let total: usize = dims.iter().product();
        let diag: Vec<C64> = (0..total).map(|i| C64::new(f(coords[unravel(i, &dims)[a]]), 0.0)).collect();
        let mut steps = Vec::new();
        if rep == Rep::Momentum {
            steps.push(Step::Axis {
                axis: a,
                m: dft_matrix(&grid_of(&subs[a])?),
            });
        }
        steps.push(Step::Diag(diag));
        if rep == Rep::Momentum {
            steps.push(Step::Axis {
                axis: a,
                m: dft_matrix(&grid_of(&subs[a])?).adjoint(),
            });
        }
        Ok(Self {
            subs: subs.to_vec(),
            steps,
            constant: 0.0,
        })
    }

    /// `f(x_label)` or `f(p_label)`.
    pub fn function(subs: &[Subsystem], label: &str, rep: Rep, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::single(subs, label, rep, f)
    }

    pub fn coordinate(subs: &[Subsystem], op: &Op) -> Result<Self> {
        match op {
            Op::X(l) => Self::single(subs, l, Rep::Position, |x| x),
            Op::P(l) => Self::single(subs, l, Rep::Momentum, |p| p),
        }
    }

    pub fn apply_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        let dims: Vec<usize> = self.subs.iter().map(|s| s.kind.len()).collect();
        let mut w = v.as_slice().to_vec();
        for s in &self.steps {
            s.apply(&dims, &mut w);
        }
        DVector::from_vec(w) + v * C64::new(self.constant, 0.0)
    }
}

/// Linear combination of coordinate operators.
fn linear_apply(subs: &[Subsystem], obs: &crate::phase_space::QuadObservable, v: &DVector<C64>) -> Result<DVector<C64>> {
    if !obs.is_linear() {
        return Err(QrfError::Unsupported("only linear images are probed".into()));
    }
    let mut out = v * C64::new(obs.constant(), 0.0);
    for i in 0..obs.lin().len() {
        let c = obs.lin()[i];
        if c != 0.0 {
            out += DenseOperator::coordinate(subs, &obs.op(i))?.apply_vec(v) * C64::new(c, 0.0);
        }
    }
    Ok(out)
}

/// Gram-Schmidt over probe vectors, dropping near-dependent ones.
pub fn orthonormal_probes(probes: &[MultiState]) -> Vec<DVector<C64>> {
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for p in probes {
        let mut v = to_vector(p);
        for b in &basis {
            let c = b.dotc(&v);
            v -= b * c;
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / C64::new(n, 0.0));
        }
    }
    basis
}

/// Position-basis rows whose grid coordinates all lie within a third of each
/// grid's half-width. Rows outside can pick up periodic wraparound.
pub fn interior_mask(subs: &[Subsystem]) -> Vec<bool> {
    let dims: Vec<usize> = subs.iter().map(|s| s.kind.len()).collect();
    let total: usize = dims.iter().product();
    (0..total)
        .map(|i| {
            let idx = unravel(i, &dims);
            subs.iter().zip(&idx).all(|(s, &k)| match s.kind.grid() {
                Some(g) => g.x(k).abs() <= g.half_width() / 3.0,
                None => true,
            })
        })
        .collect()
}

/// `||M (U A U^dagger - B) Pi||_F` with `Pi` the projector on the probes and
/// `M` the row mask.
pub fn probe_residual(
    u: &DenseUnitary,
    a: impl Fn(&DVector<C64>) -> Result<DVector<C64>>,
    b: impl Fn(&DVector<C64>) -> Result<DVector<C64>>,
    probes: &[DVector<C64>],
    mask: &[bool],
) -> Result<f64> {
    let mut sum = 0.0;
    for phi in probes {
        let lhs = u.apply_vec(&a(&u.apply_adjoint_vec(phi))?);
        let rhs = b(phi)?;
        sum += (lhs - rhs)
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(z, _)| z.norm_sqr())
            .sum::<f64>();
    }
    Ok(sum.sqrt())
}

/// Largest probe-restricted Frobenius error between `U z U^dagger` and the
/// image predicted by `map`, over every input coordinate of the map.
/// `probes` live on the output axes.
pub fn conjugation_residual(u: &DenseUnitary, map: &PhaseSpaceMap, probes: &[MultiState]) -> Result<f64> {
    let basis = orthonormal_probes(probes);
    let mask = interior_mask(&u.output);
    let mut worst = 0.0f64;
    for l in &map.in_labels {
        for op in [Op::X(l.clone()), Op::P(l.clone())] {
            let z = DenseOperator::coordinate(&u.input, &op)?;
            let img = map.image(&op)?;
            let r = probe_residual(
                u,
                |v| Ok(z.apply_vec(v)),
                |v| linear_apply(&u.output, &img, v),
                &basis,
                &mask,
            )?;
            worst = worst.max(r);
        }
    }
    Ok(worst)
}
