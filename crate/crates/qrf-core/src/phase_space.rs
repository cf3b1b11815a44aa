//! Affine symplectic maps on labeled phase-space operator vectors.
//!
//! A [`PhaseSpaceMap`] stores, row by row, the image of each input operator
//! `(x_1, p_1, ..., x_N, p_N)` as a linear combination of output operators
//! plus a constant. Maps built from the frame-change catalogue also keep a
//! symbolic form of every coefficient for printing.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{QrfError, Result};
use crate::state::{AxisKind, MultiState};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    X(String),
    P(String),
}

impl Op {
    pub fn label(&self) -> &str {
        match self {
            Op::X(l) | Op::P(l) => l,
        }
    }

    fn slot(&self) -> usize {
        match self {
            Op::X(_) => 0,
            Op::P(_) => 1,
        }
    }

    fn input_name(&self) -> String {
        match self {
            Op::X(l) => format!("x_{l}"),
            Op::P(l) => format!("p_{l}"),
        }
    }

    fn output_name(&self) -> String {
        match self {
            Op::X(l) => format!("q_{l}"),
            Op::P(l) => format!("pi_{l}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Masses(BTreeMap<String, f64>);

impl Masses {
    pub fn new(pairs: &[(&str, f64)]) -> Result<Self> {
        let mut m = Masses::default();
        for (l, v) in pairs {
            m.insert(l, *v)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, label: &str, mass: f64) -> Result<()> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(QrfError::InvalidParameter(format!("mass of `{label}` must be positive, got {mass}")));
        }
        self.0.insert(label.to_string(), mass);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Result<f64> {
        self.0
            .get(label)
            .copied()
            .ok_or_else(|| QrfError::UnknownLabel(format!("mass of {label}")))
    }

    /// Masses of every continuous axis plus the frame.
    pub fn from_state(state: &MultiState) -> Self {
        let mut m = Masses::default();
        for s in state.subsystems() {
            if let AxisKind::Continuous { mass, .. } = s.kind {
                m.0.insert(s.label.clone(), mass);
            }
        }
        m.0.insert(state.frame().label.clone(), state.frame().mass);
        m
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// One symbolic factor of a catalogue coefficient.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// `m_a / m_b`
    Ratio(String, String),
    /// `1 / m_a`
    InvMass(String),
    /// `t`
    Time,
    /// `t - tau`
    Elapsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coef {
    pub negative: bool,
    pub factors: Vec<Factor>,
}

impl Coef {
    pub fn one() -> Self {
        Coef {
            negative: false,
            factors: vec![],
        }
    }

    pub fn neg(mut self) -> Self {
        self.negative = !self.negative;
        self
    }

    pub fn ratio(a: &str, b: &str) -> Self {
        Coef {
            negative: false,
            factors: vec![Factor::Ratio(a.into(), b.into())],
        }
    }

    pub fn inv(a: &str) -> Self {
        Coef {
            negative: false,
            factors: vec![Factor::InvMass(a.into())],
        }
    }

    pub fn times(mut self, f: Factor) -> Self {
        self.factors.push(f);
        self
    }

    pub fn eval(&self, masses: &Masses, t: f64, tau: f64) -> Result<f64> {
        let mut v = if self.negative { -1.0 } else { 1.0 };
        for f in &self.factors {
            v *= match f {
                Factor::Ratio(a, b) => masses.get(a)? / masses.get(b)?,
                Factor::InvMass(a) => 1.0 / masses.get(a)?,
                Factor::Time => t,
                Factor::Elapsed => t - tau,
            };
        }
        Ok(v)
    }

    fn body(&self) -> String {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Ratio(a, b) => format!("(m_{a}/m_{b})"),
                Factor::InvMass(a) => format!("(1/m_{a})"),
                Factor::Time => "t".to_string(),
                Factor::Elapsed => "(t-tau)".to_string(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicRow {
    pub input: Op,
    pub terms: Vec<(Coef, Op)>,
}

impl fmt::Display for SymbolicRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.input.input_name())?;
        if self.terms.is_empty() {
            return write!(f, " 0");
        }
        for (i, (c, op)) in self.terms.iter().enumerate() {
            let body = c.body();
            let piece = if body.is_empty() {
                op.output_name()
            } else {
                format!("{body} {}", op.output_name())
            };
            match (i, c.negative) {
                (0, false) => write!(f, " {piece}")?,
                (0, true) => write!(f, " -{piece}")?,
                (_, false) => write!(f, " + {piece}")?,
                (_, true) => write!(f, " - {piece}")?,
            }
        }
        Ok(())
    }
}

/// Symmetrically ordered observable
/// `sum_i c_i z_i + sum_ij Q_ij (z_i z_j + z_j z_i)/2 + k` over labeled
/// operators `z = (x_1, p_1, ..., x_N, p_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadObservable {
    labels: Vec<String>,
    lin: DVector<f64>,
    quad: DMatrix<f64>,
    constant: f64,
}

impl QuadObservable {
    pub fn zero(labels: &[&str]) -> Self {
        let d = 2 * labels.len();
        Self {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            lin: DVector::zeros(d),
            quad: DMatrix::zeros(d, d),
            constant: 0.0,
        }
    }

    pub fn from_parts(labels: Vec<String>, lin: DVector<f64>, quad: DMatrix<f64>, constant: f64) -> Result<Self> {
        let d = 2 * labels.len();
        if lin.len() != d || quad.nrows() != d || quad.ncols() != d {
            return Err(QrfError::Dimension("observable coefficient sizes".into()));
        }
        let sym = (&quad + quad.transpose()) * 0.5;
        Ok(Self {
            labels,
            lin,
            quad: sym,
            constant,
        })
    }

    pub fn constant_term(c: f64) -> Self {
        let mut o = Self::zero(&[]);
        o.constant = c;
        o
    }

    pub fn op(&self, i: usize) -> Op {
        let l = self.labels[i / 2].clone();
        if i % 2 == 0 {
            Op::X(l)
        } else {
            Op::P(l)
        }
    }

    pub fn of(op: &Op) -> Self {
        let mut o = Self::zero(&[op.label()]);
        o.lin[op.slot()] = 1.0;
        o
    }

    pub fn x(label: &str) -> Self {
        Self::of(&Op::X(label.into()))
    }

    pub fn p(label: &str) -> Self {
        Self::of(&Op::P(label.into()))
    }

    /// `p^2 / 2m`
    pub fn kinetic(label: &str, mass: f64) -> Self {
        Self::p(label).square().scale(0.5 / mass)
    }

    /// Boost generator `G = t p - m x`.
    pub fn boost_generator(label: &str, mass: f64, t: f64) -> Self {
        Self::p(label).scale(t).sub(&Self::x(label).scale(mass))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn lin(&self) -> &DVector<f64> {
        &self.lin
    }

    pub fn quad(&self) -> &DMatrix<f64> {
        &self.quad
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn is_linear(&self) -> bool {
        self.quad.iter().all(|v| *v == 0.0)
    }

    pub fn coefficient(&self, op: &Op) -> f64 {
        match self.labels.iter().position(|l| l == op.label()) {
            Some(i) => self.lin[2 * i + op.slot()],
            None => 0.0,
        }
    }

    pub fn quad_coefficient(&self, a: &Op, b: &Op) -> f64 {
        let ia = self.labels.iter().position(|l| l == a.label());
        let ib = self.labels.iter().position(|l| l == b.label());
        match (ia, ib) {
            (Some(i), Some(j)) => self.quad[(2 * i + a.slot(), 2 * j + b.slot())],
            _ => 0.0,
        }
    }

    /// Re-expresses the observable over `labels`, which must contain its own.
    pub fn embed(&self, labels: &[String]) -> Result<Self> {
        let d = 2 * labels.len();
        let mut pos = Vec::with_capacity(self.labels.len());
        for l in &self.labels {
            let i = labels
                .iter()
                .position(|m| m == l)
                .ok_or_else(|| QrfError::UnknownLabel(l.clone()))?;
            pos.push(i);
        }
        let mut lin = DVector::zeros(d);
        let mut quad = DMatrix::zeros(d, d);
        for (a, &ia) in pos.iter().enumerate() {
            for s in 0..2 {
                lin[2 * ia + s] = self.lin[2 * a + s];
                for (b, &ib) in pos.iter().enumerate() {
                    for r in 0..2 {
                        quad[(2 * ia + s, 2 * ib + r)] = self.quad[(2 * a + s, 2 * b + r)];
                    }
                }
            }
        }
        Ok(Self {
            labels: labels.to_vec(),
            lin,
            quad,
            constant: self.constant,
        })
    }

    fn union_labels(&self, other: &Self) -> Vec<String> {
        let mut l = self.labels.clone();
        for m in &other.labels {
            if !l.contains(m) {
                l.push(m.clone());
            }
        }
        l
    }

    pub fn add(&self, other: &Self) -> Self {
        let labels = self.union_labels(other);
        let a = self.embed(&labels).expect("superset");
        let b = other.embed(&labels).expect("superset");
        Self {
            labels,
            lin: a.lin + b.lin,
            quad: a.quad + b.quad,
            constant: a.constant + b.constant,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            labels: self.labels.clone(),
            lin: &self.lin * k,
            quad: &self.quad * k,
            constant: self.constant * k,
        }
    }

    pub fn plus_constant(&self, c: f64) -> Self {
        let mut o = self.clone();
        o.constant += c;
        o
    }

    /// Symmetrized product `(A B + B A) / 2` of two linear observables.
    pub fn sym_product(&self, other: &Self) -> Result<Self> {
        if !self.is_linear() || !other.is_linear() {
            return Err(QrfError::Unsupported("product of non-linear observables".into()));
        }
        let labels = self.union_labels(other);
        let a = self.embed(&labels)?;
        let b = other.embed(&labels)?;
        let quad = (&a.lin * b.lin.transpose() + &b.lin * a.lin.transpose()) * 0.5;
        let lin = &a.lin * b.constant + &b.lin * a.constant;
        Ok(Self {
            labels,
            lin,
            quad,
            constant: a.constant * b.constant,
        })
    }

    /// Square of a linear observable.
    pub fn square(&self) -> Self {
        self.sym_product(self).expect("square of a linear observable")
    }

    pub fn rename(&self, from: &str, to: &str) -> Self {
        let mut o = self.clone();
        for l in o.labels.iter_mut() {
            if l == from {
                *l = to.to_string();
            }
        }
        o
    }

    /// Swaps two labels.
    pub fn swap_labels(&self, a: &str, b: &str) -> Self {
        let mut o = self.clone();
        for l in o.labels.iter_mut() {
            if l == a {
                *l = b.to_string();
            } else if l == b {
                *l = a.to_string();
            }
        }
        o
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let labels = self.union_labels(other);
        let a = self.embed(&labels).expect("superset");
        let b = other.embed(&labels).expect("superset");
        let dl = (&a.lin - &b.lin).amax();
        let dq = (&a.quad - &b.quad).amax();
        dl.max(dq).max((a.constant - b.constant).abs())
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// Flattened coefficients over `labels`: linear part, upper triangle of
    /// the quadratic part, constant.
    fn to_vector(&self, labels: &[String]) -> Result<Vec<f64>> {
        let e = self.embed(labels)?;
        let d = 2 * labels.len();
        let mut v: Vec<f64> = e.lin.iter().copied().collect();
        for i in 0..d {
            for j in i..d {
                v.push(if i == j { e.quad[(i, j)] } else { 2.0 * e.quad[(i, j)] });
            }
        }
        v.push(e.constant);
        Ok(v)
    }

    /// Drops labels whose coefficients all vanish.
    pub fn trimmed(&self) -> Self {
        let keep: Vec<String> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                (0..2).any(|s| {
                    let r = 2 * i + s;
                    self.lin[r] != 0.0 || self.quad.row(r).iter().any(|v| *v != 0.0)
                })
            })
            .map(|(_, l)| l.clone())
            .collect();
        let mut o = Self::zero(&keep.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        for (a, l) in keep.iter().enumerate() {
            let i = self.labels.iter().position(|m| m == l).expect("kept label");
            for s in 0..2 {
                o.lin[2 * a + s] = self.lin[2 * i + s];
                for (b, m) in keep.iter().enumerate() {
                    let j = self.labels.iter().position(|k| k == m).expect("kept label");
                    for r in 0..2 {
                        o.quad[(2 * a + s, 2 * b + r)] = self.quad[(2 * i + s, 2 * j + r)];
                    }
                }
            }
        }
        o.constant = self.constant;
        o
    }
}

fn fmt_coef(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn push_term(out: &mut String, c: f64, name: &str) {
    if c == 0.0 {
        return;
    }
    let mag = c.abs();
    let body = if (mag - 1.0).abs() < 1e-15 && !name.is_empty() {
        name.to_string()
    } else if name.is_empty() {
        fmt_coef(mag)
    } else {
        format!("{} {name}", fmt_coef(mag))
    };
    if out.is_empty() {
        if c < 0.0 {
            out.push('-');
        }
        out.push_str(&body);
    } else {
        out.push_str(if c < 0.0 { " - " } else { " + " });
        out.push_str(&body);
    }
}

impl fmt::Display for QuadObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let d = self.lin.len();
        for i in 0..d {
            for j in i..d {
                let c = if i == j { self.quad[(i, j)] } else { 2.0 * self.quad[(i, j)] };
                let name = if i == j {
                    format!("{}^2", self.op(i).input_name())
                } else {
                    format!("{} {}", self.op(i).input_name(), self.op(j).input_name())
                };
                push_term(&mut out, c, &name);
            }
        }
        for i in 0..d {
            push_term(&mut out, self.lin[i], &self.op(i).input_name());
        }
        push_term(&mut out, self.constant, "");
        if out.is_empty() {
            out.push('0');
        }
        write!(f, "{out}")
    }
}

/// Which systems take part in a frame change: `new_frame` becomes the
/// reference, `old_frame` becomes an ordinary system, `targets` are relabeled
/// relative to the new frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameChange {
    pub new_frame: String,
    pub targets: Vec<String>,
    pub old_frame: String,
}

impl FrameChange {
    pub fn new(new_frame: &str, targets: &[&str], old_frame: &str) -> Self {
        Self {
            new_frame: new_frame.into(),
            targets: targets.iter().map(|s| s.to_string()).collect(),
            old_frame: old_frame.into(),
        }
    }

    /// From C's perspective to A's, relabeling B.
    pub fn standard() -> Self {
        Self::new("A", &["B"], "C")
    }

    fn in_labels(&self) -> Vec<String> {
        let mut v = vec![self.new_frame.clone()];
        v.extend(self.targets.iter().cloned());
        v
    }

    fn out_labels(&self) -> Vec<String> {
        let mut v = self.targets.clone();
        v.push(self.old_frame.clone());
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceMap {
    pub in_labels: Vec<String>,
    pub out_labels: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub shift: DVector<f64>,
    pub time_params: Option<(f64, f64)>,
    pub masses: Masses,
    symbolic: Option<Vec<SymbolicRow>>,
}

/// Standard symplectic form on `n` degrees of freedom.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(2 * i, 2 * i + 1)] = 1.0;
        o[(2 * i + 1, 2 * i)] = -1.0;
    }
    o
}

impl PhaseSpaceMap {
    fn from_rows(
        in_labels: Vec<String>,
        out_labels: Vec<String>,
        rows: Vec<SymbolicRow>,
        masses: &Masses,
        t: f64,
        tau: f64,
        time_params: Option<(f64, f64)>,
    ) -> Result<Self> {
        let d = 2 * in_labels.len();
        if out_labels.len() != in_labels.len() {
            return Err(QrfError::Dimension("maps must be square".into()));
        }
        let index = |labels: &[String], op: &Op| -> Result<usize> {
            let i = labels
                .iter()
                .position(|l| l == op.label())
                .ok_or_else(|| QrfError::UnknownLabel(op.label().to_string()))?;
            Ok(2 * i + op.slot())
        };
        let mut matrix = DMatrix::zeros(d, d);
        for row in &rows {
            let r = index(&in_labels, &row.input)?;
            for (c, op) in &row.terms {
                matrix[(r, index(&out_labels, op)?)] += c.eval(masses, t, tau)?;
            }
        }
        Ok(Self {
            in_labels,
            out_labels,
            matrix,
            shift: DVector::zeros(d),
            time_params,
            masses: masses.clone(),
            symbolic: Some(rows),
        })
    }

    pub fn identity(labels: &[&str]) -> Self {
        let l: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        let d = 2 * l.len();
        Self {
            in_labels: l.clone(),
            out_labels: l,
            matrix: DMatrix::identity(d, d),
            shift: DVector::zeros(d),
            time_params: None,
            masses: Masses::default(),
            symbolic: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.in_labels.len()
    }

    pub fn symbolic_rows(&self) -> Option<&[SymbolicRow]> {
        self.symbolic.as_deref()
    }

    /// One line per input operator image.
    pub fn table(&self) -> Vec<String> {
        if let Some(rows) = &self.symbolic {
            return rows.iter().map(|r| r.to_string()).collect();
        }
        let mut lines = Vec::new();
        for (i, l) in self.in_labels.iter().enumerate() {
            for (s, op) in [Op::X(l.clone()), Op::P(l.clone())].iter().enumerate() {
                let r = 2 * i + s;
                let mut out = String::new();
                for (j, m) in self.out_labels.iter().enumerate() {
                    push_term(&mut out, self.matrix[(r, 2 * j)], &Op::X(m.clone()).output_name());
                    push_term(&mut out, self.matrix[(r, 2 * j + 1)], &Op::P(m.clone()).output_name());
                }
                push_term(&mut out, self.shift[r], "");
                if out.is_empty() {
                    out.push('0');
                }
                lines.push(format!("{} -> {out}", op.input_name()));
            }
        }
        lines
    }

    /// `max |M^T Omega M - Omega|`.
    pub fn canonicity_residual(&self) -> f64 {
        let o = omega(self.dim());
        (self.matrix.transpose() * &o * &self.matrix - o).amax()
    }

    pub fn is_canonical(&self, tol: f64) -> bool {
        self.canonicity_residual() <= tol
    }

    /// Image of one input operator as an observable over the output labels.
    pub fn image(&self, op: &Op) -> Result<QuadObservable> {
        self.conjugate_observable(&QuadObservable::of(op))
    }

    fn permutation(from: &[String], to: &[String]) -> Result<DMatrix<f64>> {
        if from.len() != to.len() {
            return Err(QrfError::LabelMismatch(format!("{from:?} vs {to:?}")));
        }
        let d = 2 * from.len();
        let mut p = DMatrix::zeros(d, d);
        for (i, l) in from.iter().enumerate() {
            let j = to
                .iter()
                .position(|m| m == l)
                .ok_or_else(|| QrfError::LabelMismatch(format!("{from:?} vs {to:?}")))?;
            p[(2 * i, 2 * j)] = 1.0;
            p[(2 * i + 1, 2 * j + 1)] = 1.0;
        }
        Ok(p)
    }

    /// `outer o inner`: first `inner` (from its input frame to the shared
    /// frame), then `outer`.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self> {
        let pi = Self::permutation(&inner.out_labels, &outer.in_labels)?;
        let matrix = &inner.matrix * &pi * &outer.matrix;
        let shift = &inner.matrix * &pi * &outer.shift + &inner.shift;
        let mut masses = inner.masses.clone();
        for (l, m) in outer.masses.iter() {
            masses.0.insert(l.to_string(), m);
        }
        Ok(Self {
            in_labels: inner.in_labels.clone(),
            out_labels: outer.out_labels.clone(),
            matrix,
            shift,
            time_params: None,
            masses,
            symbolic: None,
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| QrfError::Unsupported("singular phase-space map".into()))?;
        let shift = -(&inv * &self.shift);
        Ok(Self {
            in_labels: self.out_labels.clone(),
            out_labels: self.in_labels.clone(),
            matrix: inv,
            shift,
            time_params: self.time_params,
            masses: self.masses.clone(),
            symbolic: None,
        })
    }

    /// Same map with rows and columns reordered to the given label orders.
    pub fn reordered(&self, in_labels: &[String], out_labels: &[String]) -> Result<Self> {
        let pin = Self::permutation(in_labels, &self.in_labels)?;
        let pout = Self::permutation(&self.out_labels, out_labels)?;
        Ok(Self {
            in_labels: in_labels.to_vec(),
            out_labels: out_labels.to_vec(),
            matrix: &pin * &self.matrix * &pout,
            shift: &pin * &self.shift,
            time_params: self.time_params,
            masses: self.masses.clone(),
            symbolic: None,
        })
    }

    /// Largest entry difference after aligning label orders.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let o = other.reordered(&self.in_labels, &self.out_labels)?;
        Ok((&self.matrix - &o.matrix).amax().max((&self.shift - &o.shift).amax()))
    }

    /// Image of a symmetrically ordered quadratic observable, by congruence.
    pub fn conjugate_observable(&self, obs: &QuadObservable) -> Result<QuadObservable> {
        let e = obs.embed(&self.in_labels)?;
        let m = &self.matrix;
        let s = &self.shift;
        let lin = m.transpose() * (&e.lin + &e.quad * s * 2.0);
        let quad = m.transpose() * &e.quad * m;
        let constant = e.constant + e.lin.dot(s) + (s.transpose() * &e.quad * s)[(0, 0)];
        QuadObservable::from_parts(self.out_labels.clone(), lin, quad, constant)
    }

    /// The input label that is not an output (the new frame) and the output
    /// label that is not an input (the old frame).
    pub fn swapped_pair(&self) -> Option<(String, String)> {
        let a = self.in_labels.iter().find(|l| !self.out_labels.contains(l))?;
        let c = self.out_labels.iter().find(|l| !self.in_labels.contains(l))?;
        Some((a.clone(), c.clone()))
    }
}

fn row(input: Op, terms: Vec<(Coef, Op)>) -> SymbolicRow {
    SymbolicRow { input, terms }
}

fn x(l: &str) -> Op {
    Op::X(l.into())
}

fn p(l: &str) -> Op {
    Op::P(l.into())
}

/// Relative-position frame change: `x_b -> q_b - q_c`, `x_a -> -q_c`,
/// `p_b -> pi_b`, `p_a -> -(pi_c + sum_b pi_b)`.
pub fn map_sx(fc: &FrameChange, masses: &Masses) -> Result<PhaseSpaceMap> {
    let (a, c) = (fc.new_frame.as_str(), fc.old_frame.as_str());
    let mut rows = vec![row(x(a), vec![(Coef::one().neg(), x(c))])];
    let mut pa = vec![(Coef::one().neg(), p(c))];
    for b in &fc.targets {
        pa.push((Coef::one().neg(), p(b)));
    }
    rows.push(row(p(a), pa));
    for b in &fc.targets {
        rows.push(row(x(b), vec![(Coef::one(), x(b)), (Coef::one().neg(), x(c))]));
        rows.push(row(p(b), vec![(Coef::one(), p(b))]));
    }
    PhaseSpaceMap::from_rows(fc.in_labels(), fc.out_labels(), rows, masses, 0.0, 0.0, None)
}

/// Relative-momentum frame change.
pub fn map_sp(fc: &FrameChange, masses: &Masses) -> Result<PhaseSpaceMap> {
    let (a, c) = (fc.new_frame.as_str(), fc.old_frame.as_str());
    let mut xa = vec![(Coef::one().neg(), x(c))];
    for b in &fc.targets {
        xa.push((Coef::one().neg(), x(b)));
    }
    let mut rows = vec![row(x(a), xa), row(p(a), vec![(Coef::one().neg(), p(c))])];
    for b in &fc.targets {
        rows.push(row(x(b), vec![(Coef::one(), x(b))]));
        rows.push(row(p(b), vec![(Coef::one(), p(b)), (Coef::one().neg(), p(c))]));
    }
    PhaseSpaceMap::from_rows(fc.in_labels(), fc.out_labels(), rows, masses, 0.0, 0.0, None)
}

/// Time-dependent translation between frames.
pub fn map_st(fc: &FrameChange, t: f64, tau: f64, masses: &Masses) -> Result<PhaseSpaceMap> {
    let (a, c) = (fc.new_frame.as_str(), fc.old_frame.as_str());
    let el = |coef: Coef| coef.times(Factor::Elapsed);
    let mut xa = vec![
        (Coef::one().neg(), x(c)),
        (el(Coef::inv(c)), p(c)),
    ];
    for b in &fc.targets {
        xa.push((el(Coef::inv(a)).neg(), p(b)));
    }
    xa.push((el(Coef::inv(a)).neg(), p(c)));
    let mut pa = vec![(Coef::one().neg(), p(c))];
    for b in &fc.targets {
        pa.push((Coef::one().neg(), p(b)));
    }
    let mut rows = vec![row(x(a), xa), row(p(a), pa)];
    for b in &fc.targets {
        rows.push(row(
            x(b),
            vec![(Coef::one(), x(b)), (Coef::one().neg(), x(c)), (el(Coef::inv(c)), p(c))],
        ));
        rows.push(row(p(b), vec![(Coef::one(), p(b))]));
    }
    PhaseSpaceMap::from_rows(fc.in_labels(), fc.out_labels(), rows, masses, t, tau, Some((t, tau)))
}

/// Boost between frames at time `t`.
pub fn map_sb(fc: &FrameChange, t: f64, masses: &Masses) -> Result<PhaseSpaceMap> {
    let (a, c) = (fc.new_frame.as_str(), fc.old_frame.as_str());
    let tm = |coef: Coef| coef.times(Factor::Time);
    let mut xa = vec![(Coef::ratio(c, a).neg(), x(c))];
    for b in &fc.targets {
        xa.push((Coef::ratio(b, a).neg(), x(b)));
    }
    for b in &fc.targets {
        xa.push((tm(Coef::inv(a)), p(b)));
    }
    xa.push((tm(Coef::inv(a)), p(c)));
    xa.push((tm(Coef::inv(c)).neg(), p(c)));
    let mut rows = vec![row(x(a), xa), row(p(a), vec![(Coef::ratio(a, c).neg(), p(c))])];
    for b in &fc.targets {
        rows.push(row(x(b), vec![(Coef::one(), x(b)), (tm(Coef::inv(c)).neg(), p(c))]));
        rows.push(row(p(b), vec![(Coef::one(), p(b)), (Coef::ratio(b, c).neg(), p(c))]));
    }
    PhaseSpaceMap::from_rows(fc.in_labels(), fc.out_labels(), rows, masses, t, 0.0, Some((t, 0.0)))
}

/// Instantaneous change to relative velocities; the boost at `t = 0`.
pub fn map_sv(fc: &FrameChange, masses: &Masses) -> Result<PhaseSpaceMap> {
    let (a, c) = (fc.new_frame.as_str(), fc.old_frame.as_str());
    let mut xa = vec![(Coef::ratio(c, a).neg(), x(c))];
    for b in &fc.targets {
        xa.push((Coef::ratio(b, a).neg(), x(b)));
    }
    let mut rows = vec![row(x(a), xa), row(p(a), vec![(Coef::ratio(a, c).neg(), p(c))])];
    for b in &fc.targets {
        rows.push(row(x(b), vec![(Coef::one(), x(b))]));
        rows.push(row(p(b), vec![(Coef::one(), p(b)), (Coef::ratio(b, c).neg(), p(c))]));
    }
    PhaseSpaceMap::from_rows(fc.in_labels(), fc.out_labels(), rows, masses, 0.0, 0.0, None)
}

/// A conserved quantity by functional form, so that exchanging labels also
/// exchanges the masses it depends on.
#[derive(Debug, Clone, PartialEq)]
pub enum ConservedForm {
    Momentum(String),
    /// `t p - m x` at coordinate time `t`.
    Boost { label: String, t: f64 },
    /// Mass-independent observable; label exchange is a plain rename.
    Fixed(QuadObservable),
}

impl ConservedForm {
    pub fn observable(&self, masses: &Masses) -> Result<QuadObservable> {
        Ok(match self {
            ConservedForm::Momentum(l) => QuadObservable::p(l),
            ConservedForm::Boost { label, t } => QuadObservable::boost_generator(label, masses.get(label)?, *t),
            ConservedForm::Fixed(q) => q.clone(),
        })
    }

    pub fn renamed(&self, from: &str, to: &str) -> Self {
        let swap = |l: &String| if l == from { to.to_string() } else { l.clone() };
        match self {
            ConservedForm::Momentum(l) => ConservedForm::Momentum(swap(l)),
            ConservedForm::Boost { label, t } => ConservedForm::Boost { label: swap(label), t: *t },
            ConservedForm::Fixed(q) => ConservedForm::Fixed(q.rename(from, to)),
        }
    }
}

/// Result of pushing a set of conserved quantities through a frame change.
#[derive(Debug, Clone)]
pub struct ConservedMapping {
    /// `S C_i S^dagger` for each input quantity.
    pub images: Vec<QuadObservable>,
    /// The label-swapped functional forms in the new frame.
    pub targets: Vec<QuadObservable>,
    /// `targets[k] = sum_j gammas[k][j] images[j]`.
    pub gammas: Vec<Vec<f64>>,
}

/// Maps a conserved set and finds, for each label-swapped target form, the
/// minimal-support linear recombination of the images that realizes it.
pub fn map_conserved_set(map: &PhaseSpaceMap, set: &[ConservedForm]) -> Result<ConservedMapping> {
    let images = set
        .iter()
        .map(|o| map.conjugate_observable(&o.observable(&map.masses)?))
        .collect::<Result<Vec<_>>>()?;
    if set.is_empty() {
        return Ok(ConservedMapping {
            images,
            targets: vec![],
            gammas: vec![],
        });
    }
    let (a, c) = map
        .swapped_pair()
        .ok_or_else(|| QrfError::Unsupported("map does not exchange a frame label".into()))?;
    let targets = set
        .iter()
        .map(|o| o.renamed(&a, &c).observable(&map.masses))
        .collect::<Result<Vec<_>>>()?;
    let labels = map.out_labels.clone();
    let cols = images
        .iter()
        .map(|o| o.to_vector(&labels))
        .collect::<Result<Vec<_>>>()?;
    let mut gammas = Vec::with_capacity(targets.len());
    for tgt in &targets {
        let tv = tgt.to_vector(&labels)?;
        let g = minimal_support_solve(&cols, &tv).ok_or_else(|| QrfError::NoRecombination(tgt.to_string()))?;
        gammas.push(g);
    }
    Ok(ConservedMapping { images, targets, gammas })
}

fn minimal_support_solve(cols: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let n = cols.len();
    let scale = target.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let rows = target.len();
    let b = DVector::from_column_slice(target);
    for k in 1..=n {
        for subset in combinations(n, k) {
            let a = DMatrix::from_fn(rows, k, |i, j| cols[subset[j]][i]);
            let svd = a.clone().svd(true, true);
            let Ok(sol) = svd.solve(&b, 1e-12) else { continue };
            let resid = (&a * &sol - &b).amax();
            if resid <= 1e-10 * scale {
                let mut g = vec![0.0; n];
                for (j, &s) in subset.iter().enumerate() {
                    g[s] = sol[j];
                }
                return Some(g);
            }
        }
    }
    None
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Naive relative coordinates `x_i - x_0`, `mu_i0 (p_i/m_i - p_0/m_0)` for
/// particles `1..N`, completed by the centre-of-mass pair.
#[derive(Debug, Clone)]
pub struct NaiveReport {
    /// Rows: relative pairs then `(X_cm, P_total)`, columns `(x_0, p_0, ...)`.
    pub matrix: DMatrix<f64>,
    /// Poisson brackets among the relative variables.
    pub brackets: DMatrix<f64>,
    pub canonical: bool,
    pub max_violation: f64,
}

pub fn naive_relative_map(masses: &[f64]) -> Result<NaiveReport> {
    let n = masses.len();
    if n < 2 {
        return Err(QrfError::InvalidParameter("need at least two particles".into()));
    }
    if masses.iter().any(|m| !(*m > 0.0)) {
        return Err(QrfError::InvalidParameter("masses must be positive".into()));
    }
    let total: f64 = masses.iter().sum();
    let m0 = masses[0];
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 1..n {
        let r = 2 * (i - 1);
        let mu = masses[i] * m0 / (masses[i] + m0);
        m[(r, 2 * i)] = 1.0;
        m[(r, 0)] = -1.0;
        m[(r + 1, 2 * i + 1)] = mu / masses[i];
        m[(r + 1, 1)] = -mu / m0;
    }
    let r = 2 * (n - 1);
    for (i, mi) in masses.iter().enumerate() {
        m[(r, 2 * i)] = mi / total;
        m[(r + 1, 2 * i + 1)] = 1.0;
    }
    let o = omega(n);
    let full = &m * &o * m.transpose();
    let k = 2 * (n - 1);
    let brackets = full.view((0, 0), (k, k)).into_owned();
    let max_violation = (&full - &o).amax();
    Ok(NaiveReport {
        matrix: m,
        brackets,
        canonical: max_violation <= 1e-12,
        max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masses() -> Masses {
        Masses::new(&[("A", 1.3), ("B", 0.7), ("C", 2.1)]).unwrap()
    }

    #[test]
    fn sx_images_and_table() {
        let m = map_sx(&FrameChange::standard(), &masses()).unwrap();
        let xb = m.image(&x("B")).unwrap();
        assert!(xb.approx_eq(&QuadObservable::x("B").sub(&QuadObservable::x("C")), 0.0));
        let pa = m.image(&p("A")).unwrap();
        assert!(pa.approx_eq(&QuadObservable::p("C").add(&QuadObservable::p("B")).scale(-1.0), 0.0));
        assert!(m.is_canonical(1e-12));
        let t = m.table();
        assert!(t.contains(&"x_B -> q_B - q_C".to_string()), "{t:?}");
        assert!(t.contains(&"p_A -> -pi_C - pi_B".to_string()), "{t:?}");
    }

    #[test]
    fn st_table_line() {
        let m = map_st(&FrameChange::standard(), 2.0, 0.5, &masses()).unwrap();
        assert!(m.table().contains(&"x_B -> q_B - q_C + (1/m_C)(t-tau) pi_C".to_string()));
        let at_tau = map_st(&FrameChange::standard(), 0.5, 0.5, &masses()).unwrap();
        let sx = map_sx(&FrameChange::standard(), &masses()).unwrap();
        assert_eq!(at_tau.max_abs_diff(&sx).unwrap(), 0.0);
    }

    #[test]
    fn sb_at_zero_is_sv() {
        let fc = FrameChange::standard();
        let sb = map_sb(&fc, 0.0, &masses()).unwrap();
        let sv = map_sv(&fc, &masses()).unwrap();
        assert_eq!(sb.max_abs_diff(&sv).unwrap(), 0.0);
        let vel = sb.image(&p("A")).unwrap().scale(1.0 / 1.3);
        assert!(vel.approx_eq(&QuadObservable::p("C").scale(-1.0 / 2.1), 1e-15));
    }

    #[test]
    fn sv_inverse_matches_printed_table() {
        let sv = map_sv(&FrameChange::standard(), &masses()).unwrap();
        let inv = sv.inverse().unwrap();
        let qc = inv.image(&x("C")).unwrap();
        let expect = QuadObservable::x("A").scale(-1.3 / 2.1).sub(&QuadObservable::x("B").scale(0.7 / 2.1));
        assert!(qc.approx_eq(&expect, 1e-14));
        let pib = inv.image(&p("B")).unwrap();
        let expect = QuadObservable::p("B").sub(&QuadObservable::p("A").scale(0.7 / 1.3));
        assert!(pib.approx_eq(&expect, 1e-14));
    }

    #[test]
    fn transitivity_and_round_trip_of_sx() {
        let ms = masses();
        let c_to_b = map_sx(&FrameChange::new("B", &["A"], "C"), &ms).unwrap();
        let b_to_a = map_sx(&FrameChange::new("A", &["C"], "B"), &ms).unwrap();
        let c_to_a = map_sx(&FrameChange::standard(), &ms).unwrap();
        let composed = PhaseSpaceMap::compose(&b_to_a, &c_to_b).unwrap();
        assert!(composed.max_abs_diff(&c_to_a).unwrap() < 1e-15);
        let back = map_sx(&FrameChange::new("C", &["B"], "A"), &ms).unwrap();
        let id = PhaseSpaceMap::compose(&back, &c_to_a).unwrap();
        assert!(id.max_abs_diff(&PhaseSpaceMap::identity(&["A", "B"])).unwrap() < 1e-15);
    }

    #[test]
    fn compose_rejects_mismatched_labels() {
        let ms = masses();
        let a = map_sx(&FrameChange::standard(), &ms).unwrap();
        assert!(PhaseSpaceMap::compose(&a, &a).is_err());
    }

    #[test]
    fn conjugation_examples() {
        let ms = masses();
        let sx = map_sx(&FrameChange::standard(), &ms).unwrap();
        let inv = sx.inverse().unwrap();
        let q = inv.conjugate_observable(&QuadObservable::x("B")).unwrap();
        assert!(q.approx_eq(&QuadObservable::x("B").sub(&QuadObservable::x("A")), 1e-15));
        let total = QuadObservable::p("A").add(&QuadObservable::p("B"));
        let img = sx.conjugate_observable(&total).unwrap();
        assert!(img.approx_eq(&QuadObservable::p("C").scale(-1.0), 1e-15));
        let id = PhaseSpaceMap::identity(&["A", "B"]);
        let h = QuadObservable::kinetic("A", 1.3).add(&QuadObservable::x("B").square());
        assert!(id.conjugate_observable(&h).unwrap().approx_eq(&h, 0.0));
    }

    #[test]
    fn conserved_momenta_under_translation() {
        let ms = masses();
        let st = map_st(&FrameChange::standard(), 1.5, 0.2, &ms).unwrap();
        let set = vec![ConservedForm::Momentum("A".into()), ConservedForm::Momentum("B".into())];
        let r = map_conserved_set(&st, &set).unwrap();
        let close = |g: &[f64], e: &[f64]| g.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-12);
        assert!(close(&r.gammas[0], &[-1.0, -1.0]), "{:?}", r.gammas);
        assert!(close(&r.gammas[1], &[0.0, 1.0]), "{:?}", r.gammas);
        assert!(map_conserved_set(&st, &[]).unwrap().images.is_empty());
    }

    #[test]
    fn conserved_galilean_set_under_boost() {
        let ms = masses();
        let t = 0.8;
        let sb = map_sb(&FrameChange::standard(), t, &ms).unwrap();
        let set = vec![
            ConservedForm::Momentum("A".into()),
            ConservedForm::Momentum("B".into()),
            ConservedForm::Boost { label: "A".into(), t },
            ConservedForm::Boost { label: "B".into(), t },
        ];
        let r = map_conserved_set(&sb, &set).unwrap();
        for (k, tgt) in r.targets.iter().enumerate() {
            let mut acc = QuadObservable::zero(&["B", "C"]);
            for (j, img) in r.images.iter().enumerate() {
                acc = acc.add(&img.scale(r.gammas[k][j]));
            }
            assert!(acc.approx_eq(tgt, 1e-10), "{k}: {acc} vs {tgt}");
        }
    }

    #[test]
    fn naive_map_brackets() {
        let two = naive_relative_map(&[1.0, 2.0]).unwrap();
        assert!(two.canonical);
        let three = naive_relative_map(&[1.0, 1.0, 1.0]).unwrap();
        assert!(!three.canonical);
        assert!((three.brackets[(0, 3)] - 0.5).abs() < 1e-15);
        assert!((three.brackets[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn display_of_observables() {
        let h = QuadObservable::kinetic("A", 1.0).add(&QuadObservable::x("B").scale(-2.0));
        assert_eq!(h.to_string(), "0.5 p_A^2 - 2 x_B");
    }
}
