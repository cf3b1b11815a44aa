//! Superposed accelerations seen as superposed gravitational fields.

use nalgebra::DMatrix;
use qrf_core::dense::{expi_hermitian, p_matrix, to_vector, x_matrix};
use qrf_core::dynamics::{
    acceleration_superposition_check, evolve, localization_window, transform_hamiltonian, trotter_xa, Branch,
    HamiltonianSpec, Potential, Term,
};
use qrf_core::operators::{Family, QrfUnitary, SepParams};
use qrf_core::phase_space::QuadObservable;
use qrf_core::sample::two_branch;
use qrf_core::state::{coherent_state, expectation, tensor};
use qrf_core::{Grid1D, MultiState, QrfError, C64};

use super::Ctx;
use crate::error::Result;

fn kink(ctx: &Ctx) -> Result<Potential> {
    let p = &ctx.cfg.potential;
    Ok(Potential::piecewise_linear(vec![p.breakpoint], vec![p.slope_left, p.slope_right], 0.0)?)
}

fn source(ctx: &Ctx, v: &Potential) -> HamiltonianSpec {
    let m = &ctx.cfg.masses;
    HamiltonianSpec::new(vec![Term::kinetic("A", m.a), Term::potential("A", v.clone()), Term::kinetic("B", m.b)])
}

fn sep(ctx: &Ctx, t: f64, v: &Potential) -> QrfUnitary {
    QrfUnitary::new(
        Family::SEP(SepParams {
            t,
            potential: v.clone(),
            dt: ctx.cfg.evolution.dt,
            guard_band: ctx.cfg.wep.guard_band,
        }),
        qrf_core::phase_space::FrameChange::standard(),
    )
}

/// `<pi_B>` restricted to the half of the C axis on one side of zero.
fn branch_momentum(s: &MultiState, positive: bool) -> Result<f64> {
    let s = s.in_position();
    let g = s.continuous("C")?.0;
    let axis = s.axis("C")?;
    let mut amps = s.amps().clone();
    for (idx, a) in amps.indexed_iter_mut() {
        if (g.x(idx[axis]) > 0.0) != positive {
            *a = C64::new(0.0, 0.0);
        }
    }
    let part = MultiState::normalized(s.subsystems().to_vec(), amps, s.frame().clone(), s.time())?;
    Ok(expectation(&part, &QuadObservable::p("B"))?)
}

/// Transform-then-evolve against evolve-then-transform, returning the
/// frame-changed initial state and the target Hamiltonian.
fn diagram(ctx: &mut Ctx, v: &Potential, psi: &MultiState) -> Result<(MultiState, HamiltonianSpec)> {
    let t = ctx.cfg.evolution.t;
    let dt = ctx.cfg.evolution.dt;
    let h = source(ctx, v);
    let ht = transform_hamiltonian(&sep(ctx, t, v), &h, &ctx.masses())?;
    let left = sep(ctx, t, v).apply(&evolve(psi, &h, t, dt)?)?;
    let start = sep(ctx, 0.0, v).apply(psi)?;
    let right = evolve(&start, &ht, t, dt)?;
    ctx.report.within("diagram", left.distance(&right)?, 0.0, 1e-3, "S_EP(t) evolve vs evolve S_EP(0)");
    ctx.sink.marginals(&mut ctx.report, "t0", &start, "apply_sep")?;
    ctx.sink.marginals(&mut ctx.report, "t", &right, "evolve under transformed Hamiltonian")?;
    ctx.report.text.push(format!("H_A = {ht}"));
    Ok((start, ht))
}

pub fn wep(ctx: &mut Ctx) -> Result<()> {
    let v = kink(ctx)?;
    let m = ctx.cfg.masses.clone();
    let w = ctx.cfg.wep.clone();
    let t = ctx.cfg.evolution.t;
    let ga = ctx.cfg.grid_for("A");
    let centres = [ctx.cfg.potential.breakpoint - w.center, ctx.cfg.potential.breakpoint + w.center];
    for (i, &x0) in centres.iter().enumerate() {
        let b = Branch {
            x0,
            p0: 0.0,
            sigma: w.sigma,
            mass: m.a,
            hbar: ga.hbar(),
        };
        let win = localization_window(&v, &b)?;
        ctx.report.within(&format!("window_{}", i + 1), win, t, f64::INFINITY, "localization_window");
    }
    let branches = [coherent_state(ga, centres[0], 0.0, w.sigma)?, coherent_state(ga, centres[1], 0.0, w.sigma)?];
    let acc = acceleration_superposition_check(&v, &branches, m.a)?;
    ctx.report.within("acceleration_residual", acc.residual, 0.0, 1e-6, "acceleration_superposition_check");
    let a = two_branch(ga, (centres[0], 0.0), (centres[1], 0.0), w.sigma)?.labeled("A", m.a)?;
    let b = coherent_state(ctx.cfg.grid_for("B"), 0.0, 0.0, w.sigma)?.labeled("B", m.b)?;
    let psi = tensor(&[&a, &b])?.with_frame("C", m.c);
    ctx.sink.marginals(&mut ctx.report, "", &psi, "input")?;
    let (start, ht) = diagram(ctx, &v, &psi)?;

    // The left branch of A sits at q_C > 0 once C is the external system.
    let span = 0.5 * t;
    let later = evolve(&start, &ht, span, ctx.cfg.evolution.dt)?;
    for (i, (positive, slope)) in [(true, ctx.cfg.potential.slope_left), (false, ctx.cfg.potential.slope_right)]
        .into_iter()
        .enumerate()
    {
        let a_i = -slope / m.a;
        let g_i = (branch_momentum(&later, positive)? - branch_momentum(&start, positive)?) / span / m.b;
        let r = &mut ctx.report;
        r.metric(&format!("a_{}", i + 1), a_i, "acceleration of branch from the slope");
        r.metric(&format!("g_{}", i + 1), g_i, "drift of <pi_B> on the branch");
        let rel = (g_i + a_i).abs() / a_i.abs();
        r.within(&format!("g_{}_plus_a_{}", i + 1, i + 1), rel, 0.0, 0.01, "|g + a| / |a|");
    }
    Ok(())
}

pub fn wep_linear(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.cfg.masses.clone();
    let slope = ctx.cfg.potential.slope;
    let v = Potential::linear(slope);
    let h = transform_hamiltonian(&sep(ctx, ctx.cfg.evolution.t, &v), &source(ctx, &v), &ctx.masses())?;
    let want = HamiltonianSpec::new(vec![
        Term::kinetic("B", m.b),
        Term::kinetic("C", m.c),
        Term::Potential {
            label: "C".into(),
            v: v.clone(),
            coeff: 1.0,
            arg_scale: -m.c / m.a,
        },
        Term::Coupling {
            field: "C".into(),
            v: v.clone(),
            coeff: -m.b / m.a,
            arg_scale: -m.c / m.a,
            linear: "B".into(),
        },
    ])
    .in_frame("A");
    let exact = h.approx_eq(&want, 1e-12);
    ctx.report.metric("form_matches", f64::from(u8::from(exact)), "transform_hamiltonian vs uniform-field form");
    ctx.report.check("form_matches", "form_matches", exact, "term by term within 1e-12");
    ctx.report.text.push(format!("H_A = {h}"));

    let w = ctx.cfg.wep.clone();
    let a = coherent_state(ctx.cfg.grid_for("A"), 0.0, 0.0, w.sigma)?.labeled("A", m.a)?;
    let b = coherent_state(ctx.cfg.grid_for("B"), 0.0, 0.0, w.sigma)?.labeled("B", m.b)?;
    let psi = tensor(&[&a, &b])?.with_frame("C", m.c);
    let (start, ht) = diagram(ctx, &v, &psi)?;
    let span = 0.5 * ctx.cfg.evolution.t;
    let later = evolve(&start, &ht, span, ctx.cfg.evolution.dt)?;
    let drift = |s: &MultiState| expectation(s, &QuadObservable::p("B"));
    let g = (drift(&later)? - drift(&start)?) / span / m.b;
    let a_acc = -slope / m.a;
    let r = &mut ctx.report;
    r.metric("g", g, "drift of <pi_B>");
    r.metric("a", a_acc, "acceleration from the slope");
    r.within("g_plus_a", (g + a_acc).abs() / a_acc.abs(), 0.0, 0.01, "|g + a| / |a|");
    Ok(())
}

/// `<x>(dt) - <x>(0)` under the exact propagator on a small grid.
fn exact_displacement(g: &Grid1D, v: &Potential, mass: f64, psi: &nalgebra::DVector<C64>, dt: f64) -> f64 {
    let x = x_matrix(g);
    let p = p_matrix(g);
    let vm = DMatrix::from_diagonal(&x.diagonal().map(|x| C64::new(v.value(x.re), 0.0)));
    let h = &p * &p / C64::new(2.0 * mass, 0.0) + vm;
    let later = expi_hermitian(&(h * C64::new(-dt, 0.0))) * psi;
    let mean = |s: &nalgebra::DVector<C64>| (s.adjoint() * &x * s)[(0, 0)].re;
    mean(&later) - mean(psi)
}

/// Second-order displacement operator for a quartic potential: error order
/// from a step sweep against exact evolution, and refusal of long steps.
pub fn wep_trotter(ctx: &mut Ctx) -> Result<()> {
    let mass = ctx.cfg.masses.a;
    let v = Potential::Polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    let g = Grid1D::with_hbar(64, 0.15, ctx.cfg.hbar)?;
    let state = coherent_state(g, 0.3, 0.8, 0.4)?.labeled("A", mass)?;
    let psi = to_vector(&state);
    let steps = [0.004, 0.002, 0.001];
    let mut errors = Vec::new();
    for (i, &dt) in steps.iter().enumerate() {
        let xa = trotter_xa(&v, dt, mass, (-2.0, 2.0), 1.0)?;
        let e = (xa.expectation(&state, "A")? - exact_displacement(&g, &v, mass, &psi, dt)).abs();
        ctx.report.metric(&format!("error_{}", i + 1), e, "TrotterXa::expectation vs exact propagator");
        ctx.report.metric(&format!("bound_{}", i + 1), xa.bound, "trotter_xa remainder estimate");
        errors.push(e);
    }
    for (i, w) in errors.windows(2).enumerate() {
        ctx.report.within(&format!("order_ratio_{}", i + 1), w[0] / w[1], 7.0, 9.0, "error ratio under step halving");
    }
    let refused = matches!(trotter_xa(&v, 0.5, mass, (-2.0, 2.0), 1.0), Err(QrfError::TrotterBound(_)));
    ctx.report.metric("long_step_refused", f64::from(u8::from(refused)), "trotter_xa with dt = 0.5");
    ctx.report.check("long_step_refused", "long_step_refused", refused, "bound above 1e-6 is an error");
    Ok(())
}
