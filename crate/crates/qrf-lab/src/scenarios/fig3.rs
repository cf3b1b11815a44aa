//! Relative states: the same pair seen from C and from A.

use ndarray::{ArrayD, IxDyn};
use qrf_core::operators::{Family, QrfUnitary};
use qrf_core::phase_space::{FrameChange, QuadObservable};
use qrf_core::state::{coherent_state, expectation, sharp_state, tensor};
use qrf_core::{Frame, MultiState, Subsystem, Wave, C64};

use super::{snap, Ctx};
use crate::error::Result;

fn sx() -> QrfUnitary {
    QrfUnitary::new(Family::Sx, FrameChange::standard())
}

fn mean(s: &MultiState, label: &str) -> Result<f64> {
    Ok(expectation(s, &QuadObservable::x(label))?)
}

fn spread(s: &MultiState, label: &str) -> Result<f64> {
    let m = mean(s, label)?;
    let second = expectation(s, &QuadObservable::x(label).square())?;
    Ok((second - m * m).max(0.0).sqrt())
}

fn pair(ctx: &Ctx, amps: ArrayD<C64>) -> Result<MultiState> {
    let m = &ctx.cfg.masses;
    let subs = vec![
        Subsystem::continuous("A", ctx.cfg.grid_for("A"), m.a),
        Subsystem::continuous("B", ctx.cfg.grid_for("B"), m.b),
    ];
    Ok(MultiState::normalized(subs, amps, Frame::new("C", m.c), 0.0)?)
}

fn both_frames(ctx: &mut Ctx, psi: &MultiState) -> Result<MultiState> {
    let out = sx().apply(psi)?;
    ctx.sink.marginals(&mut ctx.report, "", psi, "input")?;
    ctx.sink.marginals(&mut ctx.report, "", &out, "apply_sx")?;
    Ok(out)
}

/// A sharp at `x0`: B is translated and C is sharp at `-x0`.
pub fn case_a(ctx: &mut Ctx) -> Result<()> {
    let (ga, gb) = (ctx.cfg.grid_for("A"), ctx.cfg.grid_for("B"));
    let x0 = snap(&ga, ctx.cfg.state.x0);
    let m = &ctx.cfg.masses;
    let a = sharp_state(ga, x0)?.labeled("A", m.a)?;
    let b = coherent_state(gb, 0.0, 0.0, ctx.cfg.state.sigma)?.labeled("B", m.b)?;
    let psi = tensor(&[&a, &b])?.with_frame("C", m.c);
    let out = both_frames(ctx, &psi)?;
    let r = &mut ctx.report;
    r.metric("x0", x0, "config, snapped to grid A");
    let shift = mean(&out, "B")? - mean(&psi, "B")?;
    r.within("qB_shift", shift, -x0 - gb.dx(), -x0 + gb.dx(), "expectation after apply_sx");
    let qc = mean(&out, "C")?;
    r.within("qC_mean", qc, -x0 - ga.dx(), -x0 + ga.dx(), "expectation after apply_sx");
    r.within("qC_spread", spread(&out, "C")?, 0.0, ga.dx(), "expectation after apply_sx");
    Ok(())
}

/// A in two sharp branches, product with B: entangled from A.
pub fn case_b(ctx: &mut Ctx) -> Result<()> {
    let (ga, gb) = (ctx.cfg.grid_for("A"), ctx.cfg.grid_for("B"));
    let st = &ctx.cfg.state;
    let half = 0.5 * st.separation * st.sigma;
    let (x1, x2) = (snap(&ga, -half), snap(&ga, half));
    let m = &ctx.cfg.masses;
    let w = Wave::superpose(&[(C64::new(1.0, 0.0), &sharp_state(ga, x1)?), (C64::new(1.0, 0.0), &sharp_state(ga, x2)?)])?;
    let a = w.labeled("A", m.a)?;
    let b = coherent_state(gb, 0.0, 0.0, st.sigma)?.labeled("B", m.b)?;
    let psi = tensor(&[&a, &b])?.with_frame("C", m.c);
    let out = both_frames(ctx, &psi)?;
    let r = &mut ctx.report;
    r.metric("separation", x2 - x1, "config, snapped to grid A");
    r.within("entropy_in", psi.schmidt_entropy(&["A"])?, 0.0, 1e-8, "schmidt_entropy A|B");
    r.within("entropy_out", out.schmidt_entropy(&["B"])?, 0.3, f64::INFINITY, "schmidt_entropy B|C after apply_sx");
    Ok(())
}

/// A and B perfectly correlated at distance `L`: a product from A.
pub fn case_c(ctx: &mut Ctx) -> Result<()> {
    let (ga, gb) = (ctx.cfg.grid_for("A"), ctx.cfg.grid_for("B"));
    let st = &ctx.cfg.state;
    let half = 0.5 * st.separation * st.sigma;
    let l = snap(&gb, st.l);
    let mut amps = ArrayD::zeros(IxDyn(&[ga.n(), gb.n()]));
    for x in [snap(&ga, -half), snap(&ga, half)] {
        let i = ga.index_of(x).expect("snapped");
        let j = gb.index_of(snap(&gb, x + l)).ok_or_else(|| {
            qrf_core::QrfError::InvalidParameter(format!("x + L = {} lies off grid B", x + l))
        })?;
        amps[[i, j]] = C64::new(1.0, 0.0);
    }
    let psi = pair(ctx, amps)?;
    let out = both_frames(ctx, &psi)?;
    let r = &mut ctx.report;
    let ln2 = std::f64::consts::LN_2;
    r.within("entropy_in", psi.schmidt_entropy(&["A"])?, ln2 - 1e-8, ln2 + 1e-8, "schmidt_entropy A|B");
    r.within("entropy_out", out.schmidt_entropy(&["B"])?, 0.0, 0.01, "schmidt_entropy B|C after apply_sx");
    r.within("qB_mean", mean(&out, "B")?, l - gb.dx(), l + gb.dx(), "expectation after apply_sx");
    Ok(())
}

/// EPR-like pair, B a narrow packet at `x_A + X` over a flat-topped A: B is
/// sharp at `X` from A while C spreads over the grid.
pub fn case_d(ctx: &mut Ctx) -> Result<()> {
    let (ga, gb) = (ctx.cfg.grid_for("A"), ctx.cfg.grid_for("B"));
    let x_off = snap(&gb, ctx.cfg.state.x_offset);
    let width = 0.6 * ga.half_width();
    let sb = 4.0 * gb.dx();
    let amps = ArrayD::from_shape_fn(IxDyn(&[ga.n(), gb.n()]), |idx| {
        let xa = ga.x(idx[0]);
        let y = gb.x(idx[1]) - xa - x_off;
        C64::new((-(xa / width).powi(8) - y * y / (4.0 * sb * sb)).exp(), 0.0)
    });
    let psi = pair(ctx, amps)?;
    let out = both_frames(ctx, &psi)?;
    let gc = out.continuous("C")?.0;
    let rho = out.position_marginal("C")?;
    let central: Vec<f64> = (0..gc.n())
        .filter(|&k| gc.x(k).abs() <= 0.5 * gc.half_width())
        .map(|k| rho[k])
        .collect();
    let avg = central.iter().sum::<f64>() / central.len() as f64;
    let peak = central.iter().cloned().fold(0.0, f64::max);
    let r = &mut ctx.report;
    r.metric("X", x_off, "config, snapped to grid B");
    r.within("qB_mean", mean(&out, "B")?, x_off - gb.dx(), x_off + gb.dx(), "expectation after apply_sx");
    r.within("C_flatness", peak / avg, 1.0, 1.5, "max/mean of the C marginal over the central half");
    r.within("entropy_out", out.schmidt_entropy(&["B"])?, 0.0, 0.01, "schmidt_entropy B|C after apply_sx");
    Ok(())
}
