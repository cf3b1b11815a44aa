//! Translations, boosts, relative velocities and the algebra tables.

use qrf_core::dynamics::{commuting_diagram_residual, is_symmetry, transform_hamiltonian, HamiltonianSpec, Term};
use qrf_core::operators::{classical_oracle, Classical, Family, QrfUnitary};
use qrf_core::phase_space::{map_sb, map_sv, naive_relative_map, FrameChange, QuadObservable};
use qrf_core::state::{coherent_state, momentum_sharp_state, tensor};
use qrf_core::{MultiState, Wave, C64};

use super::{snap_p, Ctx};
use crate::error::Result;

fn free(ctx: &Ctx) -> HamiltonianSpec {
    let m = &ctx.cfg.masses;
    HamiltonianSpec::free(&[("A", m.a), ("B", m.b)])
}

fn packets(ctx: &Ctx) -> Result<MultiState> {
    let m = &ctx.cfg.masses;
    let a = coherent_state(ctx.cfg.grid_for("A"), -0.8, 0.5, 0.9)?.labeled("A", m.a)?;
    let b = coherent_state(ctx.cfg.grid_for("B"), 1.0, -0.3, 0.8)?.labeled("B", m.b)?;
    Ok(tensor(&[&a, &b])?.with_frame("C", m.c))
}

/// Symmetry verdict, commuting-diagram residual and its behaviour under
/// step halving for a free pair.
fn covariance(ctx: &mut Ctx, u: &QrfUnitary) -> Result<()> {
    let (t, dt) = (ctx.cfg.evolution.t, ctx.cfg.evolution.dt);
    let masses = ctx.masses();
    let h = free(ctx);
    let ht = transform_hamiltonian(u, &h, &masses)?;
    let sym = is_symmetry(&u.at_time(t), &h, &masses)?;
    let psi = packets(ctx)?;
    let name = u.name();
    let r = &mut ctx.report;
    r.metric(&format!("{name}_symmetric"), f64::from(u8::from(sym.symmetric)), "is_symmetry");
    r.check(&format!("{name}_symmetric"), &format!("{name}_symmetric"), sym.symmetric, "free Hamiltonian keeps its form");
    r.text.push(format!("{name}: {}", sym.transformed));
    let res = commuting_diagram_residual(u, &h, &ht, &psi, t, dt)?;
    r.within(&format!("{name}_diagram"), res, 0.0, 1e-6, "commuting_diagram_residual");
    let coarse = commuting_diagram_residual(u, &h, &ht, &psi, t, 2e-2)?;
    let fine = commuting_diagram_residual(u, &h, &ht, &psi, t, 1e-2)?;
    r.metric(&format!("{name}_diagram_coarse"), coarse, "commuting_diagram_residual, dt = 2e-2");
    r.metric(&format!("{name}_diagram_fine"), fine, "commuting_diagram_residual, dt = 1e-2");
    r.check(
        &format!("{name}_halving"),
        &format!("{name}_diagram_fine"),
        fine <= coarse / 4.0 + 1e-10,
        "fine <= coarse/4 + 1e-10",
    );
    let left = u.at_time(t).apply(&qrf_core::dynamics::evolve(&psi, &h, t, dt)?)?;
    ctx.sink.marginals(&mut ctx.report, "t", &left, "apply after evolve")?;
    Ok(())
}

pub fn translation_symmetry(ctx: &mut Ctx) -> Result<()> {
    let u = QrfUnitary::new(
        Family::ST {
            t: 0.0,
            tau: ctx.cfg.evolution.tau,
        },
        FrameChange::standard(),
    );
    covariance(ctx, &u)
}

pub fn boost_superposition(ctx: &mut Ctx) -> Result<()> {
    let t = ctx.cfg.evolution.t;
    let (ga, gb) = (ctx.cfg.grid_for("A"), ctx.cfg.grid_for("B"));
    let m = ctx.cfg.masses.clone();
    let (p1, p2) = (snap_p(&ga, ctx.cfg.state.p1), snap_p(&ga, ctx.cfg.state.p2));
    // B's momentum width must resolve the two relative boosts.
    let kick = m.b * (p1 - p2).abs() / m.a;
    let sigma_b = 4.5 * ga.hbar() / kick;
    let w = Wave::superpose(&[
        (C64::new(1.0, 0.0), &momentum_sharp_state(ga, p1)?),
        (C64::new(1.0, 0.0), &momentum_sharp_state(ga, p2)?),
    ])?;
    let bw = coherent_state(gb, 0.0, 0.0, sigma_b)?;
    let b = bw.labeled("B", m.b)?;
    let psi = tensor(&[&w.labeled("A", m.a)?, &b])?.with_frame("C", m.c);
    let u = QrfUnitary::new(Family::Sb { t }, FrameChange::standard());
    let out = u.apply(&psi)?;
    ctx.sink.marginals(&mut ctx.report, "", &psi, "input")?;
    ctx.sink.marginals(&mut ctx.report, "", &out, "apply_sb")?;
    let ln2 = std::f64::consts::LN_2;
    let r = &mut ctx.report;
    r.metric("p1", p1, "config, snapped to the momentum grid of A");
    r.metric("p2", p2, "config, snapped to the momentum grid of A");
    r.within("entropy_out", out.schmidt_entropy(&["B"])?, ln2 - 1e-3, ln2 + 1e-3, "schmidt_entropy B|C after apply_sb");

    // A momentum-sharp: B is boosted classically by v = p/m_A.
    let single = tensor(&[&momentum_sharp_state(ga, p1)?.labeled("A", m.a)?, &b])?.with_frame("C", m.c);
    let boosted = u.apply(&single)?;
    let expect = classical_oracle(Classical::Boost { v: p1 / m.a, t }, &b)?;
    let rho = boosted.reduced_density(&["B"])?;
    let psi_b: Vec<C64> = expect.amps().iter().map(|z| z * gb.dx().sqrt()).collect();
    let n = psi_b.len();
    let overlap: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (psi_b[i].conj() * rho[(i, j)] * psi_b[j]).re)
        .sum();
    r.within("sharp_boost_fidelity", overlap, 1.0 - 1e-9, 1.0 + 1e-9, "apply_sb vs classical boost");
    let u0 = QrfUnitary::new(Family::Sb { t: 0.0 }, FrameChange::standard());
    covariance(ctx, &u0)
}

pub fn relvel(ctx: &mut Ctx) -> Result<()> {
    let masses = ctx.masses();
    let m = ctx.cfg.masses.clone();
    let sv = QrfUnitary::new(Family::Sv, FrameChange::standard());
    let fc = FrameChange::standard();
    let free = free(ctx);
    let total = m.a + m.b + m.c;
    let pp = QuadObservable::p("A").add(&QuadObservable::p("B"));
    let mut terms = free.terms.clone();
    terms.push(Term::Quadratic(pp.square().scale(-0.5 / total)));
    let invariant = HamiltonianSpec::new(terms);
    let v_free = is_symmetry(&sv, &free, &masses)?;
    let v_inv = is_symmetry(&sv, &invariant, &masses)?;
    let d = map_sv(&fc, &masses)?.max_abs_diff(&map_sb(&fc, 0.0, &masses)?)?;
    let r = &mut ctx.report;
    r.metric("free_symmetric", f64::from(u8::from(v_free.symmetric)), "is_symmetry(Sv, free)");
    r.check("free_not_symmetric", "free_symmetric", !v_free.symmetric, "free Hamiltonian changes form");
    r.metric("invariant_symmetric", f64::from(u8::from(v_inv.symmetric)), "is_symmetry(Sv, centre-of-mass corrected)");
    r.check("invariant_symmetric", "invariant_symmetric", v_inv.symmetric, "corrected Hamiltonian keeps its form");
    r.within("sv_equals_sb0", d, 0.0, 0.0, "map_sv vs map_sb(t = 0)");
    r.text.push(format!("free -> {}", v_free.transformed));
    r.text.push(format!("invariant -> {}", v_inv.transformed));
    Ok(())
}

pub fn canonicity_naive(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.cfg.masses.clone();
    let two = naive_relative_map(&[m.a, m.b])?;
    let three = naive_relative_map(&[m.a, m.b, m.c])?;
    let r = &mut ctx.report;
    r.within("n2_violation", two.max_violation, 0.0, 1e-12, "naive_relative_map, two bodies");
    r.within("n3_violation", three.max_violation, 1e-6, f64::INFINITY, "naive_relative_map, three bodies");
    r.text.push(format!("brackets (N = 3):{}", three.brackets));
    Ok(())
}

pub fn print_map(ctx: &mut Ctx) -> Result<()> {
    let masses = ctx.masses();
    let e = &ctx.cfg.evolution;
    let fc = FrameChange::standard();
    let families = [
        Family::Sx,
        Family::Sp,
        Family::ST { t: e.t, tau: e.tau },
        Family::Sb { t: e.t },
        Family::Sv,
    ];
    for fam in families {
        let u = QrfUnitary::new(fam, fc.clone());
        let map = u.phase_space_map(&masses).expect("linear family")?;
        let name = u.name();
        ctx.report.text.push(format!("[{name}]"));
        ctx.report.text.extend(map.table());
        ctx.report
            .within(&format!("{name}_canonicity"), map.canonicity_residual(), 0.0, 1e-12, "PhaseSpaceMap::canonicity_residual");
    }
    Ok(())
}
