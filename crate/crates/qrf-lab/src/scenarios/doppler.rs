//! Absorption by an atom in a superposition of velocities, seen from the lab
//! and from the atom.

use qrf_core::measurement::{
    absorption_probability, branch_photon_peak, prepare_resonant_lab_state, AbsorptionFrame, DopplerSetup,
};
use qrf_core::operators::{Family, QrfUnitary};
use qrf_core::phase_space::FrameChange;
use qrf_core::state::momentum_sharp_state;
use qrf_core::{Wave, C64};

use super::{snap_p, Ctx};
use crate::error::Result;

fn setup(ctx: &Ctx) -> DopplerSetup {
    let (cfg, m, ph) = (ctx.cfg, &ctx.cfg.masses, &ctx.cfg.photon);
    DopplerSetup {
        atom: "A".into(),
        atom_grid: cfg.grid_for("A"),
        atom_mass: m.a,
        photon: "B".into(),
        photon_grid: cfg.photon_grid(),
        omega_ref: ph.omega_ref,
        c: cfg.c,
        omega_b: ph.omega_b,
        photon_sigma: ph.sigma,
        level: "T".into(),
        lab: "C".into(),
        lab_mass: m.c,
    }
}

pub fn doppler(ctx: &mut Ctx) -> Result<()> {
    let s = setup(ctx);
    let t = ctx.cfg.evolution.t;
    let g = s.atom_grid;
    let (p1, p2) = (snap_p(&g, ctx.cfg.state.p1), snap_p(&g, ctx.cfg.state.p2));
    let wave = Wave::superpose(&[
        (C64::new(1.0, 0.0), &momentum_sharp_state(g, p1)?),
        (C64::new(0.0, 1.0), &momentum_sharp_state(g, p2)?),
    ])?;
    let lab = prepare_resonant_lab_state(&s, &wave, t)?;
    let rest = s.sd_inverse(t).apply(&lab)?;
    ctx.sink.marginals(&mut ctx.report, "", &lab, "prepare_resonant_lab_state")?;
    ctx.sink.marginals(&mut ctx.report, "", &rest, "apply_sd_inverse")?;

    let du = s.photon_grid.dx();
    for (i, p) in [p1, p2].into_iter().enumerate() {
        let want = s.omega_b * (1.0 - p / (s.atom_mass * s.c));
        let got = branch_photon_peak(&lab, &s.atom, &s.photon, p, g.dp() / 2.0)?;
        let r = &mut ctx.report;
        r.metric(&format!("p_{}", i + 1), p, "config, snapped to the momentum grid of A");
        r.metric(&format!("omega_expected_{}", i + 1), want, "omega_B (1 - p/(m c))");
        let bin = want * du;
        r.within(&format!("omega_{}", i + 1), got, want - bin, want + bin, "branch_photon_peak");
    }

    let model = s.model();
    let p_lab = absorption_probability(&AbsorptionFrame::Lab { atom: s.atom.clone() }, &lab, &model)?;
    let p_rest = absorption_probability(&AbsorptionFrame::Rest, &rest, &model)?;
    let naive = absorption_probability(&AbsorptionFrame::Rest, &lab, &model)?;
    let back = QrfUnitary::new(Family::SD { t }, FrameChange::new(&s.lab, &[s.photon.as_str()], &s.atom)).apply(&rest)?;
    let r = &mut ctx.report;
    r.metric("p_lab", p_lab, "absorption_probability, lab frame");
    r.metric("p_rest", p_rest, "absorption_probability, atom frame");
    r.metric("p_undressed", naive, "absorption_probability without the Doppler dressing");
    r.within("p_lab_minus_p_rest", (p_lab - p_rest).abs(), 0.0, 1e-3, "|p_lab - p_rest|");
    r.within("rest_norm", rest.norm(), 1.0 - 1e-3, 1.0 + 1e-3, "apply_sd_inverse");
    r.within("round_trip_fidelity", back.fidelity(&lab)?, 1.0 - 1e-3, 1.0 + 1e-9, "apply_sd after apply_sd_inverse");
    r.within("rest_purity", rest.purity(&[s.lab.as_str()])?, 1.0 - 1e-3, 1.0 + 1e-9, "purity of the lab axis in the atom frame");
    Ok(())
}
