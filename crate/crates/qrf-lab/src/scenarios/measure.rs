//! Pointer measurements of `x_B` from C and from A, with an apparatus M.

use qrf_core::measurement::{
    measure_via_pointer, position_observable, probability_invariance_residual, transform_measurement_model,
    Apparatus, MeasurementModel, Pointer,
};
use qrf_core::operators::{Family, QrfUnitary};
use qrf_core::phase_space::{FrameChange, Masses, QuadObservable};
use qrf_core::sample::{random_localized, random_state};
use qrf_core::{Frame, Subsystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Ctx;
use crate::error::Result;

pub fn measurement_invariance(ctx: &mut Ctx) -> Result<()> {
    let g = ctx.cfg.measure_grid();
    let m = ctx.cfg.masses.clone();
    let me = ctx.cfg.measure.clone();
    let subs = vec![Subsystem::continuous("A", g, m.a), Subsystem::continuous("B", g, m.b)];
    let frame = Frame::new("C", m.c);
    let bare = MeasurementModel::new(position_observable("B"), Pointer::spike("E", g));
    let model = bare.clone().with_apparatus(Apparatus::at("M", g, me.x0, me.sigma, m.m)?);
    let u = QrfUnitary::new(Family::Sx, FrameChange::standard());
    let masses = Masses::new(&[("A", m.a), ("B", m.b), ("C", m.c), ("M", m.m)])?;
    let target = transform_measurement_model(&u, &model, &masses)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);

    let mut born_gap = 0.0f64;
    let mut frame_gap = 0.0f64;
    for i in 0..ctx.cfg.samples {
        let generic = random_state(&mut rng, &subs, &frame)?;
        let d = measure_via_pointer(&generic, &bare)?;
        let born = generic.position_marginal("B")?;
        let gap = d.probs.iter().zip(&born).map(|(p, w)| (p - w * g.dx()).abs()).fold(0.0, f64::max);
        born_gap = born_gap.max(gap);

        let local = random_localized(&mut rng, &subs, &frame, me.spread)?;
        frame_gap = frame_gap.max(probability_invariance_residual(&local, &model, &u)?);
        if i == 0 {
            let moved = u.apply(&local)?;
            let seen = transform_measurement_model(&u, &bare, &masses)?;
            ctx.sink.distribution(&mut ctx.report, "C", "C", "E", &measure_via_pointer(&local, &bare)?, g.dx())?;
            ctx.sink.distribution(&mut ctx.report, "A", "A", "E", &measure_via_pointer(&moved, &seen)?, g.dx())?;
            ctx.sink.marginals(&mut ctx.report, "", &local, "random_localized")?;
            ctx.sink.marginals(&mut ctx.report, "", &moved, "apply_sx")?;
        }
    }
    let want = QuadObservable::x("B").sub(&QuadObservable::x("C"));
    let relative = target.observable.approx_eq(&want, 1e-12);
    let r = &mut ctx.report;
    r.metric("samples", ctx.cfg.samples as f64, "config");
    r.within("pointer_vs_born", born_gap, 0.0, 1e-8, "measure_via_pointer vs position marginal, worst sample");
    r.within("frame_invariance", frame_gap, 0.0, 1e-6, "probability_invariance_residual, worst sample");
    r.metric("observable_is_relative", f64::from(u8::from(relative)), "transform_measurement_model");
    r.check("observable_is_relative", "observable_is_relative", relative, "x_B maps to x_B - x_C");
    r.text.push(format!("observable in frame A: {}", target.observable));
    Ok(())
}
