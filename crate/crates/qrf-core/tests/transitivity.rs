use qrf_core::operators::{Family, QrfUnitary};
use qrf_core::phase_space::FrameChange;
use qrf_core::sample::random_localized;
use qrf_core::{Frame, Grid1D, MultiState, Subsystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn states(subs: &[Subsystem], mc: f64, seed: u64) -> Vec<MultiState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|_| random_localized(&mut rng, subs, &Frame::new("C", mc), 0.15).unwrap())
        .collect()
}

fn check(family: Family, subs: &[Subsystem], mc: f64, seed: u64) {
    let u = |new: &str, target: &str, old: &str| QrfUnitary::new(family.clone(), FrameChange::new(new, &[target], old));
    for psi in states(subs, mc, seed) {
        let direct = u("A", "B", "C").apply(&psi).unwrap();
        let via_b = u("A", "C", "B").apply(&u("B", "A", "C").apply(&psi).unwrap()).unwrap();
        let d = direct.distance(&via_b).unwrap();
        assert!(d <= 1e-8, "{family:?} transitivity {d}");
        let back = u("C", "B", "A").apply(&direct).unwrap();
        let r = back.distance(&psi).unwrap();
        assert!(r <= 1e-8, "{family:?} round trip {r}");
    }
}

#[test]
fn sx_is_transitive() {
    let g = Grid1D::new(64, 0.3).unwrap();
    let subs = [Subsystem::continuous("A", g, 1.0), Subsystem::continuous("B", g, 1.0)];
    check(Family::Sx, &subs, 1.0, 1);
}

#[test]
fn st_is_transitive() {
    let g = Grid1D::new(64, 0.3).unwrap();
    let subs = [Subsystem::continuous("A", g, 1.0), Subsystem::continuous("B", g, 2.0)];
    check(Family::ST { t: 0.7, tau: 0.2 }, &subs, 1.5, 2);
}

#[test]
fn sb_is_transitive() {
    // Velocity parity rescales grids by mass ratios; matching `m dx` keeps the
    // two routes on the same lattice.
    let subs = [
        Subsystem::continuous("A", Grid1D::new(64, 0.3).unwrap(), 1.0),
        Subsystem::continuous("B", Grid1D::new(64, 0.15).unwrap(), 2.0),
    ];
    check(Family::Sb { t: 0.4 }, &subs, 1.5, 3);
}
