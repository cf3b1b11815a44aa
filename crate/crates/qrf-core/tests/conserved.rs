use qrf_core::dynamics::{evolve, transform_hamiltonian, HamiltonianSpec};
use qrf_core::operators::{Family, QrfUnitary};
use qrf_core::phase_space::{map_conserved_set, naive_relative_map, ConservedForm, FrameChange, Masses, QuadObservable};
use qrf_core::state::{coherent_state, expectation, tensor};
use qrf_core::{Grid1D, MultiState};

const M: (f64, f64, f64) = (1.3, 0.7, 2.0);

fn masses() -> Masses {
    Masses::new(&[("A", M.0), ("B", M.1), ("C", M.2)]).unwrap()
}

fn initial() -> MultiState {
    let g = Grid1D::new(128, 0.2).unwrap();
    let a = coherent_state(g, -1.0, 0.6, 0.9).unwrap().labeled("A", M.0).unwrap();
    let b = coherent_state(g, 1.5, -0.4, 0.8).unwrap().labeled("B", M.1).unwrap();
    tensor(&[&a, &b]).unwrap().with_frame("C", M.2)
}

/// Largest `|<C>(s) - <C>(0)| / s` over the sample times, with `set(s)` the
/// quantities to track at time `s`.
fn drift(unitary: &QrfUnitary, set: impl Fn(f64) -> Vec<QuadObservable>) -> f64 {
    let h = HamiltonianSpec::free(&[("A", M.0), ("B", M.1)]);
    let h_target = transform_hamiltonian(unitary, &h, &masses()).unwrap();
    let start = unitary.at_time(0.0).apply(&initial()).unwrap();
    let values = |s: f64| -> Vec<f64> {
        let psi = evolve(&start, &h_target, s, 1e-2).unwrap();
        set(s).iter().map(|c| expectation(&psi, c).unwrap()).collect()
    };
    let v0 = values(0.0);
    let mut worst = 0.0f64;
    for s in [0.25, 0.5, 1.0] {
        for (a, b) in values(s).iter().zip(&v0) {
            worst = worst.max((a - b).abs() / s);
        }
    }
    worst
}

#[test]
fn translated_momenta_stay_conserved() {
    let u = QrfUnitary::new(Family::ST { t: 0.0, tau: 0.3 }, FrameChange::standard());
    let d = drift(&u, |s| {
        let map = u.at_time(s).phase_space_map(&masses()).unwrap().unwrap();
        let r = map_conserved_set(&map, &[ConservedForm::Momentum("A".into()), ConservedForm::Momentum("B".into())]).unwrap();
        r.images.into_iter().chain(r.targets).collect()
    });
    assert!(d <= 1e-8, "{d}");
}

#[test]
fn boosted_galilean_set_stays_conserved() {
    let u = QrfUnitary::new(Family::Sb { t: 0.0 }, FrameChange::standard());
    let d = drift(&u, |s| {
        let map = u.at_time(s).phase_space_map(&masses()).unwrap().unwrap();
        let set = [
            ConservedForm::Momentum("A".into()),
            ConservedForm::Momentum("B".into()),
            ConservedForm::Boost { label: "A".into(), t: s },
            ConservedForm::Boost { label: "B".into(), t: s },
        ];
        let r = map_conserved_set(&map, &set).unwrap();
        r.images.into_iter().chain(r.targets).collect()
    });
    assert!(d <= 1e-8, "{d}");
}

#[test]
fn naive_three_body_map_is_not_canonical() {
    let r = naive_relative_map(&[1.0, 2.0, 3.0]).unwrap();
    assert!(!r.canonical);
    assert!(r.max_violation > 0.1);
    assert!(naive_relative_map(&[1.0, 2.0]).unwrap().canonical);
}
