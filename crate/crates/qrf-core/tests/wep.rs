use qrf_core::dynamics::{
    acceleration_superposition_check, evolve, localization_window, transform_hamiltonian, Branch, HamiltonianSpec,
    Potential, Term,
};
use qrf_core::operators::{Family, QrfUnitary, SepParams};
use qrf_core::phase_space::{FrameChange, Masses};
use qrf_core::sample::two_branch;
use qrf_core::phase_space::QuadObservable;
use qrf_core::state::{coherent_state, expectation, tensor};
use qrf_core::{Grid1D, MultiState};

const MA: f64 = 1.0;
const MB: f64 = 1.0;
const MC: f64 = 1.0;
const UNEQUAL: (f64, f64, f64) = (2.0, 0.5, 1.5);

fn grid() -> Grid1D {
    Grid1D::new(256, 0.1).unwrap()
}

fn kink() -> Potential {
    Potential::piecewise_linear(vec![0.0], vec![0.5, -0.5], 0.0).unwrap()
}

fn masses() -> Masses {
    masses_of((MA, MB, MC))
}

fn masses_of(m: (f64, f64, f64)) -> Masses {
    Masses::new(&[("A", m.0), ("B", m.1), ("C", m.2)]).unwrap()
}

fn initial() -> MultiState {
    initial_of((MA, MB, MC))
}

fn initial_of(m: (f64, f64, f64)) -> MultiState {
    let g = grid();
    let a = two_branch(g, (-5.5, 0.0), (5.5, 0.0), 0.7).unwrap().labeled("A", m.0).unwrap();
    let b = coherent_state(g, 0.0, 0.0, 0.7).unwrap().labeled("B", m.1).unwrap();
    tensor(&[&a, &b]).unwrap().with_frame("C", m.2)
}

fn source_h(v: &Potential) -> HamiltonianSpec {
    source_h_of(v, (MA, MB, MC))
}

fn source_h_of(v: &Potential, m: (f64, f64, f64)) -> HamiltonianSpec {
    HamiltonianSpec::new(vec![Term::kinetic("A", m.0), Term::potential("A", v.clone()), Term::kinetic("B", m.1)])
}

fn sep(t: f64, v: &Potential) -> QrfUnitary {
    QrfUnitary::new(
        Family::SEP(SepParams {
            t,
            potential: v.clone(),
            dt: 1e-3,
            guard_band: 0.5,
        }),
        FrameChange::standard(),
    )
}

#[test]
fn transformed_evolution_matches_within_window() {
    let v = kink();
    let t = 1.0;
    for x0 in [-5.5, 5.5] {
        let b = Branch {
            x0,
            p0: 0.0,
            sigma: 0.7,
            mass: MA,
            hbar: 1.0,
        };
        assert!(localization_window(&v, &b).unwrap() > t);
    }
    let psi = initial();
    let h_target = transform_hamiltonian(&sep(t, &v), &source_h(&v), &masses()).unwrap();
    let left = sep(t, &v).apply(&evolve(&psi, &source_h(&v), t, 1e-3).unwrap()).unwrap();
    let right = evolve(&sep(0.0, &v).apply(&psi).unwrap(), &h_target, t, 1e-3).unwrap();
    let r = left.distance(&right).unwrap();
    assert!(r <= 1e-3, "{r}");
}

#[test]
fn unequal_masses_commute_and_feel_opposite_fields() {
    let v = kink();
    let m = UNEQUAL;
    let t = 1.0;
    let psi = initial_of(m);
    let h_target = transform_hamiltonian(&sep(t, &v), &source_h_of(&v, m), &masses_of(m)).unwrap();
    let left = sep(t, &v).apply(&evolve(&psi, &source_h_of(&v, m), t, 1e-3).unwrap()).unwrap();
    let start = sep(0.0, &v).apply(&psi).unwrap();
    let right = evolve(&start, &h_target, t, 1e-3).unwrap();
    let r = left.distance(&right).unwrap();
    assert!(r <= 1e-3, "{r}");

    // Left branch of A (slope 0.5) sits at q_C > 0 in the new frame.
    let branch_momentum = |s: &MultiState, positive: bool| {
        let s = s.in_position();
        let g = s.continuous("C").unwrap().0;
        let axis = s.axis("C").unwrap();
        let mut amps = s.amps().clone();
        for (idx, a) in amps.indexed_iter_mut() {
            if (g.x(idx[axis]) > 0.0) != positive {
                *a = qrf_core::C64::new(0.0, 0.0);
            }
        }
        let part = MultiState::normalized(s.subsystems().to_vec(), amps, s.frame().clone(), s.time()).unwrap();
        expectation(&part, &QuadObservable::p("B")).unwrap()
    };
    for (positive, slope) in [(true, 0.5), (false, -0.5)] {
        let a_i = -slope / m.0;
        let p0 = branch_momentum(&start, positive);
        let p1 = branch_momentum(&evolve(&start, &h_target, 0.5, 1e-3).unwrap(), positive);
        let g_i = (p1 - p0) / 0.5 / m.1;
        assert!((g_i + a_i).abs() <= 0.01 * a_i.abs(), "g = {g_i}, a = {a_i}");
    }
}

#[test]
fn branch_forces_are_opposite_accelerations() {
    let v = kink();
    let g = grid();
    let branches = [
        coherent_state(g, -5.5, 0.0, 0.7).unwrap(),
        coherent_state(g, 5.5, 0.0, 0.7).unwrap(),
    ];
    let rep = acceleration_superposition_check(&v, &branches, MA).unwrap();
    assert!((rep.accelerations[0] + 0.5).abs() < 1e-12);
    assert!((rep.accelerations[1] - 0.5).abs() < 1e-12);
    assert!(rep.residual < 1e-6, "{}", rep.residual);
}

#[test]
fn linear_potential_gives_uniform_field() {
    let v = Potential::linear(0.3);
    let h = transform_hamiltonian(&sep(1.0, &v), &source_h(&v), &masses()).unwrap();
    let want = HamiltonianSpec::new(vec![
        Term::kinetic("B", MB),
        Term::kinetic("C", MC),
        Term::Potential {
            label: "C".into(),
            v: v.clone(),
            coeff: 1.0,
            arg_scale: -MC / MA,
        },
        Term::Coupling {
            field: "C".into(),
            v: v.clone(),
            coeff: -MB / MA,
            arg_scale: -MC / MA,
            linear: "B".into(),
        },
    ])
    .in_frame("A");
    assert!(h.approx_eq(&want, 1e-12), "{h}");
}

#[test]
fn delocalized_branch_is_refused() {
    let v = kink();
    let g = grid();
    let a = coherent_state(g, 0.2, 0.0, 0.5).unwrap().labeled("A", MA).unwrap();
    let b = coherent_state(g, 0.0, 0.0, 0.7).unwrap().labeled("B", MB).unwrap();
    let psi = tensor(&[&a, &b]).unwrap().with_frame("C", MC);
    let err = sep(0.5, &v).apply(&psi).unwrap_err();
    assert!(matches!(err, qrf_core::QrfError::Delocalized { .. }), "{err:?}");
}
