use qrf_core::dynamics::{commuting_diagram_residual, evolve, is_symmetry, transform_hamiltonian, HamiltonianSpec, Term};
use qrf_core::operators::{Family, QrfUnitary};
use qrf_core::phase_space::{FrameChange, Masses, QuadObservable};
use qrf_core::state::{coherent_state, tensor};
use qrf_core::{Grid1D, MultiState};

const M: (f64, f64, f64) = (1.0, 2.0, 1.5);

fn masses() -> Masses {
    Masses::new(&[("A", M.0), ("B", M.1), ("C", M.2)]).unwrap()
}

fn initial() -> MultiState {
    let g = Grid1D::new(128, 0.2).unwrap();
    let a = coherent_state(g, -0.8, 0.5, 0.9).unwrap().labeled("A", M.0).unwrap();
    let b = coherent_state(g, 1.0, -0.3, 0.8).unwrap().labeled("B", M.1).unwrap();
    tensor(&[&a, &b]).unwrap().with_frame("C", M.2)
}

fn free() -> HamiltonianSpec {
    HamiltonianSpec::free(&[("A", M.0), ("B", M.1)])
}

fn residual(u: &QrfUnitary, h: &HamiltonianSpec, dt: f64) -> f64 {
    let ht = transform_hamiltonian(u, h, &masses()).unwrap();
    commuting_diagram_residual(u, h, &ht, &initial(), 1.0, dt).unwrap()
}

#[test]
fn free_diagrams_commute_for_translation_and_boost() {
    for fam in [Family::ST { t: 0.0, tau: 0.25 }, Family::Sb { t: 0.0 }] {
        let u = QrfUnitary::new(fam, FrameChange::standard());
        let r = residual(&u, &free(), 1e-3);
        assert!(r <= 1e-6, "{}: {r}", u.name());
        // Free evolution is exact in the momentum representation, so the
        // splitting error vanishes and halving leaves roundoff only.
        let coarse = residual(&u, &free(), 2e-2);
        let fine = residual(&u, &free(), 1e-2);
        assert!(fine <= coarse / 4.0 + 1e-10, "{}: {coarse} -> {fine}", u.name());
    }
}

#[test]
fn coupled_diagram_converges_at_second_order() {
    let mut terms = free().terms;
    terms.push(Term::Quadratic(
        QuadObservable::x("A").sub(&QuadObservable::x("B")).square().scale(0.5 * 0.8),
    ));
    terms.push(Term::Quadratic(QuadObservable::x("A").square().scale(0.5 * 0.3)));
    let h = HamiltonianSpec::new(terms);
    let u = QrfUnitary::new(Family::Sx, FrameChange::standard());
    // The frame change keeps position and momentum terms apart, so both routes
    // share one splitting and commute at any step. Running the target route at
    // half the step exposes the splitting error itself.
    assert!(residual(&u, &h, 4e-2) < 1e-9);
    let ht = transform_hamiltonian(&u, &h, &masses()).unwrap();
    let psi = initial();
    let r: Vec<f64> = [4e-2, 2e-2, 1e-2]
        .iter()
        .map(|&dt| {
            let left = u.apply(&evolve(&psi, &h, 1.0, dt).unwrap()).unwrap();
            let right = evolve(&u.apply(&psi).unwrap(), &ht, 1.0, dt / 2.0).unwrap();
            left.distance(&right).unwrap()
        })
        .collect();
    for w in r.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "{r:?}");
    }
}

#[test]
fn symmetry_verdicts() {
    let m = masses();
    let st = QrfUnitary::new(Family::ST { t: 0.7, tau: 0.2 }, FrameChange::standard());
    let sb = QrfUnitary::new(Family::Sb { t: 0.7 }, FrameChange::standard());
    let sv = QrfUnitary::new(Family::Sv, FrameChange::standard());
    assert!(is_symmetry(&st, &free(), &m).unwrap().symmetric);
    assert!(is_symmetry(&sb, &free(), &m).unwrap().symmetric);
    assert!(!is_symmetry(&sv, &free(), &m).unwrap().symmetric);
    let total = M.0 + M.1 + M.2;
    let pp = QuadObservable::p("A").add(&QuadObservable::p("B"));
    let mut terms = free().terms;
    terms.push(Term::Quadratic(pp.square().scale(-0.5 / total)));
    let r = is_symmetry(&sv, &HamiltonianSpec::new(terms), &m).unwrap();
    assert!(r.symmetric, "{} vs {}", r.transformed, r.expected);
}
