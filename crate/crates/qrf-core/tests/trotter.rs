use nalgebra::DMatrix;
use qrf_core::dense::{expi_hermitian, p_matrix, to_vector, x_matrix};
use qrf_core::dynamics::{trotter_xa, Potential};
use qrf_core::state::coherent_state;
use qrf_core::{Grid1D, C64};

const MASS: f64 = 1.0;

fn quartic() -> Potential {
    Potential::Polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0])
}

/// `<x>(dt) - <x>(0)` from the exact propagator of `p^2/2m + x^4`.
fn exact_displacement(g: &Grid1D, psi: &nalgebra::DVector<C64>, dt: f64) -> f64 {
    let x = x_matrix(g);
    let p = p_matrix(g);
    let v = DMatrix::from_diagonal(&x.diagonal().map(|x| C64::new(quartic().value(x.re), 0.0)));
    let h = &p * &p / C64::new(2.0 * MASS, 0.0) + v;
    let u = expi_hermitian(&(h * C64::new(-dt, 0.0)));
    let later = &u * psi;
    let mean = |s: &nalgebra::DVector<C64>| (s.adjoint() * &x * s)[(0, 0)].re;
    mean(&later) - mean(psi)
}

#[test]
fn displacement_error_is_third_order() {
    let g = Grid1D::new(64, 0.15).unwrap();
    let wave = coherent_state(g, 0.3, 0.8, 0.4).unwrap();
    let state = wave.labeled("A", MASS).unwrap();
    let psi = to_vector(&state);
    let errors: Vec<f64> = [0.004, 0.002, 0.001]
        .iter()
        .map(|&dt| {
            let xa = trotter_xa(&quartic(), dt, MASS, (-2.0, 2.0), 1.0).unwrap();
            (xa.expectation(&state, "A").unwrap() - exact_displacement(&g, &psi, dt)).abs()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((7.0..9.0).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn linear_potential_is_exact_at_second_order() {
    let g = Grid1D::new(64, 0.15).unwrap();
    let state = coherent_state(g, 0.0, 0.5, 0.4).unwrap().labeled("A", MASS).unwrap();
    let xa = trotter_xa(&Potential::linear(0.7), 0.05, MASS, (-2.0, 2.0), 1.0).unwrap();
    let want = 0.5 * 0.05 - 0.5 * 0.7 * 0.05 * 0.05;
    assert!((xa.expectation(&state, "A").unwrap() - want).abs() < 1e-12);
}
