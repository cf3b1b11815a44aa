//! The nine acceptance criteria, each with its tolerance and time budget.
//! Run with `cargo test -p qrf-lab --test acceptance -- --nocapture` to see
//! the PASS/FAIL lines.

use std::time::{Duration, Instant};

use qrf_core::dense::{conjugation_residual, dense_unitary};
use qrf_core::dynamics::{evolve, transform_hamiltonian, HamiltonianSpec, Potential};
use qrf_core::operators::{apply_parity_swap, Family, QrfUnitary, SepParams};
use qrf_core::phase_space::{
    map_conserved_set, map_sb, map_sp, map_st, map_sv, map_sx, ConservedForm, FrameChange, Masses, QuadObservable,
};
use qrf_core::sample::{random_localized, random_state};
use qrf_core::state::{coherent_state, expectation, tensor};
use qrf_core::{Frame, Grid1D, MultiState, Subsystem};
use qrf_lab::{run_scenario, ScenarioConfig, Sink};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn masses(m: (f64, f64, f64)) -> Masses {
    Masses::new(&[("A", m.0), ("B", m.1), ("C", m.2)]).unwrap()
}

/// Runs lab scenarios with default settings; passes when every verdict does.
fn scenarios(names: &[&str]) -> Outcome {
    let cfg = ScenarioConfig::default();
    let mut failures = Vec::new();
    for name in names {
        let r = run_scenario(name, None, &cfg, Sink::none()).unwrap();
        failures.extend(r.failures().into_iter().map(|f| format!("{name}/{f}")));
    }
    outcome(failures.is_empty(), if failures.is_empty() { "all verdicts hold".into() } else { failures.join(", ") })
}

fn unitarity_canonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_canon = 0.0f64;
    for _ in 0..100 {
        let (t, tau) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let m = masses((rng.random_range(0.1..10.0), rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)));
        let fc = FrameChange::standard();
        for map in [
            map_sx(&fc, &m).unwrap(),
            map_sp(&fc, &m).unwrap(),
            map_st(&fc, t, tau, &m).unwrap(),
            map_sb(&fc, t, &m).unwrap(),
            map_sv(&fc, &m).unwrap(),
        ] {
            worst_canon = worst_canon.max(map.canonicity_residual());
        }
    }

    let mut worst_norm = 0.0f64;
    for _ in 0..10 {
        let (t, tau) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let mb = rng.random_range(0.5..2.0);
        let subs = [
            Subsystem::continuous("A", Grid1D::new(64, 0.3).unwrap(), 1.0),
            Subsystem::continuous("B", Grid1D::new(64, 0.3).unwrap(), mb),
        ];
        let psi = random_localized(&mut rng, &subs, &Frame::new("C", 1.0), 0.15).unwrap();
        for fam in [Family::Sx, Family::Sp, Family::ST { t, tau }, Family::Sb { t }, Family::Sv] {
            let out = QrfUnitary::new(fam, FrameChange::standard()).apply(&psi).unwrap();
            worst_norm = worst_norm.max((out.norm() - 1.0).abs());
        }
        let swapped = apply_parity_swap(&psi, "A", "C").unwrap();
        worst_norm = worst_norm.max((swapped.norm() - 1.0).abs());
    }

    let g = Grid1D::new(256, 0.1).unwrap();
    let kink = Potential::piecewise_linear(vec![0.0], vec![0.5, -0.5], 0.0).unwrap();
    let a = qrf_core::sample::two_branch(g, (-5.5, 0.0), (5.5, 0.0), 0.7).unwrap().labeled("A", 1.0).unwrap();
    let b = coherent_state(g, 0.0, 0.0, 0.7).unwrap().labeled("B", 1.0).unwrap();
    let psi = tensor(&[&a, &b]).unwrap().with_frame("C", 1.0);
    let sep = QrfUnitary::new(
        Family::SEP(SepParams { t: 0.0, potential: kink, dt: 1e-3, guard_band: 0.5 }),
        FrameChange::standard(),
    );
    worst_norm = worst_norm.max((sep.apply(&psi).unwrap().norm() - 1.0).abs());

    let doppler = run_scenario("doppler", None, &ScenarioConfig::default(), Sink::none()).unwrap();
    let sd_norm = (doppler.value("rest_norm").unwrap() - 1.0).abs();
    let pass = worst_canon <= 1e-12 && worst_norm <= 1e-10 && sd_norm <= 1e-3;
    outcome(pass, format!("canonicity {worst_canon:.1e}, norm {worst_norm:.1e}, S_D norm {sd_norm:.1e}"))
}

fn transitivity() -> Outcome {
    let mut worst = 0.0f64;
    let cases = [
        (Family::Sx, (0.3, 0.3), (1.0, 1.0, 1.0)),
        (Family::ST { t: 0.7, tau: 0.2 }, (0.3, 0.3), (1.0, 2.0, 1.5)),
        (Family::Sb { t: 0.4 }, (0.3, 0.15), (1.0, 2.0, 1.5)),
    ];
    for (i, (fam, dx, m)) in cases.into_iter().enumerate() {
        let subs = [
            Subsystem::continuous("A", Grid1D::new(64, dx.0).unwrap(), m.0),
            Subsystem::continuous("B", Grid1D::new(64, dx.1).unwrap(), m.1),
        ];
        let u = |new: &str, target: &str, old: &str| QrfUnitary::new(fam.clone(), FrameChange::new(new, &[target], old));
        let mut rng = ChaCha8Rng::seed_from_u64(10 + i as u64);
        for _ in 0..20 {
            let psi = random_localized(&mut rng, &subs, &Frame::new("C", m.2), 0.15).unwrap();
            let direct = u("A", "B", "C").apply(&psi).unwrap();
            let via_b = u("A", "C", "B").apply(&u("B", "A", "C").apply(&psi).unwrap()).unwrap();
            let back = u("C", "B", "A").apply(&direct).unwrap();
            worst = worst.max(direct.distance(&via_b).unwrap()).max(back.distance(&psi).unwrap());
        }
    }
    outcome(worst <= 1e-8, format!("worst residual {worst:.1e} over 60 states"))
}

fn dense_probes(subs: &[Subsystem]) -> Vec<MultiState> {
    let centres = [(-0.4, 0.25), (0.0, 0.0), (0.35, -0.2), (0.15, 0.45)];
    let (g0, g1) = (subs[0].kind.grid().copied().unwrap(), subs[1].kind.grid().copied().unwrap());
    let mut out = Vec::new();
    for &(x1, p1) in &centres {
        for &(x2, p2) in &centres {
            let a = coherent_state(g0, x1, p1, 0.85).unwrap().labeled(&subs[0].label, 1.0).unwrap();
            let b = coherent_state(g1, x2, p2, 0.9).unwrap().labeled(&subs[1].label, 1.0).unwrap();
            out.push(tensor(&[&a, &b]).unwrap());
        }
    }
    out
}

fn dense_oracle() -> Outcome {
    let fc = FrameChange::standard();
    let m = masses((1.0, 1.0, 1.0));
    let families = [
        Family::Sx,
        Family::Sp,
        Family::ST { t: 0.4, tau: 0.1 },
        Family::Sb { t: 0.2 },
        Family::Sv,
    ];
    let template = |g: Grid1D| {
        let subs = vec![Subsystem::continuous("A", g, 1.0), Subsystem::continuous("B", g, 1.0)];
        random_state(&mut ChaCha8Rng::seed_from_u64(0), &subs, &Frame::new("C", 1.0)).unwrap()
    };
    let small = template(Grid1D::balanced(16, 1.0).unwrap());
    let mut defect = 0.0f64;
    for fam in families.clone() {
        let d = dense_unitary(&QrfUnitary::new(fam, fc.clone()), &small).unwrap();
        defect = defect.max(d.unitarity_defect());
    }
    // Conjugation needs probes several widths from every edge, which a
    // 16-point grid cannot hold; 64 points at dx = 0.35 can.
    let wide = template(Grid1D::new(64, 0.35).unwrap());
    let mut conj = 0.0f64;
    for fam in families {
        let map = QrfUnitary::new(fam.clone(), fc.clone()).phase_space_map(&m).unwrap().unwrap();
        let d = dense_unitary(&QrfUnitary::new(fam, fc.clone()), &wide).unwrap();
        conj = conj.max(conjugation_residual(&d, &map, &dense_probes(&d.output)).unwrap());
    }
    let pass = defect <= 1e-8 && conj <= 1e-6;
    outcome(pass, format!("unitarity defect {defect:.1e} (n = 16), conjugation {conj:.1e} (n = 64)"))
}

fn conserved() -> Outcome {
    let m = (1.3, 0.7, 2.0);
    let g = Grid1D::new(128, 0.2).unwrap();
    let a = coherent_state(g, -1.0, 0.6, 0.9).unwrap().labeled("A", m.0).unwrap();
    let b = coherent_state(g, 1.5, -0.4, 0.8).unwrap().labeled("B", m.1).unwrap();
    let psi = tensor(&[&a, &b]).unwrap().with_frame("C", m.2);
    let h = HamiltonianSpec::free(&[("A", m.0), ("B", m.1)]);
    let drift = |u: &QrfUnitary, set: &dyn Fn(f64) -> Vec<ConservedForm>| {
        let ht = transform_hamiltonian(u, &h, &masses(m)).unwrap();
        let start = u.at_time(0.0).apply(&psi).unwrap();
        let values = |s: f64| -> Vec<f64> {
            let map = u.at_time(s).phase_space_map(&masses(m)).unwrap().unwrap();
            let r = map_conserved_set(&map, &set(s)).unwrap();
            let later = evolve(&start, &ht, s, 1e-2).unwrap();
            r.images.iter().chain(&r.targets).map(|c: &QuadObservable| expectation(&later, c).unwrap()).collect()
        };
        let v0 = values(0.0);
        [0.25, 0.5, 1.0]
            .iter()
            .flat_map(|&s| values(s).into_iter().zip(v0.clone()).map(move |(a, b)| (a - b).abs() / s))
            .fold(0.0f64, f64::max)
    };
    let st = QrfUnitary::new(Family::ST { t: 0.0, tau: 0.3 }, FrameChange::standard());
    let sb = QrfUnitary::new(Family::Sb { t: 0.0 }, FrameChange::standard());
    let d_st = drift(&st, &|_| vec![ConservedForm::Momentum("A".into()), ConservedForm::Momentum("B".into())]);
    let d_sb = drift(&sb, &|s| {
        vec![
            ConservedForm::Momentum("A".into()),
            ConservedForm::Momentum("B".into()),
            ConservedForm::Boost { label: "A".into(), t: s },
            ConservedForm::Boost { label: "B".into(), t: s },
        ]
    });
    let naive = scenarios(&["canonicity-naive"]);
    let pass = d_st <= 1e-8 && d_sb <= 1e-8 && naive.pass;
    outcome(pass, format!("drift S_T {d_st:.1e}, S_b {d_sb:.1e}; naive N = 3: {}", naive.detail))
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, u64, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 unitarity/canonicity", 5, Box::new(unitarity_canonicity)),
        ("2 transitivity", 10, Box::new(transitivity)),
        ("3 dense oracle", 20, Box::new(dense_oracle)),
        ("4 covariance/symmetry", 30, Box::new(|| scenarios(&["translation-symmetry", "boost-superposition", "relvel"]))),
        ("5 relative states", 15, Box::new(|| scenarios(&["fig3-a", "fig3-b", "fig3-c", "fig3-d"]))),
        ("6 equivalence principle", 60, Box::new(|| scenarios(&["wep", "wep-linear"]))),
        ("7 doppler", 30, Box::new(|| scenarios(&["doppler"]))),
        ("8 measurement", 20, Box::new(|| scenarios(&["measurement-invariance"]))),
        ("9 conserved quantities", 10, Box::new(conserved)),
    ];
    let mut failed = Vec::new();
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= Duration::from_secs(budget);
        println!(
            "{} criterion {name}: {} [{:.1} s of {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
        if !pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
