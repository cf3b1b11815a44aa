//! Random states for property tests and oracle comparisons.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{QrfError, Result};
use crate::state::{coherent_state, tensor, Frame, MultiState, Subsystem, Wave};

/// Amplitudes drawn from a complex normal distribution, then normalized.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, subs: &[Subsystem], frame: &Frame) -> Result<MultiState> {
    let dims: Vec<usize> = subs.iter().map(|s| s.kind.len()).collect();
    let n: usize = dims.iter().product();
    let data: Vec<C64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect();
    let amps = ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| QrfError::Dimension(e.to_string()))?;
    MultiState::normalized(subs.to_vec(), amps, frame.clone(), 0.0)
}

/// Product of coherent states with centres drawn uniformly from the inner
/// `spread` fraction of each grid in position and momentum, and widths drawn
/// between the smallest and largest values that keep five widths inside the
/// grid in both representations.
pub fn random_localized<R: Rng + ?Sized>(rng: &mut R, subs: &[Subsystem], frame: &Frame, spread: f64) -> Result<MultiState> {
    let mut parts = Vec::with_capacity(subs.len());
    for s in subs {
        let g = s
            .kind
            .grid()
            .copied()
            .ok_or_else(|| QrfError::NotContinuous(s.label.clone()))?;
        let mass = s.kind.mass().unwrap_or(1.0);
        let x0 = rng.random_range(-spread..spread) * g.half_width();
        let p0 = rng.random_range(-spread..spread) * g.momentum_half_width();
        let hi = ((g.half_width() - x0.abs()) / 7.0).min(g.half_width());
        let lo = (7.0 * g.hbar() / (2.0 * (g.momentum_half_width() - p0.abs()))).max(2.5 * g.dx());
        if lo >= hi {
            return Err(QrfError::SupportOverflow { mass });
        }
        let sigma = (lo * hi).sqrt() * rng.random_range(0.9..1.1);
        let sigma = sigma.clamp(lo, hi);
        parts.push(coherent_state(g, x0, p0, sigma)?.labeled(&s.label, mass)?);
    }
    let refs: Vec<&MultiState> = parts.iter().collect();
    Ok(tensor(&refs)?.with_frame(&frame.label, frame.mass))
}

/// Equal-weight superposition of two coherent branches on one axis.
pub fn two_branch(grid: crate::grid::Grid1D, a: (f64, f64), b: (f64, f64), sigma: f64) -> Result<Wave> {
    let w1 = coherent_state(grid, a.0, a.1, sigma)?;
    let w2 = coherent_state(grid, b.0, b.1, sigma)?;
    Wave::superpose(&[(C64::new(1.0, 0.0), &w1), (C64::new(1.0, 0.0), &w2)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_states_are_normalized_and_seeded() {
        let g = Grid1D::balanced(32, 1.0).unwrap();
        let subs = vec![Subsystem::continuous("A", g, 1.0), Subsystem::continuous("B", g, 2.0)];
        let f = Frame::new("C", 1.0);
        let s1 = random_state(&mut ChaCha8Rng::seed_from_u64(1), &subs, &f).unwrap();
        let s2 = random_state(&mut ChaCha8Rng::seed_from_u64(1), &subs, &f).unwrap();
        assert!((s1.norm() - 1.0).abs() < 1e-12);
        assert_eq!(s1, s2);
        let g = Grid1D::balanced(64, 1.0).unwrap();
        let subs = vec![Subsystem::continuous("A", g, 1.0), Subsystem::continuous("B", g, 2.0)];
        let l = random_localized(&mut ChaCha8Rng::seed_from_u64(2), &subs, &f, 0.2).unwrap();
        assert!((l.norm() - 1.0).abs() < 1e-10);
        assert_eq!(l.frame().label, "C");
    }
}
