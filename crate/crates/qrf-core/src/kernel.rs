//! Lane kernels: every tensor operation in the crate reduces to a map over
//! one-dimensional lanes along a chosen axis.
//!
//! The parallel path moves the lane axis last, makes the buffer contiguous and
//! hands disjoint chunks to rayon. The sequential path walks the same chunks in
//! order. Each lane is processed by the same arithmetic in both paths, so the
//! results are bitwise identical.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Position amplitudes to momentum amplitudes.
    Forward,
    /// Momentum amplitudes to position amplitudes.
    Inverse,
}

pub fn for_each_lane<F>(a: &mut ArrayD<C64>, axis: usize, f: F)
where
    F: Fn(&[usize], &mut [C64]) + Sync + Send,
{
    for_each_lane_with(Exec::default(), a, axis, f)
}

/// Calls `f(index, lane)` for every lane along `axis`. `index` is the full
/// multi-index of the lane with the `axis` entry set to zero.
pub fn for_each_lane_with<F>(exec: Exec, a: &mut ArrayD<C64>, axis: usize, f: F)
where
    F: Fn(&[usize], &mut [C64]) + Sync + Send,
{
    let ndim = a.ndim();
    assert!(axis < ndim, "axis {axis} out of range for rank {ndim}");
    let shape = a.shape().to_vec();
    let n = shape[axis];
    if a.is_empty() {
        return;
    }
    let mut perm: Vec<usize> = (0..ndim).filter(|&i| i != axis).collect();
    perm.push(axis);
    let outer: Vec<usize> = perm[..ndim - 1].to_vec();
    let lane_fn = |chunk: usize, lane: &mut [C64]| {
        let mut idx = vec![0usize; ndim];
        let mut rem = chunk;
        for &ax in outer.iter().rev() {
            idx[ax] = rem % shape[ax];
            rem /= shape[ax];
        }
        f(&idx, lane);
    };
    if axis == ndim - 1 && a.is_standard_layout() {
        let data = a.as_slice_mut().expect("standard layout");
        run_chunks(exec, data, n, &lane_fn);
    } else {
        let mut work = a
            .view()
            .permuted_axes(IxDyn(&perm))
            .as_standard_layout()
            .into_owned();
        run_chunks(exec, work.as_slice_mut().expect("standard layout"), n, &lane_fn);
        let mut inv = vec![0usize; ndim];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        a.assign(&work.permuted_axes(IxDyn(&inv)));
    }
}

fn run_chunks<F>(exec: Exec, data: &mut [C64], n: usize, f: &F)
where
    F: Fn(usize, &mut [C64]) + Sync + Send,
{
    match exec {
        Exec::Sequential => data.chunks_mut(n).enumerate().for_each(|(i, l)| f(i, l)),
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            data.par_chunks_mut(n).enumerate().for_each(|(i, l)| f(i, l))
        }
    }
}

/// Multiplies every element by `f(multi_index)`.
pub fn apply_diagonal<F>(a: &mut ArrayD<C64>, f: F)
where
    F: Fn(&[usize]) -> C64 + Sync + Send,
{
    apply_diagonal_with(Exec::default(), a, f)
}

pub fn apply_diagonal_with<F>(exec: Exec, a: &mut ArrayD<C64>, f: F)
where
    F: Fn(&[usize]) -> C64 + Sync + Send,
{
    let last = a.ndim() - 1;
    for_each_lane_with(exec, a, last, |idx, lane| {
        let mut i = idx.to_vec();
        for (j, v) in lane.iter_mut().enumerate() {
            i[last] = j;
            *v *= f(&i);
        }
    })
}

/// Moves the element at lane position `k` to `map(k)`; `map` must be a bijection.
pub fn permute_axis<F>(a: &mut ArrayD<C64>, axis: usize, map: F)
where
    F: Fn(usize) -> usize + Sync + Send,
{
    for_each_lane(a, axis, |_, lane| {
        let tmp = lane.to_vec();
        for (k, v) in tmp.into_iter().enumerate() {
            lane[map(k)] = v;
        }
    })
}

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, dir: Direction) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    let fwd = dir == Direction::Forward;
    map.entry((n, fwd))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if fwd {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// Centred continuum-normalized transform of one lane.
///
/// Forward: `phi_j = dx / sqrt(2 pi hbar) * sum_k psi_k exp(-i p_j x_k / hbar)`.
/// Inverse: `psi_k = dp / sqrt(2 pi hbar) * sum_j phi_j exp(i p_j x_k / hbar)`.
/// With centred indices the kernel is an FFT sandwiched between `(-1)^k`
/// modulations and a global sign `(-1)^(n/2)`.
pub fn dft_lane(lane: &mut [C64], grid: &Grid1D, dir: Direction, fft: &dyn Fft<f64>) {
    let n = lane.len();
    let root = (2.0 * PI * grid.hbar()).sqrt();
    let scale = match dir {
        Direction::Forward => grid.dx() / root,
        Direction::Inverse => grid.dp() / root,
    };
    let global = if (n / 2) % 2 == 0 { scale } else { -scale };
    for (k, v) in lane.iter_mut().enumerate() {
        if k % 2 == 1 {
            *v = -*v;
        }
    }
    fft.process(lane);
    for (j, v) in lane.iter_mut().enumerate() {
        *v *= if j % 2 == 1 { -global } else { global };
    }
}

pub fn dft_axis(a: &mut ArrayD<C64>, axis: usize, grid: &Grid1D, dir: Direction) {
    dft_axis_with(Exec::default(), a, axis, grid, dir)
}

pub fn dft_axis_with(exec: Exec, a: &mut ArrayD<C64>, axis: usize, grid: &Grid1D, dir: Direction) {
    assert_eq!(a.shape()[axis], grid.n(), "grid size does not match axis length");
    let fft = plan(grid.n(), dir);
    for_each_lane_with(exec, a, axis, |_, lane| dft_lane(lane, grid, dir, fft.as_ref()));
}

/// Sum of `|a|^2` in logical (row-major) order, independent of memory layout
/// and thread count.
pub fn norm_sqr_sum(a: &ArrayD<C64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;

    fn naive_forward(psi: &[C64], g: &Grid1D) -> Vec<C64> {
        let n = g.n();
        (0..n)
            .map(|j| {
                let s: C64 = (0..n)
                    .map(|k| psi[k] * C64::from_polar(1.0, -g.p(j) * g.x(k) / g.hbar()))
                    .sum();
                s * g.dx() / (2.0 * PI * g.hbar()).sqrt()
            })
            .collect()
    }

    #[test]
    fn fft_lane_matches_direct_sum() {
        for &(n, dx, hbar) in &[(8usize, 0.3, 1.0), (10, 0.7, 2.0), (16, 0.1, 0.5)] {
            let g = Grid1D::with_hbar(n, dx, hbar).unwrap();
            let psi: Vec<C64> = (0..n)
                .map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 1.3).cos()))
                .collect();
            let expect = naive_forward(&psi, &g);
            let mut lane = psi.clone();
            dft_lane(&mut lane, &g, Direction::Forward, plan(n, Direction::Forward).as_ref());
            for (a, b) in lane.iter().zip(&expect) {
                assert!((a - b).norm() < 1e-12, "n={n}: {a} vs {b}");
            }
            dft_lane(&mut lane, &g, Direction::Inverse, plan(n, Direction::Inverse).as_ref());
            for (a, b) in lane.iter().zip(&psi) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lanes_see_correct_indices() {
        let mut a = ArrayD::<C64>::zeros(IxDyn(&[3, 4, 5]));
        for axis in 0..3 {
            a.fill(C64::new(0.0, 0.0));
            for_each_lane(&mut a, axis, |idx, lane| {
                for (j, v) in lane.iter_mut().enumerate() {
                    let mut full = idx.to_vec();
                    full[axis] = j;
                    *v = C64::new((full[0] * 100 + full[1] * 10 + full[2]) as f64, 0.0);
                }
            });
            for ((i, j, k), v) in a.view().into_dimensionality::<ndarray::Ix3>().unwrap().indexed_iter() {
                assert_eq!(v.re, (i * 100 + j * 10 + k) as f64);
            }
        }
    }

    #[test]
    fn sequential_and_default_paths_agree_bitwise() {
        let g = Grid1D::new(16, 0.2).unwrap();
        let mut a = ArrayD::<C64>::from_shape_fn(IxDyn(&[16, 16]), |i| {
            C64::new((i[0] as f64 * 0.3).sin(), (i[1] as f64 * 0.7 + i[0] as f64).cos())
        });
        let mut b = a.clone();
        dft_axis_with(Exec::Sequential, &mut a, 0, &g, Direction::Forward);
        dft_axis(&mut b, 0, &g, Direction::Forward);
        assert_eq!(a, b);
    }

    #[test]
    fn permute_axis_applies_map() {
        let mut a = ArrayD::<C64>::from_shape_fn(IxDyn(&[2, 4]), |i| C64::new(i[1] as f64, 0.0));
        permute_axis(&mut a, 1, |k| (4 - k) % 4);
        let row: Vec<f64> = a.index_axis(ndarray::Axis(0), 1).iter().map(|v| v.re).collect();
        assert_eq!(row, vec![0.0, 3.0, 2.0, 1.0]);
    }
}
