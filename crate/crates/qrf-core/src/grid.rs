use std::f64::consts::PI;

use crate::error::{QrfError, Result};

/// Uniform periodic grid with points `x_k = (k - n/2) dx` and the dual momentum
/// grid `p_j = (j - n/2) dp`, `dp = 2 pi hbar / (n dx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
    dx: f64,
    hbar: f64,
}

impl Grid1D {
    pub fn new(n: usize, dx: f64) -> Result<Self> {
        Self::with_hbar(n, dx, 1.0)
    }

    pub fn with_hbar(n: usize, dx: f64, hbar: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(QrfError::InvalidGrid(format!("n must be even and >= 4, got {n}")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(QrfError::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(QrfError::InvalidGrid(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { n, dx, hbar })
    }

    /// Grid whose position and momentum spacings coincide in units of `sqrt(hbar)`.
    pub fn balanced(n: usize, hbar: f64) -> Result<Self> {
        Self::with_hbar(n, (2.0 * PI * hbar / n as f64).sqrt(), hbar)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / (self.n as f64 * self.dx)
    }

    pub fn x(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dx
    }

    pub fn p(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.dp()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.p(j)).collect()
    }

    pub fn half_width(&self) -> f64 {
        (self.n / 2) as f64 * self.dx
    }

    pub fn momentum_half_width(&self) -> f64 {
        (self.n / 2) as f64 * self.dp()
    }

    /// Index of `x` if it sits on a lattice point.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        lattice_index(x, self.dx, self.n)
    }

    pub fn momentum_index_of(&self, p: f64) -> Option<usize> {
        lattice_index(p, self.dp(), self.n)
    }

    /// The parity involution `k -> (n - k) mod n`, which maps `x_k` to `-x_k`.
    pub fn parity_index(&self, k: usize) -> usize {
        (self.n - k) % self.n
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_hbar(self.n, self.dx * factor, self.hbar)
    }

    pub fn same_lattice(&self, other: &Grid1D) -> bool {
        self.n == other.n
            && ((self.dx - other.dx).abs() <= 1e-12 * self.dx)
            && ((self.hbar - other.hbar).abs() <= 1e-12 * self.hbar)
    }
}

fn lattice_index(x: f64, step: f64, n: usize) -> Option<usize> {
    let r = x / step + (n / 2) as f64;
    let k = r.round();
    if (r - k).abs() > 1e-9 || k < 0.0 || k >= n as f64 {
        None
    } else {
        Some(k as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_small() {
        assert!(Grid1D::new(15, 0.1).is_err());
        assert!(Grid1D::new(2, 0.1).is_err());
        assert!(Grid1D::new(16, 0.0).is_err());
        assert!(Grid1D::new(16, -1.0).is_err());
    }

    #[test]
    fn points_are_centred() {
        let g = Grid1D::new(8, 0.5).unwrap();
        assert_eq!(g.x(4), 0.0);
        assert_eq!(g.x(0), -2.0);
        assert_eq!(g.index_of(1.5), Some(7));
        assert_eq!(g.index_of(0.25), None);
        assert!((g.dp() * g.dx() * 8.0 - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn parity_is_an_involution_mapping_x_to_minus_x() {
        let g = Grid1D::new(16, 0.3).unwrap();
        for k in 0..16 {
            assert_eq!(g.parity_index(g.parity_index(k)), k);
            if k != 0 {
                assert!((g.x(g.parity_index(k)) + g.x(k)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn balanced_grid_has_equal_spacings() {
        let g = Grid1D::balanced(16, 1.0).unwrap();
        assert!((g.dx() - g.dp()).abs() < 1e-14);
    }
}
