//! Uniform tensor grids over a box.
//!
//! A grid with `kappa` points per dimension places nodes at both endpoints
//! of every side, so the node spacing along dimension `i` is
//! `w_i / (kappa - 1)`. Every point of the domain is within
//! `eps = |(h_1, ..., h_n)| / 2` of its nearest node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Hyperbox;
use crate::state::{self, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    domain: Hyperbox,
    kappa: usize,
}

impl Grid {
    pub fn new(domain: Hyperbox, kappa: usize) -> Result<Self> {
        if kappa < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs kappa >= 2 points per dimension, got {kappa}"
            )));
        }
        if domain.is_degenerate() {
            return Err(Error::EmptyRegion);
        }
        let n = domain.dim();
        if (kappa as f64).powi(n as i32) > u32::MAX as f64 {
            return Err(Error::InvalidArgument(format!(
                "grid with {kappa}^{n} nodes is too large"
            )));
        }
        Ok(Grid { domain, kappa })
    }

    pub fn domain(&self) -> &Hyperbox {
        &self.domain
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn node_count(&self) -> usize {
        self.kappa.pow(self.dim() as u32)
    }

    pub fn spacing(&self) -> Vec<f64> {
        let cells = (self.kappa - 1) as f64;
        self.domain.widths().iter().map(|w| w / cells).collect()
    }

    /// Worst-case distance from a domain point to its representative.
    pub fn epsilon(&self) -> f64 {
        0.5 * state::norm(&self.spacing())
    }

    /// Coordinates of node `index` (row-major, first dimension slowest).
    pub fn node(&self, index: usize) -> StateVec {
        let mut out = vec![0.0; self.dim()];
        self.node_into(index, &mut out);
        state::unchecked(out)
    }

    pub(crate) fn node_into(&self, mut index: usize, out: &mut [f64]) {
        let n = self.dim();
        let lo = self.domain.lower();
        let hi = self.domain.upper();
        let cells = (self.kappa - 1) as f64;
        for d in (0..n).rev() {
            let k = index % self.kappa;
            index /= self.kappa;
            // Interpolate rather than accumulate so that the last node is
            // exactly the upper bound.
            let frac = k as f64 / cells;
            out[d] = if k + 1 == self.kappa {
                hi[d]
            } else {
                lo[d] + frac * (hi[d] - lo[d])
            };
        }
    }

    /// Index of the nearest node; the caller guarantees `y` is in the domain.
    pub(crate) fn nearest_index_unchecked(&self, y: &[f64]) -> usize {
        let lo = self.domain.lower();
        let cells = (self.kappa - 1) as f64;
        let widths = self.domain.widths();
        let mut index = 0usize;
        for d in 0..self.dim() {
            let pos = (y[d] - lo[d]) / widths[d] * cells;
            let k = (pos.round().max(0.0) as usize).min(self.kappa - 1);
            index = index * self.kappa + k;
        }
        index
    }

    /// Index of the nearest node to `y`.
    pub fn nearest_index(&self, y: &[f64]) -> Result<usize> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        if !self.domain.contains(y) {
            return Err(Error::DomainError { state: y.to_vec() });
        }
        Ok(self.nearest_index_unchecked(y))
    }

    /// The eps-representative of `y`: its nearest grid node.
    pub fn representative(&self, y: &[f64]) -> Result<StateVec> {
        let idx = self.nearest_index(y)?;
        Ok(self.node(idx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(n: usize, kappa: usize) -> Grid {
        Grid::new(Hyperbox::new(vec![0.0; n], vec![1.0; n]).unwrap(), kappa).unwrap()
    }

    #[test]
    fn node_is_its_own_representative() {
        let g = unit_grid(2, 5);
        for i in 0..g.node_count() {
            let z = g.node(i);
            assert_eq!(g.nearest_index(&z).unwrap(), i);
            assert_eq!(g.representative(&z).unwrap().distance(&z), 0.0);
        }
    }

    #[test]
    fn two_node_line() {
        let g = unit_grid(1, 2);
        assert_eq!(g.epsilon(), 0.5);
        let z = g.representative(&[0.4]).unwrap();
        assert_eq!(z.as_slice(), &[0.0]);
        assert!((0.4f64 - 0.0).abs() <= g.epsilon());
    }

    #[test]
    fn unit_cube_epsilon_matches_half_diagonal() {
        // 201 nodes per side = cell width 1/200, so eps = sqrt(3)/400.
        let g = unit_grid(3, 201);
        assert!((g.epsilon() - 3f64.sqrt() / 400.0).abs() < 1e-15);
        assert!((g.epsilon() - 0.004).abs() < 4e-4);
    }

    #[test]
    fn outside_point_is_rejected() {
        let g = unit_grid(2, 3);
        assert!(matches!(
            g.representative(&[1.1, 0.5]),
            Err(Error::DomainError { .. })
        ));
        assert!(matches!(
            g.representative(&[0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kappa_below_two_is_invalid() {
        assert!(Grid::new(Hyperbox::new(vec![0.0], vec![1.0]).unwrap(), 1).is_err());
    }

    proptest! {
        #[test]
        fn representative_is_close_and_idempotent(
            x in 4.8..7.5f64, s in 11.0..26.0f64, p in 17.5..26.0f64, kappa in 2usize..40
        ) {
            let g = Grid::new(
                Hyperbox::new(vec![4.8, 11.0, 17.5], vec![7.5, 26.0, 26.0]).unwrap(),
                kappa,
            ).unwrap();
            let y = [x, s, p];
            let z = g.representative(&y).unwrap();
            prop_assert!(z.distance(&StateVec::new(y.to_vec()).unwrap()) <= g.epsilon() * (1.0 + 1e-12));
            let zz = g.representative(&z).unwrap();
            prop_assert_eq!(zz, z);
        }
    }
}
