//! Axis-aligned boxes and Euclidean balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{distance, StateVec};

/// Axis-aligned box `[lower, upper]`, used for state domains, enclosure
/// regions and the local zones on which bound constants are estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperbox {
    lower: StateVec,
    upper: StateVec,
}

impl Hyperbox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        let lower = StateVec::new(lower)?;
        let upper = StateVec::new(upper)?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument(format!(
                "box lower {:?} exceeds upper {:?}",
                lower.as_slice(),
                upper.as_slice()
            )));
        }
        Ok(Hyperbox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &StateVec {
        &self.lower
    }

    pub fn upper(&self) -> &StateVec {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| u - l)
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// True if some side has zero width.
    pub fn is_degenerate(&self) -> bool {
        self.widths().iter().any(|w| *w <= 0.0)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim()
            && y
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn contains_ball(&self, ball: &Ball) -> bool {
        ball.center.len() == self.dim()
            && ball
                .center
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(c, (l, u))| *l <= c - ball.radius && c + ball.radius <= *u)
    }

    pub fn contains_box(&self, other: &Hyperbox) -> bool {
        self.contains(&other.lower) && self.contains(&other.upper)
    }

    /// Grows every side by `fraction` of its own width on both ends.
    pub fn inflate_relative(&self, fraction: f64) -> Hyperbox {
        let w = self.widths();
        Hyperbox {
            lower: crate::state::unchecked(
                self.lower.iter().zip(&w).map(|(l, w)| l - fraction * w).collect(),
            ),
            upper: crate::state::unchecked(
                self.upper.iter().zip(&w).map(|(u, w)| u + fraction * w).collect(),
            ),
        }
    }

    /// Smallest box holding both boxes.
    pub fn hull(&self, other: &Hyperbox) -> Hyperbox {
        Hyperbox {
            lower: crate::state::unchecked(
                self.lower.iter().zip(other.lower.iter()).map(|(a, b)| a.min(*b)).collect(),
            ),
            upper: crate::state::unchecked(
                self.upper.iter().zip(other.upper.iter()).map(|(a, b)| a.max(*b)).collect(),
            ),
        }
    }

    /// Intersection, or `None` when empty.
    pub fn intersect(&self, other: &Hyperbox) -> Option<Hyperbox> {
        let lower: Vec<f64> = self
            .lower
            .iter()
            .zip(other.lower.iter())
            .map(|(a, b)| a.max(*b))
            .collect();
        let upper: Vec<f64> = self
            .upper
            .iter()
            .zip(other.upper.iter())
            .map(|(a, b)| a.min(*b))
            .collect();
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return None;
        }
        Some(Hyperbox {
            lower: crate::state::unchecked(lower),
            upper: crate::state::unchecked(upper),
        })
    }

    /// Clamps a point into the box.
    pub fn clamp(&self, y: &mut [f64]) {
        for ((v, l), u) in y.iter_mut().zip(self.lower.iter()).zip(self.upper.iter()) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, unit: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.lower[i] + unit[i] * (self.upper[i] - self.lower[i]);
        }
    }
}

/// Closed Euclidean ball `{y : |y - center| <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: StateVec,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: StateVec, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be finite and >= 0, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn bounding_box(&self) -> Hyperbox {
        self.bounding_box_scaled(1.0)
    }

    /// Bounding box of the concentric ball with radius `scale * radius`.
    pub fn bounding_box_scaled(&self, scale: f64) -> Hyperbox {
        let r = self.radius * scale;
        Hyperbox {
            lower: crate::state::unchecked(self.center.iter().map(|c| c - r).collect()),
            upper: crate::state::unchecked(self.center.iter().map(|c| c + r).collect()),
        }
    }

    pub fn contains_point(&self, y: &[f64]) -> bool {
        distance(&self.center, y) <= self.radius
    }
}

/// `inner ⊆ outer`, tested as `|c_inner - c_outer| + r_inner <= r_outer`.
pub fn ball_contains(outer: &Ball, inner: &Ball) -> Result<bool> {
    ball_contains_with_margin(outer, inner, 0.0)
}

/// Inclusion with headroom: `|c_inner - c_outer| + r_inner + margin <= r_outer`.
pub fn ball_contains_with_margin(outer: &Ball, inner: &Ball, margin: f64) -> Result<bool> {
    if outer.dim() != inner.dim() {
        return Err(Error::DimensionMismatch {
            expected: outer.dim(),
            got: inner.dim(),
        });
    }
    Ok(distance(&outer.center, &inner.center) + inner.radius + margin <= outer.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ball(c: &[f64], r: f64) -> Ball {
        Ball::new(StateVec::new(c.to_vec()).unwrap(), r).unwrap()
    }

    #[test]
    fn identical_balls_are_nested() {
        let b = ball(&[1.0, 2.0, 3.0], 0.5);
        assert!(ball_contains(&b, &b).unwrap());
    }

    #[test]
    fn offset_ball_that_sticks_out() {
        // 0.6 + 0.5 = 1.1 > 1.0
        let outer = ball(&[0.0, 0.0], 1.0);
        let inner = ball(&[0.6, 0.0], 0.5);
        assert!(!ball_contains(&outer, &inner).unwrap());
        let inner = ball(&[0.4, 0.0], 0.5);
        assert!(ball_contains(&outer, &inner).unwrap());
    }

    #[test]
    fn margin_tightens_the_test() {
        let b = ball(&[0.0], 1.0);
        assert!(!ball_contains_with_margin(&b, &b, 1e-9).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let a = ball(&[0.0], 1.0);
        let b = ball(&[0.0, 0.0], 1.0);
        assert!(matches!(
            ball_contains(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(Hyperbox::new(vec![1.0], vec![0.0]).is_err());
        assert!(Hyperbox::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn box_contains_ball() {
        let b = Hyperbox::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        assert!(b.contains_ball(&ball(&[1.0, 1.0], 1.0)));
        assert!(!b.contains_ball(&ball(&[1.0, 1.5], 1.0)));
        assert!(b.intersect(&Hyperbox::new(vec![3.0, 3.0], vec![4.0, 4.0]).unwrap()).is_none());
    }

    proptest! {
        #[test]
        fn inclusion_is_transitive_on_nested_balls(
            cx in -5.0..5.0f64, cy in -5.0..5.0f64,
            r in 0.1..10.0f64,
            f1 in 0.0..1.0f64, f2 in 0.0..1.0f64,
            a1 in 0.0..6.3f64, a2 in 0.0..6.3f64,
        ) {
            // Build b2 ⊆ b1 ⊆ b0 by construction.
            let b0 = ball(&[cx, cy], r);
            let r1 = r * f1;
            let d1 = (r - r1) * 0.999;
            let b1 = ball(&[cx + d1 * a1.cos(), cy + d1 * a1.sin()], r1);
            let r2 = r1 * f2;
            let d2 = (r1 - r2) * 0.999;
            let b2 = ball(&[b1.center[0] + d2 * a2.cos(), b1.center[1] + d2 * a2.sin()], r2);
            prop_assert!(ball_contains(&b0, &b1).unwrap());
            prop_assert!(ball_contains(&b1, &b2).unwrap());
            prop_assert!(ball_contains(&b0, &b2).unwrap());
            prop_assert!(ball_contains(&b1, &b1).unwrap());
        }
    }
}
