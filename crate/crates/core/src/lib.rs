//! Synthesis of periodic mode patterns for sampled switched systems and
//! certification of their robustness through guaranteed Euler error tubes.
//!
//! The pipeline is: [`synth::dp_synthesize`] builds a finite-horizon optimal
//! pattern on a grid, [`tube::propagate_tube`] encloses every perturbed
//! solution of the repeated pattern in a sequence of balls, and
//! [`certify::certify_limit_cycle`] looks for a period over which the tube
//! maps into itself. [`sim`] provides the Monte Carlo side of the story.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod certify;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod integrate;
pub mod io;
pub mod pattern;
pub mod sampling;
pub mod sim;
pub mod state;
pub mod synth;
pub mod system;
pub mod systems;
pub mod tube;

pub use error::{Error, Result};
pub use geometry::{ball_contains, Ball, Hyperbox};
pub use grid::Grid;
pub use pattern::{ModeId, Pattern, TimingConfig};
pub use state::StateVec;
pub use system::SystemSpec;
