use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a system's mode table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeId(pub usize);

/// A mode sequence `u_1 ... u_k`, each held for one sampling period `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub modes: Vec<ModeId>,
    pub tau: f64,
    /// `true` when the sequence is applied periodically.
    pub repeated: bool,
}

impl Pattern {
    pub fn new(modes: Vec<ModeId>, tau: f64, repeated: bool) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument("pattern must hold at least one mode".into()));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be > 0, got {tau}")));
        }
        Ok(Pattern { modes, tau, repeated })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// The same sequence, marked for periodic application.
    pub fn repeat(&self) -> Pattern {
        Pattern {
            repeated: true,
            ..self.clone()
        }
    }
}

/// Time lattice: `T = k * tau = K * dt`, with `dt = tau / substeps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub tau: f64,
    pub dt: f64,
    /// Pattern length.
    pub k: usize,
    /// Euler sub-steps per period.
    pub steps_per_period: usize,
}

impl TimingConfig {
    pub fn new(tau: f64, substeps: usize, k: usize) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be > 0, got {tau}")));
        }
        if substeps == 0 || k == 0 {
            return Err(Error::InvalidArgument(
                "substeps and pattern length must be >= 1".into(),
            ));
        }
        Ok(TimingConfig {
            tau,
            dt: tau / substeps as f64,
            k,
            steps_per_period: k * substeps,
        })
    }

    /// Builds the lattice from `tau` and `dt`; `tau / dt` must be an integer.
    pub fn from_dt(tau: f64, dt: f64, k: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        let ratio = tau / dt;
        let s = ratio.round();
        if s < 1.0 || (ratio - s).abs() > 1e-9 * s.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau / dt = {ratio} is not a positive integer"
            )));
        }
        TimingConfig::new(tau, s as usize, k)
    }

    pub fn substeps(&self) -> usize {
        self.steps_per_period / self.k
    }

    pub fn period(&self) -> f64 {
        self.k as f64 * self.tau
    }

    /// Time of lattice point `j`, computed from the integer index.
    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// Position in the pattern of the mode active on `[j dt, (j+1) dt)`.
    pub fn slot(&self, j: usize) -> usize {
        (j % self.steps_per_period) / self.substeps()
    }
}
