//! Guaranteed tubes around the Euler path of a repeated pattern.
//!
//! Each sub-step picks a candidate zone around the current ball, estimates
//! the bound constants of the active mode on it, and grows the ball with
//! the perturbed deviation bound over one `dt`. The step is accepted once
//! the current ball, its successor and the successor two steps ahead all
//! lie in the zone; otherwise the zone is enlarged and the step retried.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{check_hypothesis_h, delta_perturbed, estimate_constants, BoundConstants, EstimatorConfig};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Hyperbox};
use crate::integrate::euler_step;
use crate::pattern::{ModeId, Pattern, TimingConfig};
use crate::state::StateVec;
use crate::system::SystemSpec;

/// Balls `B(t0 + j dt)` with the local constants that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub t0: f64,
    pub dt: f64,
    pub balls: Vec<Ball>,
    /// `local_lambdas[j - 1]` was active on `[(j-1) dt, j dt]`.
    pub local_lambdas: Vec<f64>,
    pub local_gammas: Vec<f64>,
    /// Hypothesis (H) at each step.
    pub h_ok: Vec<bool>,
}

impl Tube {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn radii(&self) -> Vec<f64> {
        self.balls.iter().map(|b| b.radius).collect()
    }

    /// Radii at samples `0, K, 2K, ...`.
    pub fn boundary_radii(&self, steps_per_period: usize) -> Vec<f64> {
        self.balls
            .iter()
            .step_by(steps_per_period.max(1))
            .map(|b| b.radius)
            .collect()
    }

    pub fn h_violations(&self) -> usize {
        self.h_ok.iter().filter(|ok| !**ok).count()
    }

    /// Sample index of time `t`, if `t` is on the lattice.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let pos = (t - self.t0) / self.dt;
        let j = pos.round();
        let tol = 1e-9 * pos.abs().max(1.0);
        if !pos.is_finite() || j < 0.0 || (pos - j).abs() > tol || j as usize >= self.len() {
            return Err(Error::OffLattice { t });
        }
        Ok(j as usize)
    }

    /// Structural checks: matching lengths, nonnegative radii.
    pub fn validate(&self) -> Result<()> {
        if self.balls.is_empty() {
            return Err(Error::TubeTooShort {
                samples: 0,
                needed: 1,
            });
        }
        let steps = self.balls.len() - 1;
        if self.local_lambdas.len() != steps
            || self.local_gammas.len() != steps
            || self.h_ok.len() != steps
        {
            return Err(Error::Format(
                "tube per-step columns must have one entry less than the balls".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Format(format!("tube dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Radius of the stored ball at time `t`.
pub fn tube_radius_at(tube: &Tube, t: f64) -> Result<f64> {
    Ok(tube.balls[tube.index_of(t)?].radius)
}

/// How candidate zones are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ZonePolicy {
    /// Box around the current ball and its image two steps ahead, with
    /// half-width `inflation^(a+1) * radius` on attempt `a`, snapped outward
    /// to a lattice of `snap_cells` cells per enclosure side.
    Swept {
        inflation: f64,
        max_retries: usize,
        snap_cells: usize,
    },
    /// The whole enclosure; constants are estimated once per mode.
    Global,
}

impl Default for ZonePolicy {
    fn default() -> Self {
        ZonePolicy::Swept {
            inflation: 1.5,
            max_retries: 8,
            snap_cells: 64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TubeConfig {
    #[serde(default)]
    pub zone: ZonePolicy,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Grid resolution the pattern was synthesized with; `mu0` must be at
    /// least this large.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

/// Diagnostics of one propagation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TubeStats {
    pub estimates: usize,
    pub cache_hits: usize,
    pub retries: usize,
}

/// A possibly truncated propagation: `stop` holds the error that ended it.
#[derive(Debug, Clone)]
pub struct TubeRun {
    pub tube: Tube,
    pub stop: Option<Error>,
    pub stats: TubeStats,
}

type ZoneKey = (Vec<i64>, Vec<i64>, ModeId);

struct ZoneCache<'a> {
    system: &'a SystemSpec,
    estimator: &'a EstimatorConfig,
    map: HashMap<ZoneKey, BoundConstants>,
    stats: TubeStats,
}

impl ZoneCache<'_> {
    fn get(&mut self, key: ZoneKey, zone: &Hyperbox) -> Result<BoundConstants> {
        if let Some(c) = self.map.get(&key) {
            self.stats.cache_hits += 1;
            return Ok(c.clone());
        }
        let c = estimate_constants(self.system, key.2, zone, self.estimator)?;
        self.stats.estimates += 1;
        self.map.insert(key, c.clone());
        Ok(c)
    }
}

/// Snaps `[lo, hi]` outward to the lattice `enc.lower + m * cell` and clips
/// it to the enclosure.
fn snap(enc: &Hyperbox, cells: usize, lo: &[f64], hi: &[f64]) -> (Hyperbox, Vec<i64>, Vec<i64>) {
    let n = enc.dim();
    let widths = enc.widths();
    let mut li = Vec::with_capacity(n);
    let mut hi_idx = Vec::with_capacity(n);
    let mut zl = Vec::with_capacity(n);
    let mut zh = Vec::with_capacity(n);
    for d in 0..n {
        let cell = widths[d] / cells as f64;
        let base = enc.lower()[d];
        let a = (((lo[d] - base) / cell).floor() as i64).clamp(0, cells as i64 - 1);
        let b = (((hi[d] - base) / cell).ceil() as i64).clamp(a + 1, cells as i64);
        li.push(a);
        hi_idx.push(b);
        zl.push(base + a as f64 * cell);
        zh.push(if b == cells as i64 {
            enc.upper()[d]
        } else {
            base + b as f64 * cell
        });
    }
    let zone = Hyperbox::new(zl, zh).expect("snapped zone is ordered");
    (zone, li, hi_idx)
}

/// Propagates the tube `B(Y(t), delta(t))` for `n_periods` periods of the
/// repeated pattern, starting from `B(z0, mu0)`.
#[allow(clippy::too_many_arguments)]
pub fn propagate_tube(
    system: &SystemSpec,
    pattern: &Pattern,
    z0: &[f64],
    mu0: f64,
    omega: f64,
    timing: &TimingConfig,
    n_periods: usize,
    config: &TubeConfig,
) -> Result<Tube> {
    let run = propagate_tube_partial(system, pattern, z0, mu0, omega, timing, n_periods, config)?;
    match run.stop {
        None => Ok(run.tube),
        Some(e) => Err(e),
    }
}

/// As [`propagate_tube`], but returns the prefix computed before a
/// blow-up instead of discarding it. Invalid inputs are still errors.
#[allow(clippy::too_many_arguments)]
pub fn propagate_tube_partial(
    system: &SystemSpec,
    pattern: &Pattern,
    z0: &[f64],
    mu0: f64,
    omega: f64,
    timing: &TimingConfig,
    n_periods: usize,
    config: &TubeConfig,
) -> Result<TubeRun> {
    if pattern.len() != timing.k || (pattern.tau - timing.tau).abs() > 1e-12 * timing.tau {
        return Err(Error::InvalidArgument(
            "pattern does not match the timing configuration".into(),
        ));
    }
    for m in &pattern.modes {
        system.mode_value(*m)?;
    }
    if n_periods == 0 {
        return Err(Error::InvalidArgument("n_periods must be >= 1".into()));
    }
    if !(mu0 >= 0.0) || !mu0.is_finite() || !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite mu0 >= 0 and omega >= 0, got {mu0}, {omega}"
        )));
    }
    if let Some(eps) = config.epsilon {
        if mu0 < eps {
            return Err(Error::InvalidArgument(format!(
                "mu0 = {mu0} is below the grid resolution {eps}"
            )));
        }
    }
    if z0.len() != system.dim {
        return Err(Error::DimensionMismatch {
            expected: system.dim,
            got: z0.len(),
        });
    }
    if !system.domain.contains(z0) {
        return Err(Error::DomainError { state: z0.to_vec() });
    }
    if let ZonePolicy::Swept {
        inflation,
        snap_cells,
        ..
    } = config.zone
    {
        if !(inflation > 1.0) || snap_cells == 0 {
            return Err(Error::InvalidArgument(
                "zone inflation must exceed 1 and snap_cells must be >= 1".into(),
            ));
        }
    }

    let total = n_periods * timing.steps_per_period;
    let dt = timing.dt;
    let enc = &system.enclosure;
    let mut tube = Tube {
        t0: 0.0,
        dt,
        balls: Vec::with_capacity(total + 1),
        local_lambdas: Vec::with_capacity(total),
        local_gammas: Vec::with_capacity(total),
        h_ok: Vec::with_capacity(total),
    };
    tube.balls.push(Ball::new(StateVec::new(z0.to_vec())?, mu0)?);
    let mut cache = ZoneCache {
        system,
        estimator: &config.estimator,
        map: HashMap::new(),
        stats: TubeStats::default(),
    };

    for j in 0..total {
        let mode = pattern.modes[timing.slot(j)];
        let current = tube.balls[j].clone();
        match advance(system, &mut cache, config, enc, &current, mode, omega, dt, j) {
            Ok((next, consts, h)) => {
                tube.balls.push(next);
                tube.local_lambdas.push(consts.lambda);
                tube.local_gammas.push(consts.gamma);
                tube.h_ok.push(h);
            }
            Err(e) => {
                log::warn!("tube stopped at step {j}: {e}");
                return Ok(TubeRun {
                    tube,
                    stop: Some(e),
                    stats: cache.stats,
                });
            }
        }
    }
    Ok(TubeRun {
        tube,
        stop: None,
        stats: cache.stats,
    })
}

#[allow(clippy::too_many_arguments)]
fn advance(
    system: &SystemSpec,
    cache: &mut ZoneCache<'_>,
    config: &TubeConfig,
    enc: &Hyperbox,
    current: &Ball,
    mode: ModeId,
    omega: f64,
    dt: f64,
    step: usize,
) -> Result<(Ball, BoundConstants, bool)> {
    let time = (step + 1) as f64 * dt;
    let left = |ball: &Ball| Error::LeftEnclosure {
        time,
        state: ball.center.to_vec(),
    };
    if !enc.contains_ball(current) {
        return Err(left(current));
    }
    // Lookahead center: two Euler steps of the active mode.
    let c1 = euler_step(system, mode, &current.center, dt, None)?;
    let c2 = euler_step(system, mode, &c1, dt, None)?;
    let d = current.radius;

    let attempts = match config.zone {
        ZonePolicy::Swept { max_retries, .. } => max_retries + 1,
        ZonePolicy::Global => 1,
    };
    for attempt in 0..attempts {
        let (zone, key) = match config.zone {
            ZonePolicy::Global => {
                let n = enc.dim();
                (enc.clone(), (vec![0; n], vec![0; n], mode))
            }
            ZonePolicy::Swept {
                inflation,
                snap_cells,
                ..
            } => {
                let half = inflation.powi(attempt as i32 + 1) * d;
                let lo: Vec<f64> = (0..enc.dim())
                    .map(|i| current.center[i].min(c2[i]) - half)
                    .collect();
                let hi: Vec<f64> = (0..enc.dim())
                    .map(|i| current.center[i].max(c2[i]) + half)
                    .collect();
                let (zone, a, b) = snap(enc, snap_cells, &lo, &hi);
                (zone, (a, b, mode))
            }
        };
        let consts = cache.get(key, &zone)?;
        let d1 = delta_perturbed(d, omega, dt, &consts)?;
        let d2 = delta_perturbed(d, omega, 2.0 * dt, &consts)?;
        let b1 = Ball::new(c1.clone(), d1)?;
        let b2 = Ball::new(c2.clone(), d2)?;
        if zone.contains_ball(current) && zone.contains_ball(&b1) && zone.contains_ball(&b2) {
            let h = check_hypothesis_h(d, omega, dt, &consts);
            return Ok((b1, consts, h));
        }
        // Larger zones only enlarge the constants, so a ball that already
        // pokes out of the enclosure cannot be rescued.
        for b in [&b1, &b2] {
            if !enc.contains_ball(b) {
                return Err(left(b));
            }
        }
        cache.stats.retries += 1;
    }
    Err(Error::ZoneGrowthExceeded {
        step,
        retries: attempts - 1,
        radius: d,
    })
}
